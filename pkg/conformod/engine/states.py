"""
Typed outcomes of calibration
"""

from __future__ import absolute_import
from __future__ import unicode_literals

from collections import namedtuple


class Infeasible(namedtuple('Infeasible', ('reason',))):
    """
    The requested level cannot be certified with the calibration data.
    Returned in place of a quantile or lambda, never raised.
    """
    __slots__ = ()

    def __str__(self):
        return 'infeasible: {}'.format(self.reason)


def is_infeasible(value):
    """
    Tells if a calibration outcome is the infeasible marker

    :rtype: bool
    """
    return isinstance(value, Infeasible)
