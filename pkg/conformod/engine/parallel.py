"""
Order-preserving map over a process pool
"""

from __future__ import absolute_import
from __future__ import unicode_literals

import logging
from concurrent.futures import ProcessPoolExecutor

logger = logging.getLogger(__name__)


def ordered_map(func, items, workers=1):
    """
    Maps ``func`` over ``items`` and returns results in input order.
    ``func`` must be a module-level callable so it can be pickled.

    :type func: callable
    :type items: list
    :type workers: int
    :rtype: list
    """
    items = list(items)

    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    logger.debug('mapping %d items over %d workers', len(items), workers)

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
