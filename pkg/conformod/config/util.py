"""
Utils used in config
"""

from __future__ import absolute_import
from __future__ import unicode_literals

from collections import namedtuple

MARGIN_MODES = ('additive', 'multiplicative')

MATCHING_STRATEGIES = ('greedy', 'hungarian')

FAMILIES = ('boxwise', 'imagewise')

# bonferroni/max are box-wise scores, hausdorff/crc are image-wise
SCORES = ('bonferroni', 'max', 'hausdorff', 'crc')

LOSSES = ('miscoverage', 'box_recall', 'pixel_recall')

Method = namedtuple(
    'Method',
    (
        'name',
        'family',
        'score',
        'margin_mode',
        'loss',
    ),
)

RunConfig = namedtuple(
    'RunConfig',
    (
        'method',
        'alpha',
        'iou_threshold',
        'objectness_threshold',
        'beta',
        'matching',
        'mode',
        'class_id',
        'clip_nonnegative',
        'seed',
    ),
)


class SingletonMeta(type):
    _instances = {}

    def __call__(cls, *args, **kwargs):
        if cls not in cls._instances:
            cls._instances[cls] = \
                super(SingletonMeta, cls).__call__(*args, **kwargs)

        return cls._instances[cls]
