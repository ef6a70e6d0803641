"""
conformod config
"""

from __future__ import absolute_import
from __future__ import unicode_literals

import logging

from . import util
from .. import errors

logger = logging.getLogger(__name__)

DEFAULT_METHOD = 'max-additive'

_BUILTIN_METHODS = (
    util.Method('additive', 'boxwise', 'bonferroni', 'additive', None),
    util.Method(
        'multiplicative', 'boxwise', 'bonferroni', 'multiplicative', None),
    util.Method('max-additive', 'boxwise', 'max', 'additive', None),
    util.Method(
        'max-multiplicative', 'boxwise', 'max', 'multiplicative', None),
    util.Method('hausdorff', 'imagewise', 'hausdorff', None, 'miscoverage'),
    util.Method('crc-box-recall', 'imagewise', 'crc', None, 'box_recall'),
    util.Method(
        'crc-pixel-recall', 'imagewise', 'crc', None, 'pixel_recall'),
)


class Config(metaclass=util.SingletonMeta):
    """
    Config stores registered conformal methods
    """

    def __init__(self):
        super(Config, self).__init__()

        self.__methods = {}
        self.reset()

    @property
    def method_names(self):
        """
        Names of registered methods, in registration order

        :rtype: tuple[str]
        """
        return tuple(self.__methods)

    def get_method(self, name):
        """
        Returns method description for given name

        :type name: str
        :rtype: util.Method
        """
        method = self.__methods.get(name)

        if not method:
            raise errors.MethodNotFound(name)

        return method

    def register_method(
            self,
            name,
            family,
            score,
            margin_mode=None,
            loss=None,
    ):
        """
        Registers method
        Supports fluent interface

        :type name: str
        :type family: str
        :type score: str
        :type margin_mode: str | None
        :type loss: str | None

        :rtype: Config
        """
        if name in self.__methods:
            raise errors.MethodAlreadyRegistered(name)

        self.__methods[name] = self.__build_method(
            name, family, score, margin_mode, loss,
        )

        return self

    def reset(self):
        """
        Resets settings, keeps only the built-in methods
        """
        self.__methods.clear()

        for method in _BUILTIN_METHODS:
            self.__methods[method.name] = method

    @staticmethod
    def __build_method(name, family, score, margin_mode, loss):
        if family not in util.FAMILIES:
            raise errors.InvalidParameter('family', family, util.FAMILIES)

        if score not in util.SCORES:
            raise errors.InvalidParameter('score', score, util.SCORES)

        if margin_mode is not None and margin_mode not in util.MARGIN_MODES:
            raise errors.UnsupportedMode(margin_mode)

        if loss is not None and loss not in util.LOSSES:
            raise errors.UnsupportedLoss(loss)

        if family == 'boxwise' and margin_mode is None:
            raise errors.InvalidParameter(
                'margin_mode', margin_mode, 'a margin mode for box-wise')

        if score == 'crc' and loss is None:
            raise errors.UnsupportedLoss(loss)

        return util.Method(
            name=name,
            family=family,
            score=score,
            margin_mode=margin_mode,
            loss=loss,
        )


CONFIG = Config()


def _check_range(name, value, low, high, low_open=False, high_open=False):
    value = float(value)

    below = value <= low if low_open else value < low
    above = value >= high if high_open else value > high

    if below or above:
        raise errors.InvalidParameter(
            name,
            value,
            '{}{}, {}{}'.format(
                '(' if low_open else '[', low,
                high, ')' if high_open else ']',
            ),
        )

    return value


def build_run_config(
        method=DEFAULT_METHOD,
        alpha=0.1,
        iou_threshold=0.3,
        objectness_threshold=0.3,
        beta=0.25,
        matching='greedy',
        mode=None,
        class_id=None,
        clip_nonnegative=False,
        seed=0,
):
    """
    Resolves and validates a run configuration.
    Box-wise methods carry their margin mode in the name; image-wise
    methods take it from ``mode`` (additive when omitted).

    :type method: str
    :type alpha: float
    :type iou_threshold: float
    :type objectness_threshold: float
    :type beta: float
    :type matching: str
    :type mode: str | None
    :type class_id: int | None
    :type clip_nonnegative: bool
    :type seed: int

    :rtype: util.RunConfig
    """
    resolved = CONFIG.get_method(method)

    if resolved.margin_mode is not None:
        if mode is not None and mode != resolved.margin_mode:
            raise errors.ConflictingConfigParams(method, mode)

        mode = resolved.margin_mode

    elif mode is None:
        mode = 'additive'

    if mode not in util.MARGIN_MODES:
        raise errors.UnsupportedMode(mode)

    if matching not in util.MATCHING_STRATEGIES:
        raise errors.UnsupportedStrategy(matching)

    config = util.RunConfig(
        method=method,
        alpha=_check_range('alpha', alpha, 0, 1, True, True),
        iou_threshold=_check_range(
            'iou_threshold', iou_threshold, 0, 1, low_open=True),
        objectness_threshold=_check_range(
            'objectness_threshold', objectness_threshold, 0, 1),
        beta=_check_range('beta', beta, 0, 1, high_open=True),
        matching=matching,
        mode=mode,
        class_id=None if class_id is None else int(class_id),
        clip_nonnegative=bool(clip_nonnegative),
        seed=int(seed),
    )

    logger.debug('resolved run config %s', config)

    return config
