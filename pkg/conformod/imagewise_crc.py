"""
Image-wise conformalization: Hausdorff-style score, box-recall and
pixel-recall risk control, and the lambda risk inversion
"""

from __future__ import absolute_import
from __future__ import unicode_literals

import logging
import math
from collections import namedtuple

import numpy as np

from . import errors
from . import geometry
from . import matching
from .boxwise_conformal import INF, RANK_EPS
from .boxwise_conformal import conformal_quantile
from .boxwise_conformal import make_artifact
from .config import CONFIG
from .config import build_run_config
from .config import util
from .engine.states import Infeasible, is_infeasible

logger = logging.getLogger(__name__)

# absolute bisection tolerance on lambda (px for additive margins)
LAMBDA_TOL = 1e-3

LossKind = namedtuple('LossKind', ('kind', 'bound'))

MISCOVERAGE = LossKind('miscoverage', 1.0)
BOX_RECALL = LossKind('box_recall', 1.0)
PIXEL_RECALL = LossKind('pixel_recall', 1.0)

_LOSS_KINDS = {
    loss.kind: loss for loss in (MISCOVERAGE, BOX_RECALL, PIXEL_RECALL)
}


class ImageRecord(namedtuple(
        'ImageRecord',
        (
            'image_id',
            'width',
            'height',
            'ground_truths',
            'detections',
            'gt_class_ids',
        ))):
    """
    One image's ground-truth boxes and detector outputs.
    ``gt_class_ids`` is empty for single-class data.
    """
    __slots__ = ()

    def __new__(
            cls,
            image_id,
            width,
            height,
            ground_truths=(),
            detections=(),
            gt_class_ids=(),
    ):
        return super(ImageRecord, cls).__new__(
            cls,
            image_id,
            width,
            height,
            tuple(ground_truths),
            tuple(detections),
            tuple(gt_class_ids),
        )

    @property
    def diagonal(self):
        return geometry.diagonal(self.width, self.height)


def loss_kind(kind):
    """
    :type kind: str | LossKind
    :rtype: LossKind
    """
    if isinstance(kind, LossKind):
        return kind

    try:
        return _LOSS_KINDS[kind]
    except KeyError:
        raise errors.UnsupportedLoss(kind)


def _inflated(img, lam, mode):
    return [geometry.inflate(det.bbox, lam, mode) for det in img.detections]


def loss_box_recall(img, lam, mode='additive'):
    """
    Fraction of ground truths not entirely covered by the union of the
    lambda-inflated detections; 0 for an image without ground truth

    :type img: ImageRecord
    :type lam: float
    :type mode: str
    :rtype: float
    """
    if not img.ground_truths:
        return 0.0

    preds = _inflated(img, lam, mode)
    covered = sum(
        1 for gt in img.ground_truths if geometry.is_fully_covered(gt, preds)
    )

    return 1.0 - covered / float(len(img.ground_truths))


def loss_pixel_recall(img, lam, mode='additive'):
    """
    Mean fraction of ground-truth area left uncovered by the union of the
    lambda-inflated detections; zero-area ground truths count as covered

    :type img: ImageRecord
    :type lam: float
    :type mode: str
    :rtype: float
    """
    if not img.ground_truths:
        return 0.0

    preds = _inflated(img, lam, mode)
    recall = 0.0

    for gt in img.ground_truths:
        gt_area = geometry.area(gt)
        if gt_area <= 0:
            recall += 1.0
        else:
            recall += geometry.covered_area(gt, preds) / gt_area

    return min(max(1.0 - recall / len(img.ground_truths), 0.0), 1.0)


def _required_covered(n_gt, beta):
    return int(math.ceil((1.0 - beta) * n_gt - RANK_EPS))


def loss_miscoverage(img, lam, mode='additive', beta=0.25):
    """
    1 when fewer than ceil((1 - beta) n_i) ground truths are fully covered

    :type img: ImageRecord
    :rtype: float
    """
    if not img.ground_truths:
        return 0.0

    preds = _inflated(img, lam, mode)
    covered = sum(
        1 for gt in img.ground_truths if geometry.is_fully_covered(gt, preds)
    )

    return 0.0 if covered >= _required_covered(len(img.ground_truths), beta) \
        else 1.0


def image_loss(img, lam, loss, mode='additive', beta=0.25):
    """
    Dispatches to the loss named by ``loss``

    :type loss: str | LossKind
    :rtype: float
    """
    kind = loss_kind(loss).kind

    if kind == 'box_recall':
        return loss_box_recall(img, lam, mode)

    if kind == 'pixel_recall':
        return loss_pixel_recall(img, lam, mode)

    return loss_miscoverage(img, lam, mode, beta)


def search_ceiling(img, mode='additive'):
    """
    Upper bracket of the margin search: twice the image diagonal, widened
    to the extent of every box; for multiplicative margins, divided by the
    narrowest detection side

    :type img: ImageRecord
    :rtype: float
    """
    boxes = list(img.ground_truths) + [det.bbox for det in img.detections]
    reach = img.diagonal

    if boxes:
        coords = np.asarray(boxes, dtype=np.float64)
        extent = geometry.diagonal(
            coords[:, 2].max() - min(coords[:, 0].min(), 0.0),
            coords[:, 3].max() - min(coords[:, 1].min(), 0.0),
        )
        reach = max(reach, extent)

    ceiling = 2.0 * reach

    if mode == 'multiplicative':
        sides = [
            side for det in img.detections
            for side in (det.bbox.width, det.bbox.height) if side > 0
        ]
        if sides:
            ceiling /= min(min(sides), 1.0)

    return ceiling


def _bisect(predicate, hi, tol=LAMBDA_TOL):
    """
    Smallest lambda in [0, hi] for a monotone predicate, returned on the
    side where the predicate holds; None when it fails at ``hi``
    """
    if predicate(0.0):
        return 0.0

    if not predicate(hi):
        return None

    lo = 0.0
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if predicate(mid):
            hi = mid
        else:
            lo = mid

    return hi


def covering_margins(img, mode='additive'):
    """
    Per ground truth, the minimal margin that makes the union of inflated
    detections cover it entirely (+inf when no margin suffices)

    :type img: ImageRecord
    :rtype: list[float]
    """
    if not img.detections:
        return [INF] * len(img.ground_truths)

    ceiling = search_ceiling(img, mode)
    margins = []

    for gt in img.ground_truths:
        margin = _bisect(
            lambda lam, gt=gt: geometry.is_fully_covered(
                gt, _inflated(img, lam, mode)),
            ceiling,
        )
        margins.append(INF if margin is None else margin)

    return margins


def hausdorff_score(img, beta=0.25, mode='additive'):
    """
    Smallest margin such that at least ceil((1 - beta) n_i) ground truths
    are entirely covered by inflated detections

    :type img: ImageRecord
    :type beta: float
    :type mode: str
    :rtype: float
    """
    geometry.check_mode(mode)

    if not img.ground_truths:
        return 0.0

    if not img.detections:
        return INF

    need = _required_covered(len(img.ground_truths), beta)

    if need <= 0:
        return 0.0

    margins = sorted(covering_margins(img, mode))

    return margins[need - 1]


def calibrate_hausdorff(
        cal_images,
        alpha=0.1,
        beta=0.25,
        mode='additive',
        config=None,
        **provenance
):
    """
    Conformal quantile of per-image Hausdorff scores at level alpha.
    Detections are used as given unless ``config`` is passed, in which
    case they are filtered by its thresholds.

    :type cal_images: list[ImageRecord]
    :rtype: conformod.boxwise_conformal.CalibrationArtifact
    """
    config = _resolve_config(config, 'hausdorff', alpha, beta, mode)
    images = _prepare(cal_images, config)

    scores = [hausdorff_score(img, config.beta, config.mode) for img in images]
    outcome = conformal_quantile(scores, config.alpha)

    return _artifact(config, len(images), outcome, provenance)


def controls_risk(loss_sum, n, alpha, bound=1.0):
    """
    (n / (n + 1)) R_n + B / (n + 1) <= alpha, written over the loss sum

    :rtype: bool
    """
    return loss_sum + bound <= alpha * (n + 1) + RANK_EPS


def _analytic_infeasibility(n, alpha, bound):
    if n < 1 or bound / (n + 1.0) > alpha + RANK_EPS:
        return Infeasible(
            'B/(n+1) = {:.3g} > alpha = {:g}'.format(
                bound / (n + 1.0), alpha,
            )
        )

    return None


def crc_lambda(
        cal_images,
        loss=BOX_RECALL,
        alpha=0.1,
        mode='additive',
        beta=0.25,
        tol=LAMBDA_TOL,
):
    """
    Smallest lambda in [0, lambda_max] satisfying the risk-control
    inequality, found by bisection on the nonincreasing empirical risk.
    lambda_max is twice the largest image diagonal.

    :type cal_images: list[ImageRecord]
    :type loss: str | LossKind
    :type alpha: float
    :type mode: str
    :rtype: float | Infeasible
    """
    loss = loss_kind(loss)
    geometry.check_mode(mode)

    n = len(cal_images)
    infeasible = _analytic_infeasibility(n, alpha, loss.bound)
    if infeasible is not None:
        return infeasible

    lambda_max = max(search_ceiling(img, mode) for img in cal_images)

    def holds(lam):
        loss_sum = sum(
            image_loss(img, lam, loss, mode, beta) for img in cal_images
        )
        logger.debug('risk at lambda=%.6g: %.6g', lam, loss_sum / n)
        return controls_risk(loss_sum, n, alpha, loss.bound)

    lam = _bisect(holds, lambda_max, tol)

    if lam is None:
        unreachable = sum(
            1 for img in cal_images if img.ground_truths and not img.detections
        )
        return Infeasible(
            'risk stays above alpha = {:g} at lambda_max = {:.4g}'
            ' ({} of {} images have ground truth and no detection)'.format(
                alpha, lambda_max, unreachable, n,
            )
        )

    return lam


def crc_lambda_scores(scores, alpha):
    """
    Risk control over precomputed scores with the miscoverage loss
    1{s > lambda}: the smallest score satisfying the risk-control
    inequality. Signed scores are allowed.

    :type scores: list[float]
    :type alpha: float
    :rtype: float | Infeasible
    """
    ordered = np.sort(np.asarray(scores, dtype=np.float64))
    n = len(ordered)

    infeasible = _analytic_infeasibility(n, alpha, 1.0)
    if infeasible is not None:
        return infeasible

    above = n - np.searchsorted(ordered, ordered, side='right')

    for candidate, loss_sum in zip(ordered, above):
        if controls_risk(float(loss_sum), n, alpha):
            return float(candidate)

    return Infeasible('no score satisfies the risk bound')


def _resolve_config(config, method, alpha, beta, mode):
    if config is not None:
        return config

    return build_run_config(
        method=method, alpha=alpha, beta=beta, mode=mode,
        objectness_threshold=0.0,
    )


def _prepare(images, config):
    return matching.filter_images(
        images, config.objectness_threshold, config.class_id)


def _artifact(config, n_cal, outcome, provenance):
    if is_infeasible(outcome):
        logger.warning(
            'calibration of "%s" at alpha=%g over %d images is'
            ' infeasible: %s',
            config.method, config.alpha, n_cal, outcome.reason,
        )
        return make_artifact(
            config, n_cal, lambda_hat=INF, reason=outcome.reason,
            **provenance)

    logger.info(
        'calibrated "%s" (%s) at alpha=%g over %d images: lambda=%.6g',
        config.method, config.mode, config.alpha, n_cal, outcome,
    )

    return make_artifact(config, n_cal, lambda_hat=outcome, **provenance)


def calibrate_crc(
        cal_images,
        loss=BOX_RECALL,
        alpha=0.1,
        mode='additive',
        config=None,
        **provenance
):
    """
    Conformal risk control of box-recall or pixel-recall loss

    :type cal_images: list[ImageRecord]
    :rtype: conformod.boxwise_conformal.CalibrationArtifact
    """
    loss = loss_kind(loss)
    if loss.kind == 'miscoverage':
        raise errors.UnsupportedLoss(loss.kind)

    config = _resolve_config(
        config, 'crc-' + loss.kind.replace('_', '-'), alpha, 0.25, mode)
    images = _prepare(cal_images, config)

    outcome = crc_lambda(
        images, loss, config.alpha, config.mode, config.beta)

    return _artifact(config, len(images), outcome, provenance)


def calibrate_imagewise(cal_images, config, **provenance):
    """
    Dispatches image-wise calibration on the configured method

    :type cal_images: list[ImageRecord]
    :type config: conformod.config.RunConfig
    :rtype: conformod.boxwise_conformal.CalibrationArtifact
    """
    method = CONFIG.get_method(config.method)

    if method.family != 'imagewise':
        raise errors.WrongArtifactKind(config.method, 'image-wise')

    if method.score == 'hausdorff':
        return calibrate_hausdorff(cal_images, config=config, **provenance)

    return calibrate_crc(
        cal_images, method.loss, config=config, **provenance)


def apply_imagewise(dets, artifact):
    """
    Every detection inflated by lambda, in input order

    :type dets: list[matching.Detection]
    :type artifact: conformod.boxwise_conformal.CalibrationArtifact
    :rtype: list[geometry.BBox]
    """
    if artifact.family != 'imagewise':
        raise errors.WrongArtifactKind(artifact.method, 'image-wise')

    if not artifact.feasible:
        raise errors.InfeasibleArtifact(
            artifact.method, artifact.infeasible_reason)

    for det in dets:
        if artifact.margin_mode == 'multiplicative' \
                and (det.bbox.width <= 0 or det.bbox.height <= 0):
            raise errors.DegeneratePrediction(det.bbox)

    return [
        geometry.inflate(det.bbox, artifact.lambda_hat, artifact.margin_mode)
        for det in dets
    ]


def method_loss(method_name):
    """
    Loss controlled by an image-wise method

    :rtype: LossKind
    """
    method = CONFIG.get_method(method_name)

    if method.loss is None or method.loss not in util.LOSSES:
        raise errors.UnsupportedLoss(method.loss)

    return loss_kind(method.loss)
