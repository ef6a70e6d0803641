"""
Box-wise split conformal prediction: residual scores over matched pairs,
conformal quantiles and inflated prediction boxes
"""

from __future__ import absolute_import
from __future__ import unicode_literals

import hashlib
import json
import logging
import math
from collections import namedtuple

import numpy as np

from . import errors
from . import geometry
from . import matching
from .config import CONFIG
from .engine.states import Infeasible, is_infeasible

logger = logging.getLogger(__name__)

INF = float('inf')

# absorbs float error of (n + 1) * (1 - alpha) near integers
RANK_EPS = 1e-9

ResidualVector = namedtuple(
    'ResidualVector', ('r_xmin', 'r_ymin', 'r_xmax', 'r_ymax'))

ARTIFACT_FIELDS = (
    'method',
    'family',
    'margin_mode',
    'alpha',
    'quantiles',
    'lambda_hat',
    'iou_threshold',
    'objectness_threshold',
    'matching_strategy',
    'class_id',
    'beta',
    'clip_nonnegative',
    'n_cal',
    'seed',
    'fingerprint',
    'inputs',
    'infeasible_reason',
)


class CalibrationArtifact(namedtuple('CalibrationArtifact', ARTIFACT_FIELDS)):
    """
    Persisted result of calibration.
    Exactly one of ``quantiles`` (box-wise) and ``lambda_hat``
    (image-wise) is set; +inf marks an infeasible calibration.
    """
    __slots__ = ()

    @property
    def margins(self):
        """
        :rtype: tuple[float]
        """
        if self.quantiles is not None:
            return tuple(self.quantiles)

        return (self.lambda_hat,)

    @property
    def feasible(self):
        """
        :rtype: bool
        """
        return all(math.isfinite(m) for m in self.margins)

    @property
    def provenance_key(self):
        """
        Digest of the settings calibration and test must share

        :rtype: str
        """
        return provenance_key(
            self.iou_threshold,
            self.objectness_threshold,
            self.matching_strategy,
            self.class_id,
        )


def provenance_key(iou_threshold, objectness_threshold, strategy, class_id):
    """
    :rtype: str
    """
    payload = json.dumps(
        [float(iou_threshold), float(objectness_threshold), strategy,
         class_id],
    )
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


def make_artifact(
        config,
        n_cal,
        quantiles=None,
        lambda_hat=None,
        reason=None,
        fingerprint=None,
        inputs=None,
):
    """
    Stamps a calibration outcome with the run configuration

    :type config: conformod.config.RunConfig
    :rtype: CalibrationArtifact
    """
    method = CONFIG.get_method(config.method)

    return CalibrationArtifact(
        method=config.method,
        family=method.family,
        margin_mode=config.mode,
        alpha=config.alpha,
        quantiles=None if quantiles is None else tuple(quantiles),
        lambda_hat=lambda_hat,
        iou_threshold=config.iou_threshold,
        objectness_threshold=config.objectness_threshold,
        matching_strategy=config.matching,
        class_id=config.class_id,
        beta=config.beta if method.score == 'hausdorff' else None,
        clip_nonnegative=config.clip_nonnegative,
        n_cal=int(n_cal),
        seed=config.seed,
        fingerprint=fingerprint,
        inputs=dict(inputs or {}),
        infeasible_reason=reason,
    )


def residuals(gt, pred, mode='additive'):
    """
    Signed per-side residuals; positive when the truth sticks out of
    the prediction on that side

    :type gt: geometry.BBox
    :type pred: geometry.BBox
    :type mode: str
    :rtype: ResidualVector
    """
    geometry.check_mode(mode)

    r = ResidualVector(
        pred.x_min - gt.x_min,
        pred.y_min - gt.y_min,
        gt.x_max - pred.x_max,
        gt.y_max - pred.y_max,
    )

    if mode == 'additive':
        return r

    width, height = pred.width, pred.height

    if width <= 0 or height <= 0:
        raise errors.DegeneratePrediction(pred)

    return ResidualVector(
        r.r_xmin / width,
        r.r_ymin / height,
        r.r_xmax / width,
        r.r_ymax / height,
    )


def max_score(r):
    """
    :type r: ResidualVector
    :rtype: float
    """
    return max(r)


def conformal_rank(n, alpha_eff):
    """
    1-indexed rank ceil((n + 1)(1 - alpha_eff)) of the conformal quantile

    :rtype: int
    """
    return int(math.ceil((n + 1) * (1.0 - alpha_eff) - RANK_EPS))


def conformal_quantile(scores, alpha_eff):
    """
    The rank-ceil((n + 1)(1 - alpha_eff)) order statistic of ``scores``,
    or Infeasible when that rank exceeds n or lands on +inf

    :type scores: list[float]
    :type alpha_eff: float
    :rtype: float | Infeasible
    """
    if not 0 < alpha_eff < 1:
        raise errors.InvalidParameter('alpha', alpha_eff, '(0, 1)')

    ordered = np.sort(np.asarray(scores, dtype=np.float64))
    n = len(ordered)
    rank = conformal_rank(n, alpha_eff)

    if rank > n:
        return Infeasible(
            'rank ceil((n+1)(1-{:g})) = {} exceeds n = {}'.format(
                alpha_eff, rank, n,
            )
        )

    value = float(ordered[max(rank, 1) - 1])

    if math.isinf(value) and value > 0:
        return Infeasible(
            'rank {} of {} selects an unbounded score'.format(rank, n)
        )

    return value


def pooled_residuals(images, config, max_pairs=None):
    """
    Residuals of every matched pair across ``images``, disregarding the
    source image; detections are filtered by objectness first.
    Returns the (n, 4) residual matrix and the matched raw predictions.

    :type images: list[conformod.imagewise_crc.ImageRecord]
    :type config: conformod.config.RunConfig
    :type max_pairs: int | None
    :rtype: (numpy.ndarray, list[geometry.BBox])
    """
    rows = []
    preds = []

    for img in matching.filter_images(
            images, config.objectness_threshold, config.class_id):
        pairs = matching.match_record(
            img, config.iou_threshold, config.matching)

        for pair in pairs:
            gt = img.ground_truths[pair.gt_index]
            pred = img.detections[pair.pred_index].bbox

            rows.append(residuals(gt, pred, config.mode))
            preds.append(pred)

            if max_pairs is not None and len(rows) >= max_pairs:
                return np.array(rows, dtype=np.float64), preds

    return np.array(rows, dtype=np.float64).reshape(-1, 4), preds


def calibrate_boxwise(cal_images, config, max_pairs=None, **provenance):
    """
    Split conformal calibration over matched boxes. Bonferroni methods get
    one quantile per coordinate at alpha/4, max methods one quantile of
    the max score at alpha.

    :type cal_images: list[conformod.imagewise_crc.ImageRecord]
    :type config: conformod.config.RunConfig
    :type max_pairs: int | None
    :rtype: CalibrationArtifact
    """
    method = CONFIG.get_method(config.method)

    if method.family != 'boxwise':
        raise errors.WrongArtifactKind(config.method, 'box-wise')

    rows, _ = pooled_residuals(cal_images, config, max_pairs)
    n_box = len(rows)

    if not n_box:
        raise errors.NoMatchedPairs(len(cal_images))

    if method.score == 'bonferroni':
        outcomes = [
            conformal_quantile(rows[:, c], config.alpha / 4.0)
            for c in range(4)
        ]
    else:
        outcomes = [conformal_quantile(rows.max(axis=1), config.alpha)]

    reason = next((o.reason for o in outcomes if is_infeasible(o)), None)

    if reason is not None:
        logger.warning(
            'calibration of "%s" at alpha=%g over %d boxes is infeasible: %s',
            config.method, config.alpha, n_box, reason,
        )
        quantiles = [INF] * len(outcomes)
    else:
        quantiles = outcomes
        if config.clip_nonnegative:
            quantiles = [max(q, 0.0) for q in quantiles]

        logger.info(
            'calibrated "%s" at alpha=%g over %d boxes: %s',
            config.method, config.alpha, n_box,
            ', '.join('{:.4g}'.format(q) for q in quantiles),
        )

    return make_artifact(
        config, n_box, quantiles=quantiles, reason=reason, **provenance)


def _check_boxwise(artifact):
    if artifact.family != 'boxwise':
        raise errors.WrongArtifactKind(artifact.method, 'box-wise')

    if not artifact.feasible:
        raise errors.InfeasibleArtifact(
            artifact.method, artifact.infeasible_reason)


def conformalize_box(box, artifact):
    """
    Inflates one raw prediction with a box-wise artifact

    :type box: geometry.BBox
    :type artifact: CalibrationArtifact
    :rtype: geometry.BBox
    """
    if artifact.margin_mode == 'multiplicative' \
            and (box.width <= 0 or box.height <= 0):
        raise errors.DegeneratePrediction(box)

    quantiles = artifact.quantiles

    if len(quantiles) == 4:
        return geometry.inflate_sides(box, quantiles, artifact.margin_mode)

    return geometry.inflate(box, quantiles[0], artifact.margin_mode)


def apply_boxwise(dets, artifact):
    """
    Conformal boxes for ``dets``, in input order

    :type dets: list[matching.Detection]
    :type artifact: CalibrationArtifact
    :rtype: list[geometry.BBox]
    """
    _check_boxwise(artifact)

    return [conformalize_box(det.bbox, artifact) for det in dets]


def box_covered(gt, conformal_box):
    """
    Tells if ``gt`` lies inside ``conformal_box``, boundary inclusive

    :rtype: bool
    """
    return geometry.contains(conformal_box, gt)
