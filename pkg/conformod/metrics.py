"""
Evaluation of conformalized outputs: stretch, empirical coverage and
risk, detection counts
"""

from __future__ import absolute_import
from __future__ import unicode_literals

import logging
import math
from collections import OrderedDict
from collections import namedtuple

import numpy as np

from . import errors
from . import geometry
from . import imagewise_crc
from . import matching
from .boxwise_conformal import box_covered
from .boxwise_conformal import conformalize_box
from .config import CONFIG

logger = logging.getLogger(__name__)

REPORT_FIELDS = (
    'method',
    'margin_mode',
    'alpha',
    'feasible',
    'n_test_images',
    'n_test_boxes',
    'n_matched',
    'empirical_coverage',
    'empirical_risk',
    'mean_stretch',
    'false_negative_count',
    'false_positive_count',
)

EvalReport = namedtuple('EvalReport', REPORT_FIELDS)


def stretch(box_pairs):
    """
    Mean over boxes of sqrt(area(conformal) / area(raw))

    :type box_pairs: list[(geometry.BBox, geometry.BBox)]
        (conformal box, raw prediction) pairs across images
    :rtype: float
    """
    ratios = []

    for conformal, raw in box_pairs:
        raw_area = geometry.area(raw)
        if raw_area <= 0:
            raise errors.DegeneratePrediction(raw)

        ratios.append(math.sqrt(geometry.area(conformal) / raw_area))

    if not ratios:
        return 1.0

    return float(np.mean(ratios))


def _warn_infeasible(artifact):
    if not artifact.feasible:
        logger.warning(
            '%s',
            errors.InfeasibleArtifact(
                artifact.method, artifact.infeasible_reason),
        )


def _matched_boxes(images, artifact):
    for img in images:
        for pair in matching.match_record(
                img, artifact.iou_threshold, artifact.matching_strategy):
            yield (
                img.ground_truths[pair.gt_index],
                img.detections[pair.pred_index].bbox,
            )


def _prepare(test_images, artifact):
    return matching.filter_images(
        test_images, artifact.objectness_threshold, artifact.class_id)


def empirical_coverage_boxwise(test_images, artifact):
    """
    Fraction of matched test pairs whose ground truth lies inside the
    conformal box; None when nothing matched

    :type test_images: list[imagewise_crc.ImageRecord]
    :type artifact: conformod.boxwise_conformal.CalibrationArtifact
    :rtype: float | None
    """
    if artifact.family != 'boxwise':
        raise errors.WrongArtifactKind(artifact.method, 'box-wise')

    _warn_infeasible(artifact)

    hits = [
        box_covered(gt, conformalize_box(pred, artifact))
        for gt, pred in _matched_boxes(
            _prepare(test_images, artifact), artifact)
    ]

    if not hits:
        return None

    return float(np.mean(hits))


def empirical_coverage_imagewise(test_images, artifact, beta=None):
    """
    Fraction of test images where at least ceil((1 - beta) n_i) ground
    truths are covered at lambda, i.e. the Hausdorff score is <= lambda

    :rtype: float | None
    """
    if artifact.family != 'imagewise' \
            or CONFIG.get_method(artifact.method).score != 'hausdorff':
        raise errors.WrongArtifactKind(artifact.method, 'hausdorff')

    _warn_infeasible(artifact)

    beta = artifact.beta if beta is None else beta
    images = _prepare(test_images, artifact)

    if not images:
        return None

    misses = [
        imagewise_crc.loss_miscoverage(
            img, artifact.lambda_hat, artifact.margin_mode, beta)
        for img in images
    ]

    return 1.0 - float(np.mean(misses))


def empirical_risk(test_images, lam, loss, mode='additive', beta=0.25):
    """
    Mean per-image loss at ``lam``; detections are used as given

    :type test_images: list[imagewise_crc.ImageRecord]
    :type lam: float
    :type loss: str | imagewise_crc.LossKind
    :rtype: float | None
    """
    if not test_images:
        return None

    return float(np.mean([
        imagewise_crc.image_loss(img, lam, loss, mode, beta)
        for img in test_images
    ]))


def evaluate(test_images, artifact):
    """
    Builds the evaluation report of one artifact on a test set.
    Box-wise stretch is taken over matched predictions, image-wise stretch
    over every retained detection.

    :type test_images: list[imagewise_crc.ImageRecord]
    :type artifact: conformod.boxwise_conformal.CalibrationArtifact
    :rtype: EvalReport
    """
    images = _prepare(test_images, artifact)

    n_gt = n_pred = n_matched = 0
    for img in images:
        pairs = matching.match_record(
            img, artifact.iou_threshold, artifact.matching_strategy)
        counts = matching.count_unmatched(
            pairs, len(img.ground_truths), len(img.detections))

        n_gt += counts.n_gt
        n_pred += counts.n_pred
        n_matched += counts.n_matched

    coverage = risk = None
    method = CONFIG.get_method(artifact.method)

    if artifact.family == 'boxwise':
        coverage = empirical_coverage_boxwise(images, artifact)
        mean_stretch = stretch(
            (conformalize_box(pred, artifact), pred)
            for _, pred in _matched_boxes(images, artifact)
        )
    else:
        _warn_infeasible(artifact)

        mean_stretch = stretch(
            (geometry.inflate(
                det.bbox, artifact.lambda_hat, artifact.margin_mode),
             det.bbox)
            for img in images for det in img.detections
        )

        if method.score == 'hausdorff':
            coverage = empirical_coverage_imagewise(images, artifact)
        else:
            risk = empirical_risk(
                images,
                artifact.lambda_hat,
                method.loss,
                artifact.margin_mode,
            )

    report = EvalReport(
        method=artifact.method,
        margin_mode=artifact.margin_mode,
        alpha=artifact.alpha,
        feasible=artifact.feasible,
        n_test_images=len(images),
        n_test_boxes=n_gt,
        n_matched=n_matched,
        empirical_coverage=coverage,
        empirical_risk=risk,
        mean_stretch=mean_stretch,
        false_negative_count=n_gt - n_matched,
        false_positive_count=n_pred - n_matched,
    )

    logger.info(
        'evaluated "%s" on %d images: coverage=%s risk=%s stretch=%.4g',
        artifact.method, len(images), coverage, risk, mean_stretch,
    )

    return report


def compare(test_images, artifacts):
    """
    One report per artifact on the same test set; infeasible artifacts
    keep their counts but carry no metric

    :rtype: list[EvalReport]
    """
    reports = []

    for artifact in artifacts:
        report = evaluate(test_images, artifact)

        if not artifact.feasible:
            report = report._replace(
                empirical_coverage=None,
                empirical_risk=None,
                mean_stretch=None,
            )

        reports.append(report)

    return reports


def report_row(report):
    """
    Flat row in the fixed CSV column order

    :type report: EvalReport
    :rtype: collections.OrderedDict
    """
    return OrderedDict((field, getattr(report, field)) for field in REPORT_FIELDS)
