"""
Pairing of predicted boxes with ground-truth boxes per image
"""

from __future__ import absolute_import
from __future__ import unicode_literals

import logging
from collections import namedtuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import errors
from . import geometry
from .config import util

logger = logging.getLogger(__name__)

Detection = namedtuple('Detection', ('bbox', 'objectness', 'class_id'))

MatchedPair = namedtuple('MatchedPair', ('gt_index', 'pred_index', 'iou'))

MatchCounts = namedtuple(
    'MatchCounts',
    ('n_gt', 'n_pred', 'n_matched', 'false_negatives', 'false_positives'),
)


def filter_detections(dets, objectness_threshold, class_id=None):
    """
    Keeps detections with objectness >= threshold (and of the given
    class), preserving order

    :type dets: list[Detection]
    :type objectness_threshold: float
    :type class_id: int | None
    :rtype: tuple[Detection]
    """
    return tuple(
        det for det in dets
        if det.objectness >= objectness_threshold
        and (class_id is None or det.class_id == class_id)
    )


def filter_images(images, objectness_threshold, class_id=None):
    """
    Applies ``filter_detections`` to every image record

    :rtype: list[conformod.imagewise_crc.ImageRecord]
    """
    return [
        img._replace(detections=filter_detections(
            img.detections, objectness_threshold, class_id,
        ))
        for img in images
    ]


def match_image(
        gts,
        preds,
        iou_threshold=0.3,
        strategy='greedy',
        gt_classes=None,
        pred_classes=None,
):
    """
    One-to-one partial matching of ground truths and predictions.
    When both class lists are given, cross-class pairs never match.
    Pairs are returned sorted by ground-truth index.

    :type gts: list[geometry.BBox]
    :type preds: list[geometry.BBox]
    :type iou_threshold: float
    :type strategy: str
    :type gt_classes: list[int] | None
    :type pred_classes: list[int] | None
    :rtype: list[MatchedPair]
    """
    if strategy not in util.MATCHING_STRATEGIES:
        raise errors.UnsupportedStrategy(strategy)

    if not len(gts) or not len(preds):
        return []

    ious = geometry.iou_matrix(gts, preds)

    if gt_classes is not None and pred_classes is not None:
        same_class = np.equal.outer(
            np.asarray(gt_classes), np.asarray(pred_classes))
        ious = np.where(same_class, ious, 0.0)

    if strategy == 'greedy':
        pairs = _match_greedy(ious, iou_threshold)
    else:
        pairs = _match_hungarian(ious, iou_threshold)

    return sorted(pairs)


def _match_greedy(ious, iou_threshold):
    candidates = [
        (-ious[g, p], g, p)
        for g, p in zip(*np.nonzero(ious >= iou_threshold))
    ]
    candidates.sort()

    used_gt, used_pred = set(), set()
    pairs = []

    for neg_iou, g, p in candidates:
        if g in used_gt or p in used_pred:
            continue

        used_gt.add(g)
        used_pred.add(p)
        pairs.append(MatchedPair(int(g), int(p), float(-neg_iou)))

    return pairs


def _match_hungarian(ious, iou_threshold):
    # sub-threshold pairs carry no weight
    weights = np.where(ious >= iou_threshold, ious, 0.0)

    rows, cols = linear_sum_assignment(weights, maximize=True)

    return [
        MatchedPair(int(g), int(p), float(ious[g, p]))
        for g, p in zip(rows, cols)
        if ious[g, p] >= iou_threshold
    ]


def match_record(img, iou_threshold=0.3, strategy='greedy'):
    """
    Matches an image record's ground truths against its detections

    :type img: conformod.imagewise_crc.ImageRecord
    :rtype: list[MatchedPair]
    """
    gt_classes = img.gt_class_ids or None
    pred_classes = None

    if gt_classes is not None:
        pred_classes = [det.class_id for det in img.detections]

    return match_image(
        img.ground_truths,
        [det.bbox for det in img.detections],
        iou_threshold=iou_threshold,
        strategy=strategy,
        gt_classes=gt_classes,
        pred_classes=pred_classes,
    )


def count_unmatched(pairs, n_gt, n_pred):
    """
    Unmatched ground truths are false negatives, unmatched predictions
    are false positives

    :rtype: MatchCounts
    """
    return MatchCounts(
        n_gt=n_gt,
        n_pred=n_pred,
        n_matched=len(pairs),
        false_negatives=n_gt - len(pairs),
        false_positives=n_pred - len(pairs),
    )
