"""
Axis-aligned rectangle arithmetic in continuous pixel coordinates
(x grows right, y grows down)
"""

from __future__ import absolute_import
from __future__ import unicode_literals

import math
from collections import namedtuple

import numpy as np

from . import errors
from .config import util


class BBox(namedtuple('BBox', ('x_min', 'y_min', 'x_max', 'y_max'))):
    """
    Axis-aligned box; the universal geometric unit.
    Plain construction does not validate, use ``bbox()`` for input data.
    """
    __slots__ = ()

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    def translate(self, dx, dy):
        """
        :rtype: BBox
        """
        return BBox(
            self.x_min + dx, self.y_min + dy,
            self.x_max + dx, self.y_max + dy,
        )

    def scale(self, factor):
        """
        :rtype: BBox
        """
        return BBox(*(coord * factor for coord in self))


def bbox(x_min, y_min, x_max, y_max):
    """
    Builds a validated box

    :rtype: BBox
    """
    coords = tuple(float(c) for c in (x_min, y_min, x_max, y_max))

    if not all(math.isfinite(c) for c in coords):
        raise errors.InvalidBox(coords, 'coordinates must be finite')

    if coords[0] > coords[2] or coords[1] > coords[3]:
        raise errors.InvalidBox(coords, 'min corner exceeds max corner')

    return BBox(*coords)


def area(b):
    """
    Box area in px², 0 for degenerate or inverted boxes

    :type b: BBox
    :rtype: float
    """
    return max(b.x_max - b.x_min, 0.0) * max(b.y_max - b.y_min, 0.0)


def intersection(a, b):
    """
    Intersection box, or None when the boxes do not overlap

    :type a: BBox
    :type b: BBox
    :rtype: BBox | None
    """
    x_min = max(a.x_min, b.x_min)
    y_min = max(a.y_min, b.y_min)
    x_max = min(a.x_max, b.x_max)
    y_max = min(a.y_max, b.y_max)

    if x_min > x_max or y_min > y_max:
        return None

    return BBox(x_min, y_min, x_max, y_max)


def iou(a, b):
    """
    Intersection over union; 0 when disjoint or when both areas are 0

    :type a: BBox
    :type b: BBox
    :rtype: float
    """
    inter = intersection(a, b)
    inter_area = area(inter) if inter is not None else 0.0
    union = area(a) + area(b) - inter_area

    if union <= 0:
        return 0.0

    return min(max(inter_area / union, 0.0), 1.0)


def iou_matrix(boxes_a, boxes_b):
    """
    Pairwise IoU, shape (len(boxes_a), len(boxes_b))

    :rtype: numpy.ndarray
    """
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)

    if not len(a) or not len(b):
        return np.zeros((len(a), len(b)))

    x_min = np.maximum(a[:, None, 0], b[None, :, 0])
    y_min = np.maximum(a[:, None, 1], b[None, :, 1])
    x_max = np.minimum(a[:, None, 2], b[None, :, 2])
    y_max = np.minimum(a[:, None, 3], b[None, :, 3])

    inter = np.clip(x_max - x_min, 0, None) * np.clip(y_max - y_min, 0, None)

    area_a = np.clip(a[:, 2] - a[:, 0], 0, None) \
        * np.clip(a[:, 3] - a[:, 1], 0, None)
    area_b = np.clip(b[:, 2] - b[:, 0], 0, None) \
        * np.clip(b[:, 3] - b[:, 1], 0, None)
    union = area_a[:, None] + area_b[None, :] - inter

    with np.errstate(divide='ignore', invalid='ignore'):
        result = np.where(union > 0, inter / union, 0.0)

    return np.clip(result, 0.0, 1.0)


def inflate(b, margin, mode='additive'):
    """
    Moves every side outward by ``margin``: pixels when additive,
    a fraction of the box width/height when multiplicative.
    Negative margins shrink the box.

    :type b: BBox
    :type margin: float
    :type mode: str
    :rtype: BBox
    """
    return inflate_sides(b, (margin, margin, margin, margin), mode)


def inflate_sides(b, margins, mode='additive'):
    """
    Per-side inflation, margins ordered as (x_min, y_min, x_max, y_max)

    :type b: BBox
    :type margins: tuple[float]
    :type mode: str
    :rtype: BBox
    """
    m_x_min, m_y_min, m_x_max, m_y_max = margins

    if mode == 'additive':
        scale_x = scale_y = 1.0
    elif mode == 'multiplicative':
        scale_x, scale_y = b.width, b.height
    else:
        raise errors.UnsupportedMode(mode)

    return BBox(
        b.x_min - _scaled(scale_x, m_x_min),
        b.y_min - _scaled(scale_y, m_y_min),
        b.x_max + _scaled(scale_x, m_x_max),
        b.y_max + _scaled(scale_y, m_y_max),
    )


def _scaled(scale, margin):
    # zero-size side times an infinite margin stays put
    if scale == 0:
        return 0.0

    return scale * margin


def contains(outer, inner):
    """
    Tells if ``inner`` lies inside ``outer``, boundary inclusive

    :rtype: bool
    """
    return outer.x_min <= inner.x_min \
        and outer.y_min <= inner.y_min \
        and inner.x_max <= outer.x_max \
        and inner.y_max <= outer.y_max


def covered_area(gt, preds):
    """
    Exact area of ``gt`` intersected with the union of ``preds``.
    Predictions are clipped to ``gt``, the distinct x and y cuts split it
    into cells, and every cell lies either entirely inside or entirely
    outside each clipped prediction.

    :type gt: BBox
    :type preds: list[BBox]
    :rtype: float
    """
    clipped = []
    for pred in preds:
        inter = intersection(gt, pred)
        if inter is not None and area(inter) > 0:
            clipped.append(inter)

    if not clipped:
        return 0.0

    if len(clipped) == 1:
        return area(clipped[0])

    rects = np.array(clipped, dtype=np.float64)

    xs = np.unique(np.concatenate((rects[:, 0], rects[:, 2])))
    ys = np.unique(np.concatenate((rects[:, 1], rects[:, 3])))

    cx = (xs[:-1] + xs[1:]) / 2.0
    cy = (ys[:-1] + ys[1:]) / 2.0

    in_x = (rects[:, 0, None] < cx[None, :]) & (cx[None, :] < rects[:, 2, None])
    in_y = (rects[:, 1, None] < cy[None, :]) & (cy[None, :] < rects[:, 3, None])

    covered = np.any(in_x[:, :, None] & in_y[:, None, :], axis=0)

    cells = np.diff(xs)[:, None] * np.diff(ys)[None, :]

    return min(float(np.sum(cells[covered])), area(gt))


def is_fully_covered(gt, preds, rel_tol=1e-9):
    """
    Tells if the union of ``preds`` covers ``gt``; a zero-area ``gt``
    counts as covered

    :type gt: BBox
    :type preds: list[BBox]
    :type rel_tol: float
    :rtype: bool
    """
    gt_area = area(gt)

    if gt_area <= 0:
        return True

    return covered_area(gt, preds) >= (1.0 - rel_tol) * gt_area


def diagonal(width, height):
    """
    :rtype: float
    """
    return math.hypot(width, height)


def check_mode(mode):
    """
    :raises errors.UnsupportedMode:
    """
    if mode not in util.MARGIN_MODES:
        raise errors.UnsupportedMode(mode)

    return mode
