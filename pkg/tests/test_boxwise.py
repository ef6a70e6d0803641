from __future__ import absolute_import
from __future__ import unicode_literals

import math

import numpy as np

from conformod import boxwise_conformal as bc
from conformod import errors
from conformod.config import build_run_config
from conformod.engine.states import Infeasible, is_infeasible
from conformod.geometry import BBox
from tests.base import TestBase, det, image, perfect_images


def _artifact(method, quantiles):
    return bc.make_artifact(
        build_run_config(method=method), 100, quantiles=quantiles)


class ScoreTest(TestBase):

    def test_residuals_additive(self):
        """verify signed additive residuals"""

        gt = BBox(10, 10, 20, 20)

        self.assertEqual(
            bc.residuals(gt, BBox(12, 11, 19, 22)), (2, 1, 1, -2))
        self.assertEqual(bc.residuals(gt, gt), (0, 0, 0, 0))

    def test_residuals_multiplicative(self):
        """verify residuals scaled by prediction width and height"""

        r = bc.residuals(
            BBox(10, 10, 20, 20), BBox(12, 11, 19, 22), 'multiplicative')

        for got, expected in zip(r, (2 / 7.0, 1 / 11.0, 1 / 7.0, -2 / 11.0)):
            self.assertAlmostEqual(got, expected)

        with self.assertRaises(errors.DegeneratePrediction):
            bc.residuals(BBox(0, 0, 1, 1), BBox(5, 0, 5, 3), 'multiplicative')

    def test_max_score(self):
        """verify max score of residual vectors"""

        self.assertEqual(bc.max_score(bc.ResidualVector(2, 1, 1, -2)), 2)
        self.assertEqual(bc.max_score(bc.ResidualVector(0, 0, 0, 0)), 0)
        self.assertEqual(bc.max_score(bc.ResidualVector(-3, -1, -2, -5)), -1)


class QuantileTest(TestBase):

    def test_rank(self):
        """verify quantile ranks"""

        self.assertEqual(bc.conformal_quantile(range(1, 10), 0.1), 9)
        self.assertEqual(bc.conformal_quantile([5], 0.5), 5)
        self.assertEqual(bc.conformal_quantile([3, 1, 2, 4], 0.5), 3)

    def test_order_independent(self):
        """verify that score order does not matter"""

        scores = np.random.default_rng(1).normal(size=50)

        self.assertEqual(
            bc.conformal_quantile(scores, 0.1),
            bc.conformal_quantile(scores[::-1], 0.1),
        )

    def test_infeasible(self):
        """verify infeasible ranks and unbounded scores"""

        result = bc.conformal_quantile(range(1, 6), 0.1)

        self.assertIsInstance(result, Infeasible)
        self.assertIn('exceeds n = 5', result.reason)

        result = bc.conformal_quantile([1, 2, float('inf')], 0.3)
        self.assertTrue(is_infeasible(result))

        self.assertTrue(is_infeasible(bc.conformal_quantile([], 0.5)))

    def test_invalid_alpha(self):
        """verify that alpha outside (0, 1) is refused"""

        for alpha in (0, 1, -0.5):
            with self.assertRaises(errors.InvalidParameter):
                bc.conformal_quantile([1, 2, 3], alpha)


class CalibrateTest(TestBase):

    def test_perfect_detector(self):
        """verify zero quantiles for a perfect detector"""

        images = perfect_images(40)

        for method, count in (('additive', 4), ('max-additive', 1),
                              ('max-multiplicative', 1)):
            artifact = bc.calibrate_boxwise(
                images, build_run_config(method=method))

            self.assertEqual(artifact.quantiles, (0.0,) * count, method)
            self.assertTrue(artifact.feasible)
            self.assertEqual(artifact.n_cal, 40)
            self.assertEqual(artifact.family, 'boxwise')

    def test_known_quantile(self):
        """verify the max quantile on hand-built residuals"""

        gt = (10, 10, 30, 30)
        images = [
            image([gt], [(10 + shift, 10, 30, 30)], image_id=str(shift))
            for shift in range(1, 10)
        ]

        artifact = bc.calibrate_boxwise(images, build_run_config())

        # scores 1..9, rank ceil(10 * 0.9) = 9
        self.assertEqual(artifact.quantiles, (9.0,))

    def test_bonferroni_infeasible(self):
        """verify that five boxes cannot certify alpha / 4"""

        artifact = bc.calibrate_boxwise(
            perfect_images(5), build_run_config(method='additive'))

        self.assertFalse(artifact.feasible)
        self.assertTrue(all(math.isinf(q) for q in artifact.quantiles))
        self.assertIn('exceeds', artifact.infeasible_reason)

    def test_max_pairs(self):
        """verify that calibration stops after max_pairs boxes"""

        artifact = bc.calibrate_boxwise(
            perfect_images(30), build_run_config(), max_pairs=12)

        self.assertEqual(artifact.n_cal, 12)

    def test_objectness_filter(self):
        """verify that low objectness detections are not calibrated on"""

        images = [
            image([(0, 0, 10, 10)], [det((0, 0, 10, 10), 0.1)])
            for _ in range(20)
        ]

        with self.assertRaises(errors.NoMatchedPairs):
            bc.calibrate_boxwise(images, build_run_config())

    def test_clip_nonnegative(self):
        """verify that clipping keeps oversized predictions as they are"""

        images = [
            image([(10, 10, 20, 20)], [(8, 8, 22, 22)], image_id=str(i))
            for i in range(20)
        ]

        raw = bc.calibrate_boxwise(images, build_run_config())
        clipped = bc.calibrate_boxwise(
            images, build_run_config(clip_nonnegative=True))

        self.assertEqual(raw.quantiles, (-2.0,))
        self.assertEqual(clipped.quantiles, (0.0,))

    def test_wrong_family(self):
        """verify that image-wise methods are refused"""

        with self.assertRaises(errors.WrongArtifactKind):
            bc.calibrate_boxwise(
                perfect_images(10), build_run_config(method='hausdorff'))

    def test_provenance(self):
        """verify provenance stamping and key sensitivity"""

        artifact = bc.calibrate_boxwise(
            perfect_images(10), build_run_config(),
            fingerprint='abc', inputs={'gt.json': '123'},
        )

        self.assertEqual(artifact.fingerprint, 'abc')
        self.assertEqual(artifact.inputs, {'gt.json': '123'})
        self.assertEqual(
            artifact.provenance_key,
            bc.provenance_key(0.3, 0.3, 'greedy', None),
        )
        self.assertNotEqual(
            artifact.provenance_key,
            bc.provenance_key(0.5, 0.3, 'greedy', None),
        )


class ApplyTest(TestBase):

    def test_max_additive(self):
        """verify scalar inflation"""

        boxes = bc.apply_boxwise(
            [det((0, 0, 10, 20))], _artifact('max-additive', [2.0]))

        self.assertEqual(boxes, [BBox(-2, -2, 12, 22)])

    def test_zero_quantile(self):
        """verify that a zero quantile leaves boxes unchanged"""

        boxes = bc.apply_boxwise(
            [det((0, 0, 10, 20))], _artifact('max-additive', [0.0]))

        self.assertEqual(boxes, [BBox(0, 0, 10, 20)])

    def test_bonferroni(self):
        """verify per-coordinate inflation"""

        boxes = bc.apply_boxwise(
            [det((0, 0, 10, 20))], _artifact('additive', [1, 2, 3, 4]))

        self.assertEqual(boxes, [BBox(-1, -2, 13, 24)])

    def test_multiplicative(self):
        """verify multiplicative inflation and degenerate boxes"""

        artifact = _artifact('max-multiplicative', [0.1])

        self.assertBoxAlmostEqual(
            bc.apply_boxwise([det((0, 0, 10, 20))], artifact)[0],
            (-1, -2, 11, 22),
        )

        with self.assertRaises(errors.DegeneratePrediction):
            bc.apply_boxwise([det((0, 0, 0, 20))], artifact)

    def test_infeasible(self):
        """verify that infeasible artifacts cannot be applied"""

        with self.assertRaises(errors.InfeasibleArtifact):
            bc.apply_boxwise(
                [det((0, 0, 10, 20))],
                _artifact('max-additive', [float('inf')]),
            )

    def test_box_covered(self):
        """verify boundary inclusive coverage"""

        self.assertTrue(
            bc.box_covered(BBox(1, 1, 9, 9), BBox(0, 0, 10, 10)))
        self.assertTrue(
            bc.box_covered(BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)))
        self.assertFalse(
            bc.box_covered(BBox(0, 0, 10, 10), BBox(0, 0, 10, 9.5)))


def _jittered_images(seed, n=60, shift=(0, 0), factor=1):
    """integer boxes with integer jitter, moved and scaled exactly"""
    rng = np.random.default_rng(seed)
    dx, dy = shift
    images = []

    for i in range(n):
        x, y = (int(v) for v in rng.integers(0, 200, 2))
        w, h = (int(v) for v in rng.integers(20, 60, 2))
        jitter = [int(v) for v in rng.integers(-3, 4, 4)]

        gt = (x, y, x + w, y + h)
        pred = (x + jitter[0], y + jitter[1],
                x + w + jitter[2], y + h + jitter[3])

        def move(b):
            return tuple(factor * (v + d) for v, d in zip(b, (dx, dy, dx, dy)))

        images.append(image(
            [move(gt)], [move(pred)], image_id=str(i),
            width=factor * 1000.0, height=factor * 1000.0,
        ))

    return images


class EquivarianceTest(TestBase):

    def test_translation(self):
        """verify that moving every box leaves the quantiles unchanged"""

        for method in ('max-additive', 'additive', 'max-multiplicative'):
            config = build_run_config(method=method)
            base = bc.calibrate_boxwise(_jittered_images(4), config)
            moved = bc.calibrate_boxwise(
                _jittered_images(4, shift=(137, 58)), config)

            self.assertTrue(base.feasible, method)
            self.assertEqual(base.quantiles, moved.quantiles, method)

    def test_scale(self):
        """verify additive margins scale with the image, multiplicative do not"""

        for method in ('max-additive', 'additive'):
            config = build_run_config(method=method)
            base = bc.calibrate_boxwise(_jittered_images(8), config)
            scaled = bc.calibrate_boxwise(
                _jittered_images(8, factor=2), config)

            self.assertEqual(
                scaled.quantiles, tuple(2 * q for q in base.quantiles), method)

        config = build_run_config(method='max-multiplicative')
        self.assertEqual(
            bc.calibrate_boxwise(_jittered_images(8), config).quantiles,
            bc.calibrate_boxwise(
                _jittered_images(8, factor=2), config).quantiles,
        )


class CoveredIffScoreTest(TestBase):

    def test_additive(self):
        """verify that max score <= q exactly when the inflated box covers"""

        rng = np.random.default_rng(12)
        artifacts = {
            q: _artifact('max-additive', [float(q)]) for q in range(-3, 6)
        }

        for _ in range(500):
            gt = BBox(*(float(v) for v in rng.integers(0, 20, 4)))
            gt = BBox(min(gt.x_min, gt.x_max), min(gt.y_min, gt.y_max),
                      max(gt.x_min, gt.x_max) + 1, max(gt.y_min, gt.y_max) + 1)
            pred = BBox(*(v + float(d) for v, d in
                          zip(gt, rng.integers(-4, 5, 4))))

            for q, artifact in artifacts.items():
                self.assertEqual(
                    bc.max_score(bc.residuals(gt, pred)) <= q,
                    bc.box_covered(gt, bc.conformalize_box(pred, artifact)),
                    (gt, pred, q),
                )

    def test_multiplicative(self):
        """verify the same equivalence with relative margins"""

        rng = np.random.default_rng(13)

        for _ in range(500):
            x, y = rng.uniform(0, 100, 2)
            w, h = rng.uniform(5, 50, 2)
            gt = BBox(x, y, x + w, y + h)
            pred = BBox(*(v + d for v, d in zip(gt, rng.normal(0, 3, 4))))
            if pred.width <= 0 or pred.height <= 0:
                continue

            q = float(rng.uniform(-0.2, 0.3))
            artifact = _artifact('max-multiplicative', [q])

            self.assertEqual(
                bc.max_score(bc.residuals(gt, pred, 'multiplicative')) <= q,
                bc.box_covered(gt, bc.conformalize_box(pred, artifact)),
                (gt, pred, q),
            )
