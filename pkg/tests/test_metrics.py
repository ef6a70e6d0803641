from __future__ import absolute_import
from __future__ import unicode_literals

import math

from conformod import errors
from conformod import metrics
from conformod.boxwise_conformal import conformalize_box
from conformod.boxwise_conformal import make_artifact
from conformod.config import build_run_config
from conformod.geometry import BBox
from tests.base import TestBase, det, image, perfect_images


def _boxwise(quantiles, method='max-additive'):
    return make_artifact(
        build_run_config(method=method), 100, quantiles=quantiles)


def _imagewise(method, lam, mode=None):
    return make_artifact(
        build_run_config(method=method, mode=mode), 100, lambda_hat=lam)


class StretchTest(TestBase):

    def test_stretch(self):
        """verify stretch of inflated boxes"""

        raw = BBox(0, 0, 10, 10)

        self.assertEqual(metrics.stretch([(BBox(-5, -5, 15, 15), raw)]), 2.0)
        self.assertEqual(metrics.stretch([(raw, raw), (raw, raw)]), 1.0)
        self.assertAlmostEqual(
            metrics.stretch([(BBox(-1, -2, 11, 22), BBox(0, 0, 10, 20))]),
            1.2,
        )
        self.assertEqual(metrics.stretch([]), 1.0)

    def test_degenerate(self):
        """verify that zero-area raw boxes are refused"""

        with self.assertRaises(errors.DegeneratePrediction):
            metrics.stretch([(BBox(0, 0, 1, 1), BBox(0, 0, 0, 1))])

    def test_scaled_predictions(self):
        """verify that scaling keeps relative stretch and lowers pixel stretch"""

        relative = _boxwise([0.1], method='max-multiplicative')
        pixels = _boxwise([2.0])
        boxes = [BBox(0, 0, 10, 20), BBox(5, 5, 45, 25), BBox(3, 1, 9, 4)]
        doubled = [BBox(*(2 * v for v in b)) for b in boxes]

        def mean_stretch(raw, artifact):
            return metrics.stretch(
                (conformalize_box(b, artifact), b) for b in raw)

        self.assertAlmostEqual(
            mean_stretch(boxes, relative), mean_stretch(doubled, relative))
        self.assertAlmostEqual(mean_stretch(boxes, relative), 1.2)
        self.assertLess(
            mean_stretch(doubled, pixels), mean_stretch(boxes, pixels))


class CoverageTest(TestBase):

    def test_perfect_detector(self):
        """verify full coverage of a perfect detector at q=0"""

        self.assertEqual(
            metrics.empirical_coverage_boxwise(
                perfect_images(10), _boxwise([0.0])),
            1.0,
        )

    def test_partial_coverage(self):
        """verify the fraction of covered matched boxes"""

        images = perfect_images(3) + [
            image([(10, 10, 30, 30)], [(13, 10, 30, 30)], image_id='off'),
        ]

        self.assertEqual(
            metrics.empirical_coverage_boxwise(images, _boxwise([2.0])),
            0.75,
        )
        self.assertEqual(
            metrics.empirical_coverage_boxwise(images, _boxwise([3.0])),
            1.0,
        )

    def test_infinite_quantile(self):
        """verify full coverage and a warning for infeasible artifacts"""

        artifact = _boxwise([float('inf')] * 4, method='additive')

        with self.assertLogs('conformod.metrics', 'WARNING'):
            coverage = metrics.empirical_coverage_boxwise(
                perfect_images(5), artifact)

        self.assertEqual(coverage, 1.0)

    def test_nothing_matched(self):
        """verify that coverage is undefined without matched boxes"""

        self.assertIsNone(metrics.empirical_coverage_boxwise(
            [image([(0, 0, 10, 10)])], _boxwise([1.0])))

    def test_wrong_family(self):
        """verify that artifacts of the other family are refused"""

        with self.assertRaises(errors.WrongArtifactKind):
            metrics.empirical_coverage_boxwise(
                perfect_images(2), _imagewise('hausdorff', 1.0))

        with self.assertRaises(errors.WrongArtifactKind):
            metrics.empirical_coverage_imagewise(
                perfect_images(2), _boxwise([1.0]))

    def test_risk_artifact_has_no_coverage(self):
        """verify that CRC artifacts are refused by image-level coverage"""

        for method in ('crc-box-recall', 'crc-pixel-recall'):
            with self.assertRaises(errors.WrongArtifactKind):
                metrics.empirical_coverage_imagewise(
                    perfect_images(2), _imagewise(method, 1.0))

    def test_imagewise_coverage(self):
        """verify image-level coverage of the hausdorff method"""

        images = perfect_images(3) + [image([(0, 0, 10, 10)], image_id='x')]

        self.assertEqual(
            metrics.empirical_coverage_imagewise(
                images, _imagewise('hausdorff', 1.0)),
            0.75,
        )


class RiskTest(TestBase):

    def test_large_lambda(self):
        """verify zero risk once the frame is covered"""

        images = [
            image([(0, 0, 10, 10), (50, 50, 90, 90)], [(40, 40, 45, 45)],
                  image_id=str(i))
            for i in range(5)
        ]

        for loss in ('box_recall', 'pixel_recall'):
            self.assertEqual(
                metrics.empirical_risk(images, 1000.0, loss), 0.0)

    def test_half_pixels(self):
        """verify pixel risk of a detector missing half of every box"""

        images = [
            image([(0, 0, 10, 10)], [(0, 0, 10, 5)], image_id=str(i))
            for i in range(4)
        ]

        self.assertAlmostEqual(
            metrics.empirical_risk(images, 0.0, 'pixel_recall'), 0.5)
        self.assertEqual(metrics.empirical_risk(images, 0.0, 'box_recall'),
                         1.0)
        self.assertIsNone(metrics.empirical_risk([], 0.0, 'box_recall'))


class EvaluateTest(TestBase):

    def test_perfect_boxwise(self):
        """verify the report of a perfect detector"""

        images = perfect_images(10)
        images[0] = images[0]._replace(detections=(
            det((10, 10, 30, 40)), det((200, 200, 210, 210))))

        report = metrics.evaluate(images, _boxwise([0.0]))

        self.assertEqual(report.empirical_coverage, 1.0)
        self.assertIsNone(report.empirical_risk)
        self.assertEqual(report.mean_stretch, 1.0)
        self.assertEqual(report.n_test_images, 10)
        self.assertEqual(report.n_test_boxes, 10)
        self.assertEqual(report.n_matched, 10)
        self.assertEqual(report.false_negative_count, 0)
        self.assertEqual(report.false_positive_count, 1)
        self.assertTrue(report.feasible)

    def test_low_objectness(self):
        """verify that filtered detections count as misses"""

        images = [image([(0, 0, 10, 10)], [det((0, 0, 10, 10), 0.1)])]

        report = metrics.evaluate(images, _boxwise([1.0]))

        self.assertIsNone(report.empirical_coverage)
        self.assertEqual(report.false_negative_count, 1)
        self.assertEqual(report.false_positive_count, 0)

    def test_imagewise(self):
        """verify risk and coverage of image-wise reports"""

        images = [
            image([(0, 0, 10, 10)], [(0, 0, 10, 5)], image_id=str(i))
            for i in range(4)
        ]

        report = metrics.evaluate(images, _imagewise('crc-pixel-recall', 0.0))

        self.assertAlmostEqual(report.empirical_risk, 0.5)
        self.assertIsNone(report.empirical_coverage)
        self.assertEqual(report.mean_stretch, 1.0)

        report = metrics.evaluate(images, _imagewise('hausdorff', 5.0))

        self.assertEqual(report.empirical_coverage, 1.0)
        self.assertAlmostEqual(report.mean_stretch,
                               math.sqrt(20 * 15 / 50.0))

    def test_compare(self):
        """verify that infeasible artifacts keep counts without metrics"""

        images = perfect_images(5)
        artifacts = [
            _boxwise([0.0]),
            _boxwise([float('inf')] * 4, method='additive'),
            _imagewise('crc-box-recall', 0.0),
        ]

        with self.assertLogs('conformod.metrics', 'WARNING'):
            reports = metrics.compare(images, artifacts)

        self.assertEqual([r.method for r in reports],
                         ['max-additive', 'additive', 'crc-box-recall'])
        self.assertEqual(reports[0].empirical_coverage, 1.0)
        self.assertIsNone(reports[1].empirical_coverage)
        self.assertIsNone(reports[1].mean_stretch)
        self.assertEqual(reports[1].n_matched, 5)
        self.assertFalse(reports[1].feasible)
        self.assertEqual(reports[2].empirical_risk, 0.0)

    def test_report_row(self):
        """verify the fixed column order of report rows"""

        report = metrics.evaluate(perfect_images(2), _boxwise([0.0]))
        row = metrics.report_row(report)

        self.assertEqual(tuple(row), metrics.REPORT_FIELDS)
        self.assertEqual(row['method'], 'max-additive')
