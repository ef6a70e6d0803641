from __future__ import absolute_import
from __future__ import unicode_literals

from conformod import errors
from conformod.config import CONFIG
from conformod.config import build_run_config
from tests.base import TestBase


class ConfigTest(TestBase):

    def test_builtin_methods(self):
        """verify that the seven built-in methods are registered"""

        self.assertEqual(
            set(CONFIG.method_names),
            {
                'additive', 'multiplicative', 'max-additive',
                'max-multiplicative', 'hausdorff', 'crc-box-recall',
                'crc-pixel-recall',
            },
        )

        method = CONFIG.get_method('max-multiplicative')
        self.assertEqual(method.family, 'boxwise')
        self.assertEqual(method.score, 'max')
        self.assertEqual(method.margin_mode, 'multiplicative')

        self.assertEqual(CONFIG.get_method('crc-pixel-recall').loss,
                         'pixel_recall')

    def test_register_method(self):
        """verify fluent registering of custom methods"""

        result = CONFIG.register_method(
            'my-max', 'boxwise', 'max', margin_mode='additive',
        ).register_method(
            'my-crc', 'imagewise', 'crc', loss='pixel_recall',
        )

        self.assertIs(result, CONFIG)
        self.assertIn('my-max', CONFIG.method_names)
        self.assertEqual(CONFIG.get_method('my-crc').score, 'crc')

        with self.assertRaises(errors.MethodAlreadyRegistered):
            CONFIG.register_method('my-max', 'boxwise', 'max', 'additive')

    def test_register_invalid_method(self):
        """verify that incomplete or unknown method settings are refused"""

        with self.assertRaises(errors.InvalidParameter):
            CONFIG.register_method('x', 'pixelwise', 'max', 'additive')

        with self.assertRaises(errors.InvalidParameter):
            CONFIG.register_method('x', 'boxwise', 'median', 'additive')

        with self.assertRaises(errors.InvalidParameter):
            CONFIG.register_method('x', 'boxwise', 'max')

        with self.assertRaises(errors.UnsupportedMode):
            CONFIG.register_method('x', 'boxwise', 'max', 'log')

        with self.assertRaises(errors.UnsupportedLoss):
            CONFIG.register_method('x', 'imagewise', 'crc')

        self.assertNotIn('x', CONFIG.method_names)

    def test_reset(self):
        """verify that reset drops custom methods only"""

        CONFIG.register_method('my-max', 'boxwise', 'max', 'additive')
        CONFIG.reset()

        with self.assertRaises(errors.MethodNotFound):
            CONFIG.get_method('my-max')

        self.assertTrue(CONFIG.get_method('hausdorff'))

    def test_run_config_defaults(self):
        """verify defaults of the run configuration"""

        config = build_run_config()

        self.assertEqual(config.method, 'max-additive')
        self.assertEqual(config.alpha, 0.1)
        self.assertEqual(config.iou_threshold, 0.3)
        self.assertEqual(config.objectness_threshold, 0.3)
        self.assertEqual(config.beta, 0.25)
        self.assertEqual(config.matching, 'greedy')
        self.assertEqual(config.mode, 'additive')
        self.assertIsNone(config.class_id)
        self.assertFalse(config.clip_nonnegative)
        self.assertEqual(config.seed, 0)

    def test_mode_resolution(self):
        """verify that box-wise names imply the mode and image-wise take it"""

        self.assertEqual(
            build_run_config(method='multiplicative').mode, 'multiplicative')
        self.assertEqual(
            build_run_config(method='max-additive', mode='additive').mode,
            'additive')
        self.assertEqual(build_run_config(method='hausdorff').mode,
                         'additive')
        self.assertEqual(
            build_run_config(method='crc-box-recall',
                             mode='multiplicative').mode,
            'multiplicative')

        with self.assertRaises(errors.ConflictingConfigParams):
            build_run_config(method='max-additive', mode='multiplicative')

    def test_invalid_values(self):
        """verify range checks of the run configuration"""

        for kwargs in (
                {'alpha': 0},
                {'alpha': 1},
                {'alpha': -0.1},
                {'iou_threshold': 0},
                {'iou_threshold': 1.5},
                {'objectness_threshold': -0.1},
                {'beta': 1},
        ):
            with self.assertRaises(errors.InvalidParameter, msg=kwargs):
                build_run_config(**kwargs)

        with self.assertRaises(errors.MethodNotFound):
            build_run_config(method='median')

        with self.assertRaises(errors.UnsupportedStrategy):
            build_run_config(matching='random')

        with self.assertRaises(errors.UnsupportedMode):
            build_run_config(method='hausdorff', mode='log')
