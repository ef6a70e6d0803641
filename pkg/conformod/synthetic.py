"""
Synthetic scenes, a noisy detector and the Monte Carlo trial runner that
checks coverage and risk guarantees empirically
"""

from __future__ import absolute_import
from __future__ import unicode_literals

import logging
import math
from collections import namedtuple

import numpy as np

from . import errors
from . import matching
from . import metrics
from .boxwise_conformal import calibrate_boxwise
from .boxwise_conformal import conformal_quantile
from .boxwise_conformal import pooled_residuals
from .config import CONFIG
from .config import build_run_config
from .engine import parallel
from .engine.states import is_infeasible
from .geometry import BBox
from .imagewise_crc import ImageRecord
from .imagewise_crc import calibrate_imagewise
from .imagewise_crc import crc_lambda_scores

logger = logging.getLogger(__name__)

NOISE_DISTRIBUTIONS = ('gaussian', 'uniform')

COUNT_DISTRIBUTIONS = ('poisson', 'fixed')

# box-wise calibration sets stop growing past this many images per box
_MAX_IMAGES_PER_BOX = 50

SceneParams = namedtuple(
    'SceneParams',
    (
        'width',
        'height',
        'mean_boxes',
        'count_distribution',
        'min_size',
        'max_size',
        'min_aspect',
        'max_aspect',
    ),
)
SceneParams.__new__.__defaults__ = (
    1280.0, 720.0, 1.0, 'poisson', 10.0, 120.0, 1.0, 3.0,
)

DetectorNoiseModel = namedtuple(
    'DetectorNoiseModel',
    (
        'sigma',
        'distribution',
        'bias',
        'relative_sigma',
        'scale_sigma',
        'p_fn',
        'p_fp',
        'objectness_scale',
    ),
)
DetectorNoiseModel.__new__.__defaults__ = (
    2.0, 'gaussian', (0.0, 0.0, 0.0, 0.0), 0.0, 0.0, 0.0, 0.0, 10.0,
)

MethodTrials = namedtuple(
    'MethodTrials',
    (
        'method',
        'margin_mode',
        'metric',
        'values',
        'margins',
        'n_infeasible',
        'mean',
        'stderr',
        'band_low',
        'band_high',
        'passed',
        'crc_cp_agreements',
    ),
)

TrialSummary = namedtuple(
    'TrialSummary',
    (
        'n_trials',
        'alpha',
        'n_cal',
        'n_test',
        'base_seed',
        'scene',
        'noise',
        'results',
    ),
)

TRIAL_COLUMNS = ('trial', 'method', 'margin_mode', 'metric', 'value', 'margin')

SUMMARY_COLUMNS = (
    'method', 'margin_mode', 'metric', 'mean', 'stderr', 'band_low',
    'band_high', 'passed', 'n_infeasible', 'crc_cp_agreements',
)


def check_noise(noise):
    """
    :type noise: DetectorNoiseModel
    :rtype: DetectorNoiseModel
    """
    if noise.sigma < 0:
        raise errors.InvalidParameter('sigma', noise.sigma, '>= 0')

    for name in ('relative_sigma', 'scale_sigma'):
        value = getattr(noise, name)
        if value < 0:
            raise errors.InvalidParameter(name, value, '>= 0')

    for name in ('p_fn', 'p_fp'):
        value = getattr(noise, name)
        if not 0 <= value <= 1:
            raise errors.InvalidParameter(name, value, '[0, 1]')

    if noise.distribution not in NOISE_DISTRIBUTIONS:
        raise errors.InvalidParameter(
            'distribution', noise.distribution, NOISE_DISTRIBUTIONS)

    if len(noise.bias) != 4:
        raise errors.InvalidParameter('bias', noise.bias, '4 side offsets')

    return noise


def check_scene(params):
    """
    :type params: SceneParams
    :rtype: SceneParams
    """
    if params.width <= 0 or params.height <= 0:
        raise errors.InvalidParameter(
            'image size', (params.width, params.height), 'positive')

    if params.mean_boxes < 0:
        raise errors.InvalidParameter('mean_boxes', params.mean_boxes, '>= 0')

    if params.count_distribution not in COUNT_DISTRIBUTIONS:
        raise errors.InvalidParameter(
            'count_distribution', params.count_distribution,
            COUNT_DISTRIBUTIONS)

    if not 0 < params.min_size <= params.max_size:
        raise errors.InvalidParameter(
            'box size', (params.min_size, params.max_size),
            '0 < min_size <= max_size')

    if not 0 < params.min_aspect <= params.max_aspect:
        raise errors.InvalidParameter(
            'aspect', (params.min_aspect, params.max_aspect),
            '0 < min_aspect <= max_aspect')

    return params


def _random_boxes(rng, count, params):
    # log-uniform width, height = width * aspect
    widths = np.exp(rng.uniform(
        math.log(params.min_size), math.log(params.max_size), count))
    heights = widths * rng.uniform(params.min_aspect, params.max_aspect, count)

    widths = np.minimum(widths, params.width)
    heights = np.minimum(heights, params.height)

    x_min = rng.uniform(0.0, 1.0, count) * (params.width - widths)
    y_min = rng.uniform(0.0, 1.0, count) * (params.height - heights)

    return [
        BBox(float(x), float(y), float(x + w), float(y + h))
        for x, y, w, h in zip(x_min, y_min, widths, heights)
    ]


def generate_scene(seed, params=SceneParams(), image_id=None):
    """
    Ground-truth-only image record, deterministic given ``seed``

    :type seed: int | numpy.random.SeedSequence
    :type params: SceneParams
    :type image_id: str | None
    :rtype: ImageRecord
    """
    check_scene(params)
    rng = np.random.default_rng(seed)

    if params.count_distribution == 'poisson':
        count = int(rng.poisson(params.mean_boxes))
    else:
        count = int(round(params.mean_boxes))

    return ImageRecord(
        image_id=image_id if image_id is not None else 'scene',
        width=float(params.width),
        height=float(params.height),
        ground_truths=_random_boxes(rng, count, params),
    )


def _side_noise(rng, noise, count):
    if noise.distribution == 'gaussian':
        return rng.normal(0.0, noise.sigma, (count, 4))

    half_width = noise.sigma * math.sqrt(3.0)
    return rng.uniform(-half_width, half_width, (count, 4))


def _min_extent(low, high, minimum=1.0):
    if high - low >= minimum:
        return low, high

    center = (low + high) / 2.0
    return center - minimum / 2.0, center + minimum / 2.0


def simulate_detector(scene, noise=DetectorNoiseModel(), seed=0):
    """
    Noisy detections of a scene's ground truths, in ground-truth order,
    followed by spurious boxes; deterministic given ``seed``

    :type scene: ImageRecord
    :type noise: DetectorNoiseModel
    :type seed: int | numpy.random.SeedSequence
    :rtype: tuple[conformod.matching.Detection]
    """
    check_noise(noise)
    rng = np.random.default_rng(seed)

    gts = scene.ground_truths
    count = len(gts)

    offsets = _side_noise(rng, noise, count)
    relative = rng.normal(0.0, 1.0, (count, 4)) * noise.relative_sigma
    missed = rng.random(count) < noise.p_fn

    # one shrink (>0) or growth (<0) factor per box, shared by its four sides
    shared = rng.normal(0.0, noise.scale_sigma, count) \
        if noise.scale_sigma > 0 else np.zeros(count)

    bias = np.asarray(noise.bias, dtype=np.float64)
    detections = []

    for gt, offset, rel, shrink, miss in zip(
            gts, offsets, relative, shared, missed):
        if miss:
            continue

        scale = np.array([gt.width, gt.height, gt.width, gt.height])
        inward = np.array([1.0, 1.0, -1.0, -1.0]) * shrink * scale / 2.0
        err = offset + rel * scale + inward

        x_min, x_max = _min_extent(
            gt.x_min + bias[0] + err[0], gt.x_max - bias[2] + err[2])
        y_min, y_max = _min_extent(
            gt.y_min + bias[1] + err[1], gt.y_max - bias[3] + err[3])

        magnitude = float(np.mean(np.abs(err)))
        objectness = 0.3 + 0.7 * math.exp(
            -magnitude / max(noise.objectness_scale, 1e-12))

        detections.append(matching.Detection(
            bbox=BBox(float(x_min), float(y_min), float(x_max), float(y_max)),
            objectness=min(objectness, 1.0),
            class_id=0,
        ))

    n_spurious = int(rng.poisson(noise.p_fp)) if noise.p_fp > 0 else 0
    spurious_params = SceneParams(width=scene.width, height=scene.height)

    for box in _random_boxes(rng, n_spurious, spurious_params):
        detections.append(matching.Detection(
            bbox=box,
            objectness=float(rng.uniform(0.0, 1.0)),
            class_id=0,
        ))

    return tuple(detections)


def _image_stream(seed_seq, params, noise, prefix):
    index = 0
    while True:
        scene_seq, detector_seq = seed_seq.spawn(1)[0].spawn(2)
        scene = generate_scene(scene_seq, params, '{}{}'.format(prefix, index))

        yield scene._replace(
            detections=simulate_detector(scene, noise, detector_seq))

        index += 1


def simulate_dataset(n_images, params=SceneParams(),
                     noise=DetectorNoiseModel(), seed=0, prefix='img'):
    """
    ``n_images`` scenes with simulated detections

    :rtype: list[ImageRecord]
    """
    stream = _image_stream(
        np.random.SeedSequence(seed), params, noise, prefix)

    return [next(stream) for _ in range(n_images)]


def _count_pairs(img, config):
    kept = matching.filter_images(
        [img], config.objectness_threshold, config.class_id)[0]

    return len(matching.match_record(
        kept, config.iou_threshold, config.matching))


def _draw_calibration(stream, configs, n_cal):
    images = [next(stream) for _ in range(n_cal)]

    boxwise = [
        config for config in configs
        if CONFIG.get_method(config.method).family == 'boxwise'
    ]
    if not boxwise:
        return images

    counts = [
        sum(_count_pairs(img, config) for img in images)
        for config in boxwise
    ]
    limit = _MAX_IMAGES_PER_BOX * max(n_cal, 1)

    while min(counts) < n_cal and len(images) < limit:
        img = next(stream)
        images.append(img)
        counts = [
            count + _count_pairs(img, config)
            for count, config in zip(counts, boxwise)
        ]

    return images


def _trial_outcome(config, cal_images, test_images, n_cal):
    method = CONFIG.get_method(config.method)
    agreement = None

    if method.family == 'boxwise':
        try:
            artifact = calibrate_boxwise(cal_images, config, max_pairs=n_cal)
        except errors.NoMatchedPairs:
            return None, None, None

        if method.score == 'max':
            rows, _ = pooled_residuals(cal_images, config, n_cal)
            scores = rows.max(axis=1)
            cp = conformal_quantile(scores, config.alpha)
            crc = crc_lambda_scores(scores, config.alpha)
            agreement = (is_infeasible(cp) and is_infeasible(crc)) or (
                not is_infeasible(cp) and not is_infeasible(crc)
                and cp == crc
            )

        if not artifact.feasible:
            return None, None, agreement

        value = metrics.empirical_coverage_boxwise(test_images, artifact)
        return value, artifact.margins, agreement

    artifact = calibrate_imagewise(cal_images[:n_cal], config)
    if not artifact.feasible:
        return None, None, None

    report = metrics.evaluate(test_images, artifact)
    value = report.empirical_coverage if method.score == 'hausdorff' \
        else report.empirical_risk

    return value, artifact.margins, None


def _run_trial(task):
    trial_index, base_seed, params, noise, configs, n_cal, n_test = task

    trial_seq = np.random.SeedSequence(base_seed, spawn_key=(trial_index,))
    cal_seq, test_seq = trial_seq.spawn(2)

    cal_stream = _image_stream(cal_seq, params, noise, 'cal')
    test_stream = _image_stream(test_seq, params, noise, 'test')

    cal_images = _draw_calibration(cal_stream, configs, n_cal)
    test_images = [next(test_stream) for _ in range(n_test)]

    return [
        _trial_outcome(config, cal_images, test_images, n_cal)
        for config in configs
    ]


def _band(method, alpha, n_cal, stderr):
    slack = 3.0 * stderr

    if method.score == 'crc':
        return alpha - 2.0 / (n_cal + 1) - slack, alpha + slack

    if method.score == 'bonferroni':
        return 1.0 - alpha - slack, 1.0

    return 1.0 - alpha - slack, 1.0 - alpha + 1.0 / (n_cal + 1) + slack


def _summarize(config, outcomes, n_cal):
    method = CONFIG.get_method(config.method)

    values = tuple(value for value, _, _ in outcomes)
    margins = tuple(margin for _, margin, _ in outcomes)
    agreements = [agree for _, _, agree in outcomes if agree is not None]

    valid = np.array([v for v in values if v is not None], dtype=np.float64)

    if len(valid):
        mean = float(np.mean(valid))
        stderr = float(np.std(valid, ddof=1) / math.sqrt(len(valid))) \
            if len(valid) > 1 else 0.0
    else:
        mean, stderr = None, None

    band_low, band_high = _band(method, config.alpha, n_cal, stderr or 0.0)

    return MethodTrials(
        method=config.method,
        margin_mode=config.mode,
        metric='risk' if method.score == 'crc' else 'coverage',
        values=values,
        margins=margins,
        n_infeasible=sum(1 for v in values if v is None),
        mean=mean,
        stderr=stderr,
        band_low=band_low,
        band_high=band_high,
        passed=mean is not None and band_low <= mean <= band_high,
        crc_cp_agreements=sum(agreements) if agreements else None,
    )


def method_configs(config, methods=None):
    """
    One run configuration per method, sharing thresholds with ``config``

    :type config: conformod.config.RunConfig
    :type methods: list[str] | None
    :rtype: list[conformod.config.RunConfig]
    """
    configs = []

    for name in methods or [config.method]:
        implied = CONFIG.get_method(name).margin_mode
        configs.append(build_run_config(
            method=name,
            alpha=config.alpha,
            iou_threshold=config.iou_threshold,
            objectness_threshold=config.objectness_threshold,
            beta=config.beta,
            matching=config.matching,
            mode=implied or config.mode,
            class_id=config.class_id,
            clip_nonnegative=config.clip_nonnegative,
            seed=config.seed,
        ))

    return configs


def run_trials(
        n_trials,
        params,
        noise,
        config,
        n_cal,
        n_test,
        base_seed=0,
        methods=None,
        workers=1,
):
    """
    Repeats calibration and evaluation on fresh synthetic data.
    Every method sees the same draw in a trial; box-wise methods calibrate
    on ``n_cal`` matched boxes, image-wise methods on ``n_cal`` images.
    Infeasible trials are counted, not averaged.

    :type n_trials: int
    :type params: SceneParams
    :type noise: DetectorNoiseModel
    :type config: conformod.config.RunConfig
    :type n_cal: int
    :type n_test: int
    :type base_seed: int
    :type methods: list[str] | None
    :type workers: int
    :rtype: TrialSummary
    """
    check_scene(params)
    check_noise(noise)

    if n_trials < 1 or n_cal < 1 or n_test < 1:
        raise errors.InvalidParameter(
            'n_trials/n_cal/n_test', (n_trials, n_cal, n_test), '>= 1')

    configs = method_configs(config, methods)

    tasks = [
        (index, base_seed, params, noise, configs, n_cal, n_test)
        for index in range(n_trials)
    ]

    logger.info(
        'running %d trials of %s (n_cal=%d, n_test=%d, seed=%d)',
        n_trials, ', '.join(c.method for c in configs), n_cal, n_test,
        base_seed,
    )

    per_trial = parallel.ordered_map(_run_trial, tasks, workers)

    results = tuple(
        _summarize(cfg, [outcomes[i] for outcomes in per_trial], n_cal)
        for i, cfg in enumerate(configs)
    )

    for result in results:
        log = logger.info if result.passed else logger.warning
        log(
            '%s %s: mean %s=%s (se %s), band [%.4f, %.4f], %s,'
            ' %d infeasible',
            result.method, result.margin_mode, result.metric, result.mean,
            result.stderr, result.band_low, result.band_high,
            'pass' if result.passed else 'FAIL', result.n_infeasible,
        )

    return TrialSummary(
        n_trials=n_trials,
        alpha=config.alpha,
        n_cal=n_cal,
        n_test=n_test,
        base_seed=base_seed,
        scene=params,
        noise=noise,
        results=results,
    )


def trial_rows(summary):
    """
    Plot-ready long rows, one per (trial, method)

    :type summary: TrialSummary
    :rtype: list[dict]
    """
    rows = []

    for result in summary.results:
        for trial, (value, margins) in enumerate(
                zip(result.values, result.margins)):
            rows.append({
                'trial': trial,
                'method': result.method,
                'margin_mode': result.margin_mode,
                'metric': result.metric,
                'value': value,
                'margin': None if margins is None else max(margins),
            })

    return rows


def summary_rows(summary):
    """
    One row per method

    :type summary: TrialSummary
    :rtype: list[dict]
    """
    return [
        dict((column, getattr(result, column)) for column in SUMMARY_COLUMNS)
        for result in summary.results
    ]
