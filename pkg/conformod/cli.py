"""
Command line driver: split, calibrate, apply, evaluate, compare, simulate

Exit codes: 0 ok, 2 input error, 3 infeasible guarantee, 4 provenance
mismatch.
"""

from __future__ import absolute_import
from __future__ import unicode_literals

import argparse
import logging
import sys
from collections import OrderedDict

from . import dataio
from . import errors
from . import matching
from . import metrics
from . import synthetic
from .boxwise_conformal import apply_boxwise
from .boxwise_conformal import calibrate_boxwise
from .boxwise_conformal import provenance_key
from .config import CONFIG
from .config import build_run_config
from .config import util
from .config.config import DEFAULT_METHOD
from .imagewise_crc import apply_imagewise
from .imagewise_crc import calibrate_imagewise

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_PROVENANCE = 4

_LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'


def _inputs(*paths):
    return OrderedDict(
        (path, dataio.fingerprint(path)) for path in paths if path)


def _load_records(args, split_part=None):
    manifest = dataio.load_ground_truth(args.ground_truth, args.format)
    detections = dataio.load_detections(
        args.detections, manifest, args.format) if args.detections else None

    image_ids = None
    if split_part is not None and args.split:
        image_ids = getattr(dataio.load_split(args.split), split_part)

    return dataio.build_records(manifest, detections, image_ids)


def _artifact_config(artifact):
    """
    Run configuration an artifact was calibrated with
    """
    return build_run_config(
        method=artifact.method,
        alpha=artifact.alpha,
        iou_threshold=artifact.iou_threshold,
        objectness_threshold=artifact.objectness_threshold,
        beta=artifact.beta if artifact.beta is not None else 0.25,
        matching=artifact.matching_strategy,
        mode=artifact.margin_mode,
        class_id=artifact.class_id,
        clip_nonnegative=artifact.clip_nonnegative,
        seed=artifact.seed,
    )


def check_provenance(artifact, args):
    """
    Compares matching settings requested on the command line with the
    artifact's; unset flags inherit the artifact's values.
    Raises ProvenanceMismatch unless --force is given.

    :type artifact: conformod.boxwise_conformal.CalibrationArtifact
    :type args: argparse.Namespace
    """
    requested = OrderedDict((
        ('iou_threshold', args.iou_threshold),
        ('objectness_threshold', args.objectness_threshold),
        ('matching_strategy', args.matching),
        ('class_id', args.class_id),
    ))
    resolved = OrderedDict(
        (field, getattr(artifact, field) if value is None else value)
        for field, value in requested.items()
    )

    if provenance_key(*resolved.values()) == artifact.provenance_key:
        return

    for field, value in resolved.items():
        if value != getattr(artifact, field):
            mismatch = errors.ProvenanceMismatch(
                field, getattr(artifact, field), value)

            if args.force:
                logger.warning('%s (forced)', mismatch)
                return

            raise mismatch


# --- subcommands ---

def cmd_split(args):
    manifest = dataio.load_ground_truth(args.ground_truth, args.format)
    split = dataio.split_dataset(
        manifest, args.n_cal, args.n_test, args.seed, args.n_fit)

    config = OrderedDict((
        ('n_fit', args.n_fit),
        ('n_cal', args.n_cal),
        ('n_test', args.n_test),
        ('seed', args.seed),
        ('format', args.format),
    ))

    dataio.save_split(
        split, args.out, config=config, inputs=_inputs(args.ground_truth))
    return EXIT_OK


def _run_config(args):
    return build_run_config(
        method=args.method,
        alpha=args.alpha,
        iou_threshold=args.iou_threshold,
        objectness_threshold=args.objectness_threshold,
        beta=args.beta,
        matching=args.matching,
        mode=args.mode,
        class_id=args.class_id,
        clip_nonnegative=args.clip_nonnegative,
        seed=args.seed,
    )


def cmd_calibrate(args):
    config = _run_config(args)
    records = _load_records(args, 'cal')

    provenance = {
        'fingerprint': dataio.ids_fingerprint(r.image_id for r in records),
        'inputs': _inputs(args.ground_truth, args.detections, args.split),
    }

    if CONFIG.get_method(config.method).family == 'boxwise':
        artifact = calibrate_boxwise(records, config, **provenance)
    else:
        artifact = calibrate_imagewise(records, config, **provenance)

    dataio.save_artifact(artifact, args.out, config=config)

    if not artifact.feasible:
        logger.error(
            '"%s" cannot be certified at alpha=%g: %s',
            artifact.method, artifact.alpha, artifact.infeasible_reason,
        )
        return EXIT_INFEASIBLE

    return EXIT_OK


def cmd_apply(args):
    artifact = dataio.load_artifact(args.artifact)
    check_provenance(artifact, args)

    manifest = dataio.load_ground_truth(args.ground_truth, args.format)
    detection_file = dataio.load_detections(
        args.detections, manifest, args.format)

    apply = apply_boxwise if artifact.family == 'boxwise' \
        else apply_imagewise

    inflated = OrderedDict()
    for image_id, dets in detection_file.detections.items():
        kept = matching.filter_detections(
            dets, artifact.objectness_threshold, artifact.class_id)
        inflated[image_id] = [
            det._replace(bbox=box)
            for det, box in zip(kept, apply(kept, artifact))
        ]

    dataio.save_detections(
        args.out,
        inflated,
        detector=detection_file.detector,
        config=_artifact_config(artifact),
        inputs=_inputs(args.artifact, args.ground_truth, args.detections),
    )
    return EXIT_OK


def cmd_evaluate(args):
    artifact = dataio.load_artifact(args.artifact)
    check_provenance(artifact, args)

    records = _load_records(args, 'test')
    report = metrics.evaluate(records, artifact)

    dataio.save_report(
        report,
        args.out,
        config=_artifact_config(artifact),
        inputs=_inputs(
            args.artifact, args.ground_truth, args.detections, args.split),
    )

    if args.csv:
        dataio.write_csv(
            [metrics.report_row(report)], args.csv, metrics.REPORT_FIELDS)

    return EXIT_OK if artifact.feasible else EXIT_INFEASIBLE


def cmd_compare(args):
    artifacts = [dataio.load_artifact(path) for path in args.artifacts]
    for artifact in artifacts:
        check_provenance(artifact, args)

    records = _load_records(args, 'test')
    reports = metrics.compare(records, artifacts)

    inputs = _inputs(
        *(list(args.artifacts)
          + [args.ground_truth, args.detections, args.split]))
    dataio.save_document(
        args.out,
        'comparison',
        reports,
        config=[_artifact_config(artifact) for artifact in artifacts],
        inputs=inputs,
    )

    if args.csv:
        dataio.write_csv(
            [metrics.report_row(report) for report in reports],
            args.csv,
            metrics.REPORT_FIELDS,
        )

    return EXIT_OK


def cmd_simulate(args):
    config = _run_config(args)
    params = synthetic.SceneParams(
        width=args.width,
        height=args.height,
        mean_boxes=args.mean_boxes,
        count_distribution=args.count_distribution,
    )
    noise = synthetic.DetectorNoiseModel(
        sigma=args.sigma,
        distribution=args.noise,
        bias=tuple(args.bias),
        relative_sigma=args.relative_sigma,
        scale_sigma=args.scale_sigma,
        p_fn=args.p_fn,
        p_fp=args.p_fp,
    )

    summary = synthetic.run_trials(
        args.n_trials,
        params,
        noise,
        config,
        args.n_cal,
        args.n_test,
        base_seed=args.seed,
        methods=args.methods,
        workers=args.workers,
    )

    dataio.save_document(args.out, 'trial_summary', summary, config=config)

    if args.csv:
        dataio.write_csv(
            synthetic.trial_rows(summary), args.csv, synthetic.TRIAL_COLUMNS)

    if args.summary_csv:
        dataio.write_csv(
            synthetic.summary_rows(summary),
            args.summary_csv,
            synthetic.SUMMARY_COLUMNS,
        )

    return EXIT_OK


# --- argument parsing ---

def _add_data_args(parser, split=True):
    parser.add_argument('--ground-truth', required=True,
                        help='dataset manifest (JSON)')
    parser.add_argument('--detections', help='detections file (JSON)')
    parser.add_argument('--format', choices=dataio.FORMATS, default='native',
                        help='input schema of both files')
    if split:
        parser.add_argument('--split', help='split file from "split"')


def _add_config_args(parser):
    parser.add_argument('--method', choices=CONFIG.method_names,
                        default=DEFAULT_METHOD)
    parser.add_argument('--alpha', type=float, default=0.1)
    parser.add_argument('--iou-threshold', type=float, default=0.3)
    parser.add_argument('--objectness-threshold', type=float, default=0.3)
    parser.add_argument('--beta', type=float, default=0.25,
                        help='uncovered fraction tolerated by hausdorff')
    parser.add_argument('--matching', choices=util.MATCHING_STRATEGIES,
                        default='greedy')
    parser.add_argument('--mode', choices=util.MARGIN_MODES,
                        help='margin mode of image-wise methods')
    parser.add_argument('--class-id', type=int)
    parser.add_argument('--clip-nonnegative', action='store_true',
                        help='never shrink boxes')
    parser.add_argument('--seed', type=int, default=0)


def _add_provenance_args(parser):
    parser.add_argument('--iou-threshold', type=float)
    parser.add_argument('--objectness-threshold', type=float)
    parser.add_argument('--matching', choices=util.MATCHING_STRATEGIES)
    parser.add_argument('--class-id', type=int)
    parser.add_argument('--force', action='store_true',
                        help='ignore provenance mismatches')


def build_parser():
    """
    :rtype: argparse.ArgumentParser
    """
    common = argparse.ArgumentParser(add_help=False)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true')
    verbosity.add_argument('-q', '--quiet', action='store_true')

    parser = argparse.ArgumentParser(
        prog='conformod',
        description='Conformal prediction and risk control for object '
                    'detection',
    )
    commands = parser.add_subparsers(dest='command')
    commands.required = True

    split = commands.add_parser('split', parents=[common],
                                help='seeded calibration/test split')
    _add_data_args(split, split=False)
    split.add_argument('--n-cal', type=int, required=True)
    split.add_argument('--n-test', type=int, required=True)
    split.add_argument('--n-fit', type=int, default=0)
    split.add_argument('--seed', type=int, default=0)
    split.add_argument('--out', required=True)
    split.set_defaults(handler=cmd_split)

    calibrate = commands.add_parser('calibrate', parents=[common],
                                    help='calibrate a method')
    _add_data_args(calibrate)
    _add_config_args(calibrate)
    calibrate.add_argument('--out', required=True)
    calibrate.set_defaults(handler=cmd_calibrate)

    apply = commands.add_parser('apply', parents=[common],
                                help='inflate detections with an artifact')
    _add_data_args(apply, split=False)
    _add_provenance_args(apply)
    apply.add_argument('--artifact', required=True)
    apply.add_argument('--out', required=True)
    apply.set_defaults(handler=cmd_apply)

    evaluate = commands.add_parser('evaluate', parents=[common],
                                   help='evaluate an artifact on test data')
    _add_data_args(evaluate)
    _add_provenance_args(evaluate)
    evaluate.add_argument('--artifact', required=True)
    evaluate.add_argument('--out', required=True)
    evaluate.add_argument('--csv', help='also write the report as CSV')
    evaluate.set_defaults(handler=cmd_evaluate)

    compare = commands.add_parser('compare', parents=[common],
                                  help='evaluate several artifacts')
    _add_data_args(compare)
    _add_provenance_args(compare)
    compare.add_argument('--artifacts', nargs='+', required=True)
    compare.add_argument('--out', required=True)
    compare.add_argument('--csv', help='one row per artifact')
    compare.set_defaults(handler=cmd_compare)

    simulate = commands.add_parser('simulate', parents=[common],
                                   help='Monte Carlo coverage trials')
    _add_config_args(simulate)
    simulate.add_argument('--methods', nargs='+', choices=CONFIG.method_names,
                          help='methods compared on the same draws '
                               '(default: --method)')
    simulate.add_argument('--n-trials', type=int, default=200)
    simulate.add_argument('--n-cal', type=int, default=1000)
    simulate.add_argument('--n-test', type=int, default=1000)
    simulate.add_argument('--workers', type=int, default=1)
    simulate.add_argument('--width', type=float, default=1280.0)
    simulate.add_argument('--height', type=float, default=720.0)
    simulate.add_argument('--mean-boxes', type=float, default=1.0)
    simulate.add_argument('--count-distribution',
                          choices=synthetic.COUNT_DISTRIBUTIONS,
                          default='poisson')
    simulate.add_argument('--sigma', type=float, default=2.0)
    simulate.add_argument('--noise', choices=synthetic.NOISE_DISTRIBUTIONS,
                          default='gaussian')
    simulate.add_argument('--bias', type=float, nargs=4,
                          default=[0.0, 0.0, 0.0, 0.0],
                          metavar=('XMIN', 'YMIN', 'XMAX', 'YMAX'),
                          help='per-side shrink (>0) or expand (<0) in px')
    simulate.add_argument('--relative-sigma', type=float, default=0.0)
    simulate.add_argument('--scale-sigma', type=float, default=0.0,
                          help='per-box shrink factor shared by all sides')
    simulate.add_argument('--p-fn', type=float, default=0.0)
    simulate.add_argument('--p-fp', type=float, default=0.0)
    simulate.add_argument('--out', required=True)
    simulate.add_argument('--csv', help='per-trial rows')
    simulate.add_argument('--summary-csv', help='per-method rows')
    simulate.set_defaults(handler=cmd_simulate)

    return parser


class CliHandler(logging.StreamHandler):
    """
    The stderr handler installed by ``main``
    """

    def __init__(self):
        super(CliHandler, self).__init__(sys.stderr)

        self.setFormatter(logging.Formatter(_LOG_FORMAT))


def _configure_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING

    root = logging.getLogger()

    # one stderr handler per process, whatever the number of main() calls
    for handler in list(root.handlers):
        if isinstance(handler, CliHandler):
            root.removeHandler(handler)

    root.addHandler(CliHandler())
    root.setLevel(level)


def main(argv=None):
    """
    Runs one subcommand and returns its exit code

    :type argv: list[str] | None
    :rtype: int
    """
    args = build_parser().parse_args(argv)
    _configure_logging(args)

    try:
        return args.handler(args)
    except errors.ProvenanceMismatch as err:
        logger.error('%s', err)
        return EXIT_PROVENANCE
    except (errors.InfeasibleArtifact, errors.NoMatchedPairs) as err:
        logger.error('%s', err)
        return EXIT_INFEASIBLE
    except errors.ConformodError as err:
        logger.error('%s', err)
        return EXIT_INPUT
    except (IOError, OSError) as err:
        logger.error('%s', err)
        return EXIT_INPUT
