"""
Ingestion, validation, splitting and persistence of datasets,
detections, artifacts and reports
"""

from __future__ import absolute_import
from __future__ import unicode_literals

import hashlib
import io
import json
import logging
import math
from collections import OrderedDict
from collections import namedtuple

import numpy as np
import pandas as pd

from . import errors
from . import geometry
from .boxwise_conformal import ARTIFACT_FIELDS
from .boxwise_conformal import CalibrationArtifact
from .imagewise_crc import ImageRecord
from .matching import Detection
from .metrics import REPORT_FIELDS
from .metrics import EvalReport

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

FORMATS = ('native', 'coco')

_SPECIAL_FLOATS = {'inf': float('inf'), '-inf': float('-inf')}

# fields that may hold "inf"; every other string is left alone
_ARTIFACT_NUMBERS = ('alpha', 'quantiles', 'lambda_hat', 'beta')

_REPORT_NUMBERS = (
    'alpha', 'empirical_coverage', 'empirical_risk', 'mean_stretch',
)

ManifestEntry = namedtuple(
    'ManifestEntry',
    (
        'image_id',
        'width',
        'height',
        'file',
        'ground_truths',
        'gt_class_ids',
    ),
)

DatasetManifest = namedtuple('DatasetManifest', ('images', 'schema_version'))

DetectionFile = namedtuple(
    'DetectionFile', ('detector', 'detections', 'schema_version'))

Split = namedtuple('Split', ('fit', 'cal', 'test', 'seed'))


# --- reading ---

def fingerprint(path):
    """
    sha256 of the file content

    :rtype: str
    """
    digest = hashlib.sha256()

    with open(path, 'rb') as stream:
        for chunk in iter(lambda: stream.read(1 << 16), b''):
            digest.update(chunk)

    return digest.hexdigest()


def ids_fingerprint(image_ids):
    """
    sha256 over an ordered list of image ids

    :rtype: str
    """
    payload = json.dumps([str(i) for i in image_ids])
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


def _read_json(path):
    try:
        with io.open(path, 'r', encoding='utf-8') as stream:
            return json.load(stream)
    except ValueError as err:
        if isinstance(err, json.JSONDecodeError):
            raise errors.ParseError(path, err.lineno, err.colno, err.msg)
        raise errors.ParseError(path, reason=str(err))
    except (IOError, OSError) as err:
        raise errors.ParseError(path, reason=err.strerror or str(err))


def _check_schema(path, doc):
    if not isinstance(doc, dict):
        raise errors.ParseError(path, reason='top-level object expected')

    found = doc.get('schema_version')
    if found != SCHEMA_VERSION:
        raise errors.SchemaVersionError(path, found, SCHEMA_VERSION)


def _check_format(fmt):
    if fmt not in FORMATS:
        raise errors.InvalidParameter('format', fmt, FORMATS)


def _parse_box(record, coords, fmt):
    try:
        values = [float(c) for c in coords]
    except (TypeError, ValueError):
        raise errors.ValidationError(record, 'bbox must hold 4 numbers')

    if len(values) != 4:
        raise errors.ValidationError(record, 'bbox must hold 4 numbers')

    if fmt == 'coco':
        x, y, w, h = values
        values = [x, y, x + w, y + h]

    try:
        return geometry.bbox(*values)
    except errors.GeometryError as err:
        raise errors.ValidationError(record, str(err))


def _check_frame(image_id, box, width, height):
    # one image frame of slack on every side
    if box.x_min < -width or box.y_min < -height \
            or box.x_max > 2 * width or box.y_max > 2 * height:
        logger.warning(
            'image "%s": box %s lies outside the frame %sx%s',
            image_id, tuple(box), width, height,
        )


def _check_dims(image_id, width, height):
    try:
        width, height = float(width), float(height)
    except (TypeError, ValueError):
        raise errors.ValidationError(image_id, 'width/height must be numbers')

    if not (math.isfinite(width) and math.isfinite(height)) \
            or width <= 0 or height <= 0:
        raise errors.ValidationError(image_id, 'width/height must be > 0')

    return width, height


def _build_entry(image_id, width, height, file_ref, raw_boxes, fmt):
    width, height = _check_dims(image_id, width, height)

    boxes, classes = [], []
    for coords, class_id in raw_boxes:
        box = _parse_box(image_id, coords, fmt)
        _check_frame(image_id, box, width, height)

        if geometry.area(box) <= 0:
            logger.warning(
                'image "%s": zero-area ground truth %s counts as covered',
                image_id, tuple(box),
            )

        boxes.append(box)
        classes.append(class_id)

    # single-class data carries no class ids at all
    if all(c is None for c in classes):
        classes = []
    else:
        classes = [int(c or 0) for c in classes]

    return ManifestEntry(
        image_id=image_id,
        width=width,
        height=height,
        file=file_ref,
        ground_truths=tuple(boxes),
        gt_class_ids=tuple(classes),
    )


def _objects(record, items, what):
    """
    ``items`` as a list of JSON objects; anything else is a ValidationError
    """
    if items is None:
        return []

    if not isinstance(items, list):
        raise errors.ValidationError(record, '"{}" must be a list'.format(what))

    for item in items:
        if not isinstance(item, dict):
            raise errors.ValidationError(
                record, '"{}" entries must be objects, got {!r}'.format(
                    what, item))

    return items


def _native_entries(path, doc):
    _check_schema(path, doc)

    for item in _objects(path, doc.get('images'), 'images'):
        image_id = item.get('image_id')
        if image_id is None:
            raise errors.ValidationError('?', 'image_id is missing')

        yield _build_entry(
            str(image_id),
            item.get('width'),
            item.get('height'),
            item.get('file'),
            [
                (gt.get('bbox'), gt.get('class_id'))
                for gt in _objects(
                    image_id, item.get('ground_truths'), 'ground_truths')
            ],
            'native',
        )


def _coco_entries(path, doc):
    annotations = OrderedDict()
    for ann in _objects(path, doc.get('annotations'), 'annotations'):
        annotations.setdefault(str(ann.get('image_id')), []).append(
            (ann.get('bbox'), ann.get('category_id')))

    for item in _objects(path, doc.get('images'), 'images'):
        image_id = str(item.get('id'))

        yield _build_entry(
            image_id,
            item.get('width'),
            item.get('height'),
            item.get('file_name'),
            annotations.pop(image_id, []),
            'coco',
        )

    for image_id in annotations:
        raise errors.ValidationError(
            image_id, 'annotation references an unknown image')


def load_ground_truth(path, fmt='native'):
    """
    Loads and validates a dataset manifest.
    ``fmt='coco'`` reads a COCO annotation file with (x, y, w, h) boxes.

    :type path: str
    :type fmt: str
    :rtype: DatasetManifest
    """
    _check_format(fmt)
    doc = _read_json(path)

    if fmt == 'coco':
        if not isinstance(doc, dict):
            raise errors.ParseError(path, reason='top-level object expected')
        entries = list(_coco_entries(path, doc))
    else:
        entries = list(_native_entries(path, doc))

    seen = set()
    for entry in entries:
        if entry.image_id in seen:
            raise errors.ValidationError(entry.image_id, 'duplicate image_id')
        seen.add(entry.image_id)

    manifest = DatasetManifest(images=tuple(entries),
                               schema_version=SCHEMA_VERSION)

    logger.info(
        'loaded %d images with %d ground truths from "%s"',
        len(entries), sum(len(e.ground_truths) for e in entries), path,
    )

    return manifest


def _parse_detection(image_id, raw, fmt):
    box = _parse_box(image_id, raw.get('bbox'), fmt)

    score = raw.get('score' if fmt == 'coco' else 'objectness')
    try:
        score = float(score)
    except (TypeError, ValueError):
        raise errors.ValidationError(image_id, 'objectness must be a number')

    if not 0.0 <= score <= 1.0:
        raise errors.ValidationError(
            image_id, 'objectness {} is outside [0, 1]'.format(score))

    class_id = raw.get('category_id' if fmt == 'coco' else 'class_id')

    return Detection(
        bbox=box,
        objectness=score,
        class_id=int(class_id or 0),
    )


def load_detections(path, manifest, fmt='native'):
    """
    Loads per-image detections; every image id must be in the manifest,
    manifest images absent from the file get no detection.
    ``fmt='coco'`` reads a COCO results list.

    :type path: str
    :type manifest: DatasetManifest
    :type fmt: str
    :rtype: DetectionFile
    """
    _check_format(fmt)
    doc = _read_json(path)

    known = OrderedDict((entry.image_id, entry) for entry in manifest.images)
    grouped = OrderedDict((image_id, []) for image_id in known)
    detector = None

    if fmt == 'coco':
        if not isinstance(doc, list):
            raise errors.ParseError(path, reason='list of results expected')
        raw_items = [
            (str(raw.get('image_id')), raw)
            for raw in _objects(path, doc, 'results')
        ]
    else:
        _check_schema(path, doc)
        detector = doc.get('detector')

        per_image = doc.get('detections') or {}
        if not isinstance(per_image, dict):
            raise errors.ValidationError(
                path, '"detections" must map image ids to lists')

        raw_items = [
            (str(image_id), raw)
            for image_id, dets in per_image.items()
            for raw in _objects(image_id, dets, 'detections')
        ]

    for image_id, raw in raw_items:
        if image_id not in known:
            raise errors.ValidationError(
                image_id, 'image is not in the manifest')

        det = _parse_detection(image_id, raw, fmt)
        entry = known[image_id]
        _check_frame(image_id, det.bbox, entry.width, entry.height)
        grouped[image_id].append(det)

    logger.info(
        'loaded %d detections for %d images from "%s"',
        len(raw_items), len(grouped), path,
    )

    return DetectionFile(
        detector=detector,
        detections=OrderedDict(
            (image_id, tuple(dets)) for image_id, dets in grouped.items()),
        schema_version=SCHEMA_VERSION,
    )


def build_records(manifest, detection_file=None, image_ids=None):
    """
    Joins manifest and detections into image records, in ``image_ids``
    order when given, manifest order otherwise

    :type manifest: DatasetManifest
    :type detection_file: DetectionFile | None
    :type image_ids: list[str] | None
    :rtype: list[ImageRecord]
    """
    entries = OrderedDict((entry.image_id, entry) for entry in manifest.images)
    detections = detection_file.detections if detection_file else {}

    if image_ids is None:
        image_ids = list(entries)

    records = []
    for image_id in image_ids:
        entry = entries.get(image_id)
        if entry is None:
            raise errors.ValidationError(
                image_id, 'image is not in the manifest')

        records.append(ImageRecord(
            image_id=entry.image_id,
            width=entry.width,
            height=entry.height,
            ground_truths=entry.ground_truths,
            detections=detections.get(image_id, ()),
            gt_class_ids=entry.gt_class_ids,
        ))

    return records


# --- splitting ---

def split_dataset(manifest, n_cal, n_test, seed=0, n_fit=0):
    """
    Seeded shuffle then prefix split into calibration, test and
    (optionally) fit ids

    :type manifest: DatasetManifest
    :type n_cal: int
    :type n_test: int
    :type seed: int
    :type n_fit: int
    :rtype: Split
    """
    ids = [entry.image_id for entry in manifest.images]
    requested = n_cal + n_test + n_fit

    if min(n_cal, n_test, n_fit) < 0 or requested > len(ids):
        raise errors.SizeError(requested, len(ids))

    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]

    split = Split(
        cal=tuple(shuffled[:n_cal]),
        test=tuple(shuffled[n_cal:n_cal + n_test]),
        fit=tuple(shuffled[n_cal + n_test:requested]),
        seed=int(seed),
    )

    logger.info(
        'split %d images into cal=%d test=%d fit=%d (seed %d)',
        len(ids), len(split.cal), len(split.test), len(split.fit), seed,
    )

    return split


# --- persistence ---

def encode(value):
    """
    JSON-ready copy of ``value``; infinities become "inf"/"-inf"
    """
    if hasattr(value, '_asdict'):
        return OrderedDict(
            (key, encode(item)) for key, item in value._asdict().items())

    if isinstance(value, dict):
        return OrderedDict((str(key), encode(item))
                           for key, item in value.items())

    if isinstance(value, (list, tuple)):
        return [encode(item) for item in value]

    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value

    if isinstance(value, np.integer):
        return int(value)

    if isinstance(value, np.bool_):
        return bool(value)

    return value


def decode(value):
    """
    Inverse of ``encode`` for special floats
    """
    if isinstance(value, dict):
        return OrderedDict((key, decode(item)) for key, item in value.items())

    if isinstance(value, list):
        return [decode(item) for item in value]

    if isinstance(value, str) and value in _SPECIAL_FLOATS:
        return _SPECIAL_FLOATS[value]

    return value


def _write_document(path, kind, body, **extra):
    doc = OrderedDict((
        ('schema_version', SCHEMA_VERSION),
        ('kind', kind),
    ))
    doc.update((key, encode(value)) for key, value in extra.items())
    doc[kind] = encode(body)

    with io.open(path, 'w', encoding='utf-8') as stream:
        stream.write(json.dumps(doc, indent=2, allow_nan=False))
        stream.write('\n')


def _read_document(path, kind, numeric=()):
    """
    Body of a document of the given kind; special floats are decoded in
    the ``numeric`` fields only, strings elsewhere stay as written
    """
    doc = _read_json(path)
    _check_schema(path, doc)

    if doc.get('kind') != kind or not isinstance(doc.get(kind), dict):
        raise errors.ParseError(path, reason='not a {} file'.format(kind))

    body = OrderedDict(doc[kind])
    for field in numeric:
        if field in body:
            body[field] = decode(body[field])

    return body


def save_artifact(artifact, path, config=None):
    """
    :type artifact: CalibrationArtifact
    :type config: conformod.config.RunConfig | None
    """
    extra = {'config': config} if config is not None else {}
    _write_document(path, 'calibration_artifact', artifact, **extra)


def load_artifact(path):
    """
    :rtype: CalibrationArtifact
    """
    body = _read_document(path, 'calibration_artifact', _ARTIFACT_NUMBERS)

    missing = [field for field in ARTIFACT_FIELDS if field not in body]
    if missing:
        raise errors.ParseError(
            path, reason='missing fields {}'.format(', '.join(missing)))

    values = dict((field, body[field]) for field in ARTIFACT_FIELDS)
    if values['quantiles'] is not None:
        values['quantiles'] = tuple(values['quantiles'])
    values['inputs'] = dict(values['inputs'] or {})

    return CalibrationArtifact(**values)


def save_report(report, path, config=None, inputs=None):
    """
    :type report: EvalReport
    """
    extra = {}
    if config is not None:
        extra['config'] = config
    if inputs is not None:
        extra['inputs'] = inputs

    _write_document(path, 'eval_report', report, **extra)


def load_report(path):
    """
    :rtype: EvalReport
    """
    body = _read_document(path, 'eval_report', _REPORT_NUMBERS)

    missing = [field for field in REPORT_FIELDS if field not in body]
    if missing:
        raise errors.ParseError(
            path, reason='missing fields {}'.format(', '.join(missing)))

    return EvalReport(**dict((field, body[field]) for field in REPORT_FIELDS))


def save_split(split, path, config=None, inputs=None):
    """
    :type split: Split
    :type config: dict | None
    """
    extra = OrderedDict()
    if config is not None:
        extra['config'] = config
    if inputs is not None:
        extra['inputs'] = inputs

    _write_document(path, 'split', split, **extra)


def load_split(path):
    """
    :rtype: Split
    """
    body = _read_document(path, 'split')

    return Split(
        fit=tuple(body.get('fit', ())),
        cal=tuple(body.get('cal', ())),
        test=tuple(body.get('test', ())),
        seed=body.get('seed'),
    )


def save_document(path, kind, body, **extra):
    """
    Writes any namedtuple-based result under the common envelope
    """
    _write_document(path, kind, body, **extra)


def save_detections(path, detections, detector=None, **extra):
    """
    Writes per-image detections in the native schema; ``extra`` keys
    (config, inputs) sit beside the detections and are ignored on load

    :type detections: dict[str, list[Detection]]
    """
    body = OrderedDict(
        (image_id, [
            OrderedDict((
                ('bbox', list(det.bbox)),
                ('objectness', det.objectness),
                ('class_id', det.class_id),
            ))
            for det in dets
        ])
        for image_id, dets in detections.items()
    )
    doc = OrderedDict((
        ('schema_version', SCHEMA_VERSION),
        ('detector', detector),
    ))
    doc.update((key, encode(value)) for key, value in extra.items())
    doc['detections'] = encode(body)

    with io.open(path, 'w', encoding='utf-8') as stream:
        stream.write(json.dumps(doc, indent=2, allow_nan=False))
        stream.write('\n')


def write_csv(rows, path, columns):
    """
    Writes rows (mappings) with a fixed column order

    :type rows: list[dict]
    :type columns: tuple[str]
    """
    frame = pd.DataFrame(
        [encode(row) for row in rows], columns=list(columns))
    frame.to_csv(path, index=False)
