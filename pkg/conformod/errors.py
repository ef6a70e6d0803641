"""
Exception classes used in conformod
"""

from __future__ import absolute_import
from __future__ import unicode_literals


class ConformodError(Exception):
    """
    Base exception class for the whole package
    """


class ConfigError(ConformodError):
    """
    Base exception class for configuration errors
    """


class GeometryError(ConformodError):
    """
    Base exception class for box geometry errors
    """


class CalibrationError(ConformodError):
    """
    Base exception class for calibration and inference errors
    """


class DataError(ConformodError):
    """
    Base exception class for ingestion and persistence errors
    """


# --- config errors ---

class MethodNotFound(ConfigError):
    """
    Error issued when requested conformal method is not registered
    """

    def __init__(self, name):
        super(MethodNotFound, self).__init__(
            'method with name "{}" is not registered'.format(name)
        )


class MethodAlreadyRegistered(ConfigError):
    """
    Error issued when method with the same name is already registered
    """

    def __init__(self, name):
        super(MethodAlreadyRegistered, self).__init__(
            'method with name "{}" is already registered'.format(name)
        )


class UnsupportedMode(ConfigError):
    """
    Error issued when margin mode is neither additive nor multiplicative
    """

    def __init__(self, mode):
        super(UnsupportedMode, self).__init__(
            'unsupported margin mode "{}"'.format(mode)
        )


class UnsupportedStrategy(ConfigError):
    """
    Error issued when matching strategy is unknown
    """

    def __init__(self, strategy):
        super(UnsupportedStrategy, self).__init__(
            'unsupported matching strategy "{}"'.format(strategy)
        )


class UnsupportedLoss(ConfigError):
    """
    Error issued when risk-control loss is unknown
    """

    def __init__(self, loss):
        super(UnsupportedLoss, self).__init__(
            'unsupported loss "{}"'.format(loss)
        )


class InvalidParameter(ConfigError):
    """
    Error issued when a numeric parameter is out of its range
    """

    def __init__(self, name, value, expected):
        super(InvalidParameter, self).__init__(
            'invalid value {!r} for "{}": expected {}'.format(
                value, name, expected,
            )
        )


class ConflictingConfigParams(ConfigError):
    """
    Error issued when explicit margin mode contradicts the method
    """

    def __init__(self, method, mode):
        super(ConflictingConfigParams, self).__init__(
            'wrong arguments:'
            ' method "{method}" implies its own margin mode,'
            ' "{mode}" conflicts with it'.format(method=method, mode=mode)
        )


# --- geometry errors ---

class InvalidBox(GeometryError):
    """
    Error issued when box coordinates are inverted or not finite
    """

    def __init__(self, coords, reason):
        super(InvalidBox, self).__init__(
            'invalid box {}: {}'.format(tuple(coords), reason)
        )


class DegeneratePrediction(GeometryError):
    """
    Error issued when a prediction with zero width or height is scaled
    """

    def __init__(self, box):
        super(DegeneratePrediction, self).__init__(
            'prediction {} has zero width or height'.format(tuple(box))
        )


# --- calibration errors ---

class NoMatchedPairs(CalibrationError):
    """
    Error issued when calibration data yields no matched pair
    """

    def __init__(self, n_images):
        super(NoMatchedPairs, self).__init__(
            'no prediction matched any ground truth'
            ' over {} calibration images'.format(n_images)
        )


class InfeasibleArtifact(CalibrationError):
    """
    Error issued on attempt to apply an artifact that certifies nothing
    """

    def __init__(self, method, reason=None):
        super(InfeasibleArtifact, self).__init__(
            'artifact "{}" is infeasible{}'.format(
                method,
                ('' if not reason else ': {}'.format(reason)),
            )
        )


class WrongArtifactKind(CalibrationError):
    """
    Error issued when an artifact is used by a method it was not made for
    """

    def __init__(self, method, expected):
        super(WrongArtifactKind, self).__init__(
            'artifact "{}" is not {}'.format(method, expected)
        )


class ProvenanceMismatch(CalibrationError):
    """
    Error issued when an artifact was calibrated with other thresholds
    """

    def __init__(self, field, calibrated, requested):
        super(ProvenanceMismatch, self).__init__(
            'artifact was calibrated with {field}={calibrated!r},'
            ' run requests {field}={requested!r}'.format(
                field=field,
                calibrated=calibrated,
                requested=requested,
            )
        )


# --- data errors ---

class ParseError(DataError):
    """
    Error issued when an input file is not valid JSON
    """

    def __init__(self, path, line=None, column=None, reason=None):
        position = ''
        if line is not None:
            position = ':{}:{}'.format(line, column)

        super(ParseError, self).__init__(
            'unable to parse "{}"{}{}'.format(
                path,
                position,
                ('' if not reason else ': {}'.format(reason)),
            )
        )


class ValidationError(DataError):
    """
    Error issued on the first offending record of an input file
    """

    def __init__(self, record, reason):
        super(ValidationError, self).__init__(
            'invalid record "{}": {}'.format(record, reason)
        )


class SizeError(DataError):
    """
    Error issued when a split requests more images than available
    """

    def __init__(self, requested, available):
        super(SizeError, self).__init__(
            'split requests {} images, dataset has {}'.format(
                requested, available,
            )
        )


class SchemaVersionError(DataError):
    """
    Error issued when a file was written with an unsupported schema
    """

    def __init__(self, path, found, expected):
        super(SchemaVersionError, self).__init__(
            '"{}" has schema_version {!r}, expected {!r}'.format(
                path, found, expected,
            )
        )
