"""Domain errors.

Every error carries a stable ``code`` string used by the CLI for
machine-parseable one-line reports (``error: <Code>: <message>``).
"""

from __future__ import annotations


class DinobotError(Exception):
    """Base class for all domain errors raised by this package."""

    code = "Error"


class DuplicateIdError(DinobotError):
    code = "DuplicateId"


class InvalidRecordError(DinobotError):
    """An invariant violation on a value object, with the offending field named."""

    code = "InvalidRecord"

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class BufferIOError(DinobotError):
    code = "IoError"


class FormatVersionMismatchError(DinobotError):
    code = "FormatVersionMismatch"


class CorruptRecordError(DinobotError):
    code = "CorruptRecord"

    def __init__(self, record_id: str, message: str):
        super().__init__(f"{record_id}: {message}")
        self.record_id = record_id


class ZeroNormError(DinobotError):
    code = "ZeroNorm"


class DimensionMismatchError(DinobotError):
    code = "DimensionMismatch"


class EmptyTaskSubsetError(DinobotError):
    code = "EmptyTaskSubset"


class EmptyTestSetError(DinobotError):
    code = "EmptyTestSet"


class UnfamiliarObjectError(DinobotError):
    """Top retrieval similarity fell below the configured novelty threshold."""

    code = "UnfamiliarObject"


class IndexOutOfRangeError(DinobotError):
    code = "IndexOutOfRange"


class NoValidPairsError(DinobotError):
    code = "NoValidPairs"


class TooFewPointsError(DinobotError):
    code = "TooFewPoints"


class DegenerateConfigurationError(DinobotError):
    code = "DegenerateConfiguration"


class InsufficientMatchesError(DinobotError):
    code = "InsufficientMatches"


class EnvMotionFaultError(DinobotError):
    code = "EnvMotionFault"


class PoseOverlapError(DinobotError):
    code = "PoseOverlap"


class ConfigError(DinobotError):
    code = "ConfigError"
