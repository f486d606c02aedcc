"""Domain errors.

Every error carries a stable ``code`` string used by the CLI for
machine-parseable one-line reports (``error: <Code>: <message>``).
"""

from __future__ import annotations


class ExporterError(Exception):
    """Base class for all domain errors raised by this package."""

    code = "Error"


class ConfigError(ExporterError):
    code = "Config"


class ModelLoadFailure(ExporterError):
    """The requested backbone cannot be built; nothing gets exported."""

    code = "ModelLoadFailure"


class UnreadableImage(ExporterError):
    """A single input that cannot be decoded; the rest of the batch continues."""

    code = "UnreadableImage"

    def __init__(self, path, message: str):
        super().__init__(f"{path}: {message}")
        self.path = str(path)
