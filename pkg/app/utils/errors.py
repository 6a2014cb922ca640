"""(c) 2025, hybrid-sape authors.

Exception hierarchy shared by the services and the command line.
"""

from typing import Optional

EXIT_USAGE = 1
EXIT_DATA = 2


class SapeError(Exception):
    """Base class for every error the toolkit reports to the user."""

    exit_code: int = EXIT_DATA


class CorpusError(SapeError):
    """Malformed, unreadable or mismatched corpus files."""


class ConfigError(SapeError):
    """Unknown configuration key or a value of the wrong type."""

    exit_code = EXIT_USAGE


class ModelError(SapeError):
    """A model artifact is missing, unreadable or stale."""

    def __init__(self, message: str, artifact: Optional[str] = None):
        super().__init__(message)
        self.artifact = artifact


class AlignmentError(SapeError):
    """Alignment links that do not fit the sentence pair."""


class TrainingError(SapeError):
    """Training input that cannot produce a model (empty or degenerate)."""


class PipelineError(SapeError):
    """A pipeline stage failed; wraps the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", EXIT_DATA)
