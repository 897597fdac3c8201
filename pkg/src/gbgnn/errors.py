"""Exception hierarchy shared by the whole pipeline.

Every error carries an ``exit_code`` so the CLI / service can map failures
uniformly: 2 = validation, 3 = data, 4 = runtime.
"""


class GbgnnError(Exception):
    exit_code = 4


class SpecError(GbgnnError):
    """A configuration or parameter combination that can never be valid."""

    exit_code = 2


class ConfigError(GbgnnError):
    """Bad flag/config-file combination at the command surface."""

    exit_code = 2


class IngestError(GbgnnError):
    """A required input file is missing or unreadable."""

    exit_code = 3


class SchemaError(GbgnnError):
    """Input files disagree with their declared shape/metadata."""

    exit_code = 3


class DataError(GbgnnError):
    """Input values violate bundle invariants (NaN features, bad labels...)."""

    exit_code = 3


class IoError(GbgnnError):
    """Output location cannot be written."""

    exit_code = 3


class EngineError(GbgnnError):
    """Granular-ball engine precondition failure."""

    exit_code = 4


class OracleError(GbgnnError):
    """A Monte-Carlo estimate is undefined (e.g. no agreeing trials)."""

    exit_code = 4


class ModelError(GbgnnError):
    """Shape mismatch or invalid state inside the trainer."""

    exit_code = 4


class TrainError(GbgnnError):
    """Training diverged; carries the epoch index."""

    exit_code = 4

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
