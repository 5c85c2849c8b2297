"""Exception types shared across the toolkit.

Every failure mode that callers are expected to handle gets its own class so
the CLI can map it to an exit code without string matching.
"""


class AeroguardError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(AeroguardError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(AeroguardError):
    """A documented precondition of an operation was violated."""


class ConfigError(AeroguardError):
    """A configuration value or file is invalid."""


class DependencyError(AeroguardError):
    """A required input artifact (trace set, prepared data, checkpoint) is missing."""


class NumericError(AeroguardError):
    """A numeric computation produced a non-finite or degenerate result."""


class LabelError(AeroguardError):
    """A class label is outside the valid range."""


class FormatError(AeroguardError):
    """A file does not conform to its declared on-disk format."""


class ChecksumError(FormatError):
    """Stored checksum does not match the recomputed one."""


class CompatibilityError(AeroguardError):
    """A stored artifact does not match the current configuration."""


class ChannelError(AeroguardError):
    """A requested sensor channel name does not exist."""


class DegenerateChannelError(AeroguardError):
    """A channel has (near) zero variance and cannot be normalized."""


class TrainingFault(NumericError):
    """Training hit a non-finite loss.

    Carries the last parameter snapshot that was still finite so the caller
    can persist it before giving up.
    """

    def __init__(self, message, last_good=None, epochs_completed=0, history=None):
        super().__init__(message)
        self.last_good = last_good
        self.epochs_completed = epochs_completed
        self.history = history or []
