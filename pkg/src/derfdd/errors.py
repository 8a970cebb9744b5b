"""Exception hierarchy shared by every module."""


class DerFddError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DerFddError, ValueError):
    """A parameter or configuration value violates its contract."""


class NumericDomainError(DerFddError, ValueError):
    """Non-finite or otherwise out-of-domain numeric input."""


class ScheduleError(DerFddError, ValueError):
    """Malformed fault specification or scenario schedule."""


class RangeError(DerFddError, ValueError):
    """A query falls outside the valid time range."""


class SimulationError(DerFddError, RuntimeError):
    """The integrator produced a non-finite state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EmptyDatasetError(DerFddError, ValueError):
    """Not enough samples to build a single window."""


class ContractError(DerFddError, ValueError):
    """Shapes, caches or model inputs do not match what the caller promised."""


class TrainingError(DerFddError, RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class MissingArtifactError(DerFddError, FileNotFoundError):
    """A CLI command needs an artifact that has not been produced yet."""
