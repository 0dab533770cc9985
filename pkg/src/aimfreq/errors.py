"""Exception hierarchy shared by all modules."""


class AimError(Exception):
    """Base class for every error raised by aimfreq."""


class InvalidArgumentError(AimError, ValueError):
    pass


class ConstraintViolationError(AimError, ValueError):
    """A geometric or physical precondition does not hold."""


class DimensionError(AimError, ValueError):
    pass


class IncompatibleGridError(AimError, ValueError):
    pass


class GridOverflowError(AimError, ValueError):
    """A baseline falls outside the u-v grid extent."""

    def __init__(self, message, baseline=None):
        super().__init__(message)
        self.baseline = baseline


class DegenerateInputError(AimError, ValueError):
    pass


class ConfigurationError(AimError, ValueError):
    pass


class UnrecoverableChannelError(AimError, RuntimeError):
    def __init__(self, index):
        super().__init__(f"receiver channel {index} carries ~zero power")
        self.index = index


class ValidationError(AimError, ValueError):
    """Experiment spec failed validation. ``problems`` lists field diagnostics."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ArtifactIOError(AimError, OSError):
    """An input artifact (raster, capture, spec) could not be read."""
