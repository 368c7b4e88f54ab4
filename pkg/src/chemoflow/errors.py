"""Exception hierarchy shared by the solver, stepper and harness."""


class ChemoflowError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(ChemoflowError, ValueError):
    """Non-finite or structurally invalid model parameters."""


class DomainError(ChemoflowError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class OutOfRegimeError(DomainError):
    """The diffusion exponent is outside the range where an estimate applies."""


class ShapeError(ChemoflowError, ValueError):
    """Field shapes do not match the grid or each other."""


class CFLViolation(ChemoflowError):
    """A requested explicit step exceeds its stability limit."""

    def __init__(self, message, cfl=None):
        super().__init__(message)
        self.cfl = cfl


class SolverError(ChemoflowError, RuntimeError):
    """An inner linear or fixed-point solver failed to converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StepRejected(ChemoflowError):
    """A sub-step produced a state violating positivity or the c bound."""


class BlowUpSuspected(ChemoflowError):
    """Too many consecutive dt halvings without an accepted step."""


class InvariantError(ChemoflowError, AssertionError):
    """A state invariant failed after an accepted step."""


class ConfigError(ChemoflowError, ValueError):
    """Malformed run configuration (unknown keys, wrong types)."""


class CheckpointFormatError(ChemoflowError, ValueError):
    """Corrupt or inconsistent checkpoint file."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class UnsupportedVersionError(CheckpointFormatError):
    """Checkpoint written by an unknown format version."""
