"""
Exception hierarchy for calib7.

Every exception carries the exit code the command-line front end maps it to.
"""


class Calib7Error(Exception):
    """Base class for all library errors."""
    exit_code = 1


class InputError(Calib7Error):
    """Malformed input: a value violates a documented invariant."""
    exit_code = 2


class PreconditionError(Calib7Error):
    """Input is well formed but outside the domain of the requested operation."""
    exit_code = 3


class CheckFailure(Calib7Error):
    """A verification ran and its residual exceeded tolerance."""
    exit_code = 1


class InternalConsistencyError(Calib7Error):
    """A computed object left the space it must live in (e.g. bracket leaves g2)."""
    exit_code = 1


class GradeError(InputError):
    pass


class ArityError(InputError):
    pass


class RelationError(InputError):
    """Raised when (theta, beta) violate the quaternionic relation."""

    def __init__(self, component: str, residual: float):
        self.component = component
        self.residual = residual
        super().__init__(f"quaternionic relation violated in component {component} (residual {residual:.3e})")


class FrameInvariantError(InputError):
    """Frame fails orthonormality or phi-adaptation."""


class UnitaryError(InputError):
    pass


class BoundaryNodeError(PreconditionError):
    pass


class DegenerateFrameError(PreconditionError):
    pass


class BranchPointError(PreconditionError):
    pass


class SingularParameterError(InputError):
    """Profile parameter sits on an asymptote."""

    def __init__(self, t: float, asymptote: str):
        self.t = t
        self.asymptote = asymptote
        super().__init__(f"t = {t!r} is singular: {asymptote}")


class GaugeDiscontinuityError(PreconditionError):
    pass


class NotCRError(PreconditionError):
    pass


class UnadaptedBaseError(PreconditionError):
    pass
