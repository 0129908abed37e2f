"""Exception types raised by the solvers."""


class WavebeamError(Exception):
    """Base class for all package errors."""


class NonConvergence(WavebeamError):
    """Newton iteration or a continuation step failed to converge."""


class SingularJacobian(WavebeamError):
    """The (bordered) Jacobian is numerically singular.

    Usually means the iterate sits on or near a bifurcation point.
    """


class WindowViolation(WavebeamError, ValueError):
    """Frequency lies outside the open window of a two-mode family."""


class NotReducible(WavebeamError, ValueError):
    """Mode set produces couplings beyond the ``c_i * c_j**2`` pattern."""


class StepCountTooSmall(WavebeamError):
    """Monodromy integration lost symplecticity at the requested step count."""
