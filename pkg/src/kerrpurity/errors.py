"""Exception types shared across the solvers and the harness."""


class KerrPurityError(Exception):
    """Base class for all package errors."""


class ConfigError(KerrPurityError, ValueError):
    """Invalid parameters or configuration."""


class TruncationOverflow(KerrPurityError):
    """Population leaked into the top Fock levels beyond tolerance."""

    def __init__(self, message, t=None, tail=None):
        super().__init__(message)
        self.t = t
        self.tail = tail


class NonFiniteState(KerrPurityError, FloatingPointError):
    """A state (density matrix, wavefunction or amplitude) became inf/nan."""

    def __init__(self, message, t=None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.trajectory = trajectory


class NoPeriod(KerrPurityError, ValueError):
    """The drive has no period, so a stroboscopic map is undefined."""


class EmptySelection(KerrPurityError, ValueError):
    """No sweep point satisfied the excitation band."""
