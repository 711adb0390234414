"""Exception hierarchy shared by every decolab module."""

from __future__ import annotations


class DecolabError(Exception):
    """Base class for all errors raised by decolab."""


class DomainError(DecolabError, ValueError):
    """Input lies outside the domain where the requested quantity is defined."""


class PoleError(DecolabError, ArithmeticError):
    """Closed forms evaluated at (or too close to) a focusing divergence.

    ``pole_time`` is the nearest divergent duration, useful for nudging sweep
    grids away from it.
    """

    def __init__(self, message: str, pole_time: float | None = None):
        super().__init__(message)
        self.pole_time = pole_time


class NonIntegrableError(DecolabError, ArithmeticError):
    """The Gaussian propagation integral diverges."""


class SolverError(DecolabError, RuntimeError):
    """Base class for boundary-value solver failures."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class StiffnessError(SolverError):
    """Newton iteration stagnated; usually cured by more shooting segments."""


class NonConvergence(SolverError):
    """Continuation exhausted its step refinement without converging."""


class ExtrapolationError(DecolabError, ValueError):
    """Tabulated spectrum queried outside its table."""


class QuadratureError(DecolabError, ArithmeticError):
    """A principal-value integral did not reach its tolerance."""


class ParseError(DecolabError, ValueError):
    """Malformed configuration text or unknown key."""


class ValidationError(DecolabError, ValueError):
    """Configuration parsed but violates an invariant."""


class IoError(DecolabError, OSError):
    """An output file could not be written."""
