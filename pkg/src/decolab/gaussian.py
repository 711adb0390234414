"""Gaussian reduced density matrices and their harmonic propagation.

A state is parametrized as

    rho(x, xd) = N exp(-q2 x^2/2 - r2 xd^2/2 + i s2 x xd)

in the mean/difference coordinates.  ``kappa = sqrt(r2/q2)`` measures the
mixed component; ``kappa = 1/2`` is a pure wave packet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from decolab.errors import DomainError, NonIntegrableError, PoleError
from decolab.harmonic import QuadraticAction, bilinear_coefficients, quadratic_action
from decolab.model import ModelParams

__all__ = [
    "GaussianState",
    "Suppression",
    "AsymptoticState",
    "Mixedness",
    "propagate",
    "evolve",
    "evolve_series",
    "instantaneous_suppression",
    "asymptotic_state",
    "mixedness",
    "RELAX_STEP",
]

# default composition step in units of 1/nu
RELAX_STEP = 0.37


@dataclass(frozen=True)
class GaussianState:
    q2: float
    r2: float
    s2: float = 0.0
    norm: float | None = None

    def __post_init__(self):
        if not (self.q2 > 0 and self.r2 > 0):
            raise DomainError(f"need q2 > 0 and r2 > 0, got q2={self.q2}, r2={self.r2}")
        if not math.isfinite(self.s2):
            raise DomainError("s2 must be finite")
        if self.norm is None:
            object.__setattr__(self, "norm", math.sqrt(self.q2 / (2.0 * math.pi)))

    @classmethod
    def from_kappa(cls, q2: float, kappa: float, s2: float = 0.0) -> "GaussianState":
        return cls(q2, kappa * kappa * q2, s2)

    @classmethod
    def ground_state(cls, model: ModelParams) -> "GaussianState":
        if model.omega <= 0:
            raise DomainError("ground state needs omega > 0")
        q2 = 2.0 * model.m * model.omega / model.hbar
        return cls(q2, 0.25 * q2)

    @property
    def kappa(self) -> float:
        return math.sqrt(self.r2 / self.q2)

    @property
    def is_physical(self) -> bool:
        return self.kappa >= 0.5 - 1e-12

    def density(self, x, xd):
        x = np.asarray(x)
        xd = np.asarray(xd)
        return self.norm * np.exp(-0.5 * self.q2 * x**2 - 0.5 * self.r2 * xd**2 + 1j * self.s2 * x * xd)


@dataclass(frozen=True)
class Suppression:
    D_inst: float
    ell_id: float


@dataclass(frozen=True)
class AsymptoticState:
    q2_inf: float
    r2_inf: float
    ell_id_inf: float
    ell_id2_inf: float  # may be negative; ell_id_inf is nan then
    ell_id_real: bool
    positivity_ok: bool

    @property
    def kappa_inf(self) -> float:
        return math.sqrt(self.r2_inf / self.q2_inf)


@dataclass(frozen=True)
class Mixedness:
    kappa: float
    purity: float


def propagate(state: GaussianState, qa: QuadraticAction, hbar: float = 1.0) -> GaussianState:
    """Push ``state`` through the propagator ``exp(i S/hbar)`` of duration ``qa.t``.

    The double Gaussian integral over the initial coordinates is done by
    completing the square; the trace is re-imposed afterwards.
    """
    a, b, c = bilinear_coefficients(qa)
    if not all(math.isfinite(v) for v in (a, b, c, qa.D_i, qa.D_f, qa.D_m)):
        raise PoleError(f"propagator coefficients are not finite at t={qa.t}", pole_time=qa.t)
    q2, r2, s2 = state.q2, state.r2, state.s2
    sigma = s2 + a / hbar
    a_yy = r2 + qa.D_i / hbar
    if not a_yy > 0:
        raise NonIntegrableError(f"difference-coordinate weight r2 + D_i/hbar = {a_yy} is not positive")
    h2 = hbar * hbar
    det = q2 * a_yy + sigma * sigma
    q2n = q2 * b * b / (h2 * det)
    r2n = qa.D_f / hbar + (a_yy * c * c - 2.0 * sigma * c * qa.D_m - q2 * qa.D_m**2) / (h2 * det)
    s2n = a / hbar - b * (sigma * c + q2 * qa.D_m) / (h2 * det)
    if not (q2n > 0 and r2n > 0):
        raise NonIntegrableError(f"propagated state is not normalizable (q2={q2n}, r2={r2n})")
    return GaussianState(q2n, r2n, s2n)


def _steps(model: ModelParams, t: float, dt_max: float) -> tuple[int, QuadraticAction]:
    n = max(1, math.ceil(t / dt_max - 1e-12))
    for _ in range(64):
        try:
            return n, quadratic_action(model, t / n)
        except PoleError:
            n += 1
    raise PoleError(f"no pole-free subdivision of t={t} found", pole_time=t)


def _default_step(model: ModelParams) -> float:
    scale = max(model.nu, model.omega, 1e-300)
    return RELAX_STEP / scale


def evolve(state: GaussianState, model: ModelParams, t: float, dt_max: float | None = None) -> GaussianState:
    """Evolve by ``t`` through repeated composition of equal pole-free steps."""
    if t < 0:
        raise DomainError(f"duration must be non-negative, got {t}")
    if t == 0:
        return state
    n, qa = _steps(model, t, dt_max or _default_step(model))
    for _ in range(n):
        state = propagate(state, qa, model.hbar)
    return state


def evolve_series(
    state: GaussianState, model: ModelParams, times, dt_max: float | None = None
) -> list[GaussianState]:
    """States at each of the increasing ``times`` (measured from the initial state)."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise DomainError("times must be non-negative and increasing")
    out = []
    cur, now = state, 0.0
    for t in times:
        cur = evolve(cur, model, float(t) - now, dt_max)
        now = float(t)
        out.append(cur)
    return out


def instantaneous_suppression(state: GaussianState, x_plus: float, x_minus: float) -> Suppression:
    inv_len2 = max(state.r2 - 0.25 * state.q2, 0.0)
    dx = x_plus - x_minus
    ell = math.inf if inv_len2 == 0 else 1.0 / math.sqrt(inv_len2)
    return Suppression(math.exp(-0.5 * dx * dx * inv_len2), ell)


def asymptotic_state(model: ModelParams) -> AsymptoticState:
    if model.nu <= 0 or model.omega <= 0:
        raise DomainError("asymptotic state needs nu > 0 and omega > 0")
    dp = model.d_plus
    if dp <= 0:
        raise DomainError("asymptotic state needs d0 + d2 omega^2 > 0")
    m, w, nu, hb = model.m, model.omega, model.nu, model.hbar
    q2 = 2.0 * m * m * nu * w * w / (hb * dp)
    r2 = (dp * dp + model.d0 * model.d2 * nu * nu) / (2.0 * hb * nu * dp)
    ell2 = 2.0 * hb * nu * dp / (dp * dp + nu * nu * (model.d0 * model.d2 - m * m * w * w))
    real = ell2 > 0
    return AsymptoticState(q2, r2, math.sqrt(ell2) if real else math.nan, ell2, real, model.positivity_ok)


def mixedness(state: GaussianState) -> Mixedness:
    k = state.kappa
    return Mixedness(k, 0.5 / k)
