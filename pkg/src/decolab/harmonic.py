"""Closed-form quadratic effective action of the damped oscillator.

For ``U = m w^2 x^2/2`` and ``V = d0 xd^2/2`` the on-shell action is a
quadratic form in the end points,

    S = (M/t)(x_f - x_i)(xd_f - xd_i) - t (M Omega2/4)(x_f + x_i)(xd_f + xd_i)
        - (K/2)(x_f xd_i - x_i xd_f)
        + i [D_i xd_i^2/2 + D_f xd_f^2/2 + D_m xd_i xd_f].

All closed forms are evaluated through the complex frequency
``w_nu = sqrt(w^2 - nu^2/4)`` so the underdamped, critical, overdamped and
Brownian branches share one code path.  Exponentials are scaled before they
are combined, which keeps the relaxed regime (``nu t`` in the thousands)
finite.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from decolab._linear import decoherence_form
from decolab.errors import DomainError, PoleError
from decolab.model import BoundaryData, ModelParams

__all__ = [
    "NormalFrequencies",
    "RealCoefficients",
    "DecoherenceCoefficients",
    "QuadraticAction",
    "RegimeInfo",
    "DynamicalSuppression",
    "normal_frequencies",
    "quadratic_action_real",
    "quadratic_action_decoherence",
    "brownian_action_decoherence",
    "quadratic_action",
    "action_value",
    "dynamical_suppression",
    "regime_info",
]

POLE_TOL = 1e-8
# below these the closed forms lose digits to cancellation
SMALL_ARG = 1e-3
SMALL_OMEGA_RATIO = 1e-4
# below this value of t max(nu, omega) the decoherence coefficients come from the Gramian
GRAMIAN_ARG = 1.0
BROWNIAN_SERIES_MAX = 0.1

# Taylor coefficients in x = nu t (powers x^1, x^2, ...) of the d0 parts of
# the Brownian coefficients, multiplied by nu.
_BROWNIAN_SERIES = {
    "i": [1 / 3, 1 / 12, 1 / 180, -1 / 720, -1 / 5040, 1 / 30240, 1 / 151200, -1 / 1209600,
          -1 / 4790016, 1 / 47900160, 691 / 108972864000, -691 / 1307674368000],
    "f": [1 / 3, -1 / 12, 1 / 180, 1 / 720, -1 / 5040, -1 / 30240, 1 / 151200, 1 / 1209600,
          -1 / 4790016, -1 / 47900160, 691 / 108972864000, 691 / 1307674368000],
    "m": [1 / 6, 0.0, -1 / 180, 0.0, 1 / 5040, 0.0, -1 / 151200, 0.0,
          1 / 4790016, 0.0, -691 / 108972864000, 0.0],
}


@dataclass(frozen=True)
class NormalFrequencies:
    """The four normal frequencies ``w_ss' = s i nu/2 + s' w_nu``.

    ``values`` is ordered ``(++, +-, -+, --)``.
    """

    values: tuple[complex, complex, complex, complex]
    omega_nu: complex
    omega_bar: float | None
    regime: str


@dataclass(frozen=True)
class RealCoefficients:
    M: float
    Omega2: float
    K: float


@dataclass(frozen=True)
class DecoherenceCoefficients:
    D_i: float
    D_f: float
    D_m: float


@dataclass(frozen=True)
class QuadraticAction:
    t: float
    M: float
    Omega2: float
    K: float
    D_i: float
    D_f: float
    D_m: float

    @property
    def d_matrix(self) -> np.ndarray:
        return np.array([[self.D_i, self.D_m], [self.D_m, self.D_f]])


@dataclass(frozen=True)
class RegimeInfo:
    tau_i: float
    tau_r: float
    asymptotic_slope: float
    regime: str


@dataclass(frozen=True)
class DynamicalSuppression:
    D_dyn: float
    ell_dd: float


def _omega_nu(model: ModelParams) -> complex:
    return cmath.sqrt(complex(model.omega**2 - model.nu**2 / 4.0))


def _regime(model: ModelParams) -> str:
    if model.omega == 0.0:
        return "brownian"
    half = model.nu / 2.0
    if math.isclose(model.omega, half, rel_tol=1e-12):
        return "critical"
    return "overdamped" if half > model.omega else "underdamped"


def normal_frequencies(model: ModelParams) -> NormalFrequencies:
    wn = _omega_nu(model)
    half = 0.5j * model.nu
    values = (half + wn, half - wn, -half + wn, -half - wn)
    regime = _regime(model)
    omega_bar = math.sqrt(model.nu**2 / 4.0 - model.omega**2) if regime in ("overdamped", "brownian") else None
    return NormalFrequencies(values, wn, omega_bar, regime)


class _Scaled:
    """Trigonometric and hyperbolic pieces with their growth factored out.

    With ``c = |Im w_nu| t`` and ``a = nu t/2`` the stored values are
    ``sin(w_nu t) e^-c``, ``cos(w_nu t) e^-c``, their double-angle versions
    scaled by ``e^-2c`` and ``cosh a e^-a``, ``sinh a e^-a``.
    """

    def __init__(self, model: ModelParams, t: float):
        self.wn = _omega_nu(model)
        self.t = t
        self.a = 0.5 * model.nu * t
        self.c = abs(self.wn.imag) * t
        z = self.wn * t
        ep = cmath.exp(1j * z - self.c)
        em = cmath.exp(-1j * z - self.c)
        self.sin = (ep - em) / 2j
        self.cos = (ep + em) / 2
        self.sin2 = (ep * ep - em * em) / 2j
        self.cos2 = (ep * ep + em * em) / 2
        # sin(w_nu t)/(w_nu t) scaled by e^-c; exact 1 at w_nu = 0
        self.sinc = self.sin / z if z != 0 else complex(math.exp(-self.c))
        e2a = math.exp(-2.0 * self.a)
        self.cosh_a = 0.5 * (1.0 + e2a)
        self.sinh_a = -0.5 * math.expm1(-2.0 * self.a)


def _check_poles(model: ModelParams, sc: _Scaled, pole_tol: float) -> None:
    wn = sc.wn
    if wn.imag == 0.0 and wn.real > 0.0:
        n = round(wn.real * sc.t / math.pi)
        if n >= 1 and abs(sc.sin) < pole_tol:
            raise PoleError(
                f"t={sc.t} is within pole tolerance of the focusing time {n * math.pi / wn.real}",
                pole_time=n * math.pi / wn.real,
            )
    # cosh(nu t/2) + cos(w_nu t), relative to cosh(nu t/2)
    denom = sc.cosh_a + sc.cos * math.exp(sc.c - sc.a)
    if abs(denom) < pole_tol * sc.cosh_a:
        n = round((model.omega * sc.t / math.pi - 1.0) / 2.0)
        raise PoleError(
            f"t={sc.t} is within pole tolerance of an anti-focusing time",
            pole_time=(2 * n + 1) * math.pi / model.omega,
        )


def _real_part(value: complex, name: str) -> float:
    if abs(value.imag) > 1e-12 * max(abs(value.real), 1e-300) and abs(value.imag) > 1e-300:
        raise ArithmeticError(f"{name} acquired an imaginary residue {value.imag!r}")
    return value.real


def quadratic_action_real(model: ModelParams, t: float, pole_tol: float = POLE_TOL) -> RealCoefficients:
    """``M``, ``Omega2`` and ``K`` of the real (classical) part of the action."""
    if not t > 0:
        raise DomainError(f"duration must be positive, got {t}")
    sc = _Scaled(model, t)
    _check_poles(model, sc, pole_tol)
    m = model.m
    growth = _exp(sc.a - sc.c)
    M = m * (sc.cos + sc.cosh_a * growth) / (2.0 * sc.sinc)
    K = 2.0 * m * sc.sinh_a * growth / (t * sc.sinc)
    # cosh(a) - cos(w_nu t) = 2 sinh(u) sinh(v), u + v = a, written without cancellation
    alpha = 0.5 * model.nu
    beta = cmath.sqrt(complex(model.nu**2 / 4.0 - model.omega**2))
    if beta.real < 0:
        beta = -beta
    plus = alpha + beta
    minus = model.omega**2 / plus if plus != 0 else 0.0
    u, v = 0.5 * t * minus, 0.5 * t * plus
    numer = 0.5 * _expm1(-2.0 * u) * _expm1(-2.0 * v)
    denom = sc.cosh_a + sc.cos * _exp(sc.c - sc.a)
    Omega2 = 4.0 * numer / (t * t * denom)
    return RealCoefficients(_real_part(M, "M"), _real_part(Omega2, "Omega2"), _real_part(K, "K"))


def _exp(x: float) -> float:
    # exact overflow to inf instead of OverflowError
    return math.exp(x) if x < 709.0 else math.inf


def _expm1(z: complex) -> complex:
    return complex(np.expm1(complex(z)))


def quadratic_action_decoherence(
    model: ModelParams, t: float, pole_tol: float = POLE_TOL
) -> DecoherenceCoefficients:
    """Imaginary-part coefficients ``D_i``, ``D_f``, ``D_m`` for ``omega > 0``."""
    if not t > 0:
        raise DomainError(f"duration must be positive, got {t}")
    if model.omega == 0.0:
        raise DomainError("omega = 0 is the Brownian branch; use brownian_action_decoherence")
    sc = _Scaled(model, t)
    _check_poles(model, sc, pole_tol)
    if model.d0 == 0.0 and model.d2 == 0.0:
        return DecoherenceCoefficients(0.0, 0.0, 0.0)
    nu, w2 = model.nu, model.omega**2
    wn = sc.wn
    # the closed forms cancel to O(t^3) at short times; the Gramian does not
    if (
        t * max(nu, model.omega) < GRAMIAN_ARG
        or abs(nu * t) < SMALL_ARG
        or abs(wn * t) < SMALL_ARG
        or model.omega < SMALL_OMEGA_RATIO * nu
    ):
        return DecoherenceCoefficients(*decoherence_form(model.omega, nu, model.d0, model.d2, t))
    dp, dm = model.d_plus, model.d_minus
    nt = nu * t
    shrink = math.exp(2.0 * sc.c - nt)  # <= 1 since |Im w_nu| <= nu/2
    sin_sq = sc.sin * sc.sin
    num_i = dp * (4.0 * (wn * wn - w2 * math.exp(-nt)) + nu * nu * sc.cos2 * shrink) \
        - 2.0 * dm * wn * nu * sc.sin2 * shrink
    D_i = num_i * _exp(nt - 2.0 * sc.c) / (8.0 * w2 * nu * sin_sq)
    num_f = -dp * (4.0 * (wn * wn * math.exp(-nt) - w2) * math.exp(-2.0 * sc.c) + nu * nu * sc.cos2) \
        - 2.0 * dm * wn * nu * sc.sin2
    D_f = num_f / (8.0 * w2 * nu * sin_sq)
    num_m = wn * (dm * nu * sc.sin * sc.cosh_a - 2.0 * dp * wn * sc.cos * sc.sinh_a)
    D_m = num_m * _exp(sc.a - sc.c) / (2.0 * w2 * nu * sin_sq)
    return DecoherenceCoefficients(_real_part(D_i, "D_i"), _real_part(D_f, "D_f"), _real_part(D_m, "D_m"))


def _brownian_d0_parts(x: float) -> tuple[float, float, float]:
    """``nu/d0`` times the ``d0`` parts of ``(D_i, D_f, D_m)`` as functions of ``x = nu t``."""
    if x < BROWNIAN_SERIES_MAX:
        out = []
        for key in ("i", "f", "m"):
            acc = 0.0
            for coef in reversed(_BROWNIAN_SERIES[key]):
                acc = acc * x + coef
            out.append(acc * x)
        return tuple(out)
    e1 = math.exp(-x)
    e2 = e1 * e1
    den = 2.0 * math.expm1(-x) ** 2
    f_i = (2.0 * x - 3.0 + 4.0 * e1 - e2) / den
    f_f = (1.0 - 4.0 * e1 + e2 * (2.0 * x + 3.0)) / den
    f_m = (1.0 - 2.0 * x * e1 - e2) / den
    return f_i, f_f, f_m


def brownian_action_decoherence(model: ModelParams, t: float) -> DecoherenceCoefficients:
    """Decoherence coefficients of the free Brownian particle (``omega = 0``).

    Transient (``t << 1/nu``): ``D_i ~ D_f ~ -D_m ~ d2/t``.  Relaxed:
    ``D_i`` grows like ``d0 t`` while ``D_f`` and ``D_m`` saturate.
    """
    if model.omega != 0.0:
        raise DomainError("brownian_action_decoherence needs omega = 0")
    if not t > 0:
        raise DomainError(f"duration must be positive, got {t}")
    if model.d0 == 0.0 and model.d2 == 0.0:
        return DecoherenceCoefficients(0.0, 0.0, 0.0)
    nu = model.nu
    if nu <= 0.0:
        raise DomainError("the Brownian coefficients need nu > 0")
    x = nu * t
    f_i, f_f, f_m = _brownian_d0_parts(x)
    # (1 - e^-2x)/(2 (1 - e^-x)^2) = coth(x/2)/2
    g = 0.5 / math.tanh(0.5 * x)
    a, b = model.d0 / nu, model.d2 * nu
    return DecoherenceCoefficients(a * f_i + b * g, a * f_f + b * g, a * f_m - b * g)


def quadratic_action(model: ModelParams, t: float, pole_tol: float = POLE_TOL) -> QuadraticAction:
    """All six coefficients, choosing the Brownian branch for ``omega = 0``."""
    if not model.is_harmonic:
        raise DomainError("closed forms exist only for g = g_d = 0")
    real = quadratic_action_real(model, t, pole_tol)
    if model.omega == 0.0:
        dec = brownian_action_decoherence(model, t)
    else:
        dec = quadratic_action_decoherence(model, t, pole_tol)
    return QuadraticAction(t, real.M, real.Omega2, real.K, dec.D_i, dec.D_f, dec.D_m)


def bilinear_coefficients(qa: QuadraticAction) -> tuple[float, float, float]:
    """``(a, b, c)`` with ``Re S = a (x_f xd_f + x_i xd_i) + b x_f xd_i + c x_i xd_f``."""
    t = qa.t
    mt = qa.M / t
    mo = t * qa.M * qa.Omega2 / 4.0
    return mt - mo, -mt - mo - 0.5 * qa.K, -mt - mo + 0.5 * qa.K


def action_value(qa: QuadraticAction, b: BoundaryData) -> complex:
    if not math.isclose(qa.t, b.t, rel_tol=1e-12, abs_tol=1e-300):
        raise DomainError(f"action duration {qa.t} does not match boundary duration {b.t}")
    t = qa.t
    real = (
        qa.M / t * (b.x_f - b.x_i) * (b.xd_f - b.xd_i)
        - t * qa.M * qa.Omega2 / 4.0 * (b.x_f + b.x_i) * (b.xd_f + b.xd_i)
        - 0.5 * qa.K * (b.x_f * b.xd_i - b.x_i * b.xd_f)
    )
    imag = 0.5 * qa.D_i * b.xd_i**2 + 0.5 * qa.D_f * b.xd_f**2 + qa.D_m * b.xd_i * b.xd_f
    return complex(real + 1j * imag)


def dynamical_suppression(D_i: float, dx: float, hbar: float = 1.0) -> DynamicalSuppression:
    """Suppression of interference between two localized initial states ``dx`` apart."""
    if D_i < 0:
        raise DomainError(f"D_i must be non-negative, got {D_i}")
    ell = math.inf if D_i == 0 else math.sqrt(2.0 * hbar / D_i)
    return DynamicalSuppression(math.exp(-D_i * dx * dx / (2.0 * hbar)), ell)


def regime_info(model: ModelParams) -> RegimeInfo:
    if model.nu <= 0:
        raise DomainError("regime time scales need nu > 0")
    nf = normal_frequencies(model)
    if nf.regime == "brownian":
        tau = 1.0 / model.nu
        return RegimeInfo(tau, tau, 0.0, nf.regime)
    rates = [nf.values[0].imag, nf.values[1].imag]
    slope = model.nu - 2.0 * nf.omega_bar if nf.regime == "overdamped" else float(model.nu)
    return RegimeInfo(1.0 / max(rates), 1.0 / min(rates), slope, nf.regime)
