"""Physical model: parameters, potentials and the CTP effective Lagrangian.

Coordinates follow the closed-time-path convention ``x = (x+ + x-)/2`` and
``xd = x+ - x-``.  The Lagrangian is

    L = m x' xd' - (k/2)(x' xd - x xd') - U(x + xd/2) + U(x - xd/2)
        + i [V(xd) + (d2/2) xd'^2]

with ``U(x) = m w^2 x^2/2 + g x^4/4!`` and ``V(xd) = d0 xd^2/2 + g_d xd^4/4!``.
Complex arithmetic is used throughout, even for real inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from decolab.errors import DomainError

__all__ = [
    "ModelParams",
    "BoundaryData",
    "PhasePoint",
    "StationaryDecoherence",
    "StationaryPoints",
    "potential",
    "potential_force",
    "decoherence_potential",
    "decoherence_force",
    "effective_lagrangian",
    "stationary_propagator",
    "stationary_points",
]


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the effective Lagrangian.

    ``omega == 0`` selects Brownian motion.  ``nu`` is the friction rate
    ``k/m``.  Parameter sets violating ``nu**2 <= 2*d0*d2/m**2`` are accepted
    but flagged through :attr:`positivity_ok`.
    """

    m: float = 1.0
    omega: float = 0.0
    nu: float = 0.0
    d0: float = 0.0
    d2: float = 0.0
    g: float = 0.0
    g_d: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("m", "omega", "nu", "d0", "d2", "g", "g_d", "hbar"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        if self.m <= 0:
            raise DomainError(f"mass must be positive, got {self.m}")
        if self.hbar <= 0:
            raise DomainError(f"hbar must be positive, got {self.hbar}")
        for name in ("omega", "nu", "d0", "d2", "g_d"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative, got {getattr(self, name)}")

    @property
    def k(self) -> float:
        return self.m * self.nu

    @property
    def d_plus(self) -> float:
        return self.d0 + self.d2 * self.omega**2

    @property
    def d_minus(self) -> float:
        return self.d0 - self.d2 * self.omega**2

    @property
    def positivity_ok(self) -> bool:
        return self.nu**2 <= 2.0 * self.d0 * self.d2 / self.m**2

    @property
    def is_harmonic(self) -> bool:
        return self.g == 0.0 and self.g_d == 0.0

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class BoundaryData:
    """End points of a saddle trajectory in ``(x, xd)`` coordinates."""

    t_i: float
    t_f: float
    x_i: complex
    xd_i: complex
    x_f: complex
    xd_f: complex

    def __post_init__(self):
        if not (math.isfinite(self.t_i) and math.isfinite(self.t_f)):
            raise DomainError("boundary times must be finite")
        if self.t_f <= self.t_i:
            raise DomainError(f"need t_f > t_i, got t_i={self.t_i}, t_f={self.t_f}")
        for name in ("x_i", "xd_i", "x_f", "xd_f"):
            if not np.isfinite(complex(getattr(self, name))):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, complex(getattr(self, name)))

    @property
    def t(self) -> float:
        return self.t_f - self.t_i


@dataclass(frozen=True)
class PhasePoint:
    x: complex
    xd: complex
    vx: complex = 0.0
    vxd: complex = 0.0


def potential(model: ModelParams, x):
    return 0.5 * model.m * model.omega**2 * x**2 + model.g * x**4 / 24.0


def potential_force(model: ModelParams, x):
    """Derivative ``U'(x) = m w^2 x + g x^3/6``."""
    return model.m * model.omega**2 * x + model.g * x**3 / 6.0


def decoherence_potential(model: ModelParams, xd):
    return 0.5 * model.d0 * xd**2 + model.g_d * xd**4 / 24.0


def decoherence_force(model: ModelParams, xd):
    return model.d0 * xd + model.g_d * xd**3 / 6.0


def effective_lagrangian(model: ModelParams, p: PhasePoint) -> complex:
    x, xd = complex(p.x), complex(p.xd)
    vx, vxd = complex(p.vx), complex(p.vxd)
    real_part = (
        model.m * vx * vxd
        - 0.5 * model.k * (vx * xd - x * vxd)
        - potential(model, x + 0.5 * xd)
        + potential(model, x - 0.5 * xd)
    )
    imag_part = decoherence_potential(model, xd) + 0.5 * model.d2 * vxd**2
    return real_part + 1j * imag_part


@dataclass(frozen=True)
class StationaryDecoherence:
    exponent: complex
    tau_sd: float
    ell_sd: float


def stationary_propagator(model: ModelParams, x: float, xd: float, t: float) -> StationaryDecoherence:
    """Rigid (frozen trajectory) estimate of the propagator.

    The exponent is ``(i t / hbar) L`` at the static point; ``tau_sd`` is
    ``hbar / V(xd)`` and ``ell_sd`` the length with ``ell_sd**2 = 2 hbar/(d0 t)``.
    """
    if not t > 0:
        raise DomainError(f"duration must be positive, got {t}")
    hb = model.hbar
    du = potential(model, x + 0.5 * xd) - potential(model, x - 0.5 * xd)
    v = decoherence_potential(model, xd)
    exponent = complex(-1j * t / hb * du - t / hb * v)
    tau_sd = math.inf if v == 0 else hb / v
    ell_sd = math.inf if model.d0 == 0 else math.sqrt(2.0 * hb / (model.d0 * t))
    return StationaryDecoherence(exponent, tau_sd, ell_sd)


@dataclass
class StationaryPoints:
    """Roots of ``i V'(xd) = U'(x + xd/2) = U'(x - xd/2)``.

    ``lines`` holds degenerate continua as ``(point, direction)`` pairs; for
    ``omega = g = 0`` this is the line ``xd = 0`` through the origin.
    """

    points: list[tuple[complex, complex]] = field(default_factory=list)
    lines: list[tuple[tuple[complex, complex], tuple[complex, complex]]] = field(default_factory=list)
    n_failed: int = 0

    @property
    def degenerate(self) -> bool:
        return bool(self.lines)


def _stationary_residual(model, z):
    x, y = z
    iv = 1j * decoherence_force(model, y)
    return np.array([iv - potential_force(model, x + 0.5 * y), iv - potential_force(model, x - 0.5 * y)])


def _stationary_jacobian(model, z):
    x, y = z
    w2 = model.m * model.omega**2

    def u2(s):
        return w2 + 0.5 * model.g * s**2

    ivp = 1j * (model.d0 + 0.5 * model.g_d * y**2)
    up, um = u2(x + 0.5 * y), u2(x - 0.5 * y)
    return np.array([[-up, ivp - 0.5 * up], [-um, ivp + 0.5 * um]])


def _residual_norm(model, z):
    f1, f2 = _stationary_residual(model, z)
    return max(abs(f1), abs(f2), abs(f1 - f2))


def stationary_points(
    model: ModelParams,
    search_box: tuple[float, float, float, float] = (-5.0, 5.0, -5.0, 5.0),
    n_starts: int = 256,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> StationaryPoints:
    """Find stationary points by damped Newton from a deterministic grid of starts.

    ``search_box = (re_lo, re_hi, im_lo, im_hi)`` bounds the real and
    imaginary parts of both ``x`` and ``xd``.  The system is holomorphic, so
    complex Newton steps coincide with Newton in the four real coordinates.
    """
    if n_starts < 1:
        raise DomainError("n_starts must be >= 1")
    re_lo, re_hi, im_lo, im_hi = search_box
    sampler = qmc.Halton(d=4, scramble=False)
    unit = sampler.random(n_starts + 1)[1:]
    lo = np.array([re_lo, im_lo, re_lo, im_lo])
    hi = np.array([re_hi, im_hi, re_hi, im_hi])
    pts = lo + unit * (hi - lo)
    starts = [np.zeros(2, complex)]
    starts += [np.array([p[0] + 1j * p[1], p[2] + 1j * p[3]]) for p in pts]

    result = StationaryPoints()
    for z in starts:
        root = _damped_newton(model, z, tol, max_iter)
        if root is None:
            result.n_failed += 1
            continue
        jac = _stationary_jacobian(model, root)
        sv = np.linalg.svd(jac, compute_uv=False)
        if sv[-1] <= 1e-10 * max(sv[0], 1.0):
            _, _, vh = np.linalg.svd(jac)
            direction = vh[-1].conj()
            direction = direction / direction[np.argmax(abs(direction))]
            if not any(_on_line(root, line) for line in result.lines):
                anchor = _line_anchor(root, direction)
                result.lines.append((anchor, (complex(direction[0]), complex(direction[1]))))
            continue
        if any(abs(root[0] - p[0]) + abs(root[1] - p[1]) < 1e-8 for p in result.points):
            continue
        result.points.append((complex(root[0]), complex(root[1])))
    result.points.sort(key=lambda p: (round(p[0].real, 8), round(p[0].imag, 8), round(p[1].real, 8), round(p[1].imag, 8)))
    return result


def _damped_newton(model, z, tol, max_iter):
    z = z.astype(complex)
    norm = _residual_norm(model, z)
    for _ in range(max_iter):
        if norm <= tol:
            return z
        jac = _stationary_jacobian(model, z)
        try:
            step = np.linalg.lstsq(jac, -_stationary_residual(model, z), rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        alpha = 1.0
        while alpha > 1e-6:
            trial = z + alpha * step
            trial_norm = _residual_norm(model, trial)
            if trial_norm < norm:
                break
            alpha *= 0.5
        else:
            return None
        z, norm = trial, trial_norm
    return z if norm <= tol else None


def _line_anchor(root, direction):
    # point on the line closest to the origin
    d = np.asarray(direction)
    r = np.asarray(root)
    s = np.vdot(d, r) / np.vdot(d, d)
    anchor = r - s * d
    return (complex(anchor[0]), complex(anchor[1]))


def _on_line(root, line):
    anchor, direction = line
    d = np.asarray(direction)
    r = np.asarray(root) - np.asarray(anchor)
    s = np.vdot(d, r) / np.vdot(d, d)
    return np.linalg.norm(r - s * d) < 1e-8
