"""Environment spectral densities and the effective Lagrangian constants they induce.

The bath enters through the odd spectral density ``rho(Omega)``.  The
self-energy has a principal-value part ``Sigma_n`` and the two pieces
``Sigma_f = -i pi rho(omega)``, ``Sigma_i = -pi rho(|omega|)``.  For the Drude
spectrum ``rho = (lam^2/(m_B Omega_D)) Omega/(Omega_D^2 + Omega^2)`` the low
frequency expansion of the self-energy gives the mass and potential
renormalization and the friction and decoherence constants.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import IntegrationWarning, quad, trapezoid

from decolab.errors import DomainError, ExtrapolationError, IoError, QuadratureError
from decolab.model import ModelParams

__all__ = [
    "SpectralModel",
    "SelfEnergy",
    "DrudeParams",
    "EffectiveModel",
    "spectral_density",
    "self_energy",
    "sigma_n_drude",
    "drude_effective_params",
    "effective_model",
    "load_table",
]

# upper end of the numerical integration in units of the cutoff / table end
OMEGA_MAX_FACTOR = 1e3
QUAD_TOL = 1e-10


@dataclass(frozen=True)
class SpectralModel:
    """Bath description: a Drude spectrum or a tabulated one.

    ``table`` holds ``(Omega, rho)`` samples on ``Omega >= 0``; negative
    frequencies follow from oddness.  ``T`` is ``k_B T`` in energy units.
    """

    kind: str = "drude"
    lam: float = 1.0
    OmegaD: float = 1.0
    m_B: float = 1.0
    T: float | None = None
    hbar: float = 1.0
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.kind not in ("drude", "tabulated"):
            raise DomainError(f"unknown spectral kind {self.kind!r}")
        if self.m_B <= 0:
            raise DomainError(f"m_B must be positive, got {self.m_B}")
        if self.hbar <= 0:
            raise DomainError(f"hbar must be positive, got {self.hbar}")
        if self.kind == "drude" and self.OmegaD <= 0:
            raise DomainError(f"OmegaD must be positive, got {self.OmegaD}")
        if self.T is not None and self.T <= 0:
            raise DomainError(f"temperature must be positive, got {self.T}")
        if self.kind == "tabulated":
            if self.table is None:
                raise DomainError("tabulated spectrum needs a table")
            om, rho = (np.asarray(a, dtype=float) for a in self.table)
            if om.ndim != 1 or om.shape != rho.shape or om.size < 2:
                raise DomainError("table needs two equal-length columns with at least 2 rows")
            if np.any(om < 0) or np.any(np.diff(om) <= 0):
                raise DomainError("table frequencies must be non-negative and strictly increasing")
            object.__setattr__(self, "table", (tuple(om), tuple(rho)))

    @property
    def amplitude(self) -> float:
        return self.lam**2 / (self.m_B * self.OmegaD)


@dataclass(frozen=True)
class SelfEnergy:
    Sigma_n: float
    Sigma_f: complex
    Sigma_i: float


@dataclass(frozen=True)
class DrudeParams:
    delta_m: float
    delta_omega2: float
    k: float
    d0: float
    d2: float


@dataclass(frozen=True)
class EffectiveModel:
    """Result of mapping a Drude bath onto the effective Lagrangian.

    ``model`` is None when the constants violate ``ModelParams`` invariants
    (typically ``d2 < 0``); ``diagnostic`` then says why.
    """

    params: DrudeParams
    model: ModelParams | None
    diagnostic: str | None


def _table_arrays(model: SpectralModel):
    om, rho = model.table
    return np.asarray(om), np.asarray(rho)


def spectral_density(model: SpectralModel, Omega):
    """``rho(Omega)``, odd in ``Omega``; accepts scalars or arrays."""
    w = np.asarray(Omega, dtype=float)
    if model.kind == "drude":
        out = model.amplitude * w / (model.OmegaD**2 + w * w)
    else:
        om, rho = _table_arrays(model)
        a = np.abs(w)
        if np.any(a > om[-1]) or np.any(a < om[0]):
            raise ExtrapolationError(f"frequency outside the tabulated range [{om[0]}, {om[-1]}]")
        out = np.sign(w) * np.interp(a, om, rho)
    return float(out) if out.ndim == 0 else out


def sigma_n_drude(model: SpectralModel, omega: float) -> float:
    """Analytic principal-value part for the Drude spectrum."""
    if model.kind != "drude":
        raise DomainError("closed form exists only for the Drude spectrum")
    return -math.pi * model.lam**2 / (model.m_B * (model.OmegaD**2 + omega * omega))


def _quad(f, a, b, **kw):
    # QUADPACK warns at its round-off floor; the error estimate is checked by the caller
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(f, a, b, epsabs=0.0, epsrel=QUAD_TOL, limit=500, **kw)
    if not np.isfinite(val):
        raise QuadratureError(f"quadrature on [{a}, {b}] is not finite")
    return val, err


def _tail_pv(A: float, a: float, w: float) -> float:
    """``P int_a^inf 2A/(w^2 - W^2) dW`` for a tail ``W rho(W) -> A``."""
    if w == 0.0:
        return -2.0 * A / a
    return -(A / w) * math.log(abs((a + w) / (a - w)))


def _sigma_n_quad(model: SpectralModel, omega: float) -> float:
    """``2 P int_0^inf W rho(W)/(w^2 - W^2) dW``.

    Drude: the interval is split at ``2|w|``, the singular piece uses
    QUADPACK's Cauchy weight and the rest is regular.  Tabulated: the
    singularity is subtracted and the regular remainder integrated by the
    trapezoidal rule on the table nodes.  In both cases the ``1/W`` tail of
    ``rho`` beyond the integration range is added analytically.
    """
    if model.kind == "tabulated":
        return _sigma_n_table(model, omega)
    w = abs(float(omega))
    wmax = OMEGA_MAX_FACTOR * max(model.OmegaD, w)

    def num(W):  # 2 W rho(W)
        return 2.0 * W * spectral_density(model, W)

    pieces = []
    if w == 0.0:
        pieces.append(_quad(lambda W: -num(W) / (W * W), 0.0, wmax, points=[model.OmegaD]))
    else:
        hi = 2.0 * w
        # 1/(w^2 - W^2) = -1/((W - w)(W + w))
        pieces.append(_quad(lambda W: -num(W) / (W + w), 0.0, hi, weight="cauchy", wvar=w))
        pts = [model.OmegaD] if hi < model.OmegaD < wmax else None
        pieces.append(_quad(lambda W: num(W) / (w * w - W * W), hi, wmax, points=pts))
    total = sum(v for v, _ in pieces) + _tail_pv(wmax * spectral_density(model, wmax), wmax, w)
    err = sum(e for _, e in pieces)
    if not err <= 1e-7 * abs(total):
        raise QuadratureError(f"principal-value integral error estimate {err:.3g} exceeds tolerance")
    return total


def _sigma_n_table(model: SpectralModel, omega: float) -> float:
    om, rho = _table_arrays(model)
    w = abs(float(omega))
    wmax = om[-1]
    if w >= wmax:
        raise ExtrapolationError(f"frequency {w} is beyond the tabulated range")
    f = 2.0 * om * rho
    if w == 0.0:
        nodes, vals = om, f
        with np.errstate(divide="ignore", invalid="ignore"):
            g = -vals / (nodes * nodes)
        if nodes[0] == 0.0:
            g[0] = -2.0 * (rho[1] - rho[0]) / (om[1] - om[0])
        return float(trapezoid(g, nodes)) + _tail_pv(wmax * rho[-1], wmax, 0.0)
    fw = float(np.interp(w, om, f))
    j = int(np.searchsorted(om, w))
    nodes = np.insert(om, j, w) if om[min(j, om.size - 1)] != w else om
    vals = np.interp(nodes, om, f)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (vals - fw) / (w * w - nodes * nodes)
    k = int(np.searchsorted(nodes, w))
    # removable singularity: -f'(w)/(2w), slope averaged across the node
    left = (vals[k] - vals[k - 1]) / (nodes[k] - nodes[k - 1]) if k > 0 else None
    right = (vals[k + 1] - vals[k]) / (nodes[k + 1] - nodes[k])
    slope = right if left is None else 0.5 * (left + right)
    g[k] = -slope / (2.0 * w)
    singular = fw * math.log((wmax + w) / (wmax - w)) / (2.0 * w)
    if om[0] > 0.0:
        singular -= fw * math.log((om[0] + w) / abs(om[0] - w)) / (2.0 * w)
    return float(trapezoid(g, nodes)) + singular + _tail_pv(wmax * rho[-1], wmax, w)


def self_energy(model: SpectralModel, omega: float, closed_form: bool = False) -> SelfEnergy:
    """Self-energy components at real frequency ``omega``.

    ``Sigma_n`` comes from principal-value quadrature unless
    ``closed_form`` is set (Drude only).
    """
    if closed_form:
        sn = sigma_n_drude(model, omega)
    else:
        sn = _sigma_n_quad(model, omega)
    rho = spectral_density(model, omega)
    return SelfEnergy(sn, complex(0.0, -math.pi * rho), -math.pi * spectral_density(model, abs(omega)))


def drude_effective_params(model: SpectralModel) -> DrudeParams:
    if model.kind != "drude":
        raise DomainError("effective constants are defined for the Drude spectrum only")
    if model.T is None:
        raise DomainError("temperature T is required for d0 and d2")
    pl2 = math.pi * model.lam**2
    mB, wD, kT, hb = model.m_B, model.OmegaD, model.T, model.hbar
    return DrudeParams(
        delta_m=pl2 / (mB * wD**4),
        delta_omega2=pl2 / (mB**2 * wD**2),
        k=pl2 / (mB * wD**3),
        d0=2.0 * kT / (hb * wD),
        d2=hb / (6.0 * kT * wD) - 2.0 * kT / (hb * wD**2),
    )


def effective_model(model: SpectralModel, omega_B: float, g: float = 0.0) -> EffectiveModel:
    """Effective Lagrangian parameters for a bare oscillator ``omega_B`` in a Drude bath.

    ``m = m_B + delta_m`` and ``m omega^2 = m_B (omega_B^2 + delta_omega2)``;
    ``nu = k/m``.  Values are reported verbatim; an invalid set (``d2 < 0``)
    yields ``model=None`` with a diagnostic instead of being clamped.
    """
    p = drude_effective_params(model)
    m = model.m_B + p.delta_m
    w2 = model.m_B * (omega_B**2 + p.delta_omega2) / m
    if p.d2 < 0:
        return EffectiveModel(p, None, f"d2 = {p.d2!r} is negative at k_B T = {model.T}; no valid ModelParams")
    try:
        mp = ModelParams(m=m, omega=math.sqrt(w2), nu=p.k / m, d0=p.d0, d2=p.d2, g=g, hbar=model.hbar)
    except DomainError as exc:
        return EffectiveModel(p, None, str(exc))
    return EffectiveModel(p, mp, None)


def load_table(path: str | Path) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Read a two-column ``omega,rho`` CSV into a table usable by :class:`SpectralModel`."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read spectral table {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["omega", "rho"]:
            raise DomainError(f"{path}: expected header 'omega,rho', got {header}")
        om, rho = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DomainError(f"{path}:{lineno}: expected 2 columns")
            om.append(float(row[0]))
            rho.append(float(row[1]))
    return tuple(om), tuple(rho)
