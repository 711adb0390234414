"""Acceptance criteria, each checked at its stated tolerance and runtime bound.

Run with pytest (one summary line per criterion at the end of the session)
or directly with ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import simpson

from decolab.bath import SpectralModel, drude_effective_params, self_energy, sigma_n_drude
from decolab.errors import PoleError
from decolab.experiments import fig4_march
from decolab.gaussian import GaussianState, evolve, instantaneous_suppression, propagate
from decolab.harmonic import action_value, quadratic_action
from decolab.model import BoundaryData, ModelParams
from decolab.saddle import (
    SaddleProblem,
    action_along,
    effective_decoherence_time,
    harmonic_saddle,
    layout_of,
    solve_saddle,
    sweep_g,
)

CRITERIA = {}


def criterion(n, title, bound_s):
    def deco(fn):
        CRITERIA[n] = (title, bound_s, fn)
        return fn
    return deco


def _underdamped_phase(omega, nu, t):
    w2 = omega * omega - 0.25 * nu * nu
    return math.sin(math.sqrt(w2) * t) if w2 > 0 else None


@criterion(1, "closed-form action vs quadrature along the numerical saddle", 10.0)
def closed_form_vs_bvp():
    combos = []
    for omega in (0.1, 0.5, 1.0):
        for nu in (0.25, 1.0, 2.0):
            for t in (0.5, 1.0, 3.0):
                s = _underdamped_phase(omega, nu, t)
                if s is not None and abs(s) < 0.05:
                    continue
                combos.append((omega, nu, t))
    combos = combos[:20]
    assert len(combos) == 20
    worst = 0.0
    for omega, nu, t in combos:
        mp = ModelParams(omega=omega, nu=nu, d0=1.0, d2=1.0)
        b = BoundaryData(0.0, t, 0.0, 0.5, 1.0, 0.1)
        sol = solve_saddle(SaddleProblem(mp, b))
        S = action_value(quadratic_action(mp, t), b)
        worst = max(worst, abs(action_along(mp, sol) - S) / abs(S))
    assert worst <= 1e-6, worst
    return f"worst relative error {worst:.2e} over 20 combinations"


@criterion(2, "small-t universality of the decoherence coefficients", 1.0)
def small_t_universality():
    cases = [ModelParams(omega=w, nu=v, d0=1.0, d2=1.0) for w in (0.1, 1.0) for v in (0.25, 1.0)]
    cases += [ModelParams(omega=0.0, nu=v, d0=1.0, d2=1.0) for v in (0.25, 1.0, 2.0)]
    worst = 0.0
    for mp in cases:
        t = 1e-4 / mp.nu
        qa = quadratic_action(mp, t)
        for value in (t * qa.D_i, t * qa.D_f, -t * qa.D_m):
            worst = max(worst, abs(value / mp.d2 - 1.0))
    assert worst <= 5e-3, worst
    return f"worst relative deviation {worst:.2e}"


@criterion(3, "Brownian relaxed regime", 1.0)
def brownian_relaxed():
    worst = 0.0
    for nu in (0.5, 1.0, 2.0):
        mp = ModelParams(omega=0.0, nu=nu, d0=1.0, d2=0.5)
        t = 50.0 / nu
        ts = t + np.linspace(-0.5, 0.5, 11) / nu
        slope = np.polyfit(ts, [quadratic_action(mp, s).D_i for s in ts], 1)[0]
        qa = quadratic_action(mp, t)
        worst = max(
            worst,
            abs(slope / mp.d0 - 1.0),
            abs(qa.D_f / (mp.d0 / (2 * nu) + mp.d2 * nu / 2) - 1.0),
            abs(qa.D_m / (mp.d0 / (2 * nu) - mp.d2 * nu / 2) - 1.0),
        )
    assert worst <= 5e-3, worst
    return f"worst relative deviation {worst:.2e}"


@criterion(4, "relaxed growth rates of D_i for the overdamped couplings", 5.0)
def fig1_slopes():
    omega = 0.1
    details = []
    for nu in (2.0, 1.0, 0.25):
        mp = ModelParams(omega=omega, nu=nu, d0=nu, d2=nu)
        wbar = math.sqrt(0.25 * nu * nu - omega * omega)
        tau_r = 1.0 / (0.5 * nu - wbar)
        ts = np.linspace(10 * tau_r, 20 * tau_r, 50)
        rate = np.polyfit(ts, np.log([quadratic_action(mp, t).D_i for t in ts]), 1)[0]
        expected = nu - 2.0 * wbar
        err = abs(rate / expected - 1.0)
        assert err <= 0.02, (nu, rate, expected)
        details.append(f"nu={nu:g}: {rate:.6f} vs {expected:.6f}")
    return "; ".join(details)


@criterion(5, "long-time wave packet asymptotics", 5.0)
def fig2_asymptotics():
    mp = ModelParams(omega=0.1, nu=1.0, d0=1.0, d2=1.0)
    worst = 0.0
    for kappa in (0.5, 40.0):
        out = evolve(GaussianState.from_kappa(1.0, kappa), mp, 2000.0)
        worst = max(worst, abs(out.q2 / 0.0198020 - 1.0), abs(out.r2 / 1.0000495 - 1.0))
    assert worst <= 1e-3, worst
    return f"worst relative deviation {worst:.2e}"


FIG1_MODELS = [ModelParams(omega=0.1, nu=v, d0=v, d2=v) for v in (2.0, 1.0, 0.25)]


@criterion(6, "Gaussian propagation property suite", 30.0)
def property_suite():
    rng = np.random.default_rng(20240601)
    comp = herm = trace = 0.0
    for _ in range(300):
        mp = FIG1_MODELS[rng.integers(3)]
        t1, t2 = np.exp(rng.uniform(np.log(1e-2), np.log(20.0), 2))
        s = GaussianState.from_kappa(rng.uniform(0.1, 10), rng.uniform(0.5, 50), rng.uniform(-2, 2))
        try:
            two = propagate(propagate(s, quadratic_action(mp, t1)), quadratic_action(mp, t2))
            one = propagate(s, quadratic_action(mp, t1 + t2))
        except PoleError:
            continue
        scale = abs(one.q2) + abs(one.r2)
        comp = max(comp, abs(two.q2 / one.q2 - 1), abs(two.r2 / one.r2 - 1), abs(two.s2 - one.s2) / scale)
        assert two.kappa >= 0.5 - 1e-10 and one.kappa >= 0.5 - 1e-10
        # density of the evolved state: x <-> -xd gives the complex conjugate
        xx, yy = np.meshgrid(np.linspace(-2, 2, 5), np.linspace(-2, 2, 5))
        rho = one.density(xx / math.sqrt(one.q2), yy / math.sqrt(one.r2))
        rho_t = one.density(xx / math.sqrt(one.q2), -yy / math.sqrt(one.r2))
        herm = max(herm, float(np.max(np.abs(np.conj(rho) - rho_t))) / one.norm)
        x = np.linspace(-12, 12, 4001) / math.sqrt(one.q2)
        trace = max(trace, abs(simpson(one.density(x, 0.0).real, x=x) - 1.0))
        for xp, xm, c in rng.uniform(-5, 5, (3, 3)):
            d = instantaneous_suppression(one, xp, xm).D_inst
            assert 0.0 <= d <= 1.0
            shifted = instantaneous_suppression(one, xp + c, xm + c).D_inst
            assert shifted == pytest.approx(d, rel=1e-12, abs=1e-300)
    assert comp <= 1e-9, comp
    assert herm <= 1e-10, herm
    assert trace <= 1e-9, trace
    worst_ev = 0.0
    for mp in FIG1_MODELS:
        for t in np.geomspace(1e-3, 1e3, 300):
            try:
                qa = quadratic_action(mp, t)
            except PoleError:
                continue
            ev = np.linalg.eigvalsh(qa.d_matrix)
            worst_ev = min(worst_ev, ev[0] / (abs(qa.D_i) + abs(qa.D_f)))
    assert worst_ev >= -1e-10, worst_ev
    return f"composition {comp:.1e}, trace {trace:.1e}, hermiticity {herm:.1e}, min scaled eigenvalue {worst_ev:.1e}"


@criterion(7, "anharmonic solver at g = 0 against the closed form", 60.0)
def g_zero_consistency():
    rng = np.random.default_rng(7)
    sets = []
    while len(sets) < 10:
        omega, nu, t = rng.uniform(0.2, 1.5), rng.uniform(0.0, 1.0), rng.uniform(0.5, 5.0)
        s = _underdamped_phase(omega, nu, t)
        if s is not None and abs(s) < 0.1:
            continue
        mp = ModelParams(omega=omega, nu=nu, d0=rng.uniform(0, 1), d2=rng.uniform(0, 1))
        z = rng.uniform(-1, 1, 4) + 1j * rng.uniform(-0.3, 0.3, 4)
        sets.append((mp, BoundaryData(0.0, t, *z)))
    traj = act = 0.0
    for mp, b in sets:
        num = solve_saddle(SaddleProblem(mp, b))
        ref = harmonic_saddle(mp, b, times=num.times)
        traj = max(traj, float(np.max(np.abs(num.x - ref.x))), float(np.max(np.abs(num.xd - ref.xd))))
        act = max(act, abs(num.S_eff - ref.S_eff) / abs(ref.S_eff))
    assert traj <= 1e-8, traj
    assert act <= 1e-6, act
    mp = ModelParams(omega=0.48, nu=1.0, d0=1.0, d2=1.0)
    tau_err = 0.0
    for t in (2.0, 10.0, 20.0):
        sol = solve_saddle(SaddleProblem(mp, BoundaryData(0.0, t, 0.0, 0.5, 0.0, 0.0)))
        expected = 2.0 * t / (quadratic_action(mp, t).D_i * 0.25)
        tau_err = max(tau_err, abs(effective_decoherence_time(sol) / expected - 1.0))
    assert tau_err <= 1e-6, tau_err
    return f"trajectory {traj:.1e}, action {act:.1e}, tau_edd {tau_err:.1e}"


@criterion(8, "quartic saddle families: convergence and ordering in g", 300.0)
def quartic_families():
    mp = ModelParams(omega=1.0, nu=1.0, d0=1.0, d2=1.0)
    b3 = BoundaryData(0.0, 6.0, 0.0, 0.5, 2.0, 0.0)
    sols = sweep_g(SaddleProblem(mp, b3), np.linspace(0.0, 0.01, 6))
    for s in sols:
        assert s.converged and s.boundary_residual <= 1e-10, (s.g, s.error)
        assert s.S_eff.imag >= -1e-10 * abs(s.S_eff), (s.g, s.S_eff)
    bound = max(float(np.max(np.abs(s.xd.real))) for s in sols[1:]) / 0.5 - 1.0
    assert bound <= 2e-3, bound
    assert np.max(np.abs(sols[0].xd.imag)) <= 1e-10
    assert all(np.max(np.abs(s.xd.imag)) > 1e-8 for s in sols[1:])
    # halve the RK4 step on the last member of the family
    last = sols[-1]
    problem = SaddleProblem(mp, b3, g_target=last.g)
    fine = solve_saddle(replace(problem, substeps=2 * layout_of(problem)[2]), seed=sols[-2])
    grid = abs(fine.S_eff - last.S_eff) / abs(last.S_eff)
    assert grid <= 1e-6, grid

    mp4 = ModelParams(omega=0.48, nu=1.0, d0=1.0, d2=1.0)
    gs = np.linspace(0.0, 0.024, 7)
    ts = np.linspace(2.0, 38.0, 19)
    im = np.array([fig4_march(mp4, g, ts)[0] for g in gs])
    common = np.all(np.isfinite(im), axis=0)
    assert common.any()
    k = int(np.nonzero(common)[0][-1])
    col = im[:, k]
    assert np.all(col >= 0.0)
    assert np.all(np.diff(col) < 0), col
    return f"fig3 grid change {grid:.1e}, max |Re xd|/|xd_i| - 1 = {bound:.1e}; at t={ts[k]:g} Im S from {col[0]:.3g} to {col[-1]:.3g}"


@criterion(9, "bath self-energy and Drude constants", 5.0)
def bath_appendix():
    model = SpectralModel(lam=1.0, OmegaD=2.0, m_B=1.0, T=1.0)
    pv = 0.0
    for w in np.concatenate([np.linspace(0.0, 1.5, 10), np.linspace(2.5, 20.0, 10)]):
        pv = max(pv, abs(self_energy(model, w).Sigma_n / sigma_n_drude(model, w) - 1.0))
    assert pv <= 1e-6, pv
    parity = 0.0
    for w in np.linspace(0.05, 6.0, 50):
        p, n = self_energy(model, w), self_energy(model, -w)
        parity = max(
            parity,
            abs(p.Sigma_n - n.Sigma_n) / abs(p.Sigma_n),
            abs(p.Sigma_i - n.Sigma_i) / abs(p.Sigma_i),
            abs(p.Sigma_f + n.Sigma_f) / abs(p.Sigma_f),
        )
    assert parity <= 1e-12, parity
    c = drude_effective_params(model)
    got = (c.delta_m, c.delta_omega2, c.k, c.d0, c.d2)
    want = (math.pi / 16, math.pi / 4, math.pi / 8, 1.0, -5.0 / 12.0)
    const = max(abs(a - b) for a, b in zip(got, want))
    assert const <= 1e-12, const
    return f"PV {pv:.1e}, parity {parity:.1e}, constants {const:.1e}"


def evaluate(n):
    """Run criterion ``n``; return its report line and the failure, if any."""
    title, bound, fn = CRITERIA[n]
    start = time.perf_counter()
    error = None
    try:
        detail = fn()
    except AssertionError as exc:
        error, detail = exc, f"failed: {exc}"
    elapsed = time.perf_counter() - start
    if error is None and elapsed > bound:
        error = AssertionError(f"runtime {elapsed:.1f}s exceeds {bound:g}s")
        detail = str(error)
    status = "PASS" if error is None else "FAIL"
    return f"{status} criterion {n}: {title} [{elapsed:.2f}s / {bound:g}s] {detail}", error


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, acceptance_log):
    line, error = evaluate(n)
    acceptance_log.append(line)
    print(line)
    if error is not None:
        raise error


if __name__ == "__main__":
    failed = 0
    for n in sorted(CRITERIA):
        line, error = evaluate(n)
        print(line, flush=True)
        failed += error is not None
    sys.exit(1 if failed else 0)
