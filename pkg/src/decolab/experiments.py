"""Experiment orchestration: one task per dataset, run concurrently, CSV + manifest out."""

from __future__ import annotations

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from decolab import __version__
from decolab.bath import (
    SpectralModel,
    drude_effective_params,
    effective_model,
    load_table,
    self_energy,
    sigma_n_drude,
)
from decolab.config import RunConfig
from decolab.errors import DecolabError, DomainError, PoleError
from decolab.gaussian import GaussianState, asymptotic_state, evolve_series, mixedness
from decolab.harmonic import quadratic_action, regime_info
from decolab.model import BoundaryData, ModelParams
from decolab.output import RunManifest, TaskRecord, emit_csv, sha256_file, write_manifest
from decolab.saddle import SaddleProblem, effective_decoherence_time, march_t, solve_saddle, sweep_g

__all__ = [
    "FIG1_COUPLINGS",
    "FIG2_COUPLINGS",
    "pole_times",
    "harmonic_table",
    "wavepacket_table",
    "fig4_march",
    "run",
]

log = logging.getLogger(__name__)

FIG1_COUPLINGS = (2.0, 1.0, 0.25)
FIG2_COUPLINGS = (1.0, 0.08, 0.01)
FIG2_KAPPAS = (("pure", 0.5), ("mixed", 40.0))
FIG_OMEGA = 0.1


def _tag(v: float) -> str:
    return f"{v:g}"


def pole_times(model: ModelParams, t_min: float, t_max: float) -> list[float]:
    """Divergence times of the harmonic closed forms inside ``[t_min, t_max]``."""
    out = []
    if model.omega > model.nu / 2.0:
        wn = math.sqrt(model.omega**2 - model.nu**2 / 4.0)
        n = max(1, math.ceil(t_min * wn / math.pi))
        while n * math.pi / wn <= t_max:
            out.append(n * math.pi / wn)
            n += 1
    if model.nu == 0.0 and model.omega > 0.0:
        n = max(0, math.ceil((t_min * model.omega / math.pi - 1.0) / 2.0))
        while (2 * n + 1) * math.pi / model.omega <= t_max:
            out.append((2 * n + 1) * math.pi / model.omega)
            n += 1
    return sorted(out)


def harmonic_table(model: ModelParams, times, pole_tol: float = 1e-8):
    """Rows ``(t, M, Omega2, K, D_i, D_f, D_m)`` with NaN rows at the pole times.

    Returns ``(rows, poles)``; ``poles`` lists the inserted divergence times
    together with any sample that fell within ``pole_tol`` of one.
    """
    times = [float(t) for t in times]
    poles = pole_times(model, times[0], times[-1]) if times else []
    grid = sorted(set(times) | set(poles))
    rows, hit = [], set(poles)
    nan6 = [math.nan] * 6
    for t in grid:
        if t in hit:
            rows.append([t] + nan6)
            continue
        try:
            qa = quadratic_action(model, t, pole_tol)
        except PoleError:
            hit.add(t)
            rows.append([t] + nan6)
            continue
        rows.append([t, qa.M, qa.Omega2, qa.K, qa.D_i, qa.D_f, qa.D_m])
    return rows, sorted(hit)


def wavepacket_table(model: ModelParams, state: GaussianState, times):
    states = evolve_series(state, model, times)
    rows = []
    for t, s in zip(times, states):
        mx = mixedness(s)
        rows.append([float(t), s.q2, s.r2, s.s2, mx.kappa, mx.purity])
    return rows


def fig4_march(model: ModelParams, g: float, t_values, tol: dict | None = None):
    """``Im S_eff`` and ``tau_edd`` along increasing t at fixed g.

    Each duration is seeded from the previous converged one; failures give
    NaN and restart the seeding.
    """
    tol = tol or {}
    seed = None
    im_s, tau, failures = [], [], []
    for t in t_values:
        b = BoundaryData(0.0, float(t), 0.0, 0.5, 0.0, 0.0)
        p = _problem(model, b, tol, g_target=g)
        try:
            sol = solve_saddle(p, seed)
            if not sol.converged:
                raise DecolabError(f"residual {sol.boundary_residual:.3g}")
        except DecolabError as exc:
            im_s.append(math.nan)
            tau.append(math.nan)
            failures.append(f"g={g:g} t={float(t):g}: {exc}")
            seed = None
            continue
        seed = sol
        im_s.append(sol.S_eff.imag)
        try:
            tau.append(effective_decoherence_time(sol, hbar=model.hbar))
        except DomainError as exc:
            tau.append(math.nan)
            failures.append(f"g={g:g} t={float(t):g}: {exc}")
    return im_s, tau, failures


def _problem(model, boundary, tol, g_target=None):
    keys = ("n_nodes", "n_segments", "boundary_tol", "residual_tol", "newton_tol")
    return SaddleProblem(model, boundary, g_target=g_target, **{k: tol[k] for k in keys if k in tol})


@dataclass
class _Ctx:
    cfg: RunConfig
    out: Path

    def emit(self, rec: TaskRecord, name: str, header, rows) -> None:
        emit_csv(self.out / name, header, rows)
        rec.outputs.append(name)


# -- tasks ---------------------------------------------------------------------------


def _task_harmonic(ctx: _Ctx, rec: TaskRecord, model: ModelParams, stem: str) -> None:
    times = ctx.cfg.time_grid.values()
    rows, poles = harmonic_table(model, times, ctx.cfg.tolerances["pole_tol"])
    ctx.emit(rec, f"{stem}.csv", ["t", "M", "Omega2", "K", "D_i", "D_f", "D_m"], rows)
    ctx.emit(rec, f"{stem}_poles.csv", ["t_pole"], [[p] for p in poles])
    if model.nu > 0:
        info = regime_info(model)
        rec.parameters.update(
            regime=info.regime, tau_i=info.tau_i, tau_r=info.tau_r, asymptotic_slope=info.asymptotic_slope
        )


def task_harmonic(ctx, rec):
    _task_harmonic(ctx, rec, ctx.cfg.model, "harmonic")


def task_brownian(ctx, rec):
    _task_harmonic(ctx, rec, ctx.cfg.model, "brownian")


def task_wavepacket(ctx, rec):
    cfg = ctx.cfg
    s = cfg.state
    state = GaussianState(s.q2, s.r2, s.s2)
    rows = wavepacket_table(cfg.model, state, cfg.time_grid.values())
    ctx.emit(rec, "wavepacket.csv", ["t", "q2", "r2", "s2", "kappa", "purity"], rows)
    rec.parameters.update(initial_kappa=state.kappa)
    try:
        a = asymptotic_state(cfg.model)
        rec.parameters.update(q2_inf=a.q2_inf, r2_inf=a.r2_inf, kappa_inf=a.kappa_inf, positivity_ok=a.positivity_ok)
    except DomainError as exc:
        rec.messages.append(f"no asymptotic state: {exc}")


def _trajectory_rows(sol, with_g=False):
    rows = []
    for i, t in enumerate(sol.times):
        row = [t, sol.x[i].real, sol.x[i].imag, sol.xd[i].real, sol.xd[i].imag]
        rows.append([sol.g] + row if with_g else row)
    return rows


TRAJ_HEADER = ["t", "re_x", "im_x", "re_xd", "im_xd"]


def task_saddle(ctx, rec):
    cfg = ctx.cfg
    problem = _problem(cfg.model, cfg.boundary, cfg.tolerances)
    # same saddle as sweep-g: the one connected to short durations
    sol = march_t(problem) if problem.target.g > 0 else solve_saddle(problem)
    ctx.emit(rec, "saddle.csv", TRAJ_HEADER, _trajectory_rows(sol))
    rec.parameters.update(_saddle_summary(sol, cfg.model.hbar))
    if not sol.converged:
        rec.status = "partial"


def _saddle_summary(sol, hbar):
    d = {
        "g": sol.g, "converged": sol.converged, "method": sol.method,
        "re_S_eff": sol.S_eff.real, "im_S_eff": sol.S_eff.imag,
        "boundary_residual": sol.boundary_residual, "ode_residual": sol.ode_residual,
    }
    if sol.converged and sol.S_eff.imag > 0:
        d["tau_edd"] = effective_decoherence_time(sol, hbar=hbar)
    if sol.error:
        d["error"] = sol.error
    return d


def task_sweep_g(ctx, rec):
    cfg = ctx.cfg
    sols = sweep_g(_problem(cfg.model, cfg.boundary, cfg.tolerances), cfg.g_grid)
    rows = []
    for sol in sols:
        rows.extend(_trajectory_rows(sol, with_g=True))
    ctx.emit(rec, "sweep_g.csv", ["g"] + TRAJ_HEADER, rows)
    summary = [[s.g, int(s.converged), s.S_eff.real, s.S_eff.imag, s.boundary_residual, s.ode_residual] for s in sols]
    ctx.emit(rec, "sweep_g_summary.csv", ["g", "converged", "re_S_eff", "im_S_eff", "boundary_residual", "ode_residual"], summary)
    failed = [s for s in sols if not s.converged]
    for s in failed:
        rec.messages.append(f"g={s.g:g}: {s.error or 'not converged'}")
    if failed:
        rec.status = "failed" if len(failed) == len(sols) else "partial"


def task_drude(ctx, rec):
    cfg = ctx.cfg
    b = cfg.bath
    hbar = cfg.model.hbar
    if b.kind == "drude":
        sm = SpectralModel("drude", lam=b.lam, OmegaD=b.OmegaD, m_B=b.m_B, T=b.T, hbar=hbar)
        p = drude_effective_params(sm)
        ctx.emit(rec, "drude.csv", ["delta_m", "delta_omega2", "k", "d0", "d2"],
                 [[p.delta_m, p.delta_omega2, p.k, p.d0, p.d2]])
        rec.parameters.update(lam=b.lam, OmegaD=b.OmegaD, m_B=b.m_B, T=b.T)
        if b.omega_B is not None:
            eff = effective_model(sm, b.omega_B)
            if eff.model is None:
                rec.messages.append(eff.diagnostic)
            else:
                mp = eff.model
                rec.parameters.update(effective_model=dict(m=mp.m, omega=mp.omega, nu=mp.nu, d0=mp.d0, d2=mp.d2))
    else:
        sm = SpectralModel("tabulated", m_B=b.m_B, T=b.T, hbar=hbar, table=load_table(b.table))
        rec.parameters.update(table=b.table)
    rows, errors = [], []
    for w in b.omega_grid:
        try:
            se = self_energy(sm, w)
            closed = sigma_n_drude(sm, w) if b.kind == "drude" else math.nan
            rows.append([w, se.Sigma_n, closed, se.Sigma_f.imag, se.Sigma_i])
        except DecolabError as exc:
            errors.append(f"omega={w:g}: {exc}")
            rows.append([w, math.nan, math.nan, math.nan, math.nan])
    ctx.emit(rec, "self_energy.csv", ["omega", "Sigma_n", "Sigma_n_closed", "im_Sigma_f", "Sigma_i"], rows)
    if errors:
        rec.messages.extend(errors)
        rec.status = "partial"


# -- figures -------------------------------------------------------------------------


def _fig_model(nu, omega=FIG_OMEGA, d0=None, d2=None, hbar=1.0):
    return ModelParams(m=1.0, omega=omega, nu=nu, d0=nu if d0 is None else d0, d2=nu if d2 is None else d2, hbar=hbar)


def _fig1_columns(ctx, rec, times, which):
    cols, poles_all = [], []
    for v in FIG1_COUPLINGS:
        rows, poles = harmonic_table(_fig_model(v), times, ctx.cfg.tolerances["pole_tol"])
        cols.append({r[0]: r[which] for r in rows})
        poles_all.extend((v, p) for p in poles)
    grid = sorted(set().union(*[c.keys() for c in cols]))
    return [[t] + [c.get(t, math.nan) for c in cols] for t in grid], poles_all


def task_fig1(ctx, rec, panel):
    f = ctx.cfg.figures["fig1"]
    n = int(f["n_points"])
    if panel == "b":
        times = np.linspace(f["linear_t_max"] / n, f["linear_t_max"], n)
    else:
        times = np.geomspace(f["t_min"], f["t_max"], n)
    which, label = (5, "D_f") if panel == "c" else (4, "D_i")
    rows, poles = _fig1_columns(ctx, rec, times, which)
    name = f"fig1{panel}"
    ctx.emit(rec, f"{name}.csv", ["t"] + [f"{label}_nu{_tag(v)}" for v in FIG1_COUPLINGS], rows)
    ctx.emit(rec, f"{name}_poles.csv", ["nu", "t_pole"], poles)
    rec.figure = f"Fig. 1({panel})"
    rec.parameters.update(
        omega=FIG_OMEGA, nu_d0_d2=list(FIG1_COUPLINGS), quantity=label,
        t_spacing="linear" if panel == "b" else "log", t_range=[float(times[0]), float(times[-1])],
    )


def _fig2_data(ctx):
    f = ctx.cfg.figures["fig2"]
    times = np.geomspace(f["t_min"], f["t_max"], int(f["n_points"]))
    data = {}
    for v in FIG2_COUPLINGS:
        model = _fig_model(v)
        for label, kappa in FIG2_KAPPAS:
            data[(v, label)] = wavepacket_table(model, GaussianState.from_kappa(1.0, kappa), times)
    return times, data


def task_fig2(ctx, rec, panel, cache):
    times, data = cache()
    col = {"a": 1, "b": 2, "c": 4}[panel]
    label = {"a": "q2", "b": "r2", "c": "kappa"}[panel]
    keys = [(v, lab) for v in FIG2_COUPLINGS for lab, _ in FIG2_KAPPAS]
    header = ["t"] + [f"{label}_nu{_tag(v)}_{lab}" for v, lab in keys]
    rows = [[t] + [data[k][i][col] for k in keys] for i, t in enumerate(times)]
    ctx.emit(rec, f"fig2{panel}.csv", header, rows)
    rec.figure = f"Fig. 2({panel})"
    rec.parameters.update(
        omega=FIG_OMEGA, nu_d0_d2=list(FIG2_COUPLINGS), q2_initial=1.0,
        kappa_initial={lab: k for lab, k in FIG2_KAPPAS}, quantity=label,
    )


def _g_values(f):
    return np.linspace(0.0, f["g_max"], int(f["n_g"])).tolist()


def task_fig3(ctx, rec):
    f = ctx.cfg.figures["fig3"]
    model = ModelParams(m=1.0, omega=f["omega"], nu=f["nu"], d0=f["d0"], d2=f["d2"])
    b = BoundaryData(0.0, f["t"], 0.0, 0.5, 2.0, 0.0)
    sols = sweep_g(_problem(model, b, ctx.cfg.tolerances), _g_values(f))
    rows = []
    for s in sols:
        rows.extend(_trajectory_rows(s, with_g=True))
    ctx.emit(rec, "fig3.csv", ["g"] + TRAJ_HEADER, rows)
    rec.figure = "Fig. 3"
    rec.parameters.update(
        omega0=f["omega"], nu=f["nu"], d0=f["d0"], d2=f["d2"], t=f["t"],
        x_i=0.0, xd_i=0.5, x_f=2.0, xd_f=0.0, g_values=_g_values(f),
        solutions=[_saddle_summary(s, 1.0) for s in sols],
    )
    failed = [s for s in sols if not s.converged]
    if failed:
        rec.status = "failed" if len(failed) == len(sols) else "partial"


def task_fig4(ctx, rec, pool):
    f = ctx.cfg.figures["fig4"]
    model = ModelParams(m=1.0, omega=f["omega"], nu=f["nu"], d0=f["d0"], d2=f["d2"])
    gs = _g_values(f)
    ts = np.linspace(f["t_min"], f["t_max"], int(f["n_t"]))
    results = list(pool.map(lambda g: fig4_march(model, g, ts, ctx.cfg.tolerances), gs))
    header = ["t"] + [f"tau_edd_g{_tag(g)}" for g in gs] + [f"im_S_g{_tag(g)}" for g in gs]
    rows = [[t] + [r[1][i] for r in results] + [r[0][i] for r in results] for i, t in enumerate(ts)]
    ctx.emit(rec, "fig4.csv", header, rows)
    rec.figure = "Fig. 4"
    rec.parameters.update(
        omega0=f["omega"], nu=f["nu"], d0=f["d0"], d2=f["d2"], x_i=0.0, xd_i=0.5, x_f=0.0, xd_f=0.0,
        g_values=gs, t_values=ts.tolist(),
    )
    for r in results:
        rec.messages.extend(r[2])
    if any(r[2] for r in results):
        rec.status = "partial"


# -- driver --------------------------------------------------------------------------


def _figure_tasks(ctx, pool):
    only = ctx.cfg.figures["only"]
    tasks: list[tuple[str, Callable]] = []
    if "fig1" in only:
        for p in "abc":
            tasks.append((f"fig1{p}", lambda c, r, p=p: task_fig1(c, r, p)))
    if "fig2" in only:
        cache = _Once(lambda: _fig2_data(ctx))
        for p in "abc":
            tasks.append((f"fig2{p}", lambda c, r, p=p: task_fig2(c, r, p, cache)))
    if "fig3" in only:
        tasks.append(("fig3", task_fig3))
    if "fig4" in only:
        tasks.append(("fig4", lambda c, r: task_fig4(c, r, pool)))
    return tasks


class _Once:
    """Thread-safe lazily computed value shared by several tasks."""

    def __init__(self, fn):
        self._fn = fn
        self._lock = threading.Lock()
        self._done = False
        self._value = None

    def __call__(self):
        with self._lock:
            if not self._done:
                self._value = self._fn()
                self._done = True
        return self._value


COMMAND_TASKS = {
    "harmonic": [("harmonic", task_harmonic)],
    "brownian": [("brownian", task_brownian)],
    "wavepacket": [("wavepacket", task_wavepacket)],
    "saddle": [("saddle", task_saddle)],
    "sweep-g": [("sweep-g", task_sweep_g)],
    "drude": [("drude", task_drude)],
}


def _run_task(ctx, name, fn) -> TaskRecord:
    rec = TaskRecord(name)
    try:
        fn(ctx, rec)
    except DecolabError as exc:
        rec.status = "failed"
        rec.error = f"{type(exc).__name__}: {exc}"
        log.error("task %s failed: %s", name, rec.error)
    return rec


def run(cfg: RunConfig, out_dir: str | Path | None = None, threads: int = 1) -> RunManifest:
    """Run every task of ``cfg.command`` and write CSVs plus ``manifest.json``."""
    if cfg.command is None:
        raise DomainError("configuration has no command")
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    ctx = _Ctx(cfg, out)
    start = time.perf_counter()
    # fig4 fans out over g inside its task; give it its own pool so it cannot starve
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool, ThreadPoolExecutor(
        max_workers=max(1, threads)
    ) as inner:
        tasks = _figure_tasks(ctx, inner) if cfg.command == "figures" else COMMAND_TASKS[cfg.command]
        records = list(pool.map(lambda nt: _run_task(ctx, *nt), tasks))
    files = {}
    for rec in records:
        for name in rec.outputs:
            files[name] = sha256_file(out / name)
    defaults = list(cfg.defaults)
    if cfg.command == "figures" and "fig4" in cfg.figures["only"]:
        defaults.append(f"fig4 friction nu={cfg.figures['fig4']['nu']!r} (not stated for Fig. 4; chosen)")
    manifest = RunManifest(
        command=cfg.command, version=__version__, config=cfg.resolved, tasks=records, files=files,
        wall_time_s=time.perf_counter() - start, defaults=defaults, warnings=list(cfg.warnings),
    )
    write_manifest(out / "manifest.json", manifest)
    return manifest
