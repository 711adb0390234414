"""Complex saddle-point trajectories of the effective action.

The Euler-Lagrange equations of the effective Lagrangian are

    m xd'' = k xd' - [U'(x + xd/2) - U'(x - xd/2)]
    m x''  = -(1/2)[U'(x + xd/2) + U'(x - xd/2)] - k x' + i [V'(xd) - d2 xd'']

with positions fixed at both ends.  The fluctuation ``xd`` runs away forward in
time while ``x`` relaxes, so single shooting in either direction is hopeless
for long durations.  The nonlinear problem is solved by multiple shooting with
a complex Newton iteration, continued in the quartic couplings from the exact
linear solution; global collocation and continuation in the duration are
fallbacks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson, solve_bvp
from scipy.linalg import expm

from decolab._linear import solve_position_bvp
from decolab.errors import DomainError, NonConvergence, PoleError, SolverError, StiffnessError
from decolab.harmonic import quadratic_action_real
from decolab.model import BoundaryData, ModelParams, decoherence_force, potential_force

__all__ = [
    "SaddleProblem",
    "SaddleSolution",
    "harmonic_saddle",
    "solve_saddle",
    "action_along",
    "effective_decoherence_time",
    "sweep_g",
    "march_t",
    "implicit_residual",
    "linear_system_matrix",
    "layout_of",
]

log = logging.getLogger(__name__)

# largest Newton correction per continuation step, relative to the predictor
BRANCH_JUMP = 0.25
# Newton iterations allowed per continuation step before the step is halved
CONTINUATION_NEWTON = 12
# duration of the first member of a march in t, in units of 1/max(nu, omega)
MARCH_START = 0.5
# smallest accepted march step, relative to the initial step
MARCH_MIN_STEP = 1.0 / 64
# RK4 step bound in units of the inverse spectral radius
MAX_STEP_EXPONENT = 0.02
# RK4 integration step bound, finer than the output grid when needed
ACCURACY_STEP_EXPONENT = 0.005
# RK4 steps per segment; longer problems get more segments, which integrate in parallel
MAX_SEGMENT_STEPS = 128
# growth allowed across one shooting segment
MAX_SEGMENT_GROWTH = 4.0


@dataclass(frozen=True)
class SaddleProblem:
    model: ModelParams
    boundary: BoundaryData
    n_nodes: int = 513
    n_segments: int = 8
    g_target: float | None = None
    boundary_tol: float = 1e-10
    residual_tol: float = 1e-8
    newton_tol: float = 1e-12
    method: str = "auto"  # auto | shooting | collocation
    max_newton: int = 30
    min_step: float = 1.0 / 1024
    substeps: int | None = None  # RK4 steps per output interval; None picks it from the spectral radius

    def __post_init__(self):
        if self.substeps is not None and self.substeps < 1:
            raise DomainError(f"substeps must be >= 1, got {self.substeps}")
        if self.n_nodes < 16:
            raise DomainError(f"n_nodes must be >= 16, got {self.n_nodes}")
        if self.n_segments < 1:
            raise DomainError(f"n_segments must be >= 1, got {self.n_segments}")
        for name in ("boundary_tol", "residual_tol", "newton_tol", "min_step"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.method not in ("auto", "shooting", "collocation"):
            raise DomainError(f"unknown method {self.method!r}")

    @property
    def target(self) -> ModelParams:
        if self.g_target is None:
            return self.model
        return self.model.with_(g=self.g_target)


@dataclass
class SaddleSolution:
    times: np.ndarray
    x: np.ndarray
    xd: np.ndarray
    vx: np.ndarray
    vxd: np.ndarray
    S_eff: complex
    boundary_residual: float
    ode_residual: float
    converged: bool
    continuation_path: list[float] = field(default_factory=list)
    method: str = "shooting"
    g: float = 0.0
    error: str | None = None

    @property
    def t(self) -> float:
        return float(self.times[-1] - self.times[0])

    def states(self) -> np.ndarray:
        return np.stack([self.x, self.xd, self.vx, self.vxd], axis=-1)


def linear_system_matrix(model: ModelParams) -> np.ndarray:
    """First-order matrix of the g = 0 equations in ``z = (x, xd, x', xd')``."""
    m, w2, nu = model.m, model.omega**2, model.nu
    ay = np.array([0.0, -w2, 0.0, nu], dtype=complex)
    ax = np.array([-w2, 0.0, -nu, 0.0], dtype=complex)
    ax += 1j / m * (np.array([0.0, model.d0, 0.0, 0.0]) - model.d2 * ay)
    A = np.zeros((4, 4), dtype=complex)
    A[0, 2] = A[1, 3] = 1.0
    A[2] = ax
    A[3] = ay
    return A


def _rhs(model: ModelParams, z: np.ndarray) -> np.ndarray:
    x, y, vx, vy = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    fp = potential_force(model, x + 0.5 * y)
    fm = potential_force(model, x - 0.5 * y)
    ay = model.nu * vy - (fp - fm) / model.m
    ax = -0.5 * (fp + fm) / model.m - model.nu * vx + 1j / model.m * (decoherence_force(model, y) - model.d2 * ay)
    return np.stack([vx, vy, ax, ay], axis=-1)


def _jac(model: ModelParams, z: np.ndarray) -> np.ndarray:
    x, y = z[..., 0], z[..., 1]
    m, nu = model.m, model.nu
    w2 = m * model.omega**2
    hp = w2 + 0.5 * model.g * (x + 0.5 * y) ** 2
    hm = w2 + 0.5 * model.g * (x - 0.5 * y) ** 2
    vpp = model.d0 + 0.5 * model.g_d * y**2
    J = np.zeros(z.shape + (4,), dtype=complex)
    J[..., 0, 2] = 1.0
    J[..., 1, 3] = 1.0
    day_dx = -(hp - hm) / m
    day_dy = -0.5 * (hp + hm) / m
    J[..., 3, 0] = day_dx
    J[..., 3, 1] = day_dy
    J[..., 3, 3] = nu
    c = 1j * model.d2 / m
    J[..., 2, 0] = -0.5 * (hp + hm) / m - c * day_dx
    J[..., 2, 1] = -0.25 * (hp - hm) / m + 1j * vpp / m - c * day_dy
    J[..., 2, 2] = -nu
    J[..., 2, 3] = -c * nu
    return J


def _rk4(model, starts, lay, variational=True, record=False):
    """Integrate every segment at once; returns ends, monodromy blocks and node samples."""
    with np.errstate(over="ignore", invalid="ignore"):
        return _rk4_loop(model, starts, lay.h, lay.steps * lay.sub, lay.sub, variational, record)


def _rk4_loop(model, starts, h, n_steps, stride, variational, record):
    z = starts.astype(complex)
    K = z.shape[0]
    phi = np.broadcast_to(np.eye(4, dtype=complex), (K, 4, 4)).copy() if variational else None
    traj = np.empty((K, n_steps // stride + 1, 4), dtype=complex) if record else None
    if record:
        traj[:, 0] = z
    for n in range(n_steps):
        k1 = _rhs(model, z)
        z2 = z + 0.5 * h * k1
        k2 = _rhs(model, z2)
        z3 = z + 0.5 * h * k2
        k3 = _rhs(model, z3)
        z4 = z + h * k3
        k4 = _rhs(model, z4)
        if variational:
            J1, J2, J3, J4 = _jac(model, z), _jac(model, z2), _jac(model, z3), _jac(model, z4)
            p1 = J1 @ phi
            p2 = J2 @ (phi + 0.5 * h * p1)
            p3 = J3 @ (phi + 0.5 * h * p2)
            p4 = J4 @ (phi + h * p3)
            phi = phi + h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
        z = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if record and (n + 1) % stride == 0:
            traj[:, (n + 1) // stride] = z
    return z, phi, traj


class _Stall(Exception):
    def __init__(self, residual):
        super().__init__(residual)
        self.residual = residual


@dataclass
class _Layout:
    K: int
    steps: int  # output intervals per segment
    t: float
    sub: int = 1  # RK4 steps per output interval

    @property
    def h(self) -> float:
        return self.t / (self.K * self.steps * self.sub)

    @property
    def seg_len(self) -> float:
        return self.t / self.K

    @property
    def n_nodes(self) -> int:
        return self.K * self.steps + 1


def _spectral_radius(model: ModelParams) -> float:
    return float(max(np.max(np.abs(np.linalg.eigvals(linear_system_matrix(model)))), 1e-12))


def layout_of(problem: SaddleProblem) -> tuple[int, int, int]:
    """``(segments, output intervals per segment, RK4 steps per interval)``."""
    lay = _layout(problem)
    return lay.K, lay.steps, lay.sub


def _layout(problem: SaddleProblem) -> _Layout:
    t = problem.boundary.t
    rho = _spectral_radius(problem.model.with_(g=0.0, g_d=0.0))
    K = max(
        problem.n_segments,
        math.ceil(t * rho / MAX_SEGMENT_GROWTH),
        math.ceil(t * rho / (ACCURACY_STEP_EXPONENT * MAX_SEGMENT_STEPS)),
    )
    steps = max(math.ceil((problem.n_nodes - 1) / K), math.ceil(t * rho / (MAX_STEP_EXPONENT * K)))
    sub = problem.substeps or math.ceil(t * rho / (ACCURACY_STEP_EXPONENT * K * steps))
    return _Layout(K, steps, t, sub)


def _targets(b: BoundaryData) -> tuple[np.ndarray, np.ndarray]:
    return np.array([b.x_i, b.xd_i]), np.array([b.x_f, b.xd_f])


def _unpack(u, left, K):
    starts = np.empty((K, 4), dtype=complex)
    starts[0, :2] = left
    starts[0, 2:] = u[:2]
    if K > 1:
        starts[1:] = u[2:].reshape(K - 1, 4)
    return starts


def _pack(starts):
    return np.concatenate([starts[0, 2:], starts[1:].ravel()])


def _residual(ends, starts, right):
    K = starts.shape[0]
    F = np.empty(4 * K - 2, dtype=complex)
    if K > 1:
        F[: 4 * (K - 1)] = (ends[:-1] - starts[1:]).ravel()
    F[4 * (K - 1):] = ends[-1, :2] - right
    return F


def _newton_jacobian(phi):
    K = phi.shape[0]
    N = 4 * K - 2
    J = np.zeros((N, N), dtype=complex)

    def col(j):  # unknown columns belonging to segment start j
        return slice(0, 2) if j == 0 else slice(2 + 4 * (j - 1), 2 + 4 * j)

    for j in range(K - 1):
        rows = slice(4 * j, 4 * j + 4)
        J[rows, col(j)] = phi[j][:, 2:] if j == 0 else phi[j]
        J[rows, col(j + 1)] = -np.eye(4)
    rows = slice(4 * (K - 1), 4 * K - 2)
    J[rows, col(K - 1)] = phi[K - 1][:2, 2:] if K == 1 else phi[K - 1][:2]
    return J


def _magnitude(b: BoundaryData, starts: np.ndarray) -> float:
    """Scale against which residuals are judged: boundary data or trajectory size."""
    return float(max(1.0, abs(b.x_i), abs(b.xd_i), abs(b.x_f), abs(b.xd_f), np.max(np.abs(starts[:, :2]))))


def _newton(model, b, starts, lay, problem, max_iter=None, max_dev=None):
    """Damped complex Newton on the multiple-shooting residual.

    Residuals are measured relative to the trajectory magnitude, since the
    runaway fluctuation can make the interior values large for long durations.
    With ``max_dev`` the iteration gives up as soon as it moves further than
    that from its start (used to stay on one continuation branch).
    """
    left, right = _targets(b)
    K = lay.K
    u = _pack(starts)
    u0 = u
    st = _unpack(u, left, K)
    ends, phi, _ = _rk4(model, st, lay)
    F = _residual(ends, st, right)
    norm = np.max(np.abs(F)) / _magnitude(b, st)
    accept = min(problem.boundary_tol, problem.residual_tol)
    for _ in range(problem.max_newton if max_iter is None else max_iter):
        if not np.isfinite(norm):
            raise _Stall(norm)
        if norm <= problem.newton_tol:
            break
        try:
            step = np.linalg.solve(_newton_jacobian(phi), -F)
        except np.linalg.LinAlgError:
            raise _Stall(norm)
        alpha = 1.0
        while True:
            trial = u + alpha * step
            st = _unpack(trial, left, K)
            e2, p2, _ = _rk4(model, st, lay)
            F2 = _residual(e2, st, right)
            n2 = np.max(np.abs(F2)) / _magnitude(b, st)
            if np.isfinite(n2) and n2 < norm * (1.0 - 1e-4 * alpha):
                break
            alpha *= 0.5
            if alpha < 1.0 / 64:
                if norm <= accept:
                    return u, norm  # at the round-off floor
                raise _Stall(norm)
        u, F, norm, phi = trial, F2, n2, p2
        if max_dev is not None and np.max(np.abs(u - u0)) > max_dev:
            raise _Stall(norm)
    else:
        if norm > accept:
            raise _Stall(norm)
    return u, norm


def _finish(model, b, u, lay, method, path, g):
    left, right = _targets(b)
    starts = _unpack(u, left, lay.K)
    ends, _, traj = _rk4(model, starts, lay, variational=False, record=True)
    F = _residual(ends, starts, right)
    mag = _magnitude(b, starts)
    continuity = float(np.max(np.abs(F[: 4 * (lay.K - 1)]))) / mag if lay.K > 1 else 0.0
    bres = float(np.max(np.abs(F[4 * (lay.K - 1):]))) / mag
    z = np.concatenate([traj[:, :-1].reshape(-1, 4), traj[-1, -1:]], axis=0)
    times = b.t_i + np.linspace(0.0, lay.t, lay.n_nodes)
    sol = SaddleSolution(
        times=times, x=z[:, 0], xd=z[:, 1], vx=z[:, 2], vxd=z[:, 3], S_eff=0j,
        boundary_residual=bres, ode_residual=continuity, converged=True,
        continuation_path=list(path), method=method, g=g,
    )
    sol.S_eff = action_along(model, sol)
    return sol


def harmonic_saddle(model: ModelParams, boundary: BoundaryData, n_nodes: int = 513, times=None) -> SaddleSolution:
    """Exact saddle of the linear (g = 0) problem.

    The four-dimensional linear system is solved through segment
    propagators, so critical damping and the Brownian zero modes need no
    special treatment.  ``S_eff`` is evaluated from the on-shell reduction
    ``[x (m xd' - k xd/2)] + (i/2) int (d0 xd^2 + d2 xd'^2)``.
    """
    if model.g != 0.0 or model.g_d != 0.0:
        raise DomainError("harmonic_saddle needs g = g_d = 0")
    t = boundary.t
    quadratic_action_real(model, t)  # raises PoleError at focusing times
    A = linear_system_matrix(model)
    left, right = _targets(boundary)
    lin = solve_position_bvp(A, t, left, right)
    if times is None:
        s = np.linspace(0.0, t, n_nodes)
    else:
        s = np.asarray(times, dtype=float) - boundary.t_i
    z = _sample_linear(lin, s)
    z[0, :2] = left
    z[-1, :2] = right
    end = lin.end_state()
    bres = float(max(np.max(np.abs(end[:2] - right)), np.max(np.abs(lin.starts[0, :2] - left))))

    def flux(state):
        return state[0] * (model.m * state[3] - 0.5 * model.k * state[1])

    Q = np.diag([0.0, model.d0, 0.0, model.d2]).astype(complex)
    S = flux(end) - flux(lin.starts[0]) + 0.5j * lin.quadratic_integral(Q)
    return SaddleSolution(
        times=boundary.t_i + s, x=z[:, 0], xd=z[:, 1], vx=z[:, 2], vxd=z[:, 3], S_eff=complex(S),
        boundary_residual=bres, ode_residual=0.0, converged=True, continuation_path=[0.0],
        method="closed-form", g=0.0,
    )


def _sample_linear(lin, s):
    z = np.empty((s.size, 4), dtype=complex)
    idx = np.minimum((s / lin.h).astype(int), lin.n_segments - 1)
    cache = {}
    for k, (j, sk) in enumerate(zip(idx, s)):
        off = round(sk - j * lin.h, 14)
        P = cache.get(off)
        if P is None:
            P = cache[off] = expm(lin.A * off)
        z[k] = P @ lin.starts[j]
    return z


def _guess_from(sol: SaddleSolution, lay: _Layout) -> np.ndarray:
    """Segment start states for ``lay`` read off an existing solution (time-rescaled)."""
    frac = np.arange(lay.K) / lay.K
    tau = (sol.times - sol.times[0]) / sol.t
    z = sol.states()
    out = np.empty((lay.K, 4), dtype=complex)
    scale = sol.t / lay.t  # velocities rescale with the duration
    for c in range(4):
        out[:, c] = np.interp(frac, tau, z[:, c].real) + 1j * np.interp(frac, tau, z[:, c].imag)
    out[:, 2:] *= scale
    return out


def _scaled(target: ModelParams, lam: float) -> ModelParams:
    return target.with_(g=lam * target.g, g_d=lam * target.g_d)


def _continue_g(problem, lay, seed_u, lam0, path):
    """Homotopy in ``lam`` scaling (g, g_d) from ``lam0`` to 1 with a secant predictor."""
    target = problem.target
    b = problem.boundary
    left, _ = _targets(b)
    history = [(lam0, seed_u)]
    lam, dl = lam0, 1.0 - lam0
    u = seed_u
    while lam < 1.0:
        trial = min(1.0, lam + dl)
        if len(history) >= 2:
            (l0, u0), (l1, u1) = history[-2], history[-1]
            pred = u1 + (trial - l1) / (l1 - l0) * (u1 - u0)
        else:
            pred = u
        # a large Newton correction means the iteration left the branch
        max_dev = BRANCH_JUMP * max(1.0, float(np.max(np.abs(pred))))
        try:
            u_new, _ = _newton(
                _scaled(target, trial), b, _unpack(pred, left, lay.K), lay, problem,
                max_iter=min(problem.max_newton, CONTINUATION_NEWTON), max_dev=max_dev,
            )
        except _Stall:
            dl *= 0.5
            if dl < problem.min_step * (1.0 - lam0):
                raise NonConvergence(f"continuation in g stalled at g={lam * target.g}")
            continue
        lam, u = trial, u_new
        history.append((lam, u))
        path.append(lam * target.g)
        dl = min(2.0 * dl, 1.0 - lam)
    return u


def _shooting(problem: SaddleProblem, seed: SaddleSolution | None = None) -> SaddleSolution:
    b = problem.boundary
    target = problem.target
    lay = _layout(problem)
    if seed is None:
        lam0 = 0.0
        base = problem.model.with_(g=0.0, g_d=0.0)
        guess = harmonic_saddle(base, b, times=b.t_i + np.arange(lay.K) * lay.seg_len)
        starts = guess.states()
    else:
        lam0 = min(seed.g / target.g, 1.0) if target.g != 0 else 0.0
        base = _scaled(target, lam0)
        starts = _guess_from(seed, lay)
    try:
        u, _ = _newton(base, b, starts, lay, problem)
    except _Stall as exc:
        what = "the linear problem" if seed is None else "the seeded guess"
        raise StiffnessError(
            f"Newton stagnated on {what} (residual {exc.residual:.3g}); try more segments than {lay.K}",
            residual=float(exc.residual),
        )
    path = [lam0 * target.g]
    if lam0 < 1.0 and (target.g != 0.0 or target.g_d != 0.0):
        u = _continue_g(problem, lay, u, lam0, path)
    return _finish(target, b, u, lay, "shooting", path, target.g)


def _time_continuation(problem: SaddleProblem, levels: int = 4) -> SaddleSolution:
    """Reach the full duration from a shorter problem with the same end data."""
    b = problem.boundary
    fractions = [2.0 ** (-k) for k in range(levels, 0, -1)]
    sol = None
    path: list[float] = []
    for f in fractions + [1.0]:
        sub = replace(b, t_f=b.t_i + f * b.t)
        p = replace(problem, boundary=sub)
        if sol is None:
            sol = _shooting(p)
            path = list(sol.continuation_path)
            continue
        lay = _layout(p)
        try:
            u, _ = _newton(p.target, sub, _guess_from(sol, lay), lay, p)
        except _Stall as exc:
            raise NonConvergence(f"continuation in t stalled at t={f * b.t}", residual=float(exc.residual))
        sol = _finish(p.target, sub, u, lay, "shooting+t-continuation", path, p.target.g)
    return sol


def _split(z):
    return np.concatenate([z.real, z.imag], axis=0)


def _join(y):
    n = y.shape[0] // 2
    return y[:n] + 1j * y[n:]


def _collocation(problem: SaddleProblem) -> SaddleSolution:
    """Global collocation with its own continuation in g from the linear saddle.

    solve_bvp sees the 8 real components; its complex mode does not converge
    on the nonlinear system.
    """
    b = problem.boundary
    target = problem.target
    left, right = _targets(b)
    base = problem.model.with_(g=0.0, g_d=0.0)
    mesh = np.linspace(0.0, b.t, 257)
    guess = _split(harmonic_saddle(base, b, times=b.t_i + mesh).states().T)

    def bc(ya, yb):
        za, zb = _join(ya), _join(yb)
        c = np.array([za[0] - left[0], za[1] - left[1], zb[0] - right[0], zb[1] - right[1]])
        return _split(c)

    def attempt(model, mesh, guess):
        def fun(s, y):
            return _split(_rhs(model, _join(y).T).T)

        def fun_jac(s, y):
            A = np.moveaxis(_jac(model, _join(y).T), 0, -1)
            top = np.concatenate([A.real, -A.imag], axis=1)
            return np.concatenate([top, np.concatenate([A.imag, A.real], axis=1)], axis=0)

        return solve_bvp(fun, bc, mesh, guess, fun_jac=fun_jac, tol=problem.residual_tol, max_nodes=20000)

    nonlinear = target.g != 0.0 or target.g_d != 0.0
    lam, dl = (0.0, 1.0) if nonlinear else (1.0, 0.0)
    path = [0.0]
    res = attempt(_scaled(target, lam), mesh, guess)
    while res.status == 0 and lam < 1.0:
        trial = min(1.0, lam + dl)
        nxt = attempt(_scaled(target, trial), res.x, res.y)
        if nxt.status != 0:
            dl *= 0.5
            if dl < problem.min_step:
                res = nxt
                break
            continue
        lam, res = trial, nxt
        path.append(lam * target.g)
        dl = min(2.0 * dl, 1.0 - lam)
    if res.status != 0:
        raise NonConvergence(f"collocation failed: {res.message}", residual=float(np.max(res.rms_residuals)))
    lay = _layout(problem)
    s = np.linspace(0.0, b.t, lay.n_nodes)
    z = _join(res.sol(s)).T
    bres = float(np.max(np.abs(bc(res.y[:, 0], res.y[:, -1]))))
    sol = SaddleSolution(
        times=b.t_i + s, x=z[:, 0], xd=z[:, 1], vx=z[:, 2], vxd=z[:, 3], S_eff=0j,
        boundary_residual=bres, ode_residual=float(np.max(res.rms_residuals)),
        converged=bres <= problem.boundary_tol * max(1.0, float(np.max(np.abs(z[:, :2])))), continuation_path=path,
        method="collocation", g=target.g,
    )
    sol.S_eff = action_along(target, sol)
    return sol


def solve_saddle(problem: SaddleProblem, seed: SaddleSolution | None = None) -> SaddleSolution:
    """Solve the saddle-point boundary problem for ``problem.target``.

    ``seed`` (a converged solution at a smaller g with the same boundary
    data) starts the continuation from there instead of from g = 0.
    """
    if problem.method == "collocation":
        return _collocation(problem)
    errors = []
    if seed is not None:
        try:
            return _shooting(problem, seed)
        except SolverError as exc:
            errors.append(f"seeded shooting: {exc}")
    try:
        return _shooting(problem)
    except SolverError as exc:
        if problem.method == "shooting":
            raise
        errors.append(f"shooting: {exc}")
        log.info("multiple shooting failed (%s); trying continuation in t", exc)
    try:
        return _time_continuation(problem)
    except SolverError as exc:
        errors.append(f"t-continuation: {exc}")
        log.info("continuation in t failed (%s); trying collocation", exc)
    try:
        sol = _collocation(problem)
        if sol.converged:
            return sol
        errors.append(f"collocation: boundary residual {sol.boundary_residual:.3g}")
    except SolverError as exc:
        errors.append(f"collocation: {exc}")
    raise NonConvergence("; ".join(errors))


def action_along(model: ModelParams, sol: SaddleSolution) -> complex:
    """Composite Simpson quadrature of the effective Lagrangian along ``sol``."""
    x, y, vx, vy = sol.x, sol.xd, sol.vx, sol.vxd
    real = (
        model.m * vx * vy
        - 0.5 * model.k * (vx * y - x * vy)
        - (potential_energy(model, x + 0.5 * y) - potential_energy(model, x - 0.5 * y))
    )
    imag = 0.5 * model.d0 * y**2 + model.g_d * y**4 / 24.0 + 0.5 * model.d2 * vy**2
    L = real + 1j * imag
    return complex(simpson(L, x=sol.times))


def potential_energy(model, x):
    return 0.5 * model.m * model.omega**2 * x**2 + model.g * x**4 / 24.0


def implicit_residual(model: ModelParams, sol: SaddleSolution) -> float:
    """Residual of the original (implicit) equations with accelerations from the explicit system."""
    z = sol.states()
    acc = _rhs(model, z)
    x, y, vx, vy = z.T
    ax, ay = acc[:, 2], acc[:, 3]
    fp = potential_force(model, x + 0.5 * y)
    fm = potential_force(model, x - 0.5 * y)
    r1 = model.m * ax + 0.5 * fp + 0.5 * fm + model.k * vx - 1j * (decoherence_force(model, y) - model.d2 * ay)
    r2 = model.m * ay - model.k * vy + fp - fm
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def effective_decoherence_time(sol: SaddleSolution, t: float | None = None, hbar: float = 1.0) -> float:
    """``tau_edd = hbar t / Im S_eff``."""
    t = sol.t if t is None else t
    im = sol.S_eff.imag
    if not im > 0:
        raise DomainError(f"Im S_eff = {im} is not positive; no decoherence time")
    return hbar * t / im


def march_t(problem: SaddleProblem, n_steps: int | None = None) -> SaddleSolution:
    """Solve at fixed g by continuation in the final time from a short duration.

    The nonlinear boundary problem can have several saddles at long times;
    this follows the one connected to the (unique) short-time solution.
    Steps are equal in t and halved on failure.
    """
    b = problem.boundary
    T = b.t_f - b.t_i
    rate = max(problem.model.nu, problem.model.omega, 1.0 / T)
    if n_steps is None:
        n_steps = max(1, math.ceil(T * rate / MARCH_START))
    dt0 = T / n_steps
    dt, t, seed = dt0, 0.0, None
    while t < T:
        t_next = min(T, t + dt)
        if T - t_next < 1e-9 * T:
            t_next = T
        p = replace(problem, boundary=replace(b, t_f=b.t_i + t_next))
        try:
            sol = solve_saddle(p, seed)
            if not sol.converged:
                raise NonConvergence(f"boundary residual {sol.boundary_residual:.3g}")
        except (SolverError, PoleError) as exc:
            if seed is None or dt <= MARCH_MIN_STEP * dt0:
                raise NonConvergence(f"march in t stalled at t = {t_next:g}: {exc}") from exc
            dt *= 0.5
            continue
        seed, t = sol, t_next
        dt = min(dt0, 2.0 * dt)
    sol = replace(seed, continuation_path=[0.0, 1.0], method=f"{seed.method}+t-march")
    return sol


def sweep_g(problem: SaddleProblem, g_values) -> list[SaddleSolution]:
    """Solutions along increasing g, each seeded from the previous converged one.

    The first g > 0 without such a seed is reached by :func:`march_t`, so the
    family sits on the saddle connected to short durations.  Failures are
    recorded per item (``converged=False`` with ``error``) without stopping
    the sweep.
    """
    g_values = [float(g) for g in g_values]
    if any(b < a for a, b in zip(g_values, g_values[1:])):
        raise DomainError("g_values must be sorted ascending")
    out = []
    seed = None
    for g in g_values:
        p = replace(problem, g_target=g)
        try:
            if g > 0 and (seed is None or seed.g == 0):
                sol = march_t(p)
            else:
                sol = solve_saddle(p, seed)
            seed = sol if sol.method.startswith("shooting") else seed
        except (SolverError, PoleError) as exc:
            empty = np.empty(0, dtype=complex)
            sol = SaddleSolution(
                times=np.empty(0), x=empty, xd=empty, vx=empty, vxd=empty, S_eff=complex("nan+nanj"),
                boundary_residual=math.nan, ode_residual=math.nan, converged=False,
                continuation_path=[], method="failed", g=g, error=f"{type(exc).__name__}: {exc}",
            )
        out.append(sol)
    return out
