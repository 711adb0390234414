"""Exact solution of linear two-point boundary-value problems.

The interval is cut into equal segments short enough that the segment
propagator ``expm(A h)`` stays well conditioned, and the matching conditions
are solved as one sparse linear system.  Degenerate normal frequencies
(critical damping, Brownian zero modes, frictionless resonance) need no
special casing here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import spsolve

MAX_SEGMENT_EXPONENT = 1.0


@dataclass
class LinearBVPSolution:
    A: np.ndarray
    h: float
    starts: np.ndarray  # (K, n) state at the start of each segment

    @property
    def n_segments(self) -> int:
        return self.starts.shape[0]

    def sample(self, n_per_segment: int) -> tuple[np.ndarray, np.ndarray]:
        """States at ``n_per_segment`` equal sub-steps per segment plus the end point."""
        step = expm(self.A * (self.h / n_per_segment))
        n = self.starts.shape[1]
        out = np.empty((self.n_segments * n_per_segment + 1, n), dtype=complex)
        for j, z in enumerate(self.starts):
            cur = z.copy()
            for k in range(n_per_segment):
                out[j * n_per_segment + k] = cur
                cur = step @ cur
        out[-1] = self.end_state()
        s = np.linspace(0.0, self.h * self.n_segments, out.shape[0])
        return s, out

    def end_state(self) -> np.ndarray:
        return expm(self.A * self.h) @ self.starts[-1]

    def quadratic_integral(self, Q: np.ndarray) -> complex:
        """``int z(s)^T Q z(s) ds`` over the whole interval (no conjugation)."""
        W = gram(self.A, Q, self.h)
        return complex(sum(z @ W @ z for z in self.starts))


def segment_count(A: np.ndarray, t: float, minimum: int = 1) -> int:
    rho = max(np.max(np.abs(np.linalg.eigvals(A))), np.linalg.norm(A, 1) * 0.25, 1e-300)
    return max(minimum, int(np.ceil(t * rho / MAX_SEGMENT_EXPONENT)))


def gram(A: np.ndarray, Q: np.ndarray, h: float) -> np.ndarray:
    """Van Loan evaluation of ``int_0^h expm(A^T s) Q expm(A s) ds``."""
    n = A.shape[0]
    big = np.zeros((2 * n, 2 * n), dtype=complex)
    big[:n, :n] = -A.T
    big[:n, n:] = Q
    big[n:, n:] = A
    F = expm(big * h)
    return F[n:, n:].T @ F[:n, n:]


def solve_position_bvp(
    A: np.ndarray,
    t: float,
    left: np.ndarray,
    right: np.ndarray,
    n_segments: int | None = None,
) -> LinearBVPSolution:
    """Solve ``z' = A z`` on ``[0, t]`` with the position half of ``z`` fixed at both ends.

    ``z = (q, v)`` with ``p = n/2`` positions.  ``left``/``right`` may be 2-D
    (``p x r``) to solve for ``r`` right-hand sides at once; the returned
    ``starts`` then has shape ``(K, n, r)``.
    """
    n = A.shape[0]
    p = n // 2
    K = n_segments or segment_count(A, t)
    h = t / K
    P = expm(A * h)
    left = np.asarray(left, dtype=complex)
    right = np.asarray(right, dtype=complex)
    multi = left.ndim == 2
    if not multi:
        left = left[:, None]
        right = right[:, None]
    N = n * K
    rows, cols, vals = [], [], []

    def put(r, c, block):
        rr, cc = np.nonzero(block)
        rows.extend(r + rr)
        cols.extend(c + cc)
        vals.extend(block[rr, cc])

    put(0, 0, np.eye(p, n, dtype=complex))
    for j in range(K - 1):
        r0 = p + n * j
        put(r0, n * (j + 1), np.eye(n, dtype=complex))
        put(r0, n * j, -P)
    put(p + n * (K - 1), n * (K - 1), P[:p, :])
    M = sp.csc_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(N, N))
    rhs = np.zeros((N, left.shape[1]), dtype=complex)
    rhs[:p] = left
    rhs[N - p:] = right
    sol = spsolve(M, rhs)
    sol = np.asarray(sol).reshape(N, -1)
    starts = sol.reshape(K, n, -1)
    if not multi:
        starts = starts[:, :, 0]
    return LinearBVPSolution(A=A, h=h, starts=starts)


def fluctuation_matrix(omega: float, nu: float) -> np.ndarray:
    """``xd'' = nu xd' - omega^2 xd`` as a first-order system in ``(xd, xd')``."""
    return np.array([[0.0, 1.0], [-omega**2, nu]], dtype=complex)


def decoherence_form(omega: float, nu: float, d0: float, d2: float, t: float) -> tuple[float, float, float]:
    """Coefficients ``(D_i, D_f, D_m)`` of ``Im S`` from the fluctuation Gramian.

    ``Im S = (1/2) int (d0 xd^2 + d2 xd'^2) ds`` along the runaway fluctuation
    trajectory; the two basis boundary problems are solved together.
    """
    A = fluctuation_matrix(omega, nu)
    sol = solve_position_bvp(A, t, np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
    W = gram(A, np.diag([d0, d2]).astype(complex), sol.h)
    D = np.zeros((2, 2), dtype=complex)
    for z in sol.starts:  # z has shape (2, 2): columns are the two basis solutions
        D += z.T @ W @ z
    return float(D[0, 0].real), float(D[1, 1].real), float(0.5 * (D[0, 1] + D[1, 0]).real)
