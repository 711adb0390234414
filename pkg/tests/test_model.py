import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decolab.errors import DomainError
from decolab.model import (
    BoundaryData,
    ModelParams,
    PhasePoint,
    decoherence_potential,
    effective_lagrangian,
    potential,
    potential_force,
    stationary_points,
    stationary_propagator,
)
from decolab.model import _residual_norm


def test_params_validation():
    with pytest.raises(DomainError):
        ModelParams(m=0.0)
    with pytest.raises(DomainError):
        ModelParams(nu=-1.0)
    with pytest.raises(DomainError):
        ModelParams(d2=-0.1)
    with pytest.raises(DomainError):
        ModelParams(hbar=0.0)
    with pytest.raises(DomainError):
        ModelParams(omega=float("nan"))
    # negative quartic coupling is allowed, negative g_d is not
    ModelParams(g=-1.0)
    with pytest.raises(DomainError):
        ModelParams(g_d=-1.0)


def test_positivity_flag():
    assert ModelParams(nu=1.0, d0=1.0, d2=1.0).positivity_ok
    assert not ModelParams(nu=1.0, d0=1.0, d2=0.0).positivity_ok
    assert ModelParams(nu=0.0).positivity_ok


def test_boundary_validation():
    with pytest.raises(DomainError):
        BoundaryData(1.0, 1.0, 0, 0, 0, 0)
    with pytest.raises(DomainError):
        BoundaryData(0.0, 1.0, complex("nan"), 0, 0, 0)
    b = BoundaryData(0.5, 2.0, 1, 2, 3, 4)
    assert b.t == 1.5
    assert isinstance(b.x_i, complex)


@pytest.mark.parametrize("g,x,expected", [(0.0, 0.0, 0.0), (0.0, 2.0, 2.0), (0.6, 1.0, 1.1)])
def test_potential_force_examples(g, x, expected):
    m = ModelParams(m=1.0, omega=1.0, g=g)
    assert potential_force(m, x) == pytest.approx(expected, abs=1e-15)


def test_potential_force_is_derivative():
    m = ModelParams(m=1.3, omega=0.7, g=0.4)
    x, h = 0.8 + 0.3j, 1e-5
    fd = (potential(m, x + h) - potential(m, x - h)) / (2 * h)
    assert abs(fd - potential_force(m, x)) < 1e-9


def test_lagrangian_examples():
    m = ModelParams(m=1.0, omega=0.0, nu=0.0, d0=1.0, d2=0.0)
    assert effective_lagrangian(m, PhasePoint(0, 1, 0, 0)) == pytest.approx(0.5j)
    m = ModelParams(m=1.0, omega=1.0)
    # -U(1.1) + U(0.9) = -m w^2 x xd
    assert effective_lagrangian(m, PhasePoint(1.0, 0.2, 0.0, 0.0)) == pytest.approx(-0.2, abs=1e-14)


GRID = [
    (x, vx, mp)
    for x in np.linspace(-2, 2, 5)
    for vx in np.linspace(-1, 1, 5)
    for mp in [
        ModelParams(m=1.0, omega=1.0, nu=0.5, d0=1.0, d2=0.3, g=0.2),
        ModelParams(m=2.0, omega=0.0, nu=1.0, d0=0.1, d2=2.0),
        ModelParams(m=0.5, omega=3.0, nu=0.0, d0=0.0, d2=0.0, g=-0.1),
        ModelParams(m=1.0, omega=0.1, nu=2.0, d0=2.0, d2=2.0, g_d=0.5),
    ]
]


def test_diagonal_nullity():
    assert len(GRID) == 100
    for x, vx, mp in GRID:
        assert effective_lagrangian(mp, PhasePoint(x, 0.0, vx, 0.0)) == 0


@given(
    x=st.floats(-3, 3), xd=st.floats(-3, 3), vx=st.floats(-3, 3), vxd=st.floats(-3, 3),
    g=st.floats(-1, 1), nu=st.floats(0, 2),
)
def test_conjugation_symmetry(x, xd, vx, vxd, g, nu):
    mp = ModelParams(m=1.0, omega=0.7, nu=nu, d0=0.4, d2=0.9, g=g, g_d=0.2)
    a = effective_lagrangian(mp, PhasePoint(x, xd, vx, vxd))
    b = effective_lagrangian(mp, PhasePoint(x, -xd, vx, -vxd))
    assert abs(b + np.conj(a)) <= 1e-12 * (1 + abs(a))


def test_lagrangian_imaginary_part_is_decoherence_only():
    mp = ModelParams(m=1.0, omega=0.7, nu=0.3, d0=0.4, d2=0.9, g=0.3)
    p = PhasePoint(0.3, 0.7, -0.2, 0.5)
    L = effective_lagrangian(mp, p)
    assert L.imag == pytest.approx(decoherence_potential(mp, 0.7).real + 0.5 * 0.9 * 0.25)


def test_stationary_propagator_examples():
    r = stationary_propagator(ModelParams(d0=1.0), 0.3, 0.0, 1.0)
    assert r.exponent.imag == 0 and r.tau_sd == math.inf
    r = stationary_propagator(ModelParams(d0=2.0), 0.7, 1.0, 3.0)
    assert r.exponent == pytest.approx(-3.0)
    assert r.tau_sd == pytest.approx(1.0)
    r = stationary_propagator(ModelParams(d0=0.5), 0.0, 1.0, 4.0)
    assert r.ell_sd**2 == pytest.approx(1.0)
    with pytest.raises(DomainError):
        stationary_propagator(ModelParams(d0=0.5), 0.0, 1.0, 0.0)


@given(a=st.floats(0.01, 5), b=st.floats(0.01, 5), g_d=st.floats(0, 3))
def test_tau_sd_decreasing(a, b, g_d):
    if abs(a - b) < 1e-6:
        return
    mp = ModelParams(d0=0.7, g_d=g_d)
    lo, hi = sorted((a, b))
    t_lo = stationary_propagator(mp, 0.0, lo, 1.0).tau_sd
    t_hi = stationary_propagator(mp, 0.0, -hi, 1.0).tau_sd
    assert t_hi < t_lo


def test_stationary_points_linear():
    r = stationary_points(ModelParams(omega=1.0, d0=1.0), n_starts=32)
    assert len(r.points) == 1 and abs(r.points[0][0]) + abs(r.points[0][1]) < 1e-12
    assert not r.degenerate


def test_stationary_points_brownian_line():
    r = stationary_points(ModelParams(omega=0.0, d0=1.0), n_starts=32)
    assert r.degenerate and not r.points
    (anchor, direction), = r.lines
    # the line xd = 0 through the origin
    assert abs(direction[1]) < 1e-12 and abs(direction[0]) > 0
    assert abs(anchor[1]) < 1e-12


def _oracle_roots(m, w, g, d0):
    """Roots with xd != 0 by eliminating x: a cubic in u = xd**2.

    U'(x+) = U'(x-) gives x**2 = -2 m w^2/g - u/12, and the mean force
    condition i d0 xd = x (2 m w^2/3 + g u/9).
    """
    p1 = np.poly1d([-1.0 / 12, -2 * m * w**2 / g])
    p2 = np.poly1d([g / 9, 2 * m * w**2 / 3])
    cubic = p1 * p2 * p2 + np.poly1d([d0**2, 0.0])
    roots = []
    for u in cubic.roots:
        for y in (np.sqrt(complex(u)), -np.sqrt(complex(u))):
            x = 1j * d0 * y / p2(u)
            roots.append((x, y))
    # xd = 0 branch: U'(x) = 0
    roots += [(0j, 0j), (1j * math.sqrt(6 * m * w**2 / g), 0j), (-1j * math.sqrt(6 * m * w**2 / g), 0j)]
    return roots


def test_stationary_points_quartic_against_elimination_oracle():
    mp = ModelParams(m=1.0, omega=1.0, g=1.0, d0=1.0)
    r = stationary_points(mp, search_box=(-8, 8, -8, 8), n_starts=256)
    for p in r.points:
        assert _residual_norm(mp, np.array(p)) <= 1e-10
        x, y = p
        if abs(y) > 1e-6:
            assert 3 * x * x + y * y / 4 == pytest.approx(-6.0, abs=1e-8)
    oracle = _oracle_roots(1.0, 1.0, 1.0, 1.0)
    assert len(oracle) == 9
    for x, y in oracle:
        assert any(abs(x - p[0]) + abs(y - p[1]) < 1e-7 for p in r.points), (x, y)
    assert len(r.points) == 9


def test_stationary_points_bad_starts():
    with pytest.raises(DomainError):
        stationary_points(ModelParams(omega=1.0), n_starts=0)


def test_stationary_points_deterministic():
    mp = ModelParams(m=1.0, omega=1.0, g=1.0, d0=1.0)
    assert stationary_points(mp, n_starts=64).points == stationary_points(mp, n_starts=64).points


@settings(max_examples=20, deadline=None)
@given(w=st.floats(0.2, 2.0), g=st.floats(-2, 2), d0=st.floats(0, 2))
def test_stationary_points_always_origin(w, g, d0):
    r = stationary_points(ModelParams(omega=w, g=g, d0=d0), n_starts=16)
    assert any(abs(p[0]) + abs(p[1]) < 1e-10 for p in r.points)
    for p in r.points:
        assert _residual_norm(ModelParams(omega=w, g=g, d0=d0), np.array(p)) <= 1e-10
