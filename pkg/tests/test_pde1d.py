import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrablab.errors import DonorRangeError
from mrablab.multirate import MrabConfig, mrab_integrate
from mrablab.pde1d import (
    Grid1D,
    MetricPoint,
    SbpOperator,
    advection_rhs,
    build_overset_pair,
    compute_timestep,
    interior_symbol,
    lagrange_weights,
    max_eigenvalue_dx,
    overset_initial,
    overset_operator,
    overset_single_rate,
    overset_two_rate,
    periodic_testbed,
    point_timesteps,
    sbp_derivative,
)
from mrablab.steppers import OdeSystem, StepperSpec, integrate_to

OP = SbpOperator()


def wave(x):
    return np.sin(2 * np.pi * x)


# ---------------------------------------------------------------- operator


@pytest.mark.parametrize("n", [9, 10, 23])
def test_sbp_property(n):
    D = OP.matrix(n, periodic=False)
    P = np.diag(OP.norm(n))
    B = np.zeros((n, n))
    B[0, 0], B[-1, -1] = -1.0, 1.0
    Q = P @ D
    assert np.abs(Q + Q.T - B).max() < 1e-14


def test_norm_is_positive_and_integrates_constants():
    p = OP.norm(20)
    assert (p > 0).all()
    assert p.sum() == pytest.approx(19.0, rel=1e-14)


@pytest.mark.parametrize("periodic", [False, True])
def test_apply_matches_matrix(periodic):
    u = np.random.default_rng(0).normal(size=17)
    assert np.abs(OP.apply(u, periodic) - OP.matrix(17, periodic) @ u).max() < 1e-13


def test_polynomial_exactness():
    n = 25
    x = np.arange(n, dtype=float)
    D = OP.matrix(n, periodic=False)
    for d in range(5):
        err = np.abs(D @ x**d - d * x ** max(d - 1, 0) * (d > 0))
        scale = max(1.0, float(n) ** d)
        if d <= 2:
            assert err.max() < 1e-10 * scale
        else:
            # boundary closure is second order; interior stays exact
            assert err[4:-4].max() < 1e-10 * scale
            assert err[:4].max() > 1e-6


def test_constant_gives_zero():
    g = Grid1D.interval(0.0, 1.0, 30)
    assert np.abs(sbp_derivative(OP, np.full(30, 3.2), g.dx, False)).max() < 1e-13
    rhs = advection_rhs(g, OP, np.full(30, 3.2), 1.0, inflow=3.2)
    assert np.abs(rhs).max() < 1e-12


def test_derivative_convergence():
    errs, ns = [], [41, 81, 161]
    for n in ns:
        g = Grid1D.interval(0.0, 1.0, n)
        d = sbp_derivative(OP, wave(g.x), g.dx, False)
        errs.append(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * g.x)).max())
    # max-norm error is set by the second-order boundary rows
    rate = np.polyfit(np.log(1 / np.array(ns)), np.log(errs), 1)[0]
    assert rate == pytest.approx(2.0, abs=0.2)
    errs = []
    for n in [20, 40, 80]:
        g = Grid1D.periodic(n)
        d = sbp_derivative(OP, wave(g.x), g.dx, True)
        errs.append(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * g.x)).max())
    rate = np.polyfit(np.log([1 / 20, 1 / 40, 1 / 80]), np.log(errs), 1)[0]
    assert rate == pytest.approx(4.0, abs=0.15)


def test_sat_energy_estimate():
    # d/dt |u|_P^2 = -c u_N^2 + c u_0^2 - 2 sigma c u_0^2/... <= 0 for zero inflow
    n = 30
    g = Grid1D.interval(0.0, 1.0, n)
    P = OP.norm(n) * g.dx
    rng = np.random.default_rng(4)
    for sigma in (0.5, 1.0, 2.0):
        for _ in range(20):
            u = rng.normal(size=n)
            assert 2 * P @ (u * advection_rhs(g, OP, u, 1.0, sigma=sigma)) <= 1e-12


def test_periodic_skew_symmetric():
    D = OP.matrix(30, periodic=True)
    assert np.abs(D + D.T).max() == 0.0


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D.interval(0.0, 1.0, 5)
    with pytest.raises(ValueError):
        Grid1D(np.array([0.0, 0.1, 0.3] + list(np.arange(0.4, 1.0, 0.1))), 0.1, "sat")
    with pytest.raises(ValueError):
        Grid1D.periodic(20).__class__(np.linspace(0, 1, 20), 1 / 19, "weird")


# ---------------------------------------------------------------- periodic testbed


def test_symbol_supremum():
    # dense oracle on the continuous symbol
    theta = np.linspace(0, np.pi, 2_000_001)
    assert max_eigenvalue_dx() == pytest.approx(interior_symbol(theta).max(), abs=1e-11)
    assert max_eigenvalue_dx() == pytest.approx(1.3722, abs=1e-3)


def test_discrete_max_matches_eigenvalues():
    grid, _, rhs = periodic_testbed()
    A = np.column_stack([rhs(0.0, e) for e in np.eye(grid.n)])
    ev = np.linalg.eigvals(A)
    assert np.abs(ev.real).max() < 1e-12
    assert np.abs(ev).max() * grid.dx == pytest.approx(max_eigenvalue_dx(61), rel=1e-12)
    # 61 modes miss the symbol's peak slightly
    assert max_eigenvalue_dx(61) == pytest.approx(1.37052, abs=1e-5)


def test_periodic_rk4_conserves_mass():
    grid, _, rhs = periodic_testbed()
    u0 = np.exp(-50 * (grid.x - 0.5) ** 2)
    u, _ = integrate_to(OdeSystem(grid.n, rhs), u0, 0.0, 1.0, 0.01, StepperSpec.rk4())
    assert u.sum() == pytest.approx(u0.sum(), rel=1e-13)
    assert (u**2).sum() <= (u0**2).sum()


# ---------------------------------------------------------------- overset


def test_lagrange_weights():
    nodes = np.array([0.0, 0.5, 1.0, 1.5])
    w = lagrange_weights(nodes, 0.7)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    for d in range(4):
        assert w @ nodes**d == pytest.approx(0.7**d, abs=1e-14)


@pytest.fixture(scope="module")
def pair():
    return build_overset_pair(41, 0.3, 0.6, refine=4)


def test_pair_layout(pair):
    assert pair.n_fast == 4 * 12 + 1
    xs = pair.slow_x
    assert np.all(np.diff(xs) > 0)
    hole = xs[pair.segments[1][0]] - xs[pair.segments[0][1] - 1]
    assert hole > 0.3 - 8 * pair.grid_slow.dx - 1e-12
    for fm in pair.fast_fringe + pair.slow_fringe:
        assert fm.weights.sum() == pytest.approx(1.0, abs=1e-13)
    # only inflow-side receivers carry a penalty
    assert [fm.tau > 0 for fm in pair.fast_fringe] == [True, True, False, False]
    assert [fm.tau > 0 for fm in pair.slow_fringe] == [False, True]
    back = pair.slow_to_background(np.ones(pair.n_slow))
    assert np.isnan(back).sum() == pair.grid_slow.n - pair.n_slow


def test_fringe_interpolation_cubic_exact(pair):
    cubic = lambda x: 1 - 2 * x + 3 * x**2 - 5 * x**3
    f, s = overset_initial(pair, cubic)
    for fm in pair.fast_fringe:
        assert fm.weights @ s[fm.donors] == pytest.approx(cubic(pair.grid_fast.x[fm.receiver]), abs=1e-13)
    for fm in pair.slow_fringe:
        assert fm.weights @ f[fm.donors] == pytest.approx(cubic(pair.slow_x[fm.receiver]), abs=1e-13)


@pytest.mark.parametrize("ns", [41, 81])
def test_overset_spectrum_stable(ns):
    ev = np.linalg.eigvals(overset_operator(build_overset_pair(ns, 0.3, 0.6, refine=4)))
    assert ev.real.max() <= 1e-8
    assert ev.real.min() < -1.0


def test_overset_spectrum_negative_wave_speed():
    ev = np.linalg.eigvals(overset_operator(build_overset_pair(41, 0.3, 0.6, wave_speed=-1.0)))
    assert ev.real.max() <= 1e-8


@pytest.mark.parametrize(
    "scheme",
    ["rk4", "ab3", "ab34", "mrab3", "mrab34"],
)
def test_overset_preserves_constant(scheme):
    pair = build_overset_pair(41, 0.3, 0.6, refine=4, inflow=lambda t: 2.5)
    f0, s0 = overset_initial(pair, lambda x: np.full_like(x, 2.5))
    dt = 0.002
    if scheme.startswith("mrab"):
        m = 4 if scheme == "mrab34" else 3
        f, s, _, _ = mrab_integrate(overset_two_rate(pair), 0.0, f0, s0, 100 * dt,
                                    MrabConfig(3, 4, dt, m))
        y = np.r_[f, s]
    else:
        spec = {"rk4": StepperSpec.rk4(), "ab3": StepperSpec.ab(3),
                "ab34": StepperSpec.ab(3, 4)}[scheme]
        y, _ = integrate_to(overset_single_rate(pair), np.r_[f0, s0], 0.0, 100 * dt, dt, spec)
    assert np.abs(y - 2.5).max() < 1e-12


@pytest.mark.parametrize("m", [3, 4])
@pytest.mark.parametrize("sr", [2, 4])
def test_overset_mrab_convergence(sr, m):
    T = 0.5
    ns_levels = [41, 81, 161]
    errs, dxs = [], []
    for ns in ns_levels:
        pair = build_overset_pair(ns, 0.3, 0.6, refine=sr, inflow=lambda t: wave(-t))
        f0, s0 = overset_initial(pair, wave)
        dx = pair.grid_slow.dx
        K = int(np.ceil(T / (0.1 * dx * sr / 2)))
        f, s, _, _ = mrab_integrate(overset_two_rate(pair), 0.0, f0, s0, T,
                                    MrabConfig(3, sr, T / K, m))
        errs.append(max(np.abs(f - wave(pair.grid_fast.x - T)).max(),
                        np.abs(s - wave(pair.slow_x - T)).max()))
        dxs.append(dx)
    assert np.polyfit(np.log(dxs), np.log(errs), 1)[0] >= 2.5


def test_donor_range_errors():
    with pytest.raises(DonorRangeError, match="donor out of range"):
        build_overset_pair(41, 0.3, 0.6, fringe_layers=20)
    with pytest.raises(ValueError):
        build_overset_pair(41, 0.5, 0.3)
    with pytest.raises(ValueError):
        build_overset_pair(41, 0.4, 0.45)


# ---------------------------------------------------------------- timestep


def test_timestep_1d():
    p = MetricPoint.cartesian([0.1], [2.0], 3.0)
    assert compute_timestep([p]) == pytest.approx(0.1 / 5.0, rel=1e-15)
    assert compute_timestep([p], cfl=0.5) == pytest.approx(0.01, rel=1e-15)


def test_timestep_2d_uniform():
    h = 0.05
    p = MetricPoint.cartesian([h, h], [0.0, 0.0], 1.0)
    # 1/J = h^2, metric rows have norm 1/(J h) = h
    assert compute_timestep([p]) == pytest.approx(h / 2, rel=1e-14)


def test_timestep_takes_minimum_and_viscous():
    pts = [MetricPoint.cartesian([0.1], [0.0], 1.0), MetricPoint.cartesian([0.02], [0.0], 1.0)]
    assert compute_timestep(pts) == pytest.approx(0.02)
    pv = MetricPoint.cartesian([0.1], [0.0], 1.0, nu_star=0.05)
    dt_inv, dt_visc = point_timesteps(pv)
    # 1D: vol / (c/h * h ... ) reduces to h / (c + 2 nu / h)
    assert dt_visc == pytest.approx(0.1 / (1.0 + 2 * 0.05 / 0.1), rel=1e-14)
    assert compute_timestep([pv], viscous=True) == pytest.approx(dt_visc)
    assert compute_timestep([pv]) == pytest.approx(dt_inv)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(-3, 3), st.floats(0.1, 5.0))
def test_timestep_rotation_invariant_speed_bound(hx, hy, u, c):
    p = MetricPoint.cartesian([hx, hy], [u, 0.0], c)
    dt = compute_timestep([p])
    assert 0 < dt <= min(hx, hy) / c


def test_timestep_errors():
    with pytest.raises(ValueError):
        compute_timestep([])
    with pytest.raises(ValueError):
        compute_timestep([MetricPoint(-1.0, np.eye(1), np.zeros(1), 1.0)])
    with pytest.raises(ValueError):
        compute_timestep([MetricPoint(1.0, np.eye(1), np.zeros(1), 0.0)])
    with pytest.raises(ValueError):
        compute_timestep([MetricPoint.cartesian([0.1], [0.0], 1.0)], cfl=0.0)
