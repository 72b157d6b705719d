import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import schur

from mrablab.coeffs import ab_weights
from mrablab.errors import BracketError, EigensolveError
from mrablab.multirate import MrabConfig, TwoRateSystem
from mrablab.pde1d import periodic_testbed
from mrablab.stability import (
    ab_advance,
    boundary_locus,
    build_step_matrix,
    imag_axis_intercept,
    is_stable,
    max_stable_dt,
    model_ode_step_matrix,
    mrab_advance,
    ray_boundaries,
    real_axis_intercept,
    rk_advance,
    scalar_step_matrices,
    spectral_radius,
    stability_ratios,
)
from mrablab.steppers import OdeSystem, StepperSpec

FE = StepperSpec.ab(1)
AB3 = StepperSpec.ab(3)
AB34 = StepperSpec.ab(3, 4)
RK4 = StepperSpec.rk4()


# ---------------------------------------------------------------- scalar maps


@pytest.mark.parametrize("k", [-0.5 + 0.2j, 0.1 + 1.1j, -2.0])
def test_rk_amplification_matrix(k):
    G = scalar_step_matrices(RK4, [k])
    assert G.shape == (1, 1, 1)
    assert G[0, 0, 0] == pytest.approx(1 + k + k**2 / 2 + k**3 / 6 + k**4 / 24, rel=1e-14)


@pytest.mark.parametrize("k", [-0.3 + 0.4j, -0.1 - 0.6j])
def test_ab3_matrix_eigenvalues_are_characteristic_roots(k):
    # AB3 characteristic polynomial z^3 - z^2 - k (23 z^2 - 16 z + 5)/12
    G = scalar_step_matrices(AB3, [k])[0]
    roots = np.roots([1, -1 - 23 * k / 12, 16 * k / 12, -5 * k / 12])
    ev = np.linalg.eigvals(G)
    ev = ev[np.argsort(-np.abs(ev))]
    assert np.allclose(np.sort_complex(ev[:3]), np.sort_complex(roots), atol=1e-12)
    assert abs(ev[3]) < 1e-12


def test_criterion_validation():
    with pytest.raises(ValueError):
        is_stable(RK4, [0.1], criterion="bogus")


# ---------------------------------------------------------------- boundary locus


def test_forward_euler_real_axis_spectral():
    r, mono = ray_boundaries(FE, [np.pi], "spectral")
    assert r[0] == pytest.approx(2.3, abs=1e-6)
    assert mono[0]


def test_forward_euler_real_axis_march():
    # 100 steps with |y| <= 2 allows |1 + k| up to 2**(1/100)
    r, _ = ray_boundaries(FE, [np.pi], "march")
    assert r[0] == pytest.approx(2.3 + 2 ** (1 / 100) - 1, abs=1e-9)


def test_rk4_imaginary_extent():
    assert imag_axis_intercept(RK4, "spectral") == pytest.approx(2.78, abs=0.05)
    assert imag_axis_intercept(RK4, "spectral") == pytest.approx(2 * np.sqrt(2), abs=1e-8)


@pytest.mark.parametrize("criterion", ["spectral", "march"])
def test_ab34_vs_ab3_orderings(criterion):
    re3 = real_axis_intercept(AB3, criterion, normalize=True)
    re34 = real_axis_intercept(AB34, criterion, normalize=True)
    im3 = imag_axis_intercept(AB3, criterion, normalize=True)
    im34 = imag_axis_intercept(AB34, criterion, normalize=True)
    assert re34 < re3  # extends further left
    assert im34 < im3


def test_ab3_known_real_limit():
    assert real_axis_intercept(AB3, "spectral") == pytest.approx(-6 / 11, abs=1e-9)


def test_boundary_locus_region():
    reg = boundary_locus(RK4, normalize=True, criterion="spectral", n_theta=60)
    assert reg.thetas.size == 60
    assert reg.thetas[0] == 0 and reg.thetas[-1] == pytest.approx(2 * np.pi)
    assert np.all(reg.r_max >= 0) and reg.monotone.all()
    rows = reg.rows()
    assert len(rows) == 60
    t, r, re, im = rows[30]
    assert r == pytest.approx(reg.r_max[30] / 4)
    assert complex(re, im) == pytest.approx((0.3 + reg.r_max[30] * np.exp(1j * t)) / 4)
    # every boundary point is marginally stable from the inside
    pts = reg.points()[reg.r_max > 0] * 4
    inside = 0.3 + (pts - 0.3) * (1 - 1e-6)
    assert is_stable(RK4, inside, "spectral").all()


def test_boundary_locus_accepts_sr1_mrab():
    r_mr = boundary_locus(MrabConfig(3, 1, 1.0), n_theta=12).r_max
    r_ab = boundary_locus(AB3, n_theta=12).r_max
    assert np.array_equal(r_mr, r_ab)
    with pytest.raises(ValueError):
        boundary_locus(MrabConfig(3, 2, 1.0), n_theta=12)


# ---------------------------------------------------------------- model ODE


def test_model_beta_zero():
    g = model_ode_step_matrix(0.0, [23 / 12, -16 / 12, 5 / 12])
    assert spectral_radius(g.G) == pytest.approx(1.0)
    assert np.sort(np.abs(g.eigenvalues())) == pytest.approx([0, 0, 1], abs=1e-7)


def test_model_gtg_formula_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        beta = rng.uniform(-3, 3)
        alpha = rng.normal(size=3)
        g = model_ode_step_matrix(beta, alpha)
        dense = np.sort(np.linalg.eigvalsh(g.G.T @ g.G))[::-1]
        assert np.abs(g.gtg_eigenvalues() - dense).max() <= 1e-10 * dense.max()


def test_model_small_alpha_limit():
    # the closed form gives lambda -> {1, 2, 0} as alpha -> 0, i.e. G^T G ->
    # diag(2, 1, 0); checked against the dense oracle
    g = model_ode_step_matrix(1.7, 1e-6 * np.array([23, -16, 5]) / 12)
    lam = g.gtg_eigenvalues()
    dense = np.sort(np.linalg.eigvalsh(g.G.T @ g.G))[::-1]
    assert lam == pytest.approx(dense, abs=1e-10)
    assert lam == pytest.approx([2.0, 1.0, 0.0], abs=1e-5)


# ---------------------------------------------------------------- step matrices


def test_step_matrix_linear_map():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(6, 6))
    sm = build_step_matrix(lambda p: A @ p, rng.normal(size=6))
    assert np.abs(sm.G - A).max() < 1e-6
    assert sm.epsilon == 1e-7 and sm.dim == 6


def test_step_matrix_rk4_diagonal():
    lam = np.array([-1.0, -0.3, -2.5])
    dt = 0.4
    sys = OdeSystem(3, lambda t, y: lam * y)
    sm = build_step_matrix(rk_advance(sys, "rk4", dt), np.zeros(3))
    z = lam * dt
    want = np.diag(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24)
    assert np.abs(sm.G - want).max() < 1e-6


def test_step_matrix_ab3_matches_model():
    beta, dt = 1.3, 0.2
    sys = OdeSystem(1, lambda t, y: -beta * y)
    sm = build_step_matrix(ab_advance(sys, AB3, dt), np.zeros(4))
    alpha = ab_weights(dt * np.arange(-2, 1.0), 3, (0.0, dt)).alpha  # oldest first
    model = model_ode_step_matrix(beta, alpha[::-1])
    # (y, F_{n-2}, F_{n-1}, F_n) with F = -beta y: the nonzero eigenvalues match
    ev = np.sort_complex(np.linalg.eigvals(sm.G))
    want = np.sort_complex(np.append(model.eigenvalues(), 0.0))
    assert np.allclose(ev, want, atol=1e-6)
    # and the y-row of G_eps carries the weights directly
    assert np.allclose(sm.G[0], np.r_[1.0, alpha], atol=1e-6)


def test_step_matrix_epsilon_robust_nonlinear():
    sys = OdeSystem(3, lambda t, y: -y**3 + np.roll(y, 1) - 0.5 * y)
    phi0 = np.array([0.4, -0.2, 0.7])
    adv = rk_advance(sys, "rk4", 0.1)
    g7 = build_step_matrix(adv, phi0, 1e-7).G
    g6 = build_step_matrix(adv, phi0, 1e-6).G
    assert np.abs(g7 - g6).max() < 1e-4


def test_step_matrix_parallel_identical():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(20, 20))
    adv = lambda p: np.tanh(A @ p)
    phi0 = rng.normal(size=20)
    seq = build_step_matrix(adv, phi0)
    par = build_step_matrix(adv, phi0, workers=4)
    assert np.array_equal(seq.G, par.G)


def test_step_matrix_layout_and_errors():
    sm = build_step_matrix(lambda p: 2 * p, np.zeros(2), layout=["a", "b"])
    assert sm.layout == ("a", "b")
    with pytest.raises(ValueError):
        build_step_matrix(lambda p: p, np.zeros(2), layout=["a"])
    with pytest.raises(ValueError):
        build_step_matrix(lambda p: p[:1], np.zeros(2))


def test_mrab_step_matrix_sr1_equals_ab():
    A = np.array([[-1.0, 0.3], [0.2, -0.4]])
    sys2 = TwoRateSystem(1, 1, lambda t, f, s: A[0, 0] * f + A[0, 1] * s,
                         lambda t, f, s: A[1, 0] * f + A[1, 1] * s)
    cfg = MrabConfig(3, 1, 0.1)
    rho_mr = spectral_radius(build_step_matrix(mrab_advance(sys2, cfg), np.zeros(8)))
    single = OdeSystem(2, lambda t, y: A @ y)
    rho_ab = spectral_radius(build_step_matrix(ab_advance(single, AB3, 0.1), np.zeros(8)))
    assert rho_mr == pytest.approx(rho_ab, rel=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_spectral_radius_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(8, 8))
    perm = rng.permutation(8)
    assert spectral_radius(G[np.ix_(perm, perm)]) == pytest.approx(spectral_radius(G), rel=1e-10)


def test_spectral_radius_basic():
    assert spectral_radius(np.eye(5)) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    G = rng.normal(size=(50, 50))
    T, _ = schur(G, output="complex")
    assert spectral_radius(G) == pytest.approx(np.abs(np.diag(T)).max(), rel=1e-6)
    with pytest.raises(ValueError):
        spectral_radius(np.ones((2, 3)))
    with pytest.raises(ValueError):
        spectral_radius(np.array([[np.nan]]))


def test_eigensolve_failure_maps(monkeypatch):
    def boom(*a, **k):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(np.linalg, "eigvals", boom)
    with pytest.raises(EigensolveError, match="eigensolve failed"):
        spectral_radius(np.eye(2))


# ---------------------------------------------------------------- dt search


def euler_decay(dt):
    sys = OdeSystem(1, lambda t, y: -y)
    return (lambda p: p + dt * sys.rhs(0.0, p)), np.zeros(1)


def test_max_dt_forward_euler():
    res = max_stable_dt(euler_decay, (0.5, 3.0))
    assert res.dt_max == pytest.approx(2.0, abs=1e-4)
    assert res.rho_at_dt_max <= 1 + 1e-9
    assert res.iterations > 0


def test_max_dt_bad_bracket():
    with pytest.raises(BracketError):
        max_stable_dt(euler_decay, (2.5, 3.0))
    with pytest.raises(BracketError):
        max_stable_dt(euler_decay, (0.1, 0.5))
    with pytest.raises(ValueError):
        max_stable_dt(euler_decay, (1.0, 0.5))


def rk4_testbed(dt):
    grid, op, rhs = periodic_testbed()
    return rk_advance(OdeSystem(grid.n, rhs), "rk4", dt), np.zeros(grid.n)


def test_max_dt_rk4_testbed():
    res = max_stable_dt(rk4_testbed, (0.02, 0.05))
    assert 0.03 < res.dt_max < 0.035
    assert abs(res.dt_max - 0.03377) / 0.03377 < 0.03


# ---------------------------------------------------------------- ratios


def test_ratios_trivial():
    assert stability_ratios(0.01, 0.02, 0.01, 1) == pytest.approx((0.5, 1.0, 1.0))


def test_ratios_table_rows():
    # third-order table, MRAB SR=4 (AB34): dt 0.0225, dt_RK4 0.0217, dt_SRAB 0.0056
    r_rk4, r_srab, eff = stability_ratios(0.0225, 0.0217, 0.0056, 4)
    assert r_rk4 == pytest.approx(1.035, rel=0.01)
    assert r_srab == pytest.approx(3.99, rel=0.01)
    assert eff == pytest.approx(0.998, rel=0.01)
    # the same ratio from the table's own r columns
    assert 1.035 / 0.259 == pytest.approx(3.99, rel=0.002)
    with pytest.raises(ValueError):
        stability_ratios(0.0, 1.0, 1.0, 1)
