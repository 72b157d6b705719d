"""Stability analysis: boundary-locus regions, step matrices, max stable dt.

Two stability tests are available for the scalar test equation ``y' = k y``
at unit step:

``"march"``
    the heuristic one: 100 steps from ``y = 1`` (bootstrap included) must keep
    ``|y| <= 2``.  Because it allows some growth, its boundary lies slightly
    outside the true one (forward Euler at ``theta = pi`` gives
    ``2.3 + 2**(1/100) - 1`` rather than 2.3).
``"spectral"``
    the spectral radius of the one-step map on ``(y, rhs history)`` is at most
    ``1 + 1e-9``; this is the exact region.

Points are ``k = r exp(i theta) + offset``.  The offset point 0.3 lies outside
every region considered, so each ray is scanned outwards and the boundary is
the first unstable radius after the ray has entered the region; rays that
never enter get ``r = 0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BracketError, EigensolveError, RhsBlowupError
from .multirate import MrabConfig
from .steppers import (
    OdeSystem,
    SchemeState,
    StepperSpec,
    ab_step,
    integrate_to,
    rk_step,
    scalar_test_system,
)

OFFSET = 0.3
N_THETA = 500
R_TOL = 1e-12
RHO_SLACK = 1e-9


def _as_spec(stepper) -> StepperSpec:
    if isinstance(stepper, StepperSpec):
        return stepper
    if isinstance(stepper, MrabConfig):
        if stepper.step_ratio != 1:
            raise ValueError("boundary locus needs a single-rate scheme (SR=1)")
        return stepper.stepper
    raise TypeError(f"not a stepper: {stepper!r}")


# ---------------------------------------------------------------- scalar tests


def scalar_step_matrices(spec: StepperSpec, ks, dt: float = 1.0) -> np.ndarray:
    """One-step maps of ``y' = k y`` for every ``k``; shape ``(K, D, D)`` complex.

    RK schemes give ``D = 1`` (the amplification factor).  AB schemes act on
    ``(y, F_1, ..., F_m)`` with ``F`` the rhs history, oldest first, so
    ``D = m + 1``; the columns are obtained by stepping unit vectors through
    :func:`ab_step`.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=np.complex128))
    K = ks.size
    if not spec.is_multistep:
        y = np.ones(K, dtype=np.complex128).view(np.float64)
        amp = rk_step(scalar_test_system(ks), 0.0, y, dt, spec.kind)
        return amp.view(np.complex128).reshape(K, 1, 1)

    m = spec.history_len
    D = m + 1
    lanes = np.tile(ks, D)
    y = np.zeros(K * D, dtype=np.complex128)
    y[:K] = 1.0
    hist = np.zeros((m, K * D), dtype=np.complex128)
    for j in range(m):
        hist[j, (j + 1) * K : (j + 2) * K] = 1.0
    state = SchemeState(
        t=0.0,
        y=y.view(np.float64),
        hist_t=dt * np.arange(-(m - 1), 1.0),
        hist_f=np.ascontiguousarray(hist).view(np.float64),
    )
    out = ab_step(scalar_test_system(lanes), state, dt, spec)
    cols = np.vstack([out.y.view(np.complex128)[None], out.hist_f.view(np.complex128)])
    # cols[row, j*K + k] -> G[k, row, j]
    return cols.reshape(D, D, K).transpose(2, 0, 1)


def _march_peak(spec: StepperSpec, ks: np.ndarray, steps: int) -> np.ndarray:
    """Largest ``|y|`` seen over ``steps`` unit steps from ``y = 1``, per lane."""
    peak = np.zeros(ks.size)

    def obs(t, y):
        np.maximum(peak, np.abs(y.view(np.complex128)), out=peak)

    y0 = np.ones(ks.size, dtype=np.complex128).view(np.float64)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            integrate_to(scalar_test_system(ks), y0, 0.0, float(steps), 1.0, spec, obs)
    except RhsBlowupError:
        if ks.size == 1:
            return np.array([np.inf])
        h = ks.size // 2
        return np.concatenate([_march_peak(spec, ks[:h], steps), _march_peak(spec, ks[h:], steps)])
    return peak


def is_stable(spec: StepperSpec, ks, criterion: str = "march", steps: int = 100,
              bound: float = 2.0) -> np.ndarray:
    """Boolean stability verdict for each ``k`` of the scalar test equation."""
    ks = np.atleast_1d(np.asarray(ks, dtype=np.complex128))
    if criterion == "march":
        return _march_peak(spec, ks, steps) <= bound
    if criterion == "spectral":
        G = scalar_step_matrices(spec, ks)
        rho = np.abs(np.linalg.eigvals(G)).max(axis=1)
        return rho <= 1.0 + RHO_SLACK
    raise ValueError(f"unknown criterion {criterion!r}")


# ---------------------------------------------------------------- boundary locus


@dataclass(frozen=True)
class StabilityRegion:
    """Boundary radii ``r_max[i]`` along rays ``theta[i]`` from ``offset``.

    Radii are stored unnormalized; ``normalized`` only affects
    :meth:`points` and :meth:`rows`, which divide by ``evals_per_step``.
    ``monotone[i]`` is False when the scan found the ray re-entering the
    region after its exit (bisection would then be ambiguous).
    """

    offset: float
    thetas: np.ndarray
    r_max: np.ndarray
    evals_per_step: int
    normalized: bool = False
    criterion: str = "march"
    monotone: np.ndarray = field(default=None, repr=False)

    def points(self) -> np.ndarray:
        k = self.offset + self.r_max * np.exp(1j * self.thetas)
        return k / self.evals_per_step if self.normalized else k

    def rows(self):
        """``(theta, r, re, im)`` tuples for CSV output."""
        scale = self.evals_per_step if self.normalized else 1
        pts = self.points()
        return [
            (float(t), float(r / scale), float(p.real), float(p.imag))
            for t, r, p in zip(self.thetas, self.r_max, pts)
        ]


def ray_boundaries(
    stepper,
    thetas,
    criterion: str = "march",
    offset: float = OFFSET,
    r_cap: float = 6.0,
    n_scan: int = 600,
    tol: float = R_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Boundary radius on each ray, and a per-ray monotonicity flag.

    A coarse scan over ``[0, r_cap]`` locates the first stable-to-unstable
    transition, then all rays are refined together by multisection until the
    bracket is below ``tol``.
    """
    spec = _as_spec(stepper)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    dirs = np.exp(1j * thetas)
    T = thetas.size
    rs = np.linspace(0.0, r_cap, n_scan + 1)
    ks = offset + np.outer(dirs, rs)
    ok = is_stable(spec, ks.ravel(), criterion).reshape(T, rs.size)

    lo = np.zeros(T)
    hi = np.zeros(T)
    active = np.zeros(T, dtype=bool)
    monotone = np.ones(T, dtype=bool)
    for i in range(T):
        stable_idx = np.flatnonzero(ok[i])
        if stable_idx.size == 0:
            continue
        first = stable_idx[0]
        exits = np.flatnonzero(~ok[i, first:])
        if exits.size == 0:
            raise BracketError(f"region extends past r_cap={r_cap} at theta={thetas[i]}")
        j = first + exits[0]
        lo[i], hi[i] = rs[j - 1], rs[j]
        active[i] = True
        monotone[i] = not ok[i, j:].any()

    n_sub = 16
    frac = np.arange(1, n_sub) / n_sub
    while active.any() and np.max(hi[active] - lo[active]) > tol:
        idx = np.flatnonzero(active)
        trial = lo[idx, None] + (hi[idx] - lo[idx])[:, None] * frac
        verdict = is_stable(spec, (offset + dirs[idx, None] * trial).ravel(), criterion)
        verdict = verdict.reshape(idx.size, frac.size)
        for row, i in enumerate(idx):
            bad = np.flatnonzero(~verdict[row])
            if bad.size == 0:
                lo[i] = trial[row, -1]
            else:
                b = bad[0]
                hi[i] = trial[row, b]
                if b > 0:
                    lo[i] = trial[row, b - 1]
    r = np.where(active, 0.5 * (lo + hi), 0.0)
    return r, monotone


def boundary_locus(
    stepper,
    normalize: bool = False,
    criterion: str = "march",
    n_theta: int = N_THETA,
    offset: float = OFFSET,
    **kw,
) -> StabilityRegion:
    """Approximate stability region of ``stepper`` on ``n_theta`` rays over [0, 2 pi]."""
    spec = _as_spec(stepper)
    thetas = np.linspace(0.0, 2 * np.pi, n_theta)
    r, mono = ray_boundaries(spec, thetas, criterion, offset, **kw)
    return StabilityRegion(offset, thetas, r, spec.evals_per_step, normalize, criterion, mono)


def real_axis_intercept(stepper, criterion: str = "march", normalize: bool = False,
                        offset: float = OFFSET) -> float:
    """Leftmost boundary point on the negative real axis (a negative number)."""
    spec = _as_spec(stepper)
    r, _ = ray_boundaries(spec, [np.pi], criterion, offset)
    x = offset - r[0]
    return x / spec.evals_per_step if normalize else x


def imag_axis_intercept(stepper, criterion: str = "march", normalize: bool = False,
                        offset: float = OFFSET, tol: float = 1e-10) -> float:
    """Height at which the upper boundary crosses the imaginary axis.

    Bisects in ``theta`` on ``(pi/2, pi)`` for the ray whose boundary point has
    zero real part.
    """
    spec = _as_spec(stepper)

    def point(theta):
        r, _ = ray_boundaries(spec, [theta], criterion, offset)
        return offset + r[0] * np.exp(1j * theta)

    a, b = 0.5 * np.pi, np.pi
    if point(b).real >= 0:
        raise BracketError("region does not reach the negative real axis")
    while b - a > tol:
        c = 0.5 * (a + b)
        if point(c).real > 0:
            a = c
        else:
            b = c
    y = point(b).imag
    return y / spec.evals_per_step if normalize else y


# ---------------------------------------------------------------- model ODE


@dataclass(frozen=True)
class ModelOdeStepMatrix:
    """AB3 step matrix for ``y' = -beta y`` acting on ``(y_n, y_{n-1}, y_{n-2})``.

    ``alpha`` is ordered newest first (``alpha[0]`` multiplies the rhs at
    ``t_n``) and already includes the step size.
    """

    beta: float
    alpha: np.ndarray
    G: np.ndarray

    def gtg_eigenvalues(self) -> np.ndarray:
        """Closed-form eigenvalues of ``G^T G``, descending: ``1`` and ``(C +- sqrt(C^2 - 4 a3^2 b^2)) / 2``."""
        b = self.beta
        a1, _, a3 = self.alpha
        C = -2 * a1 * b + 2 + b * b * float(self.alpha @ self.alpha)
        disc = math.sqrt(max(C * C - 4 * a3 * a3 * b * b, 0.0))
        big = 0.5 * (C + disc)
        # product of the pair is a3^2 b^2; avoids cancellation in C - disc
        small = (a3 * b) ** 2 / big if big > 0 else 0.0
        return np.sort(np.array([1.0, big, small]))[::-1]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.G)


def model_ode_step_matrix(beta: float, alpha) -> ModelOdeStepMatrix:
    a = np.asarray(alpha, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError("alpha must hold three weights")
    G = np.array(
        [
            [1 - beta * a[0], -beta * a[1], -beta * a[2]],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ]
    )
    return ModelOdeStepMatrix(float(beta), a, G)


# ---------------------------------------------------------------- step matrices


@dataclass(frozen=True)
class StepMatrix:
    G: np.ndarray
    epsilon: float
    dt: Optional[float] = None
    layout: Optional[tuple[str, ...]] = None

    @property
    def dim(self) -> int:
        return self.G.shape[0]


def build_step_matrix(
    advance: Callable[[np.ndarray], np.ndarray],
    phi0,
    epsilon: float = 1e-7,
    workers: Optional[int] = None,
    dt: Optional[float] = None,
    layout: Optional[Sequence[str]] = None,
) -> StepMatrix:
    """Finite-difference linearisation of ``advance`` about ``phi0``.

    Column ``j`` is ``(advance(phi0 + eps e_j) - advance(phi0)) / eps``.  With
    ``workers`` the columns are computed on a thread pool; ``advance`` must
    then be pure.  The result does not depend on ``workers``.
    """
    phi0 = np.array(phi0, dtype=np.float64).ravel()
    D = phi0.size
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if layout is not None and len(layout) != D:
        raise ValueError("layout length must match the stability vector")
    base = np.asarray(advance(phi0.copy()), dtype=np.float64)
    if base.shape != (D,):
        raise ValueError("advance must map the stability vector to one of equal size")

    def column(j):
        p = phi0.copy()
        p[j] += epsilon
        return (np.asarray(advance(p), dtype=np.float64) - base) / epsilon

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            cols = list(ex.map(column, range(D)))
    else:
        cols = [column(j) for j in range(D)]
    G = np.column_stack(cols)
    if not np.all(np.isfinite(G)):
        raise RhsBlowupError("non-finite step matrix column")
    return StepMatrix(G, float(epsilon), dt, tuple(layout) if layout is not None else None)


def spectral_radius(G) -> float:
    """Largest eigenvalue modulus of a square matrix (dense eigensolve)."""
    G = np.asarray(G.G if isinstance(G, StepMatrix) else G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(G)):
        raise ValueError("matrix must be finite")
    try:
        ev = np.linalg.eigvals(G)
    except np.linalg.LinAlgError as e:
        raise EigensolveError() from e
    return float(np.abs(ev).max()) if ev.size else 0.0


# Stability-vector adapters: the vector holds the state followed by history.


def ab_layout(dim: int, m: int) -> tuple[str, ...]:
    return tuple(f"y[{i}]" for i in range(dim)) + tuple(
        f"F{k}[{i}]" for k in range(m) for i in range(dim)
    )


def ab_advance(sys: OdeSystem, spec: StepperSpec, dt: float, t0: float = 0.0):
    """Map ``(y, F_1..F_m)`` to its image after one AB step from uniform history times."""
    m = spec.history_len
    d = sys.dim
    hist_t = t0 + dt * np.arange(-(m - 1), 1.0)

    def advance(phi):
        st = SchemeState(t0, phi[:d].copy(), hist_t.copy(), phi[d:].reshape(m, d).copy())
        nxt = ab_step(sys, st, dt, spec)
        return np.concatenate([nxt.y, nxt.hist_f.ravel()])

    return advance


def ab_stability_vector(state: SchemeState) -> np.ndarray:
    return np.concatenate([state.y, state.hist_f.ravel()])


def rk_advance(sys: OdeSystem, kind: str, dt: float, t0: float = 0.0):
    return lambda phi: rk_step(sys, t0, phi, dt, kind)


def mrab_advance(sys, cfg: MrabConfig, t0: float = 0.0):
    """Map ``(f, s, hist_f, hist_s)`` through one MRAB macro step."""
    from .multirate import MrabState, mrab_macro_step

    m, df, ds = cfg.history_len, sys.dim_f, sys.dim_s
    hf_t = t0 + cfg.micro_step * np.arange(-(m - 1), 1.0)
    hs_t = t0 + cfg.macro_step * np.arange(-(m - 1), 1.0)

    def advance(phi):
        f, s = phi[:df], phi[df : df + ds]
        hf = phi[df + ds : df + ds + m * df].reshape(m, df)
        hs = phi[df + ds + m * df :].reshape(m, ds)
        st = MrabState(t0, f.copy(), s.copy(), hf_t.copy(), hf.copy(), hs_t.copy(), hs.copy())
        nxt = mrab_macro_step(sys, st, cfg)
        return np.concatenate([nxt.f, nxt.s, nxt.hist_f.ravel(), nxt.hist_s.ravel()])

    return advance


def mrab_stability_vector(state) -> np.ndarray:
    return np.concatenate([state.f, state.s, state.hist_f.ravel(), state.hist_s.ravel()])


# ---------------------------------------------------------------- dt search


@dataclass(frozen=True)
class MaxDtResult:
    dt_max: float
    iterations: int
    rho_at_dt_max: float


def max_stable_dt(
    problem: Callable[[float], tuple[Callable, np.ndarray]],
    bracket: tuple[float, float],
    resolution: float = 1e-4,
    epsilon: float = 1e-7,
    slack: float = RHO_SLACK,
    workers: Optional[int] = None,
) -> MaxDtResult:
    """Bisect ``dt`` until the stable/unstable bracket is below ``resolution``.

    ``problem(dt)`` returns ``(advance, phi0)``; stability means
    ``rho(G_eps) <= 1 + slack``.  Returns the largest dt verified stable.
    """
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")

    def rho(dt):
        adv, phi0 = problem(dt)
        return spectral_radius(build_step_matrix(adv, phi0, epsilon, workers))

    rho_lo, rho_hi = rho(lo), rho(hi)
    if rho_lo > 1 + slack or rho_hi <= 1 + slack:
        raise BracketError(
            f"bracket does not straddle the stability boundary "
            f"(rho({lo})={rho_lo:.6g}, rho({hi})={rho_hi:.6g})"
        )
    it = 0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        r = rho(mid)
        if r <= 1 + slack:
            lo, rho_lo = mid, r
        else:
            hi = mid
        it += 1
    return MaxDtResult(lo, it, rho_lo)


def stability_ratios(dt: float, dt_rk4: float, dt_srab: float, sr: int) -> tuple[float, float, float]:
    """``(r_RK4, r_SRAB, efficiency)`` with efficiency ``r_SRAB / SR`` as a fraction."""
    if min(dt, dt_rk4, dt_srab) <= 0 or sr < 1:
        raise ValueError("ratios need positive inputs")
    r_srab = dt / dt_srab
    return dt / dt_rk4, r_srab, r_srab / sr
