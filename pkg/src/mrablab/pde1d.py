"""1D linear advection testbeds with an SBP 4-2 first-derivative operator.

* single periodic grid (the pure interior stencil applied cyclically);
* a two-grid overset pair: a coarse background grid with a cut hole and a
  finer patch, both non-periodic, coupled through SAT penalties toward
  Lagrange-interpolated donor values.  Information only flows downstream
  (background, patch, background), so the coupled operator is block
  triangular and inherits the energy stability of each SBP-SAT block;
* the metric-based CFL timestep estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DonorRangeError

MIN_POINTS = 9

# interior stencil, offsets -2..2
INTERIOR = np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12])
NORM_BOUNDARY = np.array([17 / 48, 59 / 48, 43 / 48, 49 / 48])
Q_LEFT = np.array(
    [
        [-1 / 2, 59 / 96, -1 / 12, -1 / 32, 0.0, 0.0],
        [-59 / 96, 0.0, 59 / 96, 0.0, 0.0, 0.0],
        [1 / 12, -59 / 96, 0.0, 59 / 96, -1 / 12, 0.0],
        [1 / 32, 0.0, -59 / 96, 0.0, 2 / 3, -1 / 12],
    ]
)


@dataclass(frozen=True)
class Grid1D:
    x: np.ndarray
    dx: float
    boundary: str  # "periodic" or "sat"

    def __post_init__(self):
        if self.boundary not in ("periodic", "sat"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.x.size < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} points")
        if np.max(np.abs(np.diff(self.x) - self.dx)) > 1e-12 * max(1.0, abs(self.dx)):
            raise ValueError("grid spacing must be uniform")

    @classmethod
    def periodic(cls, n: int, length: float = 1.0, x0: float = 0.0) -> "Grid1D":
        dx = length / n
        return cls(x0 + dx * np.arange(n), dx, "periodic")

    @classmethod
    def interval(cls, a: float, b: float, n: int) -> "Grid1D":
        return cls(np.linspace(a, b, n), (b - a) / (n - 1), "sat")

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def periodic_flag(self) -> bool:
        return self.boundary == "periodic"

    @property
    def length(self) -> float:
        return self.n * self.dx if self.periodic_flag else self.x[-1] - self.x[0]


@dataclass(frozen=True)
class SbpOperator:
    """Diagonal-norm first-derivative operator, 4th order inside, 2nd at boundaries.

    ``D = P^{-1} Q`` in index units; divide by ``dx`` for physical units.
    """

    interior: np.ndarray = field(default_factory=lambda: INTERIOR.copy())
    q_left: np.ndarray = field(default_factory=lambda: Q_LEFT.copy())
    p_boundary: np.ndarray = field(default_factory=lambda: NORM_BOUNDARY.copy())

    @property
    def d_left(self) -> np.ndarray:
        return self.q_left / self.p_boundary[:, None]

    def norm(self, n: int) -> np.ndarray:
        """Diagonal of ``P`` (index units) for a non-periodic grid of ``n`` points."""
        if n < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} points")
        p = np.ones(n)
        nb = self.p_boundary.size
        p[:nb] = self.p_boundary
        p[n - nb :] = self.p_boundary[::-1]
        return p

    def matrix(self, n: int, periodic: bool) -> np.ndarray:
        """Dense ``D`` in index units."""
        if n < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} points")
        D = np.zeros((n, n))
        for i in range(n):
            for off, c in zip(range(-2, 3), self.interior):
                if c:
                    D[i, (i + off) % n] += c
        if not periodic:
            dl = self.d_left
            r, c = dl.shape
            D[:r] = 0.0
            D[n - r :] = 0.0
            D[:r, :c] = dl
            D[n - r :, n - c :] = -dl[::-1, ::-1]
        return D

    def apply(self, u: np.ndarray, periodic: bool) -> np.ndarray:
        """``D u`` in index units, without forming ``D``."""
        u = np.asarray(u, dtype=np.float64)
        n = u.shape[0]
        if n < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} points")
        c1, c2 = self.interior[3], self.interior[4]
        if periodic:
            return c1 * (np.roll(u, -1, 0) - np.roll(u, 1, 0)) + c2 * (
                np.roll(u, -2, 0) - np.roll(u, 2, 0)
            )
        du = np.empty_like(u)
        du[2 : n - 2] = c1 * (u[3 : n - 1] - u[1 : n - 3]) + c2 * (u[4:n] - u[0 : n - 4])
        dl = self.d_left
        r, c = dl.shape
        du[:r] = dl @ u[:c]
        du[n - r :] = -dl[::-1, ::-1] @ u[n - c :]
        return du


def sbp_derivative(op: SbpOperator, u, dx: float, periodic: bool) -> np.ndarray:
    return op.apply(u, periodic) / dx


def advection_rhs(
    grid: Grid1D,
    op: SbpOperator,
    u,
    wave_speed: float,
    inflow: float = 0.0,
    sigma: float = 1.0,
) -> np.ndarray:
    """``-c D u``; on a non-periodic grid the inflow end gets a SAT penalty.

    The penalty is ``-(sigma |c| / (p_0 dx)) (u_b - inflow)`` at the upwind
    boundary point; ``sigma >= 1/2`` keeps the scheme energy stable.
    """
    u = np.asarray(u, dtype=np.float64)
    rhs = -wave_speed * sbp_derivative(op, u, grid.dx, grid.periodic_flag)
    if not grid.periodic_flag and wave_speed != 0:
        j = 0 if wave_speed > 0 else grid.n - 1
        rhs[j] -= sigma * abs(wave_speed) / (op.p_boundary[0] * grid.dx) * (u[j] - inflow)
    return rhs


# ---------------------------------------------------------------- overset pair


def lagrange_weights(nodes: np.ndarray, x: float) -> np.ndarray:
    w = np.ones(nodes.size)
    for k in range(nodes.size):
        for j in range(nodes.size):
            if j != k:
                w[k] *= (x - nodes[j]) / (nodes[k] - nodes[j])
    return w


@dataclass(frozen=True)
class FringeMap:
    """Receiver point, its penalty coefficient, and donor stencil/weights.

    ``receiver`` and ``donors`` index state vectors (for the background grid,
    the vector of active points).  ``tau`` is zero on outflow receivers.
    """

    receiver: int
    donors: np.ndarray
    weights: np.ndarray
    tau: float


def _donor_stencil(x_donor: np.ndarray, x: float, width: int = 4) -> np.ndarray:
    """Positions (into ``x_donor``, increasing) of a centred ``width``-point stencil."""
    j = int(np.searchsorted(x_donor, x, side="right")) - 1
    lo = j - (width // 2 - 1)
    if lo < 0 or lo + width > x_donor.size:
        raise DonorRangeError()
    return np.arange(lo, lo + width)


@dataclass(frozen=True)
class OversetPair1D:
    """Background grid over ``[x_a, x_b]`` with a hole, plus a finer patch.

    The background keeps the points outside the hole plus one receiver on
    each hole edge; they form two non-periodic SBP segments, stored one after
    the other in the slow state (``slow_index`` maps them back onto
    ``grid_slow``).  The fast state holds every patch point.  The domain end
    upwind of the flow takes the boundary data ``inflow(t)`` through a SAT.
    """

    grid_slow: Grid1D
    grid_fast: Grid1D
    slow_index: np.ndarray
    segments: tuple[tuple[int, int], ...]  # [start, stop) ranges in the slow state
    fast_fringe: tuple[FringeMap, ...]
    slow_fringe: tuple[FringeMap, ...]
    sigma: float
    wave_speed: float
    inflow: Callable[[float], float] = field(default=lambda t: 0.0, repr=False)
    op: SbpOperator = field(default_factory=SbpOperator)

    @property
    def n_slow(self) -> int:
        return self.slow_index.size

    @property
    def n_fast(self) -> int:
        return self.grid_fast.n

    @property
    def slow_x(self) -> np.ndarray:
        return self.grid_slow.x[self.slow_index]

    def with_inflow(self, inflow: Callable[[float], float]) -> "OversetPair1D":
        from dataclasses import replace

        return replace(self, inflow=inflow)

    def slow_to_background(self, s) -> np.ndarray:
        """Scatter the slow state onto ``grid_slow`` (cut points are NaN)."""
        out = np.full(self.grid_slow.n, np.nan)
        out[self.slow_index] = s
        return out


def build_overset_pair(
    n_slow: int,
    a: float,
    b: float,
    refine: int = 4,
    domain: tuple[float, float] = (0.0, 1.0),
    wave_speed: float = 1.0,
    sigma: float = 0.5,
    margin: int = 4,
    fringe_layers: int = 2,
    inflow: Callable[[float], float] = lambda t: 0.0,
) -> OversetPair1D:
    """Assemble the overset pair and its fringe maps.

    Background points with ``a + margin dx <= x <= b - margin dx`` are cut;
    the outermost cut point on each side is kept as a receiver.  The patch
    spans ``[a, b]`` at spacing ``dx / refine`` with ``fringe_layers``
    receivers at each end.  Receivers on the inflow side of a grid get the
    penalty ``tau = sigma |c| / (p_j dx)``; outflow receivers get none.
    """
    xa, xb = map(float, domain)
    gs = Grid1D.interval(xa, xb, n_slow)
    dxs = gs.dx
    if not (xa < a < b < xb):
        raise ValueError("patch must lie strictly inside the domain")
    n_fast = int(round((b - a) / (dxs / refine))) + 1
    gf = Grid1D.interval(a, b, n_fast)

    tol = 1e-12 * dxs
    covered = np.flatnonzero((gs.x >= a + margin * dxs - tol) & (gs.x <= b - margin * dxs + tol))
    if covered.size < 2:
        raise ValueError("patch too small to cut a hole")
    i_lo, i_hi = int(covered[0]), int(covered[-1])
    left = np.arange(0, i_lo + 1)
    right = np.arange(i_hi, n_slow)
    if min(left.size, right.size) < MIN_POINTS:
        raise ValueError("too few background points outside the hole")
    slow_index = np.concatenate([left, right])
    segments = ((0, left.size), (left.size, slow_index.size))
    xs = gs.x[slow_index]

    op = SbpOperator()
    c = float(wave_speed)

    def tau(p, dx, inflow_side):
        return sigma * abs(c) / (p * dx) if inflow_side and c != 0 else 0.0

    # patch receivers: donors from whichever background segment holds them
    p_f = op.norm(n_fast)
    fast_maps = []
    ends = [(range(fringe_layers), c > 0), (range(n_fast - fringe_layers, n_fast), c < 0)]
    for idxs, inflow_side in ends:
        for j in idxs:
            x = gf.x[j]
            for lo, hi in segments:
                if xs[lo] <= x <= xs[hi - 1]:
                    st = lo + _donor_stencil(xs[lo:hi], x)
                    break
            else:
                raise DonorRangeError()
            w = lagrange_weights(xs[st], x)
            fast_maps.append(FringeMap(j, st, w, tau(p_f[j], gf.dx, inflow_side)))

    # background receivers: last point of the left segment, first of the right
    slow_maps = []
    for (lo, hi), k, inflow_side in (
        (segments[0], segments[0][1] - 1, c < 0),
        (segments[1], segments[1][0], c > 0),
    ):
        x = xs[k]
        st = _donor_stencil(gf.x, x)
        if st[0] < fringe_layers or st[-1] > n_fast - 1 - fringe_layers:
            raise DonorRangeError()
        w = lagrange_weights(gf.x[st], x)
        p = op.norm(hi - lo)[k - lo]
        slow_maps.append(FringeMap(k, st, w, tau(p, dxs, inflow_side)))

    return OversetPair1D(gs, gf, slow_index, segments, tuple(fast_maps), tuple(slow_maps),
                         float(sigma), c, inflow, op)


def _penalise(rhs, u, donor_state, maps):
    for fm in maps:
        if fm.tau:
            rhs[fm.receiver] -= fm.tau * (u[fm.receiver] - fm.weights @ donor_state[fm.donors])


def overset_rhs(pair: OversetPair1D, u_slow, u_fast, t: float = 0.0):
    """``(rhs_slow, rhs_fast)`` for the coupled pair at time ``t``."""
    c = pair.wave_speed
    op = pair.op
    us = np.asarray(u_slow, dtype=np.float64)
    uf = np.asarray(u_fast, dtype=np.float64)
    rs = np.empty_like(us)
    for lo, hi in pair.segments:
        rs[lo:hi] = -c * op.apply(us[lo:hi], False) / pair.grid_slow.dx
    rf = -c * op.apply(uf, False) / pair.grid_fast.dx
    if c != 0:
        j = 0 if c > 0 else pair.n_slow - 1
        tau = pair.sigma * abs(c) / (op.p_boundary[0] * pair.grid_slow.dx)
        rs[j] -= tau * (us[j] - pair.inflow(t))
    _penalise(rs, us, uf, pair.slow_fringe)
    _penalise(rf, uf, us, pair.fast_fringe)
    return rs, rf


def overset_two_rate(pair: OversetPair1D):
    """The pair as a :class:`TwoRateSystem` (fast = patch, slow = background)."""
    from .multirate import TwoRateSystem

    return TwoRateSystem(
        pair.n_fast,
        pair.n_slow,
        lambda t, f, s: overset_rhs(pair, s, f, t)[1],
        lambda t, f, s: overset_rhs(pair, s, f, t)[0],
    )


def overset_single_rate(pair: OversetPair1D):
    """The pair as one :class:`OdeSystem` with state ``(fast, slow)``."""
    from .steppers import OdeSystem

    nf = pair.n_fast

    def rhs(t, y):
        rs, rf = overset_rhs(pair, y[nf:], y[:nf], t)
        return np.concatenate([rf, rs])

    return OdeSystem(nf + pair.n_slow, rhs)


def overset_operator(pair: OversetPair1D) -> np.ndarray:
    """Assembled linear operator on ``(fast, slow)`` with zero boundary data."""
    sys = overset_single_rate(pair.with_inflow(lambda t: 0.0))
    return np.column_stack([sys.rhs(0.0, e) for e in np.eye(sys.dim)])


def overset_initial(pair: OversetPair1D, u0: Callable[[np.ndarray], np.ndarray]):
    """``(fast, slow)`` samples of ``u0``."""
    return u0(pair.grid_fast.x), u0(pair.slow_x)


# ---------------------------------------------------------------- timestep


@dataclass(frozen=True)
class MetricPoint:
    """Metric data at one mesh point.

    ``dxi_dx[i]`` is the gradient of computational coordinate ``xi_i`` with
    respect to ``x``; ``J`` is the determinant of ``d xi / d x``, so ``1/J`` is
    the cell volume.
    """

    J: float
    dxi_dx: np.ndarray
    U: np.ndarray
    c: float
    nu_star: float = 0.0

    @classmethod
    def cartesian(cls, spacing: Sequence[float], U, c: float, nu_star: float = 0.0):
        h = np.asarray(spacing, dtype=np.float64)
        return cls(float(1 / np.prod(h)), np.diag(1 / h), np.asarray(U, dtype=np.float64),
                   float(c), float(nu_star))


def point_timesteps(p: MetricPoint) -> tuple[float, float]:
    """``(dt_inv, dt_visc)`` at one point."""
    if not p.J > 0:
        raise ValueError("Jacobian must be positive")
    if not p.c > 0:
        raise ValueError("sound speed must be positive")
    if p.nu_star < 0:
        raise ValueError("nu_star must be non-negative")
    m = np.atleast_2d(np.asarray(p.dxi_dx, dtype=np.float64)) / p.J
    U = np.atleast_1d(np.asarray(p.U, dtype=np.float64))
    norms = np.linalg.norm(m, axis=1)
    conv = float(np.sum(np.abs(m @ U)))
    acoustic = p.c * float(norms.sum())
    vol = 1.0 / p.J
    dt_inv = vol / (conv + acoustic)
    dt_visc = vol / (conv + acoustic + 2 * p.nu_star * p.J * float(norms.sum()) ** 2)
    return dt_inv, dt_visc


def compute_timestep(points: Sequence[MetricPoint], cfl: float = 1.0, viscous: bool = False) -> float:
    if len(points) == 0:
        raise ValueError("no mesh points")
    if not cfl > 0:
        raise ValueError("cfl must be positive")
    best = np.inf
    for p in points:
        dt_inv, dt_visc = point_timesteps(p)
        best = min(best, min(dt_inv, dt_visc) if viscous else dt_inv)
    return cfl * best


# ---------------------------------------------------------------- testbed


def periodic_testbed(n: int = 61, dx: float = 1 / 60, wave_speed: float = 1.0):
    """Periodic advection grid of ``n`` points at spacing ``dx`` and its rhs."""
    grid = Grid1D.periodic(n, n * dx)
    op = SbpOperator()

    def rhs(t, u):
        return -wave_speed * op.apply(u, True) / grid.dx

    return grid, op, rhs


def interior_symbol(theta) -> np.ndarray:
    """Imaginary part of the interior stencil's Fourier symbol (times ``dx``)."""
    theta = np.asarray(theta, dtype=np.float64)
    return 4 / 3 * np.sin(theta) - 1 / 6 * np.sin(2 * theta)


def max_eigenvalue_dx(n: Optional[int] = None) -> float:
    """``max |lambda| dx`` of the periodic interior operator.

    ``n=None`` gives the supremum over all wavenumbers (closed form: the
    symbol peaks where ``cos theta = 1 - sqrt(6)/2``); an integer ``n`` gives
    the maximum over the ``n`` discrete modes of a periodic grid.
    """
    if n is None:
        c = 1 - np.sqrt(6) / 2
        return float(np.sqrt(1 - c * c) * (4 - c) / 3)
    if n < len(INTERIOR):
        raise ValueError(f"need at least {len(INTERIOR)} points")
    return float(np.abs(interior_symbol(2 * np.pi * np.arange(n) / n)).max())
