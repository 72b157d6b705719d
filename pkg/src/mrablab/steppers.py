"""Single-rate explicit time steppers: Heun RK3, classical RK4 and AB(n, m).

AB schemes keep a ring of ``m`` (time, rhs) pairs, newest last, and recompute
their weights from the stored times every step, so non-uniform histories
(including a shortened final step) are handled exactly.  The history is
seeded by ``m - 1`` Runge-Kutta steps of the AB step size: RK3 for orders up
to 3, RK4 above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coeffs import ab_weights
from .errors import InsufficientHistoryError, MisalignedHistoryError, RhsBlowupError

RhsFunc = Callable[[float, np.ndarray], np.ndarray]

# (nodes c, lower-triangular A rows, weights b)
TABLEAUX = {
    "rk3": (
        (0.0, 1 / 3, 2 / 3),
        ((), (1 / 3,), (0.0, 2 / 3)),
        (1 / 4, 0.0, 3 / 4),
    ),
    "rk4": (
        (0.0, 0.5, 0.5, 1.0),
        ((), (0.5,), (0.0, 0.5), (0.0, 0.0, 1.0)),
        (1 / 6, 1 / 3, 1 / 3, 1 / 6),
    ),
}


@dataclass(frozen=True)
class OdeSystem:
    dim: int
    rhs: RhsFunc


class CountingRhs:
    """Wrap a right-hand side and count its evaluations."""

    def __init__(self, rhs):
        self.rhs = rhs
        self.count = 0

    def __call__(self, *args):
        self.count += 1
        return self.rhs(*args)


def counted(sys: OdeSystem) -> tuple[OdeSystem, CountingRhs]:
    c = CountingRhs(sys.rhs)
    return OdeSystem(sys.dim, c), c


def scalar_test_system(k) -> OdeSystem:
    """``dy/dt = k y`` for complex ``k`` (scalar or array) as a real system.

    Each complex lane is stored as an interleaved (re, im) pair, i.e. the
    2x2 block ``[[a, -b], [b, a]]`` for ``k = a + ib``.  Arrays of ``k`` give
    a block-diagonal system, which lets many test equations be marched at once.
    """
    k = np.atleast_1d(np.asarray(k, dtype=np.complex128))

    def rhs(t, y):
        return (k * y.view(np.complex128)).view(np.float64)

    return OdeSystem(2 * k.size, rhs)


@dataclass(frozen=True)
class StepperSpec:
    """Which single-rate scheme to run.

    ``kind`` is ``"rk3"``, ``"rk4"`` or ``"ab"``; ``history_len`` only applies
    to AB and defaults to ``order``.
    """

    kind: str
    order: int
    history_len: Optional[int] = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind == "rk3" and self.order != 3:
            raise ValueError("RK3 has order 3")
        if kind == "rk4" and self.order != 4:
            raise ValueError("RK4 has order 4")
        if kind == "ab":
            if self.order < 1:
                raise ValueError("AB order must be >= 1")
            m = self.order if self.history_len is None else int(self.history_len)
            if m < self.order:
                raise InsufficientHistoryError()
            object.__setattr__(self, "history_len", m)
        elif kind in TABLEAUX:
            object.__setattr__(self, "history_len", None)
        else:
            raise ValueError(f"unknown stepper kind {self.kind!r}")

    @classmethod
    def rk3(cls):
        return cls("rk3", 3)

    @classmethod
    def rk4(cls):
        return cls("rk4", 4)

    @classmethod
    def ab(cls, order, history_len=None):
        return cls("ab", order, history_len)

    @property
    def is_multistep(self) -> bool:
        return self.kind == "ab"

    @property
    def evals_per_step(self) -> int:
        return 1 if self.kind == "ab" else len(TABLEAUX[self.kind][2])

    @property
    def bootstrap_kind(self) -> str:
        return "rk3" if self.order <= 3 else "rk4"

    @property
    def name(self) -> str:
        if self.kind != "ab":
            return self.kind.upper()
        if self.history_len == self.order:
            return f"AB{self.order}"
        return f"AB{self.order}{self.history_len}"


@dataclass
class SchemeState:
    """State of an AB integration: current (t, y) plus the rhs history ring."""

    t: float
    y: np.ndarray
    hist_t: np.ndarray  # shape (m,), increasing, newest last
    hist_f: np.ndarray  # shape (m, dim)

    def check(self, m: int):
        if self.hist_t.size != m or self.hist_f.shape[0] != m:
            raise InsufficientHistoryError()
        if np.any(np.diff(self.hist_t) <= 0) or self.hist_t[-1] > self.t:
            raise MisalignedHistoryError()


def eval_rhs(rhs: RhsFunc, t: float, y: np.ndarray) -> np.ndarray:
    f = np.asarray(rhs(t, y), dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise RhsBlowupError()
    return f


def rk_step(sys: OdeSystem, t: float, y, dt: float, kind: str = "rk4", k1=None) -> np.ndarray:
    """One explicit RK step.  ``k1`` may pass in an already known ``rhs(t, y)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    c, A, b = TABLEAUX[kind.lower()]
    y = np.asarray(y, dtype=np.float64)
    ks = [eval_rhs(sys.rhs, t, y) if k1 is None else k1]
    for i in range(1, len(c)):
        yi = y.copy()
        for aij, kj in zip(A[i], ks):
            if aij:
                yi += dt * aij * kj
        ks.append(eval_rhs(sys.rhs, t + c[i] * dt, yi))
    out = y.copy()
    for bi, ki in zip(b, ks):
        if bi:
            out += dt * bi * ki
    return out


def ab_bootstrap(
    sys: OdeSystem, t0: float, y0, dt: float, spec: StepperSpec, observer=None
) -> SchemeState:
    """Fill an AB history with ``m - 1`` RK steps of size ``dt``.

    Costs ``1 + (m - 1) * stages`` rhs evaluations: the rhs recorded at each
    point doubles as the first stage of the next RK step.
    """
    if not spec.is_multistep:
        raise ValueError("bootstrap needs an AB stepper spec")
    if not dt > 0:
        raise ValueError("dt must be positive")
    m = spec.history_len
    y = np.array(y0, dtype=np.float64)
    times = t0 + dt * np.arange(m)
    hist = np.empty((m, y.size))
    hist[0] = eval_rhs(sys.rhs, t0, y)
    for i in range(1, m):
        y = rk_step(sys, times[i - 1], y, dt, spec.bootstrap_kind, k1=hist[i - 1])
        hist[i] = eval_rhs(sys.rhs, times[i], y)
        if observer:
            observer(float(times[i]), y)
    return SchemeState(t=float(times[-1]), y=y, hist_t=times, hist_f=hist)


def ab_step(
    sys: OdeSystem, state: SchemeState, dt: float, spec: StepperSpec, t_new=None
) -> SchemeState:
    """Advance an AB integration by ``dt`` (one rhs evaluation).

    ``t_new`` pins the end time exactly (it must equal ``state.t + dt`` up to
    round-off); drivers use it to land on prescribed output times.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    state.check(spec.history_len)
    t_new = state.t + dt if t_new is None else float(t_new)
    alpha = ab_weights(state.hist_t, spec.order, (state.t, t_new)).alpha
    y_new = state.y + alpha @ state.hist_f
    f_new = eval_rhs(sys.rhs, t_new, y_new)
    hist_t = np.append(state.hist_t[1:], t_new)
    hist_f = np.concatenate([state.hist_f[1:], f_new[None, :]])
    return SchemeState(t=t_new, y=y_new, hist_t=hist_t, hist_f=hist_f)


def _step_times(t_start: float, t_end: float, dt: float) -> np.ndarray:
    """Step end times from ``t_start``: uniform ``dt``, last one clipped to ``t_end``."""
    n = max(1, math.ceil((t_end - t_start) / dt - 1e-9))
    ts = t_start + dt * np.arange(1, n + 1)
    ts[-1] = t_end
    return ts


def integrate_to(
    sys: OdeSystem,
    y0,
    t0: float,
    t_end: float,
    dt: float,
    spec: StepperSpec,
    observer: Optional[Callable[[float, np.ndarray], None]] = None,
) -> tuple[np.ndarray, int]:
    """Integrate from ``t0`` to exactly ``t_end``; returns ``(y, rhs_evals)``.

    The last step is shortened to land on ``t_end``.  ``observer(t, y)`` is
    called at the initial point and after every step.
    """
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    if not dt > 0:
        raise ValueError("dt must be positive")
    sys, counter = counted(sys)
    y = np.array(y0, dtype=np.float64)
    if observer:
        observer(t0, y)

    if not spec.is_multistep:
        t = t0
        for t_next in _step_times(t0, t_end, dt):
            y = rk_step(sys, t, y, t_next - t, spec.kind)
            t = t_next
            if observer:
                observer(t, y)
        return y, counter.count

    m = spec.history_len
    if t0 + (m - 1) * dt > t_end * (1 + 1e-12) + 1e-300:
        raise ValueError("t_end lies inside the bootstrap phase")
    state = ab_bootstrap(sys, t0, y, dt, spec, observer=observer)
    if t_end - state.t > 1e-12 * max(1.0, abs(t_end)):
        t = state.t
        for t_next in _step_times(state.t, t_end, dt):
            state = ab_step(sys, state, t_next - t, spec, t_new=t_next)
            t = t_next
            if observer:
                observer(t, state.y)
    return state.y, counter.count
