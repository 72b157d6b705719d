"""Two-rate fastest-first multi-rate Adams-Bashforth (MRAB) integration.

The system is split as ``f' = rhs_f(t, f, s)`` (fast) and
``s' = rhs_s(t, f, s)`` (slow).  Per macro step ``H`` with ``SR`` micro steps
``h = H / SR``:

1. the slow extrapolant is formed once from the macro-spaced history;
2. the fast component takes ``SR`` AB micro steps, each followed by one
   ``rhs_f`` evaluation; the slow values it needs at micro points are
   ``s(t) + int_t^{t+kh}`` of the slow extrapolant (no re-extrapolation);
3. ``s`` is advanced by the full-macro integral from the macro-start state;
4. ``rhs_s`` is evaluated once at ``t + H``.

So a macro step costs exactly ``SR`` fast and one slow evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coeffs import ab_weights, ab_weights_batch
from .errors import InsufficientHistoryError, MisalignedHistoryError
from .steppers import (
    CountingRhs,
    OdeSystem,
    SchemeState,
    StepperSpec,
    _step_times,
    eval_rhs,
    rk_step,
)

TwoRateRhs = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TwoRateSystem:
    dim_f: int
    dim_s: int
    rhs_f: TwoRateRhs
    rhs_s: TwoRateRhs

    def split(self, y):
        return y[: self.dim_f], y[self.dim_f :]

    def as_single_rate(self) -> OdeSystem:
        """The concatenated system ``y = (f, s)``."""

        def rhs(t, y):
            f, s = self.split(y)
            return np.concatenate([self.rhs_f(t, f, s), self.rhs_s(t, f, s)])

        return OdeSystem(self.dim_f + self.dim_s, rhs)


@dataclass(frozen=True)
class MrabConfig:
    order: int
    step_ratio: int
    macro_step: float
    history_len: Optional[int] = None

    def __post_init__(self):
        if int(self.step_ratio) != self.step_ratio or self.step_ratio < 1:
            raise ValueError("step ratio must be a positive integer")
        object.__setattr__(self, "step_ratio", int(self.step_ratio))
        if not self.macro_step > 0:
            raise ValueError("macro step must be positive")
        m = self.order if self.history_len is None else int(self.history_len)
        if m < self.order:
            raise InsufficientHistoryError()
        object.__setattr__(self, "history_len", m)

    @property
    def micro_step(self) -> float:
        return self.macro_step / self.step_ratio

    @property
    def stepper(self) -> StepperSpec:
        """Single-rate AB spec with the same order and history length."""
        return StepperSpec.ab(self.order, self.history_len)

    @property
    def name(self) -> str:
        return f"MR{self.stepper.name}(SR={self.step_ratio})"


@dataclass
class MrabState:
    t: float
    f: np.ndarray
    s: np.ndarray
    hist_f_t: np.ndarray
    hist_f: np.ndarray  # (m, dim_f), micro-spaced, newest last
    hist_s_t: np.ndarray
    hist_s: np.ndarray  # (m, dim_s), macro-spaced, newest last

    def check(self, m: int):
        tol = 1e-12 * max(1.0, abs(self.t))
        for ts, vals in ((self.hist_f_t, self.hist_f), (self.hist_s_t, self.hist_s)):
            if ts.size != m or vals.shape[0] != m:
                raise InsufficientHistoryError()
            if np.any(np.diff(ts) <= 0) or abs(ts[-1] - self.t) > tol:
                raise MisalignedHistoryError()

    def fast_state(self) -> SchemeState:
        return SchemeState(self.t, self.f.copy(), self.hist_f_t.copy(), self.hist_f.copy())

    def slow_state(self) -> SchemeState:
        return SchemeState(self.t, self.s.copy(), self.hist_s_t.copy(), self.hist_s.copy())


def mrab_bootstrap(sys: TwoRateSystem, t0: float, f0, s0, cfg: MrabConfig) -> MrabState:
    """Seed both histories with ``(m - 1) * SR`` RK micro steps of the coupled system.

    The RK scheme matches the order (RK3 up to order 3, RK4 above).  Both
    right-hand sides are evaluated at every micro point (they form the first
    RK stage of the next step), so each component costs
    ``1 + (m - 1) * SR * stages`` evaluations.
    """
    m, sr = cfg.history_len, cfg.step_ratio
    h = cfg.micro_step
    full = sys.as_single_rate()
    kind = cfg.stepper.bootstrap_kind

    f = np.array(f0, dtype=np.float64)
    s = np.array(s0, dtype=np.float64)
    n_micro = (m - 1) * sr
    times = t0 + h * np.arange(n_micro + 1)

    def rhs_pair(t, f, s):
        return eval_rhs(lambda t_, _: sys.rhs_f(t_, f, s), t, f), eval_rhs(
            lambda t_, _: sys.rhs_s(t_, f, s), t, s
        )

    af, as_ = rhs_pair(times[0], f, s)
    fast = [(times[0], af)]
    slow = [(times[0], as_)]
    y = np.concatenate([f, s])
    for i in range(1, n_micro + 1):
        y = rk_step(full, times[i - 1], y, h, kind, k1=np.concatenate([af, as_]))
        f, s = sys.split(y)
        af, as_ = rhs_pair(times[i], f, s)
        fast.append((times[i], af))
        if i % sr == 0:
            slow.append((times[i], as_))
    fast, slow = fast[-m:], slow[-m:]
    return MrabState(
        t=float(times[-1]),
        f=f.copy(),
        s=s.copy(),
        hist_f_t=np.array([p[0] for p in fast]),
        hist_f=np.array([p[1] for p in fast]).reshape(m, -1),
        hist_s_t=np.array([p[0] for p in slow]),
        hist_s=np.array([p[1] for p in slow]).reshape(m, -1),
    )


def mrab_macro_step(
    sys: TwoRateSystem, state: MrabState, cfg: MrabConfig, H: Optional[float] = None
) -> MrabState:
    """One fastest-first macro step of size ``H`` (default ``cfg.macro_step``).

    Weights are rebuilt from the stored history times, so ``H`` may vary from
    one macro step to the next.
    """
    state.check(cfg.history_len)
    n, sr = cfg.order, cfg.step_ratio
    H = cfg.macro_step if H is None else float(H)
    if not H > 0:
        raise ValueError("macro step must be positive")
    t0 = state.t
    micro_t = t0 + (H / sr) * np.arange(1, sr + 1)
    micro_t[-1] = t0 + H

    # the single slow extrapolant, integrated from t0 to every micro point
    alpha_s = ab_weights_batch(
        state.hist_s_t, n, np.column_stack([np.full(sr, t0), micro_t])
    )
    s_micro = state.s + alpha_s @ state.hist_s

    f = state.f
    hf_t, hf = state.hist_f_t, state.hist_f
    t_prev = t0
    for k, t_k in enumerate(micro_t):
        alpha_f = ab_weights(hf_t, n, (t_prev, t_k)).alpha
        f = f + alpha_f @ hf
        s = s_micro[k]
        a_f = eval_rhs(lambda t_, _: sys.rhs_f(t_, f, s), t_k, f)
        hf_t = np.append(hf_t[1:], t_k)
        hf = np.concatenate([hf[1:], a_f[None, :]])
        t_prev = t_k

    a_s = eval_rhs(lambda t_, _: sys.rhs_s(t_, f, s), t_prev, s)
    return MrabState(
        t=float(t_prev),
        f=f,
        s=s,
        hist_f_t=hf_t,
        hist_f=hf,
        hist_s_t=np.append(state.hist_s_t[1:], t_prev),
        hist_s=np.concatenate([state.hist_s[1:], a_s[None, :]]),
    )


def mrab_integrate(
    sys: TwoRateSystem,
    t0: float,
    f0,
    s0,
    t_end: float,
    cfg: MrabConfig,
    observer: Optional[Callable[[MrabState], None]] = None,
) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Bootstrap, then macro-step to ``t_end``; returns ``(f, s, eval_f, eval_s)``.

    A final macro step is shortened if ``t_end - t0`` is not a whole number of
    macro steps.
    """
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    cf, cs = CountingRhs(sys.rhs_f), CountingRhs(sys.rhs_s)
    csys = TwoRateSystem(sys.dim_f, sys.dim_s, cf, cs)
    H = cfg.macro_step
    if t0 + (cfg.history_len - 1) * H > t_end * (1 + 1e-12) + 1e-300:
        raise ValueError("t_end lies inside the bootstrap phase")
    state = mrab_bootstrap(csys, t0, f0, s0, cfg)
    if observer:
        observer(state)
    if t_end - state.t > 1e-12 * max(1.0, abs(t_end)):
        for t_next in _step_times(state.t, t_end, H):
            state = mrab_macro_step(csys, state, cfg, H=t_next - state.t)
            state.t = t_next
            state.hist_f_t[-1] = t_next
            state.hist_s_t[-1] = t_next
            if observer:
                observer(state)
    return state.f, state.s, cf.count, cs.count
