"""Named test problems with exact solutions, shared by the CLI and scripts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .multirate import MrabConfig, TwoRateSystem, mrab_integrate
from .steppers import OdeSystem, StepperSpec, integrate_to

COUPLED = np.array([[-1.0, 0.1], [0.1, -0.05]])


@dataclass(frozen=True)
class Problem:
    """``y' = rhs(t, y)``; the first ``n_fast`` components are the fast ones."""

    name: str
    rhs: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    exact: Callable[[float], np.ndarray]
    n_fast: Optional[int] = None

    @property
    def dim(self) -> int:
        return self.y0.size

    def system(self) -> OdeSystem:
        return OdeSystem(self.dim, self.rhs)

    def two_rate(self) -> TwoRateSystem:
        nf = self.n_fast
        if nf is None or not 0 < nf < self.dim:
            raise ValueError(f"problem {self.name!r} has no fast/slow split")

        def full(t, f, s):
            return self.rhs(t, np.concatenate([f, s]))

        return TwoRateSystem(nf, self.dim - nf, lambda t, f, s: full(t, f, s)[:nf],
                             lambda t, f, s: full(t, f, s)[nf:])


def linear_problem(A, y0, n_fast: Optional[int] = None, name: str = "linear") -> Problem:
    A = np.array(A, dtype=np.float64)
    y0 = np.array(y0, dtype=np.float64)
    if A.ndim != 2 or A.shape != (y0.size, y0.size):
        raise ValueError("matrix must be square and match y0")
    return Problem(name, lambda t, y: A @ y, y0, lambda t: expm(A * t) @ y0, n_fast)


def get_problem(name: str, matrix=None, y0=None, n_fast=None) -> Problem:
    if name == "decay":
        return linear_problem([[-1.0]], [1.0] if y0 is None else y0, name="decay")
    if name == "coupled":
        return linear_problem(COUPLED, [1.0, 1.0] if y0 is None else y0, 1, name="coupled")
    if name == "poly":
        # y' = 3 t^2 + 2 t on every component: integrated exactly by third order schemes
        base = np.array([0.0, 1.0] if y0 is None else y0, dtype=np.float64)
        return Problem(
            "poly",
            lambda t, y: np.full_like(y, 3 * t * t + 2 * t),
            base,
            lambda t: base + t**3 + t**2,
            1 if base.size > 1 else None,
        )
    if name == "linear":
        if matrix is None or y0 is None:
            raise ValueError("problem 'linear' needs matrix and y0")
        return linear_problem(matrix, y0, n_fast)
    raise ValueError(f"unknown problem {name!r}")


def solve(problem: Problem, scheme, t_end: float, dt: Optional[float] = None,
          observer=None) -> np.ndarray:
    """Integrate ``problem`` from 0 to ``t_end``.

    ``scheme`` is a StepperSpec (stepping with ``dt``) or an MrabConfig (which
    carries its own macro step).  ``observer(t, y)`` sees every accepted step.
    """
    if isinstance(scheme, MrabConfig):
        obs = None
        if observer:
            observer(0.0, problem.y0.copy())

            def obs(st):
                observer(st.t, np.concatenate([st.f, st.s]))
        sys = problem.two_rate()
        nf = sys.dim_f
        f, s, _, _ = mrab_integrate(sys, 0.0, problem.y0[:nf], problem.y0[nf:], t_end,
                                    scheme, obs)
        return np.concatenate([f, s])
    if dt is None:
        raise ValueError("dt is required for single-rate schemes")
    y, _ = integrate_to(problem.system(), problem.y0, 0.0, t_end, dt, scheme, observer)
    return y


def max_error(problem: Problem, scheme, t_end: float, dt: Optional[float] = None) -> float:
    return float(np.abs(solve(problem, scheme, t_end, dt) - problem.exact(t_end)).max())
