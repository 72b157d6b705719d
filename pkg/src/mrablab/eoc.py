"""Estimated order of convergence from (step, error) pairs."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

ROUNDOFF = 1e-13


class EocWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EocResult:
    steps: np.ndarray
    errors: np.ndarray
    order: float

    def rows(self):
        """``(step, error, local order)``; the first local order is NaN."""
        local = np.full(self.steps.size, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            local[1:] = np.diff(np.log(self.errors)) / np.diff(np.log(self.steps))
        return [(float(h), float(e), float(p)) for h, e, p in zip(self.steps, self.errors, local)]


def estimate_order(steps: Sequence[float], errors: Sequence[float]) -> EocResult:
    """Least-squares slope of ``log error`` against ``log step``.

    Errors at round-off give NaN (with a warning); errors that do not shrink
    with the step only warn.
    """
    h = np.asarray(steps, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if h.shape != e.shape or h.ndim != 1:
        raise ValueError("steps and errors must be 1D and the same length")
    if h.size < 3:
        raise ValueError("need at least 3 points")
    if not (np.all(h > 0) and np.all(np.isfinite(h))):
        raise ValueError("steps must be positive")
    if not np.all(np.isfinite(e)) or np.any(e < 0):
        raise ValueError("errors must be finite and non-negative")
    order = np.argsort(h)[::-1]
    h, e = h[order], e[order]
    if np.any(e <= ROUNDOFF):
        warnings.warn("errors at round-off level; order undefined", EocWarning, stacklevel=2)
        return EocResult(h, e, float("nan"))
    if np.any(np.diff(e) >= 0):
        warnings.warn("errors do not decrease monotonically", EocWarning, stacklevel=2)
    slope = np.polyfit(np.log(h), np.log(e), 1)[0]
    return EocResult(h, e, float(slope))


def convergence_study(run: Callable[[float], float], steps: Sequence[float]) -> EocResult:
    """Evaluate ``run(step) -> error`` at each step and fit the order."""
    return estimate_order(steps, [run(float(s)) for s in steps])
