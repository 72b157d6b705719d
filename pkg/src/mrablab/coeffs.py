"""Adams-Bashforth integration weights and Lagrange right-hand-side extrapolants.

Given right-hand-side samples ``F(t_1) ... F(t_m)`` at past times, an AB step
over ``(a, b)`` uses weights ``alpha`` such that

    sum_k alpha_k F(t_k)  ~=  int_a^b F(tau) dtau,

exact whenever ``F`` is a polynomial of degree < ``order``.  With ``m ==
order`` the weights are unique (the classical AB tableau on uniform nodes).
With ``m > order`` the moment system is underdetermined and the weights of
minimum 2-norm are returned ("extended history", e.g. AB34 / AB45).

Weights are ordered oldest node first throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from .errors import DegenerateNodesError, InsufficientHistoryError

# smallest node gap, relative to the history span, treated as distinct
_GAP_TOL = 1e-12


def as_time_nodes(nodes) -> np.ndarray:
    """Validate a node list: finite, nonempty, strictly increasing."""
    t = np.asarray(nodes, dtype=np.float64).ravel()
    if t.size == 0:
        raise ValueError("at least one time node is required")
    if not np.all(np.isfinite(t)):
        raise ValueError("time nodes must be finite")
    d = np.diff(t)
    if np.any(d == 0):
        raise DegenerateNodesError()
    if np.any(d < 0):
        raise ValueError("time nodes must be strictly increasing")
    return t


def moments(order: int, a: float, b: float) -> np.ndarray:
    """Integrals of the monomials ``tau**(i-1)`` over ``(a, b)``, i = 1..order."""
    i = np.arange(1, order + 1, dtype=np.float64)
    return (b**i - a**i) / i


@dataclass(frozen=True)
class CoefficientSet:
    """AB weights for one history configuration.

    ``alpha[k]`` multiplies the right-hand side sampled at ``nodes[k]``.
    """

    order: int
    nodes: np.ndarray
    interval: tuple[float, float]
    alpha: np.ndarray

    @property
    def history_len(self) -> int:
        return self.nodes.size

    def moment_residual(self) -> float:
        """Largest relative violation of the moment conditions.

        Each condition is scaled by the larger of its exact moment and the sum
        of absolute terms on the left-hand side.
        """
        a, b = self.interval
        V = np.vander(self.nodes, self.order, increasing=True)
        terms = V * self.alpha[:, None]
        rhs = moments(self.order, a, b)
        scale = np.maximum(np.abs(rhs), np.abs(terms).sum(axis=0))
        scale[scale == 0] = 1.0
        return float(np.max(np.abs(terms.sum(axis=0) - rhs) / scale))


def _weights(t: np.ndarray, order: int, intervals: np.ndarray) -> np.ndarray:
    """Weights for validated nodes ``t`` and intervals of shape ``(K, 2)``.

    Returns shape ``(K, m)``.  The nodes are mapped affinely onto ``[-1, 0]``
    first: exactness on polynomials is basis independent and the minimum-norm
    solution transforms by the same scale factor, so the result is unchanged
    in exact arithmetic and far better conditioned than in raw time units.
    """
    m = t.size
    scale = t[-1] - t[0] if m > 1 else 1.0
    tau = (t - t[-1]) / scale
    if m > 1 and np.min(np.diff(tau)) < _GAP_TOL:
        raise DegenerateNodesError()
    i = np.arange(1, order + 1)
    ab = (intervals - t[-1]) / scale
    mu = (ab[:, 1:2] ** i - ab[:, 0:1] ** i) / i  # (K, n)
    V = tau[:, None] ** (i - 1)  # (m, n)
    try:
        if m == order:
            alpha = np.linalg.solve(V.T, mu.T).T
        else:
            # minimum-norm solution of V^T alpha = mu: alpha = V (V^T V)^-1 mu
            alpha = (V @ np.linalg.solve(V.T @ V, mu.T)).T
    except np.linalg.LinAlgError:
        raise DegenerateNodesError() from None
    return scale * alpha


def _check_order(order, m):
    order = int(order)
    if order < 1:
        raise ValueError("order must be >= 1")
    if m < order:
        raise InsufficientHistoryError()
    return order


def _check_intervals(intervals) -> np.ndarray:
    iv = np.asarray(intervals, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(iv)) or np.any(iv[:, 1] <= iv[:, 0]):
        raise ValueError("interval (a, b) needs b > a")
    return iv


def ab_weights(nodes, order: int, interval: tuple[float, float]) -> CoefficientSet:
    """AB weights for ``order`` on the given history ``nodes`` over ``interval``.

    Raises
    ------
    InsufficientHistoryError
        fewer nodes than ``order``.
    DegenerateNodesError
        duplicate (or numerically coincident) nodes.
    """
    t = as_time_nodes(nodes)
    order = _check_order(order, t.size)
    iv = _check_intervals(interval)
    alpha = _weights(t, order, iv)[0]
    a, b = float(iv[0, 0]), float(iv[0, 1])
    return CoefficientSet(order=order, nodes=t, interval=(a, b), alpha=alpha)


def ab_weights_batch(nodes, order: int, intervals) -> np.ndarray:
    """Weights for several intervals on one history; shape ``(len(intervals), m)``.

    Row ``k`` equals ``ab_weights(nodes, order, intervals[k]).alpha``.
    """
    t = as_time_nodes(nodes)
    order = _check_order(order, t.size)
    return _weights(t, order, _check_intervals(intervals))


@dataclass(frozen=True)
class Extrapolant:
    """Lagrange interpolant through (node, value) pairs, evaluated anywhere.

    ``values`` has shape ``(m, d)``: one right-hand-side vector per node.
    """

    nodes: np.ndarray
    values: np.ndarray

    def basis(self, t) -> np.ndarray:
        """Lagrange basis polynomials at ``t``; shape ``(len(t), m)``."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        x = self.nodes
        m = x.size
        out = np.ones((t.size, m))
        for k in range(m):
            for j in range(m):
                if j != k:
                    out[:, k] *= (t - x[j]) / (x[k] - x[j])
        return out

    def __call__(self, t) -> np.ndarray:
        scalar = np.ndim(t) == 0
        res = self.basis(t) @ self.values
        return res[0] if scalar else res


def extrapolant_from_history(nodes, values) -> Extrapolant:
    t = as_time_nodes(nodes)
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != t.size:
        raise ValueError(f"{t.size} nodes but {v.shape[0]} values")
    return Extrapolant(nodes=t, values=v)


def integrate_extrapolant(e: Extrapolant, interval: tuple[float, float]) -> np.ndarray:
    """Exact integral of the interpolating polynomial over ``interval``.

    Uses Gauss-Legendre quadrature with enough points to be exact for degree
    ``m - 1``; independent of the Vandermonde route in :func:`ab_weights`.
    """
    a, b = float(interval[0]), float(interval[1])
    npts = max(1, (e.nodes.size + 1) // 2)
    x, w = np.polynomial.legendre.leggauss(npts)
    half = 0.5 * (b - a)
    pts = 0.5 * (a + b) + half * x
    return half * (w @ (e.basis(pts) @ e.values))
