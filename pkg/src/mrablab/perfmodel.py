"""RHS-count performance model for multirate AB versus RK4.

RK4 costs four evaluations on every point per step; MRAB costs ``SR`` fast and
one slow evaluation per macro step, whose length is ``r_rk4`` RK4 steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


@dataclass(frozen=True)
class PerfModelInput:
    n_f: int
    n_s: int
    sr: int
    r_rk4: float
    t: float = 1.0
    dt_rk4: float = 1.0

    def __post_init__(self):
        for name in ("n_f", "n_s", "sr"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        for name in ("r_rk4", "t", "dt_rk4"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True)
class PerfModelResult:
    sr: int
    r_rk4: float
    n_rhs_rk4: float
    n_rhs_ab: float

    @property
    def speedup(self) -> float:
        return self.n_rhs_rk4 / self.n_rhs_ab

    @property
    def pct_reduction(self) -> float:
        return 100.0 * (1.0 - self.n_rhs_ab / self.n_rhs_rk4)

    def rounded(self) -> dict:
        """Integer counts and two-decimal metrics, as tables print them."""
        return {
            "sr": self.sr,
            "r_rk4": self.r_rk4,
            "n_rhs_rk4": int(round(self.n_rhs_rk4)),
            "n_rhs_ab": int(round(self.n_rhs_ab)),
            "pct_reduction": round(self.pct_reduction, 2),
            "speedup": round(self.speedup, 2),
        }


def rhs_counts(inp: PerfModelInput) -> PerfModelResult:
    steps = inp.t / inp.dt_rk4
    n_rk4 = 4 * steps * (inp.n_f + inp.n_s)
    n_ab = steps / inp.r_rk4 * (inp.sr * inp.n_f + inp.n_s)
    return PerfModelResult(inp.sr, inp.r_rk4, n_rk4, n_ab)


def break_even_r(n_f: int, n_s: int, sr: int) -> float:
    """``r_rk4`` at which MRAB and RK4 cost the same."""
    return (sr * n_f + n_s) / (4 * (n_f + n_s))


def speedup_table(inputs: Sequence[PerfModelInput]) -> list[PerfModelResult]:
    if not inputs:
        raise ValueError("no rows")
    shared = {(i.n_f, i.n_s, i.t, i.dt_rk4) for i in inputs}
    if len(shared) != 1:
        raise ValueError("rows must share n_f, n_s, t and dt_rk4")
    return [rhs_counts(i) for i in inputs]


@dataclass(frozen=True)
class PerfCase:
    """Case file contents: grids tagged fast/slow and ``r_rk4`` per step ratio."""

    n_f: int
    n_s: int
    sr_list: tuple[int, ...]
    r_rk4: Mapping[int, float]
    name: str = ""

    @classmethod
    def from_dict(cls, d: Mapping) -> "PerfCase":
        unknown = set(d) - {"name", "grids", "sr_list", "r_rk4_map"}
        if unknown:
            raise ValueError(f"unknown case keys: {sorted(unknown)}")
        n_f = n_s = 0
        for g in d["grids"]:
            rate = g["rate"]
            if rate == "fast":
                n_f += int(g["points"])
            elif rate == "slow":
                n_s += int(g["points"])
            else:
                raise ValueError(f"grid rate must be 'fast' or 'slow', got {rate!r}")
        r_map = {int(k): float(v) for k, v in d["r_rk4_map"].items()}
        sr_list = tuple(int(s) for s in d["sr_list"])
        missing = [s for s in sr_list if s not in r_map]
        if missing:
            raise ValueError(f"r_rk4_map has no entry for SR {missing}")
        return cls(n_f, n_s, sr_list, r_map, str(d.get("name", "")))

    def inputs(self) -> list[PerfModelInput]:
        return [PerfModelInput(self.n_f, self.n_s, s, self.r_rk4[s]) for s in self.sr_list]

    def table(self) -> list[PerfModelResult]:
        return speedup_table(self.inputs())


def format_table(rows: Iterable[PerfModelResult]) -> str:
    """Aligned text: an RK4 row followed by one row per step ratio."""
    rows = list(rows)
    lines = [f"{'integrator':<12}{'rhs evals':>16}{'% red.':>10}{'SU':>8}"]
    if rows:
        lines.append(f"{'RK4':<12}{round(rows[0].n_rhs_rk4):>16,d}{0.0:>10.2f}{1.0:>8.2f}")
    for r in rows:
        label = "SRAB" if r.sr == 1 else f"MRAB SR={r.sr}"
        lines.append(f"{label:<12}{round(r.n_rhs_ab):>16,d}{r.pct_reduction:>10.2f}{r.speedup:>8.2f}")
    return "\n".join(lines)
