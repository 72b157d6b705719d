"""Command-line front end.

Every subcommand takes its parameters from flags, from a flat JSON object
given with ``--config``, or both (flags win).  Tables go out as CSV and
records as JSON, with floats at 17 significant digits; ``--out`` files are
written atomically.  Exit status: 0 ok, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .coeffs import ab_weights
from .eoc import EocWarning, estimate_order
from .errors import NumericalError
from .multirate import MrabConfig
from .pde1d import (
    Grid1D,
    SbpOperator,
    build_overset_pair,
    overset_initial,
    overset_single_rate,
    overset_two_rate,
)
from .perfmodel import PerfCase, format_table
from .problems import get_problem, max_error, solve
from .stability import (
    ab_advance,
    boundary_locus,
    build_step_matrix,
    max_stable_dt,
    mrab_advance,
    rk_advance,
    spectral_radius,
)
from .steppers import OdeSystem, StepperSpec, integrate_to

SCHEMES = ("rk3", "rk4", "ab", "ab-ext", "mrab", "mrab-ext")
FLOAT_FMT = ".17g"


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- parameters


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes"):
        return True
    if str(v).lower() in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _json_value(v):
    return json.loads(v) if isinstance(v, str) else v


@dataclass(frozen=True)
class Param:
    name: str
    kind: Callable[[Any], Any]
    default: Any = None
    help: str = ""
    flag: bool = True  # False: config file only
    positive: bool = False


COMMON = {
    "scheme": Param("scheme", str, "rk4", f"one of {', '.join(SCHEMES)}"),
    "order": Param("order", int, 3, "AB order (3 or 4)", positive=True),
    "sr": Param("sr", int, 1, "step ratio", positive=True),
    "dt": Param("dt", float, None, "timestep (macro step for MRAB)", positive=True),
    "cfl": Param("cfl", float, None, "CFL number, alternative to dt", positive=True),
    "steps": Param("steps", int, None, "number of steps, alternative to dt", positive=True),
    "t_end": Param("t_end", float, 1.0, "final time", positive=True),
    "N": Param("N", int, 61, "grid points", positive=True),
    "domain": Param("domain", _floats, [0.0, 1.0], "a,b"),
    "wave_speed": Param("wave_speed", float, 1.0, "advection speed"),
}


def _pick(*names, **overrides) -> dict[str, Param]:
    out = {n: COMMON[n] for n in names}
    for k, v in overrides.items():
        out[k] = v
    return out


@dataclass(frozen=True)
class Command:
    name: str
    params: dict[str, Param]
    run: Callable[[dict], "Output"]
    help: str


@dataclass
class Output:
    text: str
    summary: str
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    command: str
    parameters: dict
    output_path: Optional[str] = None


def _validate(cmd: Command, params: dict) -> dict:
    unknown = set(params) - set(cmd.params)
    if unknown:
        raise UsageError(f"unknown parameter(s) for {cmd.name}: {', '.join(sorted(unknown))}")
    out = {}
    for name, p in cmd.params.items():
        v = params.get(name, p.default)
        if v is not None:
            try:
                v = p.kind(v)
            except (TypeError, ValueError) as e:
                raise UsageError(f"--{name}: {e}") from None
            if p.positive and not v > 0:
                raise UsageError(f"--{name} must be positive")
        out[name] = v
    if "scheme" in out and out["scheme"] not in SCHEMES:
        raise UsageError(f"--scheme must be one of {', '.join(SCHEMES)}")
    return out


# ---------------------------------------------------------------- formatting


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), FLOAT_FMT)
    return str(x)


def to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def to_json(obj) -> str:
    # json writes floats with repr, which round-trips exactly
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def read_csv(path_or_text: str) -> dict[str, np.ndarray]:
    """Parse a CSV written by this tool into columns (float where possible)."""
    text = path_or_text
    if "\n" not in text and os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    cols = {}
    for j, name in enumerate(rows[0]):
        vals = [r[j] for r in rows[1:]]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals)
    return cols


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- schemes


def make_scheme(p: dict, dt: Optional[float] = None):
    """StepperSpec for single-rate schemes, MrabConfig (macro step ``dt``) for MRAB."""
    scheme, order = p["scheme"], p.get("order", 3)
    if scheme == "rk3":
        return StepperSpec.rk3()
    if scheme == "rk4":
        return StepperSpec.rk4()
    ext = scheme.endswith("-ext")
    m = order + 1 if ext else order
    if scheme.startswith("ab"):
        return StepperSpec.ab(order, m)
    if dt is None:
        raise UsageError("MRAB needs --dt")
    return MrabConfig(order, p.get("sr", 1), dt, m)


def _step_size(p: dict, t_end: float, wave_dx: Optional[float] = None) -> float:
    if p.get("dt") is not None:
        return p["dt"]
    if p.get("steps") is not None:
        return t_end / p["steps"]
    if p.get("cfl") is not None and wave_dx is not None:
        return p["cfl"] * wave_dx
    raise UsageError("give --dt" + (", --steps or --cfl" if wave_dx is not None else " or --steps"))


# ---------------------------------------------------------------- commands


def cmd_coeffs(p):
    for k in ("nodes", "order", "interval"):
        if p[k] is None:
            raise UsageError(f"--{k} is required")
    if len(p["interval"]) != 2:
        raise UsageError("--interval needs two values a,b")
    cs = ab_weights(p["nodes"], p["order"], tuple(p["interval"]))
    rows = list(zip(cs.nodes, cs.alpha))
    return Output(to_csv(["node", "alpha"], rows),
                  f"coeffs: {len(rows)} weights, moment residual {cs.moment_residual():.3g}")


def cmd_integrate(p):
    prob = get_problem(p["problem"], p["matrix"], p["y0"], p["n_fast"])
    dt = _step_size(p, p["t_end"])
    scheme = make_scheme(p, dt)
    rows = []
    y = solve(prob, scheme, p["t_end"], dt, observer=lambda t, y: rows.append((t, *y)))
    header = ["t"] + [f"y{i + 1}" for i in range(prob.dim)]
    err = float(np.abs(y - prob.exact(p["t_end"])).max())
    return Output(to_csv(header, rows),
                  f"integrate: {prob.name} to t={fmt(p['t_end'])}, max error {err:.6g}",
                  {"error": err})


def _ic(name: str, a: float, length: float):
    if name == "sine":
        return lambda x: np.sin(2 * np.pi * (x - a) / length)
    if name == "gauss":
        # periodic distance from the domain centre
        return lambda x: np.exp(-200 * (((x - a) / length) % 1.0 - 0.5) ** 2)
    raise UsageError(f"unknown initial condition {name!r}")


def cmd_advect(p):
    a, b = p["domain"]
    c = p["wave_speed"]
    grid = Grid1D.periodic(p["N"], b - a, a)
    op = SbpOperator()
    rhs = lambda t, u: -c * op.apply(u, True) / grid.dx
    dt = _step_size(p, p["t_end"], grid.dx / abs(c) if c else None)
    scheme = make_scheme(p, dt)
    if isinstance(scheme, MrabConfig):
        raise UsageError("advect is single-rate; use advect-overset for MRAB")
    u0 = _ic(p["ic"], a, b - a)
    u, _ = integrate_to(OdeSystem(grid.n, rhs), u0(grid.x), 0.0, p["t_end"], dt, scheme)
    exact = u0(a + (grid.x - a - c * p["t_end"]) % (b - a))
    err = float(np.abs(u - exact).max())
    return Output(to_csv(["x", "u"], zip(grid.x, u)),
                  f"advect: N={grid.n} dt={fmt(dt)} max error {err:.6g}", {"error": err})


def cmd_advect_overset(p):
    a, b = p["domain"]
    pa, pb = p["patch"]
    sr = p["sr"]
    refine = p["refine"] or (sr if p["scheme"].startswith("mrab") else 4)
    c = p["wave_speed"]
    u0 = _ic("sine", a, b - a)
    x_in = a if c >= 0 else b
    pair = build_overset_pair(p["N"], pa, pb, refine=refine, domain=(a, b), wave_speed=c,
                              inflow=lambda t: float(u0(np.array(x_in - c * t))))
    h_fine = pair.grid_fast.dx / abs(c) if c else None
    dt = _step_size(p, p["t_end"], h_fine)
    multirate = p["scheme"].startswith("mrab")
    if multirate and p.get("dt") is None and p.get("steps") is None:
        dt *= sr  # cfl fixes the micro step
    scheme = make_scheme(p, dt)
    f0, s0 = overset_initial(pair, u0)
    T = p["t_end"]
    if multirate:
        from .multirate import mrab_integrate

        f, s, _, _ = mrab_integrate(overset_two_rate(pair), 0.0, f0, s0, T, scheme)
    else:
        y, _ = integrate_to(overset_single_rate(pair), np.r_[f0, s0], 0.0, T, dt, scheme)
        f, s = y[: pair.n_fast], y[pair.n_fast :]
    xs, xf = pair.slow_x, pair.grid_fast.x
    exact = lambda x: u0(x - c * T)
    err = float(max(np.abs(f - exact(xf)).max(), np.abs(s - exact(xs)).max()))
    rows = [(x, u, "slow") for x, u in zip(xs, s)] + [(x, u, "fast") for x, u in zip(xf, f)]
    rows.sort(key=lambda r: (r[0], r[2]))
    return Output(to_csv(["x", "u", "grid"], rows),
                  f"advect-overset: {pair.n_slow}+{pair.n_fast} points, max error {err:.6g}",
                  {"error": err})


def cmd_stability_region(p):
    spec = make_scheme(p, 1.0)
    if isinstance(spec, MrabConfig) and spec.step_ratio != 1:
        raise UsageError("stability-region needs a single-rate scheme (SR=1)")
    reg = boundary_locus(spec, normalize=p["normalize"], criterion=p["criterion"],
                         n_theta=p["n_theta"], offset=p["offset"])
    return Output(to_csv(["theta", "r", "re", "im"], reg.rows()),
                  f"stability-region: {reg.thetas.size} rays, criterion {reg.criterion}")


def _linear_problem(p):
    """``problem(dt) -> (advance, phi0)`` for max-dt and step-matrix."""
    target = p["problem"] or ("overset" if p["scheme"].startswith("mrab") else "periodic")
    if target == "periodic":
        n = p["N"]
        dx = p["dx"] or 1.0 / (n - 1)
        op = SbpOperator()
        c = p["wave_speed"]
        sys = OdeSystem(n, lambda t, u: -c * op.apply(u, True) / dx)
    elif target == "overset":
        pair = build_overset_pair(p["N"], *p["patch"], refine=p["refine"] or p["sr"],
                                  wave_speed=p["wave_speed"])
        sys = overset_single_rate(pair)
        two = overset_two_rate(pair)
    else:
        raise UsageError(f"unknown problem {target!r}")

    def problem(dt):
        scheme = make_scheme(p, dt)
        if isinstance(scheme, MrabConfig):
            if target != "overset":
                raise UsageError("MRAB needs the overset problem")
            m = scheme.history_len
            return mrab_advance(two, scheme), np.zeros((m + 1) * (two.dim_f + two.dim_s))
        if scheme.is_multistep:
            return ab_advance(sys, scheme, dt), np.zeros(sys.dim * (scheme.history_len + 1))
        return rk_advance(sys, scheme.kind, dt), np.zeros(sys.dim)

    return problem


def cmd_max_dt(p):
    res = max_stable_dt(_linear_problem(p), tuple(p["bracket"]), p["resolution"],
                        p["epsilon"], workers=p["workers"])
    rec = {"dt_max": res.dt_max, "iterations": res.iterations,
           "rho_at_dt_max": res.rho_at_dt_max}
    return Output(to_json(rec), f"max-dt: dt_max={fmt(res.dt_max)} after {res.iterations} bisections")


def cmd_step_matrix(p):
    if p["dt"] is None:
        raise UsageError("--dt is required")
    adv, phi0 = _linear_problem(p)(p["dt"])
    sm = build_step_matrix(adv, phi0, p["epsilon"], p["workers"], dt=p["dt"])
    rho = spectral_radius(sm.G)
    rec = {"dim": sm.dim, "dt": p["dt"], "epsilon": sm.epsilon, "spectral_radius": rho}
    if p["matrix"]:
        rec["G"] = sm.G
    return Output(to_json(rec), f"step-matrix: dim {sm.dim}, rho={fmt(rho)}")


def cmd_perf_model(p):
    if p["case"] is None:
        raise UsageError("--case is required")
    with open(p["case"]) as fh:
        case = PerfCase.from_dict(json.load(fh))
    table = case.table()
    rk4 = table[0].n_rhs_rk4
    rows = [("RK4", 1, 1.0, rk4, 0.0, 1.0)]
    rows += [("SRAB" if r.sr == 1 else "MRAB", r.sr, r.r_rk4, r.n_rhs_ab, r.pct_reduction,
              r.speedup) for r in table]
    text = to_csv(["integrator", "sr", "r_rk4", "n_rhs", "pct_reduction", "speedup"], rows)
    return Output(text, f"perf-model: {case.name or p['case']} RK4 count {round(rk4):,d}",
                  {"table": format_table(table)})


def cmd_eoc(p):
    prob = get_problem(p["problem"], p["matrix"], p["y0"], p["n_fast"])
    dts = p["dts"]
    if len(dts) < 3:
        raise UsageError("--dts needs at least 3 values")
    errs = []
    for dt in dts:
        scheme = make_scheme(p, dt)
        errs.append(max_error(prob, scheme, p["t_end"], dt))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EocWarning)
        res = estimate_order(dts, errs)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    text = to_csv(["dt", "error", "local_order"], res.rows())
    return Output(text, f"eoc: {prob.name} {p['scheme']} order {fmt(res.order)}",
                  {"order": res.order})


PROBLEM_PARAMS = {
    "problem": Param("problem", str, "coupled", "decay, coupled, poly or linear"),
    "matrix": Param("matrix", _json_value, None, "JSON matrix for problem=linear"),
    "y0": Param("y0", _floats, None, "initial state"),
    "n_fast": Param("n_fast", int, None, "number of fast components", positive=True),
}
LINEAR_PARAMS = {
    "problem": Param("problem", str, None, "periodic or overset"),
    "dx": Param("dx", float, None, "grid spacing (periodic problem)", positive=True),
    "patch": Param("patch", _floats, [0.3, 0.6], "overset patch a,b"),
    "refine": Param("refine", int, None, "patch refinement (default SR)", positive=True),
    "epsilon": Param("epsilon", float, 1e-7, "perturbation size", positive=True),
    "workers": Param("workers", int, None, "threads for matrix columns", positive=True),
}

COMMANDS = {
    c.name: c
    for c in [
        Command("coeffs", {
            "nodes": Param("nodes", _floats, None, "comma-separated history times"),
            "order": Param("order", int, None, "order n", positive=True),
            "interval": Param("interval", _floats, None, "a,b"),
        }, cmd_coeffs, "AB weights for arbitrary nodes"),
        Command("integrate", {**_pick("scheme", "order", "sr", "dt", "steps", "t_end"),
                              **PROBLEM_PARAMS}, cmd_integrate, "integrate an ODE test problem"),
        Command("advect", {**_pick("N", "domain", "wave_speed", "scheme", "order", "dt", "cfl",
                                   "t_end"),
                           "ic": Param("ic", str, "sine", "sine or gauss")},
                cmd_advect, "periodic 1D advection"),
        Command("advect-overset", {
            **_pick("N", "domain", "wave_speed", "scheme", "order", "sr", "dt", "cfl", "steps",
                    "t_end", N=Param("N", int, 41, "background points", positive=True)),
            "patch": Param("patch", _floats, [0.3, 0.6], "patch a,b"),
            "refine": Param("refine", int, None, "patch refinement (default SR)", positive=True),
        }, cmd_advect_overset, "1D overset advection"),
        Command("stability-region", {
            **_pick("scheme", "order"),
            "criterion": Param("criterion", str, "march", "march or spectral"),
            "normalize": Param("normalize", _bool, False, "divide by RHS evals per step"),
            "n_theta": Param("n_theta", int, 500, "number of rays", positive=True),
            "offset": Param("offset", float, 0.3, "ray origin on the real axis"),
        }, cmd_stability_region, "boundary-locus stability region"),
        Command("max-dt", {
            **_pick("scheme", "order", "sr", "N", "wave_speed"), **LINEAR_PARAMS,
            "bracket": Param("bracket", _floats, [0.01, 0.1], "lo,hi"),
            "resolution": Param("resolution", float, 1e-4, "bisection width", positive=True),
        }, cmd_max_dt, "largest stable dt by step-matrix bisection"),
        Command("step-matrix", {
            **_pick("scheme", "order", "sr", "dt", "N", "wave_speed"), **LINEAR_PARAMS,
            "matrix": Param("matrix", _bool, False, "include G in the output"),
        }, cmd_step_matrix, "finite-difference step matrix and spectral radius"),
        Command("perf-model", {"case": Param("case", str, None, "JSON case file")},
                cmd_perf_model, "RHS-count performance model"),
        Command("eoc", {
            **_pick("scheme", "order", "sr", "t_end"), **PROBLEM_PARAMS,
            "dts": Param("dts", _floats, [0.005, 0.001, 0.0005], "comma-separated steps"),
        }, cmd_eoc, "order of convergence study"),
    ]
}


# ---------------------------------------------------------------- entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mrablab", description="Multirate Adams-Bashforth toolkit")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS.values():
        sp = sub.add_parser(cmd.name, help=cmd.help)
        sp.add_argument("--config", help="JSON file of parameters")
        sp.add_argument("--out", help="output file (default stdout)")
        for p in cmd.params.values():
            if p.flag:
                flag = "--" + p.name.replace("_", "-")
                if p.name == "N":
                    flag = "--n"
                sp.add_argument(flag, dest=p.name, default=argparse.SUPPRESS, help=p.help)
    return ap


def parse(argv: Optional[Sequence[str]] = None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    config_path = ns.pop("config", None)
    out = ns.pop("out", None)
    params = {}
    if config_path:
        try:
            with open(config_path) as fh:
                params = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"--config: {e}") from None
        if not isinstance(params, dict):
            raise UsageError("--config must hold a JSON object")
        out = out or params.pop("out", None)
    params.update(ns)
    return RunConfig(command, params, out)


def run(config: RunConfig) -> Output:
    cmd = COMMANDS[config.command]
    result = cmd.run(_validate(cmd, config.parameters))
    if config.output_path:
        write_atomic(config.output_path, result.text)
    return result


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse(argv)
        result = run(config)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    if config.output_path:
        if "table" in result.extra:
            print(result.extra["table"])
        print(result.summary)
    else:
        sys.stdout.write(result.text)
        if "table" in result.extra:
            print(result.extra["table"], file=sys.stderr)
        print(result.summary, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
