"""EOC tables for MRAB on the coupled ODE benchmark and the 1D overset problem."""

import argparse

import numpy as np

from mrablab.eoc import estimate_order
from mrablab.multirate import MrabConfig, mrab_integrate
from mrablab.pde1d import build_overset_pair, overset_initial, overset_two_rate
from mrablab.problems import get_problem, max_error


def wave(x):
    return np.sin(2 * np.pi * x)


def overset_error(sr, m, ns, T=0.5):
    pair = build_overset_pair(ns, 0.3, 0.6, refine=sr, inflow=lambda t: wave(-t))
    f0, s0 = overset_initial(pair, wave)
    K = int(np.ceil(T / (0.1 * pair.grid_slow.dx * sr / 2)))
    f, s, _, _ = mrab_integrate(overset_two_rate(pair), 0.0, f0, s0, T, MrabConfig(3, sr, T / K, m))
    err = max(np.abs(f - wave(pair.grid_fast.x - T)).max(), np.abs(s - wave(pair.slow_x - T)).max())
    return pair.grid_slow.dx, err


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--srs", default="1,2,3,4,5,6")
    ap.add_argument("--steps", default="0.005,0.001,0.0005")
    ap.add_argument("--skip-pde", action="store_true")
    args = ap.parse_args()
    srs = [int(s) for s in args.srs.split(",")]
    Hs = [float(h) for h in args.steps.split(",")]

    prob = get_problem("coupled")
    print("coupled ODE, max error at t=2.5")
    print(f"{'SR':>3}{'m':>3}" + "".join(f"{h:>12g}" for h in Hs) + f"{'EOC':>8}")
    for m in (3, 4):
        for sr in srs:
            errs = [max_error(prob, MrabConfig(3, sr, H, m), 2.5) for H in Hs]
            order = estimate_order(Hs, errs).order
            print(f"{sr:>3}{m:>3}" + "".join(f"{e:>12.3e}" for e in errs) + f"{order:>8.3f}")

    if args.skip_pde:
        return
    print("\n1D overset advection, patch refined SR times, max error at t=0.5")
    print(f"{'SR':>3}{'m':>3}" + "".join(f"{n:>12d}" for n in (41, 81, 161)) + f"{'EOC':>8}")
    for m in (3, 4):
        for sr in (2, 4):
            dx, errs = zip(*(overset_error(sr, m, ns) for ns in (41, 81, 161)))
            order = estimate_order(dx, errs).order
            print(f"{sr:>3}{m:>3}" + "".join(f"{e:>12.3e}" for e in errs) + f"{order:>8.3f}")


if __name__ == "__main__":
    main()
