"""Largest stable steps on the 1D overset testbed and the resulting ratios.

RK4 and single-rate AB run the coupled system at one step; MRAB takes macro
steps of SR fine steps.  Reports r_RK4, r_SRAB and efficiency per SR.
"""

import argparse

import numpy as np

from mrablab.multirate import MrabConfig
from mrablab.pde1d import build_overset_pair, overset_single_rate, overset_two_rate
from mrablab.stability import (
    ab_advance,
    max_stable_dt,
    mrab_advance,
    rk_advance,
    stability_ratios,
)
from mrablab.steppers import StepperSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=41, help="background points")
    ap.add_argument("--refine", type=int, default=4)
    ap.add_argument("--order", type=int, default=3)
    ap.add_argument("--ext", action="store_true", help="extended history (m = n + 1)")
    ap.add_argument("--srs", default="1,2,3,4,5,6")
    ap.add_argument("--resolution", type=float, default=1e-5)
    args = ap.parse_args()

    n = args.order
    m = n + 1 if args.ext else n
    pair = build_overset_pair(args.n, 0.3, 0.6, refine=args.refine)
    single, two = overset_single_rate(pair), overset_two_rate(pair)
    d = single.dim
    spec = StepperSpec.ab(n, m)

    def search(problem, hi=0.2):
        return max_stable_dt(problem, (1e-4, hi), args.resolution).dt_max

    dt_rk4 = search(lambda dt: (rk_advance(single, "rk4", dt), np.zeros(d)))
    dt_srab = search(lambda dt: (ab_advance(single, spec, dt), np.zeros((m + 1) * d)))
    print(f"RK4 dt {dt_rk4:.5f}, SRAB({n},{m}) dt {dt_srab:.5f}")
    print(f"{'SR':>3}{'dt':>10}{'r_RK4':>8}{'r_SRAB':>8}{'eff %':>8}")
    for sr in (int(s) for s in args.srs.split(",")):
        dt = search(lambda H: (mrab_advance(two, MrabConfig(n, sr, H, m)),
                               np.zeros((m + 1) * d)), hi=0.2 * sr)
        r_rk4, r_srab, eff = stability_ratios(dt, dt_rk4, dt_srab, sr)
        print(f"{sr:>3}{dt:>10.5f}{r_rk4:>8.3f}{r_srab:>8.2f}{100 * eff:>8.1f}")


if __name__ == "__main__":
    main()
