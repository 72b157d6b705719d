"""Boundary-locus stability regions for the single-rate schemes, one CSV each."""

import argparse
from pathlib import Path

from mrablab.cli import to_csv, write_atomic
from mrablab.stability import boundary_locus, imag_axis_intercept, real_axis_intercept
from mrablab.steppers import StepperSpec

SCHEMES = {
    "fe": StepperSpec.ab(1),
    "rk4": StepperSpec.rk4(),
    "ab3": StepperSpec.ab(3),
    "ab34": StepperSpec.ab(3, 4),
    "ab4": StepperSpec.ab(4),
    "ab45": StepperSpec.ab(4, 5),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/stability")
    ap.add_argument("--criterion", default="spectral", choices=["march", "spectral"])
    ap.add_argument("--n-theta", type=int, default=500)
    ap.add_argument("--normalize", action="store_true")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    print(f"{'scheme':<6}{'real':>10}{'imag':>10}")
    for name, spec in SCHEMES.items():
        reg = boundary_locus(spec, args.normalize, args.criterion, args.n_theta)
        write_atomic(str(out / f"{name}.csv"), to_csv(["theta", "r", "re", "im"], reg.rows()))
        re = real_axis_intercept(spec, args.criterion, args.normalize)
        im = imag_axis_intercept(spec, args.criterion, args.normalize) if name != "fe" else float("nan")
        print(f"{name:<6}{re:>10.4f}{im:>10.4f}")


if __name__ == "__main__":
    main()
