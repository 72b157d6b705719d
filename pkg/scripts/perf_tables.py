"""Performance-model tables for every case file."""

import argparse
import json
from pathlib import Path

from mrablab.perfmodel import PerfCase, format_table

CASES = Path(__file__).resolve().parents[1] / "cases"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("cases", nargs="*", type=Path, default=sorted(CASES.glob("*.json")))
    args = ap.parse_args()
    for path in args.cases:
        case = PerfCase.from_dict(json.loads(path.read_text()))
        print(f"{case.name or path.stem} (n_f={case.n_f:,d}, n_s={case.n_s:,d})")
        print(format_table(case.table()))
        print()


if __name__ == "__main__":
    main()
