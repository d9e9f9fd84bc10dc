"""Write the synthetic stand-in datasets as date,value CSVs.

The real Mpox/Influenza/Measles exports are not bundled; these generators match
their lengths, frequencies and rough per-context statistics so the pipeline can
be exercised end to end.
"""

import argparse
from pathlib import Path

from cel.synthetic import influenza_like, measles_like, mpox_like, shifted_two_context, write_csv

GENERATORS = {
    "mpox": mpox_like,
    "influenza": influenza_like,
    "measles": measles_like,
    "shifted": shifted_two_context,
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in GENERATORS.items():
        series = make(seed=args.seed)
        write_csv(series, out / f"{name}.csv")
        print(f"{name:<10} {len(series):>4} {series.frequency:<8} -> {out / f'{name}.csv'}")


if __name__ == "__main__":
    main()
