"""Choose the number of contexts (N = 6..10) for each synthetic dataset by mean evaluation R^2."""

import argparse
import json
import sys
from pathlib import Path

from cel import cli
from cel.synthetic import influenza_like, measles_like, mpox_like, write_csv

DATASETS = {"mpox": (mpox_like, "daily"), "influenza": (influenza_like, "weekly"), "measles": (measles_like, "monthly")}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--datasets", default="mpox,influenza,measles")
    parser.add_argument("--n", default="6,7,8,9,10")
    parser.add_argument("--config", default=str(Path(__file__).parent.parent / "configs" / "default.cfg"))
    parser.add_argument("--out", default="results")
    args = parser.parse_args()

    base = [ln for ln in Path(args.config).read_text().splitlines() if not ln.startswith("frequency")]
    chosen = {}
    for name in args.datasets.split(","):
        make, frequency = DATASETS[name]
        out = Path(args.out) / f"grid_{name}"
        out.mkdir(parents=True, exist_ok=True)
        write_csv(make(seed=0), out / f"{name}.csv")
        (out / "grid.cfg").write_text("\n".join(base) + f"\nfrequency = {frequency}\n")
        print(f"== {name}")
        code = cli.main(["grid-search", "--config", str(out / "grid.cfg"), "--data", str(out / f"{name}.csv"),
                         "--n", args.n, "--out", str(out)])
        if code != cli.EXIT_OK:
            return code
        chosen[name] = json.loads((out / "grid.json").read_text())["chosen_n"]
    print(json.dumps(chosen))
    return 0


if __name__ == "__main__":
    sys.exit(main())
