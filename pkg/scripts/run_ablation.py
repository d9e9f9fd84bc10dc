"""EWC versus lambda=0 over several seeds on one dataset, printed as a table.

Thin wrapper over ``cel ablate`` that also builds the synthetic data if needed.

    python scripts/run_ablation.py --dataset influenza --seeds 5
"""

import argparse
import sys
from pathlib import Path

from cel import cli
from cel.synthetic import influenza_like, measles_like, mpox_like, shifted_two_context, write_csv

DATASETS = {
    "influenza": (influenza_like, "weekly", 10),
    "mpox": (mpox_like, "daily", 10),
    "measles": (measles_like, "monthly", 6),
    "shifted": (shifted_two_context, "weekly", 2),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dataset", choices=sorted(DATASETS), default="influenza")
    parser.add_argument("--seeds", default="5")
    parser.add_argument("--config", default=str(Path(__file__).parent.parent / "configs" / "default.cfg"))
    parser.add_argument("--out", default="results")
    args = parser.parse_args()

    make, frequency, n_contexts = DATASETS[args.dataset]
    out = Path(args.out) / f"ablation_{args.dataset}"
    out.mkdir(parents=True, exist_ok=True)
    data = out / f"{args.dataset}.csv"
    write_csv(make(seed=0), data)
    base = Path(args.config).read_text()
    cfg_path = out / "ablation.cfg"
    cfg_path.write_text(
        "\n".join(line for line in base.splitlines() if not line.startswith(("n_contexts", "frequency")))
        + f"\nn_contexts = {n_contexts}\nfrequency = {frequency}\n"
    )
    return cli.main(["ablate", "--config", str(cfg_path), "--data", str(data), "--seeds", args.seeds, "--out", str(out)])


if __name__ == "__main__":
    sys.exit(main())
