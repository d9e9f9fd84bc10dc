"""``cel`` command line: run, grid-search, ablate, fim-export."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import artifacts
from .data import DataError, load_csv
from .metrics import MetricError
from .nn_core import NumericalError
from .trainer import ConfigError, ExperimentConfig, run_sequence

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4


def select_n_contexts(scores: dict[int, float], tol: float = 1e-6):
    """Pick the N with the highest mean evaluation R^2; ties within ``tol`` go to the smallest N.

    Returns (chosen_n, trace) where ``trace`` lists the candidates considered tied.
    """
    finite = {n: s for n, s in scores.items() if s is not None and math.isfinite(s)}
    if not finite:
        raise ValueError("no successful cells to select from")
    best = max(finite.values())
    tied = sorted(n for n, s in finite.items() if best - s <= tol)
    return tied[0], {"best_score": best, "tolerance": tol, "tied": tied}


def _load(config_path, data_path):
    cfg = ExperimentConfig.from_file(config_path)
    series = load_csv(data_path, cfg.frequency)
    return cfg, series


def _cell(series, cfg):
    try:
        log, report = run_sequence(series, cfg)
    except (DataError, NumericalError, MetricError) as exc:
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    return {"status": "ok", "report": report.to_dict()}


def _map_cells(jobs):
    """Run (series, cfg) jobs, in parallel when CEL_THREADS > 1. Order is preserved."""
    threads = max(1, int(os.environ.get("CEL_THREADS", "1")))
    if threads == 1 or len(jobs) < 2:
        return [_cell(s, c) for s, c in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_cell, *zip(*jobs)))


def cmd_run(args) -> int:
    cfg, series = _load(args.config, args.data)
    log, report = run_sequence(series, cfg)
    out = artifacts.write_run(args.out, log, report, cfg, series.timestamps)
    mean_eval = math.fsum(report.eval_r2) / report.n_contexts
    print(f"MST={report.memory_stability:.5f} mean_eval_r2={mean_eval:.5f} contexts={report.n_contexts} out={out}")
    return EXIT_OK


def cmd_grid_search(args) -> int:
    cfg, series = _load(args.config, args.data)
    n_values = [int(v) for v in args.n.split(",") if v.strip()]
    cells = _map_cells([(series, cfg.replace(n_contexts=n)) for n in n_values])
    records, scores = [], {}
    for n, cell in zip(n_values, cells):
        rec = {"n_contexts": n, "seed": cfg.seed, "status": cell["status"]}
        if cell["status"] == "ok":
            eval_r2 = cell["report"]["eval_r2"]
            rec["eval_r2"] = eval_r2
            rec["mean_eval_r2"] = math.fsum(eval_r2) / len(eval_r2)
            rec["memory_stability"] = cell["report"]["memory_stability"]
            scores[n] = rec["mean_eval_r2"]
        else:
            rec["error"] = cell["error"]
        records.append(rec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = {"config": cfg.to_dict(), "cells": records}
    if not scores:
        artifacts.write_json(out / "grid.json", {**result, "chosen_n": None})
        print("grid-search: every cell failed", file=sys.stderr)
        return EXIT_FAILURE
    chosen, trace = select_n_contexts(scores)
    artifacts.write_json(out / "grid.json", {**result, "chosen_n": chosen, "tie_break": trace})
    for rec in records:
        score = f"{rec['mean_eval_r2']:.4f}" if rec["status"] == "ok" else rec["status"]
        print(f"N={rec['n_contexts']:>3}  mean_eval_r2={score}")
    print(f"chosen N={chosen}")
    return EXIT_OK


def _parse_seeds(text: str, base: int) -> list[int]:
    if "," in text:
        return [int(s) for s in text.split(",") if s.strip()]
    return [base + k for k in range(int(text))]


def cmd_ablate(args) -> int:
    cfg, series = _load(args.config, args.data)
    seeds = _parse_seeds(args.seeds, cfg.seed)
    arms = {"ewc": cfg.lam, "naive": 0.0}
    jobs = [(series, cfg.replace(seed=s, lam=lam)) for lam in arms.values() for s in seeds]
    cells = iter(_map_cells(jobs))
    summary = {"config": cfg.to_dict(), "seeds": seeds, "arms": {}}
    for arm, lam in arms.items():
        per_seed = []
        for seed in seeds:
            cell = next(cells)
            if cell["status"] != "ok":
                raise NumericalError(f"{arm} arm, seed {seed}: {cell['error']}")
            rep = cell["report"]
            per_seed.append(
                {
                    "seed": seed,
                    "memory_stability": rep["memory_stability"],
                    "forgetting": rep["forgetting"],
                    "mean_forgetting": math.fsum(rep["forgetting"]) / len(rep["forgetting"]),
                    "eval_r2": rep["eval_r2"],
                    "reeval_r2": rep["reeval_r2"],
                }
            )
        summary["arms"][arm] = {
            "lambda": lam,
            "per_seed": per_seed,
            "mean_memory_stability": math.fsum(r["memory_stability"] for r in per_seed) / len(per_seed),
            "mean_forgetting": math.fsum(r["mean_forgetting"] for r in per_seed) / len(per_seed),
        }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts.write_json(out / "ablation.json", summary)
    print(f"{'arm':<6} {'lambda':>8} {'mean MST':>10} {'mean forgetting':>16}")
    for arm, res in summary["arms"].items():
        print(f"{arm:<6} {res['lambda']:>8g} {res['mean_memory_stability']:>10.5f} {res['mean_forgetting']:>16.5f}")
    return EXIT_OK


def cmd_fim_export(args) -> int:
    print(artifacts.fim_export(args.run))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--data", required=True, help="CSV with header date,value")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", help="train over all contexts and write metrics and artifacts")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid-search", help="compare numbers of contexts by mean evaluation R^2")
    common(p)
    p.add_argument("--n", default="6,7,8,9,10", help="comma-separated context counts")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("ablate", help="EWC arm versus lambda=0 fine-tuning over several seeds")
    common(p)
    p.add_argument("--seeds", default="5", help="a count (seeds base..base+k-1) or a comma list")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("fim-export", help="rebuild fim_export.csv from a run directory")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_fim_export)
    return parser


def _fail(kind: str, exc: Exception, code: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (DataError, artifacts.ArtifactError) as exc:
        return _fail("data", exc, EXIT_DATA)
    except (NumericalError, MetricError) as exc:
        return _fail("numeric", exc, EXIT_NUMERIC)
    except OSError as exc:
        return _fail("io", exc, EXIT_FAILURE)


if __name__ == "__main__":
    sys.exit(main())
