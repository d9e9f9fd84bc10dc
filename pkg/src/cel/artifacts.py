"""On-disk outputs of a run. Every file is written to a temp name and renamed into place."""

from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path

from .consolidation import fisher_rows
from .data import denormalize
from .metrics import MetricsReport
from .nn_core import atomic_write_bytes, load_snapshot, save_snapshot
from .trainer import ExperimentConfig, RunLog

FIM_HEADER = ("context_id", "parameter_name", "flat_index", "fisher_value")


class ArtifactError(FileNotFoundError):
    pass


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj) -> None:
    # json uses repr() for floats: shortest string that round-trips bit-exactly
    atomic_write_text(path, json.dumps(obj, indent=2, allow_nan=False) + "\n")


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def metrics_payload(log: RunLog, report: MetricsReport, cfg: ExperimentConfig) -> dict:
    stats = [
        {
            "context_id": ctx.id,
            "start": ctx.start_label,
            "end": ctx.end_label,
            "points": len(ctx.raw_span),
            "mean": ctx.stats[0],
            "std": ctx.stats[1],
            "n_train": len(ctx.train),
            "n_test": len(ctx.test),
        }
        for ctx in log.contexts
    ]
    return {
        "config": cfg.to_dict(),
        "eval_r2": list(report.eval_r2),
        "reeval_r2": list(report.reeval_r2),
        "forgetting": list(report.forgetting),
        "memory_stability": report.memory_stability,
        "per_context_stats": stats,
        "config_fingerprint": report.config_fingerprint,
    }


def prediction_rows(log: RunLog, timestamps):
    norm = log.normalizer
    for phase, preds_by_ctx in (("eval", log.eval_predictions), ("reeval", log.reeval_predictions)):
        for ctx, preds in zip(log.contexts, preds_by_ctx):
            targets = ctx.test.targets
            for k, (idx, y, p) in enumerate(zip(ctx.test.target_index, targets, preds)):
                yield (
                    ctx.id, phase, k, timestamps[int(idx)],
                    repr(float(denormalize(y, norm))), repr(float(denormalize(p, norm))),
                    repr(float(y)), repr(float(p)),
                )


def write_run(out_dir, log: RunLog, report: MetricsReport, cfg: ExperimentConfig, timestamps) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # leftovers from an earlier run with more contexts would leak into fim_export.csv
    for stale in [*out.glob("params_ctx_*.snapshot"), *out.glob("fisher_ctx_*.snapshot")]:
        stale.unlink()
    write_json(out / "metrics.json", metrics_payload(log, report, cfg))
    write_csv(
        out / "loss_trace.csv",
        ("context_id", "epoch", "regularized_loss"),
        ((cid, epoch, repr(loss)) for cid, trace in enumerate(log.loss_trace) for epoch, loss in enumerate(trace)),
    )
    write_csv(
        out / "predictions.csv",
        ("context_id", "phase", "sample", "date", "target", "prediction", "target_normalized", "prediction_normalized"),
        prediction_rows(log, timestamps),
    )
    for i, snap in enumerate(log.snapshots):
        save_snapshot(snap, out / f"params_ctx_{i}.snapshot")
    for rec in log.bank:
        save_snapshot(rec.fisher_diag, out / f"fisher_ctx_{rec.context_id}.snapshot")
    fim_export(out)
    return out


def fim_export(run_dir) -> Path:
    """Rebuild fim_export.csv from the per-context Fisher snapshots in ``run_dir``."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ArtifactError(f"run directory not found: {run_dir}")
    found = []
    for path in run_dir.glob("fisher_ctx_*.snapshot"):
        m = re.fullmatch(r"fisher_ctx_(\d+)\.snapshot", path.name)
        if m:
            found.append((int(m.group(1)), path))
    if not found:
        raise ArtifactError(f"no fisher_ctx_<i>.snapshot files in {run_dir}")
    found.sort()
    rows = (
        (cid, name, idx, repr(value))
        for ctx_id, path in found
        for cid, name, idx, value in fisher_rows(ctx_id, load_snapshot(path))
    )
    target = run_dir / "fim_export.csv"
    write_csv(target, FIM_HEADER, rows)
    return target
