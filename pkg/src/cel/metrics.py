"""R^2-based continual-learning metrics: evaluation/reevaluation R^2, forgetting, memory stability."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


def r_squared(targets, predictions) -> float:
    """1 - SS_res / SS_tot. Unbounded below; constant targets are an error."""
    y = np.asarray(targets, dtype=np.float64).ravel()
    p = np.asarray(predictions, dtype=np.float64).ravel()
    if y.size != p.size:
        raise MetricError(f"length mismatch: {y.size} targets vs {p.size} predictions")
    if y.size < 2:
        raise MetricError("r_squared needs at least 2 samples")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise MetricError("r_squared undefined for constant targets")
    ss_res = float(np.sum((y - p) ** 2))
    return 1.0 - ss_res / ss_tot


def forgetting(eval_r2, reeval_r2) -> list[float]:
    """Per-context drop from evaluation to reevaluation; negative means backward improvement."""
    if len(eval_r2) != len(reeval_r2):
        raise MetricError(f"length mismatch: {len(eval_r2)} vs {len(reeval_r2)}")
    return [float(e) - float(r) for e, r in zip(eval_r2, reeval_r2)]


def memory_stability(forgetting_values) -> float:
    if len(forgetting_values) == 0:
        raise MetricError("memory_stability needs at least one context")
    return 1.0 - math.fsum(forgetting_values) / len(forgetting_values)


def config_fingerprint(config_dict: dict) -> str:
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class MetricsReport:
    eval_r2: tuple[float, ...]
    reeval_r2: tuple[float, ...]
    forgetting: tuple[float, ...]
    memory_stability: float
    config_fingerprint: str

    @property
    def n_contexts(self) -> int:
        return len(self.eval_r2)

    def to_dict(self) -> dict:
        return {
            "eval_r2": list(self.eval_r2),
            "reeval_r2": list(self.reeval_r2),
            "forgetting": list(self.forgetting),
            "memory_stability": self.memory_stability,
            "config_fingerprint": self.config_fingerprint,
        }


def build_report(eval_r2, reeval_r2, cfg=None) -> MetricsReport:
    """Assemble a report; forgetting and stability are always derived from the two R^2 lists.

    ``cfg`` may be an ExperimentConfig (anything with ``to_dict``), a plain dict or None.
    """
    if len(eval_r2) != len(reeval_r2):
        raise MetricError(f"length mismatch: {len(eval_r2)} vs {len(reeval_r2)}")
    if cfg is None:
        cfg_dict = {}
    elif isinstance(cfg, dict):
        cfg_dict = cfg
    else:
        cfg_dict = cfg.to_dict()
    fg = forgetting(eval_r2, reeval_r2)
    return MetricsReport(
        eval_r2=tuple(float(v) for v in eval_r2),
        reeval_r2=tuple(float(v) for v in reeval_r2),
        forgetting=tuple(fg),
        memory_stability=memory_stability(fg),
        config_fingerprint=config_fingerprint(cfg_dict),
    )
