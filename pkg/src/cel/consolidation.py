"""Elastic weight consolidation: diagonal Fisher estimates, anchors and the penalty."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn_core import EXPORT_NAMES, GradientSet, NumericalError, ParameterSet, per_sample_gradients


@dataclass(frozen=True)
class ConsolidationRecord:
    context_id: int
    fisher_diag: ParameterSet
    anchor: ParameterSet

    def __post_init__(self):
        if not self.fisher_diag.same_shape(self.anchor):
            raise ValueError("fisher_diag and anchor shapes differ")
        self.anchor.data.flags.writeable = False
        self.fisher_diag.data.flags.writeable = False


@dataclass
class ConsolidationBank:
    records: list[ConsolidationRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def consolidate(self, context_id: int, params: ParameterSet, train_set) -> ConsolidationRecord:
        return consolidate(self, context_id, params, train_set)


def compute_fim_diagonal(params: ParameterSet, train_set) -> ParameterSet:
    """Empirical diagonal Fisher: mean over samples of the squared per-sample gradient.

    Each sample's gradient is taken of its own squared error (a batch of one),
    so the squares are not averaged away across the training set.
    """
    grads = per_sample_gradients(params, train_set)
    fisher = np.mean(grads * grads, axis=0)
    if not np.all(np.isfinite(fisher)):
        raise NumericalError("non-finite Fisher information")
    return ParameterSet(params.hidden_dim, params.input_dim, fisher)


def _check_shapes(params: ParameterSet, bank: ConsolidationBank):
    for rec in bank:
        if not rec.anchor.same_shape(params):
            raise ValueError(
                f"record for context {rec.context_id} has shape "
                f"(H={rec.anchor.hidden_dim}, D={rec.anchor.input_dim}), params have "
                f"(H={params.hidden_dim}, D={params.input_dim})"
            )


def ewc_penalty(params: ParameterSet, bank: ConsolidationBank, lam: float) -> float:
    """Sum over records of (lam / 2) * F * (theta - anchor)^2."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    _check_shapes(params, bank)
    total = 0.0
    for rec in bank:
        delta = params.data - rec.anchor.data
        total += 0.5 * lam * float(np.dot(rec.fisher_diag.data, delta * delta))
    return total


def ewc_penalty_gradient(params: ParameterSet, bank: ConsolidationBank, lam: float) -> GradientSet:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    _check_shapes(params, bank)
    grad = params.zeros_like()
    for rec in bank:
        grad.data += lam * rec.fisher_diag.data * (params.data - rec.anchor.data)
    return grad


def regularized_loss(mse: float, penalty: float) -> float:
    return mse + penalty


def consolidate(bank: ConsolidationBank, context_id: int, params: ParameterSet, train_set) -> ConsolidationRecord:
    """Snapshot ``params`` as an anchor and store its Fisher estimate on ``train_set``."""
    if bank.records and context_id <= bank.records[-1].context_id:
        raise ValueError(
            f"context_id {context_id} must exceed last consolidated id {bank.records[-1].context_id}"
        )
    if context_id < 0:
        raise ValueError("context_id must be >= 0")
    record = ConsolidationRecord(
        context_id=int(context_id),
        fisher_diag=compute_fim_diagonal(params, train_set),
        anchor=params.copy(),
    )
    bank.records.append(record)
    return record


def fim_rows(bank: ConsolidationBank):
    """Yield (context_id, parameter_name, flat_index, fisher_value) for every record."""
    for rec in bank:
        yield from fisher_rows(rec.context_id, rec.fisher_diag)


def fisher_rows(context_id: int, fisher: ParameterSet):
    for name, view in fisher.items():
        export = EXPORT_NAMES[name]
        for idx, value in enumerate(view.ravel()):
            yield context_id, export, idx, float(value)
