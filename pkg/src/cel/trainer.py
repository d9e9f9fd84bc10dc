"""Sequential training over contexts with EWC, plus evaluation and reevaluation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import consolidation as ewc
from .data import Context, NormalizationParams, TimeSeries, as_fraction, first_context_normalizer, fit_normalizer, segment_contexts
from .metrics import MetricsReport, build_report, r_squared
from .nn_core import NumericalError, OptimizerState, ParameterSet, backward, init_parameters, optimizer_step, predict


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n_contexts: int = 10
    window: int = 12
    seq_len: int = 1
    hidden_dim: int = 32
    batch_size: int = 32
    lr: float = 0.01
    lam: float = 1000.0
    epochs_per_context: int = 100
    seed: int = 0
    optimizer: str = "adam"
    clip_norm: float = 5.0
    train_frac: Fraction = Fraction(4, 5)
    normalizer_scope: str = "global"
    shuffle: bool = True
    frequency: str = "weekly"

    def __post_init__(self):
        object.__setattr__(self, "train_frac", as_fraction(self.train_frac))
        for name in ("n_contexts", "window", "seq_len", "hidden_dim", "batch_size", "epochs_per_context"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not (self.lr > 0 and self.clip_norm > 0):
            raise ConfigError("lr and clip_norm must be positive")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if not 0 < self.train_frac < 1:
            raise ConfigError("train_frac must lie in (0, 1)")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.normalizer_scope not in ("global", "first_context"):
            raise ConfigError(f"normalizer_scope must be 'global' or 'first_context', got {self.normalizer_scope!r}")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """JSON-friendly dict; the config-file key for ``lam`` is ``lambda``."""
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            key = "lambda" if f.name == "lam" else f.name
            out[key] = str(value) if isinstance(value, Fraction) else value
        return out

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        """Parse flat ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            name = "lam" if key == "lambda" else key
            if name not in types:
                raise ConfigError(f"line {line_no}: unknown key {key!r}")
            if name in kwargs:
                raise ConfigError(f"line {line_no}: duplicate key {key!r}")
            try:
                kwargs[name] = _parse_value(types[name], value)
            except ValueError as exc:
                raise ConfigError(f"line {line_no}: bad value for {key!r}: {exc}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"))


def _parse_value(type_name: str, value: str):
    if type_name == "int":
        return int(value)
    if type_name == "float":
        return float(value)
    if type_name == "bool":
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if type_name == "Fraction":
        return Fraction(value)
    return value


@dataclass
class RunLog:
    loss_trace: list[list[float]] = field(default_factory=list)
    eval_r2: list[float] = field(default_factory=list)
    reeval_r2: list[float] = field(default_factory=list)
    snapshots: list[ParameterSet] = field(default_factory=list)
    bank: ewc.ConsolidationBank = field(default_factory=ewc.ConsolidationBank)
    contexts: list[Context] = field(default_factory=list)
    eval_predictions: list[np.ndarray] = field(default_factory=list)
    reeval_predictions: list[np.ndarray] = field(default_factory=list)
    normalizer: NormalizationParams | None = None

    def fim_rows(self):
        return ewc.fim_rows(self.bank)


def _shuffle_rng(seed: int) -> np.random.Generator:
    # separate stream from parameter init, which consumes default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))


def train_context(
    params: ParameterSet,
    opt_state: OptimizerState,
    bank: ewc.ConsolidationBank,
    ctx: Context,
    cfg: ExperimentConfig,
    rng: np.random.Generator | None = None,
) -> list[float]:
    """Train on one context, then consolidate it into ``bank``.

    Only ``ctx.train`` is read; earlier contexts act through ``bank``. The
    EWC term is skipped for context 0. Returns the per-epoch mean of
    MSE + penalty, weighted by batch size.
    """
    n = len(ctx.train)
    if n == 0:
        raise ValueError(f"context {ctx.id} has an empty training set")
    if rng is None:
        rng = _shuffle_rng(cfg.seed)
    use_penalty = ctx.id > 0 and len(bank) > 0
    X, y = ctx.train.as_batch()
    trace = []
    for epoch in range(cfg.epochs_per_context):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        try:
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                extra = None
                penalty = 0.0
                if use_penalty:
                    penalty = ewc.ewc_penalty(params, bank, cfg.lam)
                    extra = ewc.ewc_penalty_gradient(params, bank, cfg.lam)
                mse, grad = backward(params, (X[idx], y[idx]), extra)
                total += ewc.regularized_loss(mse, penalty) * idx.size
                optimizer_step(params, grad, opt_state, cfg.lr, cfg.clip_norm)
        except NumericalError as exc:
            raise NumericalError(f"context {ctx.id}, epoch {epoch}: {exc}") from exc
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise NumericalError(f"context {ctx.id}, epoch {epoch}: non-finite epoch loss")
        trace.append(epoch_loss)
    ewc.consolidate(bank, ctx.id, params, (X, y))
    return trace


def context_predictions(params: ParameterSet, ctx: Context) -> np.ndarray:
    return predict(params, ctx.test.inputs)


def evaluate_context(params: ParameterSet, ctx: Context) -> float:
    return r_squared(ctx.test.targets, context_predictions(params, ctx))


def build_contexts(series: TimeSeries, cfg: ExperimentConfig):
    if cfg.normalizer_scope == "global":
        normalizer = fit_normalizer(series)
    else:
        normalizer = first_context_normalizer(series, cfg.n_contexts, cfg.train_frac, cfg.window, cfg.seq_len)
    contexts = segment_contexts(series, cfg.n_contexts, cfg.train_frac, cfg.window, cfg.seq_len, normalizer)
    return contexts, normalizer


def run_sequence(series: TimeSeries, cfg: ExperimentConfig) -> tuple[RunLog, MetricsReport]:
    """Train contexts in order, evaluating each right after its own training,
    then reevaluate all of them with the final parameters."""
    contexts, normalizer = build_contexts(series, cfg)
    params = init_parameters(cfg.hidden_dim, cfg.window, cfg.seed)
    opt = OptimizerState.for_params(params, cfg.optimizer)
    rng = _shuffle_rng(cfg.seed)
    log = RunLog(contexts=contexts, normalizer=normalizer)

    for ctx in contexts:
        log.loss_trace.append(train_context(params, opt, log.bank, ctx, cfg, rng))
        preds = context_predictions(params, ctx)
        log.eval_predictions.append(preds)
        log.eval_r2.append(r_squared(ctx.test.targets, preds))
        log.snapshots.append(params.copy())

    for ctx in contexts:
        preds = context_predictions(params, ctx)
        log.reeval_predictions.append(preds)
        log.reeval_r2.append(r_squared(ctx.test.targets, preds))

    return log, build_report(log.eval_r2, log.reeval_r2, cfg)
