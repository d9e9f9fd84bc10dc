"""Continual LSTM forecasting with elastic weight consolidation."""

from .consolidation import ConsolidationBank, ConsolidationRecord, compute_fim_diagonal, ewc_penalty, ewc_penalty_gradient
from .data import Context, TimeSeries, WindowedDataset, load_csv, segment_contexts
from .metrics import MetricsReport, build_report, forgetting, memory_stability, r_squared
from .nn_core import ParameterSet, backward, forward, init_parameters
from .trainer import ExperimentConfig, RunLog, run_sequence

__version__ = "0.1.0"
