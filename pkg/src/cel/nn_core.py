"""Single-layer LSTM regressor with hand-written backpropagation through time.

Parameters live in one contiguous float64 buffer; the named tensors
(``weight_ih``, ``weight_hh``, ...) are reshaped views into it. That keeps the
optimizer, the EWC penalty and the finite-difference oracle working on plain
vectors while the cell equations read naturally.

Gate blocks inside the fused matrices are stacked as (forget, input,
candidate, output).
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GATES = ("forget", "input", "candidate", "output")
PARAM_NAMES = ("weight_ih", "weight_hh", "bias_ih", "bias_hh", "linear_weight", "linear_bias")
# PyTorch-style names, as listed in the parameter inventory of the model.
EXPORT_NAMES = {
    "weight_ih": "lstm.weight_ih_l0",
    "weight_hh": "lstm.weight_hh_l0",
    "bias_ih": "lstm.bias_ih_l0",
    "bias_hh": "lstm.bias_hh_l0",
    "linear_weight": "linear.weight",
    "linear_bias": "linear.bias",
}


class NumericalError(ArithmeticError):
    """Raised when a NaN or Inf shows up in activations, gradients or parameters."""


def param_shapes(hidden_dim: int, input_dim: int) -> dict[str, tuple[int, ...]]:
    H, D = hidden_dim, input_dim
    return {
        "weight_ih": (4 * H, D),
        "weight_hh": (4 * H, H),
        "bias_ih": (4 * H,),
        "bias_hh": (4 * H,),
        "linear_weight": (H,),
        "linear_bias": (1,),
    }


def param_count(hidden_dim: int, input_dim: int) -> int:
    H, D = hidden_dim, input_dim
    return 4 * H * D + 4 * H * H + 8 * H + H + 1


class ParameterSet:
    """Flat float64 buffer exposing the six named LSTM/head tensors as views.

    The same class doubles as the gradient container (see ``GradientSet``).
    """

    def __init__(self, hidden_dim: int, input_dim: int, data: np.ndarray | None = None):
        if hidden_dim < 1 or input_dim < 1:
            raise ValueError(f"hidden_dim and input_dim must be >= 1, got {hidden_dim}, {input_dim}")
        self.hidden_dim = int(hidden_dim)
        self.input_dim = int(input_dim)
        n = param_count(hidden_dim, input_dim)
        if data is None:
            data = np.zeros(n, dtype=np.float64)
        else:
            data = np.asarray(data, dtype=np.float64)
            if data.shape != (n,):
                raise ValueError(f"flat buffer must have shape ({n},), got {data.shape}")
        self.data = data
        self._views = {}
        offset = 0
        for name, shape in param_shapes(hidden_dim, input_dim).items():
            size = int(np.prod(shape))
            self._views[name] = data[offset : offset + size].reshape(shape)
            offset += size

    weight_ih = property(lambda self: self._views["weight_ih"])
    weight_hh = property(lambda self: self._views["weight_hh"])
    bias_ih = property(lambda self: self._views["bias_ih"])
    bias_hh = property(lambda self: self._views["bias_hh"])
    linear_weight = property(lambda self: self._views["linear_weight"])
    linear_bias = property(lambda self: self._views["linear_bias"])

    def items(self):
        return self._views.items()

    @property
    def size(self) -> int:
        return self.data.size

    def copy(self) -> "ParameterSet":
        return ParameterSet(self.hidden_dim, self.input_dim, self.data.copy())

    def zeros_like(self) -> "ParameterSet":
        return ParameterSet(self.hidden_dim, self.input_dim)

    def same_shape(self, other: "ParameterSet") -> bool:
        return (self.hidden_dim, self.input_dim) == (other.hidden_dim, other.input_dim)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def __repr__(self):
        return f"ParameterSet(hidden_dim={self.hidden_dim}, input_dim={self.input_dim}, size={self.size})"


GradientSet = ParameterSet


@dataclass
class LstmState:
    cell: np.ndarray
    hidden: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int, batch: int | None = None) -> "LstmState":
        shape = (hidden_dim,) if batch is None else (batch, hidden_dim)
        return cls(np.zeros(shape), np.zeros(shape))


@dataclass
class OptimizerState:
    """Adam moment accumulators over the flat parameter buffer."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ParameterSet, kind: str = "adam") -> "OptimizerState":
        if kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {kind!r}")
        return cls(np.zeros(params.size), np.zeros(params.size), kind=kind)


def init_parameters(hidden_dim: int, input_dim: int, seed: int) -> ParameterSet:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) init from a seeded generator."""
    params = ParameterSet(hidden_dim, input_dim)
    bound = 1.0 / np.sqrt(hidden_dim)
    rng = np.random.default_rng(seed)
    params.data[:] = rng.uniform(-bound, bound, size=params.size)
    return params


def sigmoid(z):
    # tanh form avoids overflow warnings from exp for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check(name: str, arr: np.ndarray):
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite value in {name}")


def _gates(params: ParameterSet, cell: np.ndarray, hidden: np.ndarray, x: np.ndarray):
    H = params.hidden_dim
    z = x @ params.weight_ih.T + hidden @ params.weight_hh.T + params.bias_ih + params.bias_hh
    f = sigmoid(z[..., 0:H])
    i = sigmoid(z[..., H : 2 * H])
    g = np.tanh(z[..., 2 * H : 3 * H])
    o = sigmoid(z[..., 3 * H : 4 * H])
    for gate, value in zip(GATES, (f, i, g, o)):
        _check(f"{gate} gate", value)
    c = cell * f + i * g
    _check("cell state", c)
    h = o * np.tanh(c)
    return f, i, g, o, c, h


def lstm_step(params: ParameterSet, state: LstmState, x: np.ndarray) -> LstmState:
    """One cell update. Works for a single sample (H,) or a batch (B, H)."""
    x = np.asarray(x, dtype=np.float64)
    _check("input", x)
    _, _, _, _, c, h = _gates(params, state.cell, state.hidden, x)
    return LstmState(cell=c, hidden=h)


def _as_batch(inputs) -> np.ndarray:
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"inputs must have shape (batch, steps, input_dim), got {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("inputs must contain at least one sample with at least one step")
    return X


def predict(params: ParameterSet, inputs) -> np.ndarray:
    """Predictions for a batch of sequences shaped (B, T, D)."""
    X = _as_batch(inputs)
    if X.shape[2] != params.input_dim:
        raise ValueError(f"input vectors have length {X.shape[2]}, model expects {params.input_dim}")
    state = LstmState.zeros(params.hidden_dim, X.shape[0])
    for t in range(X.shape[1]):
        state = lstm_step(params, state, X[:, t, :])
    return state.hidden @ params.linear_weight + params.linear_bias[0]


def forward(params: ParameterSet, sample) -> float:
    """Scalar prediction for one sequence of input vectors, shape (T, D)."""
    seq = np.asarray(sample, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise ValueError("sample must be a non-empty sequence of input vectors")
    return float(predict(params, seq[None])[0])


def mse_loss(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if p.size == 0 or y.size == 0:
        raise ValueError("mse_loss needs non-empty inputs")
    if p.size != y.size:
        raise ValueError(f"length mismatch: {p.size} predictions vs {y.size} targets")
    return float(np.mean((y - p) ** 2))


def _bptt(params: ParameterSet, X: np.ndarray, y: np.ndarray, per_sample: bool):
    """Forward + backward pass.

    With ``per_sample=False`` returns (mean loss, gradient of the mean loss).
    With ``per_sample=True`` returns (per-sample losses, (B, P) matrix whose
    row b is the gradient of sample b's own squared error).
    """
    H = params.hidden_dim
    B, T, _ = X.shape
    cache = []
    state = LstmState.zeros(H, B)
    for t in range(T):
        f, i, g, o, c, h = _gates(params, state.cell, state.hidden, X[:, t, :])
        cache.append((state.cell, state.hidden, f, i, g, o, c))
        state = LstmState(c, h)
    pred = state.hidden @ params.linear_weight + params.linear_bias[0]
    resid = pred - y
    _check("prediction", pred)

    dpred = 2.0 * resid if per_sample else 2.0 * resid / B
    lead = (B,) if per_sample else ()
    sum_spec = "b" if per_sample else ""
    acc = {name: np.zeros(lead + shape) for name, shape in param_shapes(H, params.input_dim).items()}

    acc["linear_weight"] += np.einsum(f"b,bh->{sum_spec}h", dpred, state.hidden)
    acc["linear_bias"] += np.einsum(f"b->{sum_spec}", dpred)[..., None]

    dh = dpred[:, None] * params.linear_weight
    dc = np.zeros((B, H))
    for t in reversed(range(T)):
        c_prev, h_prev, f, i, g, o, c = cache[t]
        tc = np.tanh(c)
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dc * c_prev * f * (1.0 - f),
                dc * g * i * (1.0 - i),
                dc * i * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        acc["weight_ih"] += np.einsum(f"bk,bd->{sum_spec}kd", dz, X[:, t, :])
        acc["weight_hh"] += np.einsum(f"bk,bj->{sum_spec}kj", dz, h_prev)
        db = np.einsum(f"bk->{sum_spec}k", dz)
        acc["bias_ih"] += db
        acc["bias_hh"] += db
        dh = dz @ params.weight_hh
        dc = dc * f

    if per_sample:
        grads = np.concatenate([acc[name].reshape(B, -1) for name in PARAM_NAMES], axis=1)
        _check("gradient", grads)
        return resid**2, grads

    grad = params.zeros_like()
    for name in PARAM_NAMES:
        grad._views[name][...] = acc[name]
    _check("gradient", grad.data)
    return float(np.mean(resid**2)), grad


def _unpack_batch(batch):
    """Accept either an (inputs, targets) pair of arrays or a list of (sample, target)."""
    if isinstance(batch, tuple) and len(batch) == 2 and np.ndim(batch[1]) == 1:
        X, y = batch
    else:
        batch = list(batch)
        if not batch:
            raise ValueError("batch must be non-empty")
        X = np.stack([np.asarray(s, dtype=np.float64) for s, _ in batch])
        y = np.array([t for _, t in batch], dtype=np.float64)
    X = _as_batch(X)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ValueError(f"{X.shape[0]} samples but targets have shape {y.shape}")
    return X, y


def backward(params: ParameterSet, batch, loss_grad_extra: GradientSet | None = None):
    """Mean MSE over the batch and its gradient via BPTT.

    ``loss_grad_extra`` (e.g. the EWC penalty gradient) is added to the result.
    """
    X, y = _unpack_batch(batch)
    loss, grad = _bptt(params, X, y, per_sample=False)
    if loss_grad_extra is not None:
        if not grad.same_shape(loss_grad_extra):
            raise ValueError("loss_grad_extra does not match parameter shapes")
        grad.data += loss_grad_extra.data
        _check("gradient", grad.data)
    return loss, grad


def per_sample_gradients(params: ParameterSet, batch) -> np.ndarray:
    """(B, P) matrix of gradients of each sample's own squared error."""
    X, y = _unpack_batch(batch)
    return _bptt(params, X, y, per_sample=True)[1]


def batch_loss(params: ParameterSet, batch) -> float:
    X, y = _unpack_batch(batch)
    return mse_loss(predict(params, X), y)


def finite_difference_gradient(params: ParameterSet, batch, step: float = 1e-5) -> GradientSet:
    """Central differences of the forward + MSE path, one coordinate at a time."""
    if step <= 0:
        raise ValueError("step must be positive")
    X, y = _unpack_batch(batch)
    probe = params.copy()
    grad = params.zeros_like()
    for k in range(params.size):
        orig = probe.data[k]
        probe.data[k] = orig + step
        up = mse_loss(predict(probe, X), y)
        probe.data[k] = orig - step
        down = mse_loss(predict(probe, X), y)
        probe.data[k] = orig
        grad.data[k] = (up - down) / (2.0 * step)
    return grad


def clip_by_global_norm(grad: np.ndarray, clip_norm: float) -> np.ndarray:
    norm = float(np.sqrt(np.dot(grad, grad)))
    if not np.isfinite(norm):
        raise NumericalError("non-finite gradient norm")
    if norm > clip_norm:
        return grad * (clip_norm / norm)
    return grad


def optimizer_step(params: ParameterSet, grads: GradientSet, opt: OptimizerState, lr: float, clip_norm: float):
    """Clip the global gradient norm, then apply one Adam (or SGD) update in place."""
    if lr <= 0 or clip_norm <= 0:
        raise ValueError("lr and clip_norm must be positive")
    g = clip_by_global_norm(grads.data, clip_norm)
    opt.step += 1
    if opt.kind == "sgd":
        params.data -= lr * g
    else:
        opt.first_moment *= opt.beta1
        opt.first_moment += (1.0 - opt.beta1) * g
        opt.second_moment *= opt.beta2
        opt.second_moment += (1.0 - opt.beta2) * g * g
        m_hat = opt.first_moment / (1.0 - opt.beta1**opt.step)
        v_hat = opt.second_moment / (1.0 - opt.beta2**opt.step)
        params.data -= lr * m_hat / (np.sqrt(v_hat) + opt.eps)
    if not params.is_finite():
        raise NumericalError(f"non-finite parameter after optimizer step {opt.step}")


def save_snapshot(params: ParameterSet, path) -> None:
    """Write named float64 arrays plus (hidden_dim, input_dim) header atomically."""
    arrays = {"hidden_dim": np.array(params.hidden_dim), "input_dim": np.array(params.input_dim)}
    arrays.update({name: np.ascontiguousarray(view) for name, view in params.items()})
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    atomic_write_bytes(path, buf.getvalue())


def load_snapshot(path) -> ParameterSet:
    with np.load(path) as npz:
        params = ParameterSet(int(npz["hidden_dim"]), int(npz["input_dim"]))
        for name, view in params.items():
            view[...] = npz[name]
    return params


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(payload)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
