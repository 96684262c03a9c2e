"""Stacked LSTM regressor in numpy: forward pass, BPTT, sse loss and an early-stopped trainer.

Row-vector convention: an input sequence is a ``(T, n_in)`` array. Each layer keeps its four
gates fused along the first axis in the order input, forget, output, candidate, so
``Wx`` is ``(4H, n_in)``, ``Wh`` is ``(4H, H)`` and ``b`` is ``(4H,)``.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from ._kernels import lstm_backward_loop, lstm_forward_loop

logger = logging.getLogger(__name__)

GATES = ("input", "forget", "output", "candidate")


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input and output widths must be positive")
        if len(self.hidden) < 1 or min(self.hidden) < 1:
            raise ValueError(f"need at least one layer of positive width, got {self.hidden}")

    @property
    def layer_inputs(self) -> list[int]:
        return [self.input_dim] + list(self.hidden[:-1])


@dataclass
class LstmWeights:
    """All trainable parameters, plus the (non-trainable) input standardization."""

    arch: Architecture
    layers: list[dict[str, np.ndarray]]
    proj_W: np.ndarray
    proj_b: np.ndarray
    input_mean: np.ndarray = None
    input_std: np.ndarray = None
    init_kind: str = "random"

    def __post_init__(self):
        if self.input_mean is None:
            self.input_mean = np.zeros(self.arch.input_dim)
        if self.input_std is None:
            self.input_std = np.ones(self.arch.input_dim)
        self.validate()

    def validate(self) -> None:
        arch = self.arch
        if len(self.layers) != len(arch.hidden):
            raise ValueError("layer count does not match architecture")
        for n_in, h, layer in zip(arch.layer_inputs, arch.hidden, self.layers):
            expected = {"Wx": (4 * h, n_in), "Wh": (4 * h, h), "b": (4 * h,)}
            for key, shape in expected.items():
                if layer[key].shape != shape:
                    raise ValueError(f"{key} has shape {layer[key].shape}, expected {shape}")
        if self.proj_W.shape != (arch.output_dim, arch.hidden[-1]) or self.proj_b.shape != (arch.output_dim,):
            raise ValueError("output projection shape mismatch")
        if self.input_mean.shape != (arch.input_dim,) or self.input_std.shape != (arch.input_dim,):
            raise ValueError("standardization stats have the wrong width")

    def named_params(self) -> Iterator[tuple[str, np.ndarray]]:
        for k, layer in enumerate(self.layers):
            for key in ("Wx", "Wh", "b"):
                yield f"layer{k}.{key}", layer[key]
        yield "proj.W", self.proj_W
        yield "proj.b", self.proj_b

    def gate(self, layer: int, gate: str) -> dict[str, np.ndarray]:
        """Views of one gate's ``Wx``, ``Wh`` and ``b`` blocks."""
        h = self.arch.hidden[layer]
        sl = slice(GATES.index(gate) * h, (GATES.index(gate) + 1) * h)
        p = self.layers[layer]
        return {"Wx": p["Wx"][sl], "Wh": p["Wh"][sl], "b": p["b"][sl]}

    def copy(self) -> "LstmWeights":
        return copy.deepcopy(self)

    def zeros_like(self) -> "LstmWeights":
        return LstmWeights(
            self.arch,
            [{k: np.zeros_like(v) for k, v in layer.items()} for layer in self.layers],
            np.zeros_like(self.proj_W),
            np.zeros_like(self.proj_b),
            self.input_mean.copy(),
            self.input_std.copy(),
            self.init_kind,
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for _, p in self.named_params()])

    def set_flat(self, vec: np.ndarray) -> None:
        offset = 0
        for _, p in self.named_params():
            p[...] = vec[offset : offset + p.size].reshape(p.shape)
            offset += p.size

    @property
    def n_params(self) -> int:
        return sum(p.size for _, p in self.named_params())


def init_random(arch: Architecture, seed: int) -> LstmWeights:
    """Glorot-uniform matrices (per gate block), forget bias 1, other biases 0."""
    rng = np.random.default_rng(seed)

    def glorot(rows: int, cols: int) -> np.ndarray:
        r = math.sqrt(6.0 / (rows + cols))
        return rng.uniform(-r, r, size=(rows, cols))

    layers = []
    for n_in, h in zip(arch.layer_inputs, arch.hidden):
        Wx = np.vstack([glorot(h, n_in) for _ in GATES])
        Wh = np.vstack([glorot(h, h) for _ in GATES])
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0
        layers.append({"Wx": Wx, "Wh": Wh, "b": b})
    proj_W = glorot(arch.output_dim, arch.hidden[-1])
    return LstmWeights(arch, layers, proj_W, np.zeros(arch.output_dim), init_kind="random")


@dataclass
class LayerCache:
    x: np.ndarray  # (T, n_in) layer input
    gates: np.ndarray  # (T, 4H) post-activation i, f, o, g
    c: np.ndarray  # (T, H)
    tanh_c: np.ndarray  # (T, H)
    h: np.ndarray  # (T, H)


@dataclass
class ForwardCache:
    layers: list[LayerCache]
    outputs: np.ndarray  # (T, output_dim)

    def __len__(self) -> int:
        return self.outputs.shape[0]


def _layer_forward(x: np.ndarray, p: dict[str, np.ndarray]) -> LayerCache:
    T = x.shape[0]
    H = p["Wh"].shape[1]
    zx = x @ p["Wx"].T + p["b"]
    gates = np.empty((T, 4 * H))
    c = np.empty((T, H))
    tanh_c = np.empty((T, H))
    h = np.empty((T, H))
    lstm_forward_loop(zx, np.ascontiguousarray(p["Wh"].T), gates, c, tanh_c, h)
    return LayerCache(x, gates, c, tanh_c, h)


def standardize(w: LstmWeights, inputs: np.ndarray) -> np.ndarray:
    return (inputs - w.input_mean) / w.input_std


def forward(w: LstmWeights, inputs) -> ForwardCache:
    """Run the stack over one sequence from zero initial state. ``w`` is not modified."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("inputs must be a non-empty (T, features) array")
    if x.shape[1] != w.arch.input_dim:
        raise ValueError(f"input width {x.shape[1]} != architecture input {w.arch.input_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    x = standardize(w, x)
    caches = []
    for p in w.layers:
        cache = _layer_forward(x, p)
        caches.append(cache)
        x = cache.h
    outputs = x @ w.proj_W.T + w.proj_b
    return ForwardCache(caches, outputs)


def predict(w: LstmWeights, inputs) -> np.ndarray:
    return forward(w, inputs).outputs


def sse_loss(outputs, targets) -> float:
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if outputs.shape != targets.shape:
        raise ValueError(f"shape mismatch: outputs {outputs.shape}, targets {targets.shape}")
    return float(np.sum((outputs - targets) ** 2))


def _layer_backward(cache: LayerCache, p: dict[str, np.ndarray], dh_in: np.ndarray):
    """Backprop one layer given dLoss/dh for every step. Returns (grads, dLoss/dx)."""
    T = cache.h.shape[0]
    dz = np.empty_like(cache.gates)
    lstm_backward_loop(np.ascontiguousarray(dh_in), p["Wh"], cache.gates, cache.c, cache.tanh_c, dz)
    grads = {
        "Wx": dz.T @ cache.x,
        "Wh": dz[1:].T @ cache.h[:-1] if T > 1 else np.zeros_like(p["Wh"]),
        "b": dz.sum(axis=0),
    }
    return grads, dz @ p["Wx"]


def backward(w: LstmWeights, cache: ForwardCache, targets) -> LstmWeights:
    """Exact gradient of ``sse_loss(cache.outputs, targets)`` for every parameter."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != cache.outputs.shape:
        raise ValueError(f"targets {targets.shape} do not match outputs {cache.outputs.shape}")
    if len(cache.layers) != len(w.layers) or cache.layers[-1].h.shape[1] != w.arch.hidden[-1]:
        raise ValueError("cache was not produced by these weights")
    grad = w.zeros_like()
    d_out = 2.0 * (cache.outputs - targets)
    grad.proj_W = d_out.T @ cache.layers[-1].h
    grad.proj_b = d_out.sum(axis=0)
    dh = d_out @ w.proj_W
    for k in range(len(w.layers) - 1, -1, -1):
        grad.layers[k], dh = _layer_backward(cache.layers[k], w.layers[k], dh)
    return grad


def loss_and_grad(w: LstmWeights, inputs, targets) -> tuple[float, LstmWeights]:
    cache = forward(w, inputs)
    return sse_loss(cache.outputs, targets), backward(w, cache, targets)


def max_relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-8)))


def numerical_gradient(w: LstmWeights, inputs, targets, eps: float = 1e-5) -> np.ndarray:
    """Central differences of the sse loss over the flattened parameter vector.

    The loss difference is formed as ``sum((y+ - y-) * (y+ + y- - 2t))`` rather than by
    subtracting two large sse totals, which keeps cancellation out of tiny components.
    """
    probe = w.copy()
    theta = w.flat()
    targets = np.asarray(targets, dtype=np.float64)
    num = np.empty_like(theta)
    for j in range(theta.size):
        saved = theta[j]
        theta[j] = saved + eps
        probe.set_flat(theta)
        plus = forward(probe, inputs).outputs
        theta[j] = saved - eps
        probe.set_flat(theta)
        minus = forward(probe, inputs).outputs
        theta[j] = saved
        num[j] = np.sum((plus - minus) * (plus + minus - 2.0 * targets)) / (2.0 * eps)
    return num


def check_gradients(
    arch: Architecture,
    seed: int = 0,
    T: int = 5,
    eps: float = 1e-5,
    corrupt: Optional[Callable[[np.ndarray], None]] = None,
) -> float:
    """Max relative error between :func:`backward` and central finite differences.

    Random weights, inputs and targets are drawn from ``seed``. ``corrupt`` may edit the
    analytic gradient vector in place before the comparison (fault injection).
    """
    rng = np.random.default_rng(seed)
    w = init_random(arch, seed)
    # Random biases too, so no gradient component is structurally near zero.
    for layer in w.layers:
        layer["b"] += rng.uniform(-0.5, 0.5, size=layer["b"].shape)
    w.proj_b += rng.uniform(-0.5, 0.5, size=w.proj_b.shape)
    inputs = rng.standard_normal((T, arch.input_dim))
    targets = rng.standard_normal((T, arch.output_dim))
    _, grad = loss_and_grad(w, inputs, targets)
    analytic = grad.flat()
    if corrupt is not None:
        corrupt(analytic)
    return max_relative_error(analytic, numerical_gradient(w, inputs, targets, eps))


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    clip_norm: float = 5.0
    patience: int = 40
    max_epochs: int = 1000
    seed: int = 0
    momentum: float = 0.0
    optimizer: str = "sgd"  # "sgd" (optionally with momentum) or "adam"
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.patience < 1 or self.max_epochs < 1:
            raise ValueError("patience and max_epochs must be at least 1")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainRecord:
    train_sse: list[float] = field(default_factory=list)
    val_sse: list[float] = field(default_factory=list)
    initial_val_sse: float = float("nan")
    best_epoch: int = 0
    best_validation_sse: float = float("inf")
    stop_reason: str = ""

    @property
    def epochs(self) -> int:
        return len(self.val_sse)

    def rows(self) -> list[tuple[int, float, float]]:
        return [(e + 1, tr, va) for e, (tr, va) in enumerate(zip(self.train_sse, self.val_sse))]

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "best_validation_sse": self.best_validation_sse,
            "initial_val_sse": self.initial_val_sse,
            "stop_reason": self.stop_reason,
        }


class EarlyStopping:
    """Tracks the best validation value; exhausted once ``patience`` epochs pass without a strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = float("inf")
        self.best_epoch = 0
        self.epoch = 0

    def update(self, value: float) -> bool:
        """Record one epoch; returns True when it is a new best."""
        self.epoch += 1
        if value < self.best:
            self.best = value
            self.best_epoch = self.epoch
            return True
        return False

    @property
    def exhausted(self) -> bool:
        return self.epoch - self.best_epoch >= self.patience


Pair = tuple[np.ndarray, np.ndarray]


def evaluate(w: LstmWeights, pairs: Sequence[Pair]) -> float:
    """Corpus-aggregated sse, summed in list order."""
    total = 0.0
    for inputs, targets in pairs:
        total += sse_loss(predict(w, inputs), targets)
    return total


def clip_gradient(grad: LstmWeights, clip_norm: float) -> float:
    """Scale ``grad`` in place to global norm <= ``clip_norm``; returns the pre-clip norm."""
    norm = math.sqrt(sum(float(np.sum(g * g)) for _, g in grad.named_params()))
    if norm > clip_norm:
        scale = clip_norm / norm
        for _, g in grad.named_params():
            g *= scale
    return norm


class TrainingDiverged(RuntimeError):
    pass


def _make_optimizer(w: LstmWeights, cfg: TrainConfig) -> Callable[[LstmWeights], None]:
    """Return an in-place update ``step(grad)`` bound to ``w``."""
    params = [p for _, p in w.named_params()]
    lr = cfg.learning_rate
    if cfg.optimizer == "adam":
        b1, b2 = cfg.adam_betas
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        t = 0

        def adam(grad: LstmWeights) -> None:
            nonlocal t
            t += 1
            scale = lr * math.sqrt(1.0 - b2**t) / (1.0 - b1**t)
            for p, g, mi, vi in zip(params, (g for _, g in grad.named_params()), m, v):
                mi *= b1
                mi += (1.0 - b1) * g
                vi *= b2
                vi += (1.0 - b2) * g * g
                p -= scale * mi / (np.sqrt(vi) + cfg.adam_eps)

        return adam
    if cfg.momentum:
        vel = [np.zeros_like(p) for p in params]

        def momentum(grad: LstmWeights) -> None:
            for p, g, vi in zip(params, (g for _, g in grad.named_params()), vel):
                vi *= cfg.momentum
                vi -= lr * g
                p += vi

        return momentum

    def sgd(grad: LstmWeights) -> None:
        for p, (_, g) in zip(params, grad.named_params()):
            p -= lr * g

    return sgd


def train(
    init: LstmWeights,
    train_set: Sequence[Pair],
    val_set: Sequence[Pair],
    cfg: TrainConfig = TrainConfig(),
    on_best: Optional[Callable[[int, LstmWeights], None]] = None,
) -> tuple[LstmWeights, TrainRecord]:
    """Per-utterance gradient descent with global-norm clipping and early stopping.

    Returns the weights of the best validation epoch (not the last one) and the record.
    ``init`` is left untouched.
    """
    cfg.validate()
    if not train_set or not val_set:
        raise ValueError("training and validation sets must be non-empty")
    w = init.copy()
    step = _make_optimizer(w, cfg)
    rng = np.random.default_rng(cfg.seed)
    record = TrainRecord(initial_val_sse=evaluate(w, val_set))
    stopper = EarlyStopping(cfg.patience)
    best = w.copy()

    for epoch in range(1, cfg.max_epochs + 1):
        epoch_sse = 0.0
        for idx in rng.permutation(len(train_set)):
            inputs, targets = train_set[idx]
            cache = forward(w, inputs)
            loss = sse_loss(cache.outputs, targets)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite training loss at epoch {epoch} (utterance {idx})")
            grad = backward(w, cache, targets)
            epoch_sse += loss
            clip_gradient(grad, cfg.clip_norm)
            step(grad)
        val = evaluate(w, val_set)
        if not math.isfinite(val):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        record.train_sse.append(epoch_sse)
        record.val_sse.append(val)
        if stopper.update(val):
            best = w.copy()
            if on_best is not None:
                on_best(epoch, best)
        logger.debug("epoch %d train %.4g val %.4g", epoch, epoch_sse, val)
        if stopper.exhausted:
            record.stop_reason = "patience_exhausted"
            break
    else:
        record.stop_reason = "max_epochs"

    record.best_epoch = stopper.best_epoch
    record.best_validation_sse = stopper.best
    return best, record
