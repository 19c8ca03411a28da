"""Desk-scale training engine: dense nets, manual backprop, SGD momentum.

Parameters live in one flat float64 vector (per layer: weight matrix in
row-major order, then bias) so checkpoints and gradient checks can treat
the model as a single point in R^n. Losses are never sanitized: an
overflowed or NaN cross-entropy propagates out unchanged, because the
controller upstream reacts to non-finite observations.
"""

from __future__ import annotations

import math
import struct
import time
from dataclasses import dataclass, replace

import numpy as np

from aalr.errors import DomainError, FormatError, ShapeError

__all__ = [
    "Dataset",
    "SgdConfig",
    "AttackConfig",
    "Model",
    "EpochRecord",
    "num_params",
    "init_model",
    "logits",
    "predict",
    "accuracy",
    "forward_loss",
    "backward",
    "input_gradient",
    "sgd_step",
    "fgsm",
    "train_epoch",
    "make_synthetic",
    "load_idx",
    "SYNTHETIC_KINDS",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """Feature matrix in [0,1]-ish units plus integer class labels."""

    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = ""

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.inputs, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        if x.ndim != 2 or y.ndim != 1:
            raise ShapeError(f"inputs must be 2-d and labels 1-d, got {x.shape} and {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise ShapeError(f"{x.shape[0]} inputs vs {y.shape[0]} labels")
        if x.shape[0] < 1:
            raise ShapeError("dataset is empty")
        if not np.isfinite(x).all():
            raise DomainError("inputs contain non-finite values")
        if self.n_classes < 2:
            raise DomainError(f"need at least 2 classes, got {self.n_classes}")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise DomainError(f"labels must lie in [0, {self.n_classes}), got "
                              f"[{y.min()}, {y.max()}]")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def take(self, index) -> "Dataset":
        """Row subset as a new Dataset (used for mini-batches)."""
        return Dataset(self.inputs[index], self.labels[index], self.n_classes, self.name)


@dataclass(frozen=True)
class SgdConfig:
    momentum: float = 0.9
    weight_decay: float = 0.0
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise DomainError(f"momentum must be in [0, 1), got {self.momentum!r}")
        if not self.weight_decay >= 0.0:
            raise DomainError(f"weight_decay must be >= 0, got {self.weight_decay!r}")
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class AttackConfig:
    """Single-step FGSM settings. ``alpha`` is carried for config parity
    with iterated attacks but the single-step perturbation uses epsilon."""

    epsilon: float
    alpha: float
    enabled: bool = True

    def __post_init__(self):
        if self.enabled:
            if not 0.0 < self.epsilon < 1.0:
                raise DomainError(f"epsilon must be in (0, 1), got {self.epsilon!r}")
            if self.alpha > self.epsilon:
                raise DomainError(f"alpha {self.alpha!r} exceeds epsilon {self.epsilon!r}")


@dataclass(frozen=True)
class Model:
    """Dense classifier: hidden activations plus a softmax head, with every
    weight and bias packed into ``params``."""

    layer_sizes: tuple[int, ...]
    activation: str
    params: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ShapeError(f"layer sizes must be >= 1 with input and output, got {sizes}")
        if self.activation not in ("relu", "tanh"):
            raise DomainError(f"activation must be 'relu' or 'tanh', got {self.activation!r}")
        p = np.ascontiguousarray(np.asarray(self.params, dtype=np.float64)).ravel()
        expected = num_params(sizes)
        if p.size != expected:
            raise ShapeError(f"params has {p.size} values, layout needs {expected}")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "params", p)

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class EpochRecord:
    """One epoch of telemetry. ``train_loss`` is the mean over mini-batch
    losses as trained; ``eval_loss`` is the post-epoch full-set loss the
    controller observes."""

    epoch: int
    lr: float
    train_loss: float
    eval_loss: float
    accuracy: float
    wall_ms: float


def num_params(layer_sizes) -> int:
    return sum((a + 1) * b for a, b in zip(layer_sizes, layer_sizes[1:]))


def init_model(layer_sizes, seed: int, activation: str = "relu") -> Model:
    """He-style uniform init: W ~ U(+-sqrt(6/fan_in)), biases zero."""
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        limit = math.sqrt(6.0 / fan_in)
        chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return Model(sizes, activation, np.concatenate(chunks))


def _layers(model: Model):
    """Per-layer (W, b) views into the flat parameter vector."""
    out = []
    offset = 0
    p = model.params
    for fan_in, fan_out in zip(model.layer_sizes, model.layer_sizes[1:]):
        w = p[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = p[offset : offset + fan_out]
        offset += fan_out
        out.append((w, b))
    return out


def _check_batch(model: Model, batch: Dataset):
    if batch.inputs.shape[1] != model.layer_sizes[0]:
        raise ShapeError(
            f"batch has {batch.inputs.shape[1]} features, model expects {model.layer_sizes[0]}"
        )
    if batch.n_classes != model.n_classes:
        raise ShapeError(
            f"batch has {batch.n_classes} classes, model outputs {model.n_classes}"
        )


def _forward(model: Model, x: np.ndarray):
    """Returns (activations per layer incl. input, final logits)."""
    acts = [x]
    layers = _layers(model)
    with np.errstate(over="ignore", invalid="ignore"):
        for i, (w, b) in enumerate(layers):
            z = acts[-1] @ w + b
            if i < len(layers) - 1:
                z = np.maximum(z, 0.0) if model.activation == "relu" else np.tanh(z)
            acts.append(z)
    return acts[:-1], acts[-1]


def logits(model: Model, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise ShapeError(f"inputs shape {x.shape} does not match input width "
                         f"{model.layer_sizes[0]}")
    return _forward(model, x)[1]


def _log_softmax(z: np.ndarray) -> np.ndarray:
    # max-shifted for stability; NaN rows stay NaN rather than erroring
    with np.errstate(over="ignore", invalid="ignore"):
        shifted = z - np.max(z, axis=1, keepdims=True)
        return shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return np.exp(_log_softmax(z))


def predict(model: Model, x: np.ndarray) -> np.ndarray:
    return np.argmax(logits(model, x), axis=1)


def accuracy(model: Model, dataset: Dataset) -> float:
    _check_batch(model, dataset)
    return float(np.mean(predict(model, dataset.inputs) == dataset.labels))


def forward_loss(model: Model, batch: Dataset) -> float:
    """Mean cross-entropy over the batch; non-finite values flow through."""
    _check_batch(model, batch)
    z = _forward(model, batch.inputs)[1]
    log_p = _log_softmax(z)
    with np.errstate(invalid="ignore"):
        return float(-np.mean(log_p[np.arange(len(batch)), batch.labels]))


def backward(model: Model, batch: Dataset) -> np.ndarray:
    """Gradient of forward_loss in the flat parameter layout.

    Pure loss gradient: weight decay is applied by sgd_step, not here, so
    finite-difference checks against forward_loss hold coordinate-wise.
    """
    _check_batch(model, batch)
    x, y = batch.inputs, batch.labels
    n = len(batch)
    acts, z = _forward(model, x)
    layers = _layers(model)

    with np.errstate(over="ignore", invalid="ignore"):
        delta = softmax(z)
        delta[np.arange(n), y] -= 1.0
        delta /= n

        grads = [None] * len(layers)
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = delta @ w.T
                a = acts[i]
                delta = delta * (a > 0) if model.activation == "relu" else delta * (1.0 - a * a)

    return np.concatenate([np.concatenate((gw.ravel(), gb)) for gw, gb in grads])


def input_gradient(model: Model, batch: Dataset) -> np.ndarray:
    """Gradient of forward_loss w.r.t. the batch inputs (for attacks)."""
    _check_batch(model, batch)
    x, y = batch.inputs, batch.labels
    n = len(batch)
    acts, z = _forward(model, x)
    layers = _layers(model)
    with np.errstate(over="ignore", invalid="ignore"):
        delta = softmax(z)
        delta[np.arange(n), y] -= 1.0
        delta /= n
        for i in range(len(layers) - 1, 0, -1):
            delta = delta @ layers[i][0].T
            a = acts[i]
            delta = delta * (a > 0) if model.activation == "relu" else delta * (1.0 - a * a)
        return delta @ layers[0][0].T


def sgd_step(
    model: Model, velocity: np.ndarray, gradient: np.ndarray, lr: float, config: SgdConfig
) -> tuple[Model, np.ndarray]:
    """v <- momentum*v + g + weight_decay*w;  w <- w - lr*v."""
    if not lr > 0:
        raise DomainError(f"lr must be positive, got {lr!r}")
    if velocity.shape != model.params.shape or gradient.shape != model.params.shape:
        raise ShapeError("velocity/gradient do not match the parameter layout")
    with np.errstate(over="ignore", invalid="ignore"):
        v = config.momentum * velocity + gradient + config.weight_decay * model.params
        w = model.params - lr * v
    return replace(model, params=w), v


def fgsm(model: Model, batch: Dataset, epsilon: float) -> Dataset:
    """x' = clip_[0,1](x + epsilon * sign(dJ/dx)); labels unchanged."""
    if not 0.0 <= epsilon < 1.0:
        raise DomainError(f"epsilon must be in [0, 1), got {epsilon!r}")
    if epsilon == 0.0:
        return batch
    g = input_gradient(model, batch)
    perturbed = np.clip(batch.inputs + epsilon * np.sign(g), 0.0, 1.0)
    return Dataset(perturbed, batch.labels, batch.n_classes, batch.name)


def train_epoch(
    model: Model,
    velocity: np.ndarray,
    dataset: Dataset,
    lr: float,
    config: SgdConfig,
    epoch: int,
    attack: AttackConfig | None = None,
) -> tuple[Model, np.ndarray, EpochRecord]:
    """One shuffled pass in mini-batches, then a full-set evaluation.

    The shuffle uses a generator seeded by (seed, epoch), so epoch k's
    order is reproducible regardless of how many times earlier epochs were
    rolled back and retrained. A non-finite batch loss stops the pass
    immediately: the step that produced it has already poisoned the
    parameters and the controller needs to see the damage, not train on it.
    A zero learning rate evaluates every batch but never steps, leaving
    parameters and velocity untouched.
    """
    _check_batch(model, dataset)
    if config.batch_size > len(dataset):
        raise DomainError(
            f"batch_size {config.batch_size} exceeds dataset size {len(dataset)}"
        )
    if lr < 0.0 or not math.isfinite(lr):
        raise DomainError(f"lr must be finite and >= 0, got {lr!r}")
    started = time.perf_counter()
    order = np.random.default_rng((config.seed, epoch)).permutation(len(dataset))
    batch_losses = []
    for start in range(0, len(dataset), config.batch_size):
        batch = dataset.take(order[start : start + config.batch_size])
        if attack is not None and attack.enabled:
            batch = fgsm(model, batch, attack.epsilon)
        loss = forward_loss(model, batch)
        batch_losses.append(loss)
        if not math.isfinite(loss):
            break
        if lr > 0.0:
            grad = backward(model, batch)
            model, velocity = sgd_step(model, velocity, grad, lr, config)

    with np.errstate(invalid="ignore"):
        train_loss = float(np.mean(batch_losses))
    eval_loss = forward_loss(model, dataset)
    acc = accuracy(model, dataset)
    wall_ms = (time.perf_counter() - started) * 1000.0
    return model, velocity, EpochRecord(epoch, lr, train_loss, eval_loss, acc, wall_ms)


def _minmax_to_unit(points: np.ndarray) -> np.ndarray:
    lo = points.min(axis=0)
    span = points.max(axis=0) - lo
    span[span == 0.0] = 1.0
    return (points - lo) / span


def _balanced_counts(n: int, k: int) -> list[int]:
    return [n // k + (1 if i < n % k else 0) for i in range(k)]


def _make_blobs(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    # Gaussian clouds elongated along the 45-degree diagonal. The tilt makes
    # the cleanest separating line differ from the most attack-resistant one,
    # which keeps the set linearly separable but rewards robust training.
    centers = np.array([[0.35, 0.5], [0.65, 0.5]])
    tilt = math.radians(45.0)
    rot = np.array([[math.cos(tilt), -math.sin(tilt)],
                    [math.sin(tilt), math.cos(tilt)]])
    shape = rot @ np.diag([0.085, 0.02])
    xs, ys = [], []
    for label, count in enumerate(_balanced_counts(n, 2)):
        pts = centers[label] + rng.standard_normal((count, 2)) @ shape.T
        xs.append(pts)
        ys.append(np.full(count, label))
    x = np.clip(np.concatenate(xs), 0.0, 1.0)
    return x, np.concatenate(ys)


def _make_moons(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    counts = _balanced_counts(n, 2)
    t0 = np.linspace(0.0, math.pi, counts[0])
    t1 = np.linspace(0.0, math.pi, counts[1])
    upper = np.column_stack((np.cos(t0), np.sin(t0)))
    lower = np.column_stack((1.0 - np.cos(t1), 0.5 - np.sin(t1)))
    x = np.concatenate((upper, lower)) + 0.08 * rng.standard_normal((n, 2))
    y = np.concatenate((np.zeros(counts[0]), np.ones(counts[1])))
    return _minmax_to_unit(x), y


def _make_spirals(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for label, count in enumerate(_balanced_counts(n, 2)):
        # 1.2 revolutions: enough wrap that no half-plane separates the
        # arms, shallow enough that a small dense net can still carve it
        t = np.linspace(0.25, 2.4 * math.pi, count)
        r = t / (2.4 * math.pi)
        angle = t + label * math.pi
        pts = np.column_stack((r * np.cos(angle), r * np.sin(angle)))
        pts += 0.02 * rng.standard_normal((count, 2))
        xs.append(pts)
        ys.append(np.full(count, label))
    return _minmax_to_unit(np.concatenate(xs)), np.concatenate(ys)


SYNTHETIC_KINDS = {
    "blobs": _make_blobs,
    "moons": _make_moons,
    "spirals": _make_spirals,
}


def make_synthetic(kind: str, n: int, seed: int) -> Dataset:
    """Deterministic 2-d two-class toy sets, balanced, inside [0,1]^2."""
    if kind not in SYNTHETIC_KINDS:
        raise DomainError(f"unknown dataset kind {kind!r}; choose from "
                          f"{sorted(SYNTHETIC_KINDS)}")
    if n < 2:
        raise DomainError(f"need n >= 2 samples, got {n}")
    x, y = SYNTHETIC_KINDS[kind](n, np.random.default_rng(seed))
    return Dataset(x, y, n_classes=2, name=kind)


def _read_idx(path, expected_magic: int) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated header at byte {len(raw)}")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expected_magic:
        raise FormatError(
            f"{path}: bad magic 0x{magic:08x} at byte 0, expected 0x{expected_magic:08x}"
        )
    n_dims = magic & 0xFF
    header_end = 4 + 4 * n_dims
    if len(raw) < header_end:
        raise FormatError(f"{path}: truncated dimension header at byte {len(raw)}")
    dims = struct.unpack(f">{n_dims}I", raw[4:header_end])
    expected_len = header_end + int(np.prod(dims))
    if len(raw) < expected_len:
        raise FormatError(f"{path}: truncated data at byte {len(raw)}, expected {expected_len}")
    data = np.frombuffer(raw, dtype=np.uint8, count=int(np.prod(dims)), offset=header_end)
    return data.reshape(dims)


def load_idx(images_path, labels_path) -> Dataset:
    """Load a paired image/label file set; pixels scale to [0,1] exactly."""
    images = _read_idx(images_path, IDX_IMAGE_MAGIC)
    labels = _read_idx(labels_path, IDX_LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"{images_path} has {images.shape[0]} images but {labels_path} "
            f"has {labels.shape[0]} labels"
        )
    flat = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    n_classes = int(labels.max()) + 1 if labels.size else 0
    return Dataset(flat, labels.astype(np.int64), max(n_classes, 2), name="idx")
