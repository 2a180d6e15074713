"""Drive the fixed-iteration optimization for one task and persist results.

Each of the two tasks (malignancy, cell origin) is trained as a fully
independent run over the same feature vectors: 4000 Adam steps by default,
mini-batches drawn without replacement from a reshuffled epoch schedule,
batch loss and full-train-set accuracy logged on a fixed cadence.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mlp
from .errors import (
    BadMagic,
    DimensionMismatch,
    LabelMissing,
    LabelOutOfDomain,
    NonFiniteLoss,
    ShapeMismatch,
    TruncatedFile,
    UnsupportedVersion,
)

TASKS = ("malignancy", "cell_origin")

CHECKPOINT_MAGIC = b"MLPW"
CHECKPOINT_VERSION = 1

CURVE_HEADER = "iteration,loss,train_accuracy"


@dataclass(frozen=True)
class TrainConfig:
    task: str = "malignancy"
    iterations: int = 4000
    batch_size: int = 32
    hyper: mlp.AdamHyper = field(default_factory=mlp.AdamHyper)
    seed: int = 42
    log_every: int = 10
    hidden_activation: str = "relu"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        for name in ("iterations", "batch_size", "log_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.hidden_activation not in mlp.ACTIVATIONS:
            raise ValueError(f"hidden_activation must be one of {mlp.ACTIVATIONS}")


@dataclass(frozen=True)
class LogRow:
    iteration: int
    loss: float
    train_accuracy: float


@dataclass(frozen=True)
class TrainingLog:
    rows: tuple[LogRow, ...]

    def final(self) -> LogRow:
        return self.rows[-1]


class _EpochSampler:
    """Yields batches from reshuffled permutations, so every index is
    sampled exactly once before any index repeats."""

    def __init__(self, n: int, rng: np.random.Generator):
        self._n = n
        self._rng = rng
        self._order = rng.permutation(n)
        self._pos = 0

    def next_batch(self, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.intp)
        filled = 0
        while filled < size:
            if self._pos == self._n:
                self._order = self._rng.permutation(self._n)
                self._pos = 0
            take = min(size - filled, self._n - self._pos)
            out[filled : filled + take] = self._order[self._pos : self._pos + take]
            self._pos += take
            filled += take
        return out


def train_task(
    features: list[tuple[str, np.ndarray]],
    labels: dict[str, int],
    config: TrainConfig,
) -> tuple[mlp.MlpParams, TrainingLog]:
    """Run exactly ``config.iterations`` Adam steps and return the final
    parameters plus the training curve.

    ``features`` are (image_id, 1000-vector) pairs; every id needs a
    binary label. The logged loss is the batch loss at that iteration;
    the logged accuracy is over all of ``features`` after the update.
    """
    if not features:
        raise ShapeMismatch("features are empty")
    missing = [image_id for image_id, _ in features if image_id not in labels]
    if missing:
        raise LabelMissing(f"{len(missing)} feature id(s) without a label: " + ", ".join(missing[:20]))

    x = np.stack([np.asarray(vec, dtype=np.float32).reshape(-1) for _, vec in features])
    if x.shape[1] != mlp.INPUT_DIM:
        raise ShapeMismatch(f"feature vectors must have {mlp.INPUT_DIM} components, got {x.shape[1]}")
    y = np.array([labels[image_id] for image_id, _ in features], dtype=np.intp)
    if y.size and (y.min() < 0 or y.max() > 1):
        raise LabelOutOfDomain("labels must be 0 or 1")

    n = x.shape[0]
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds dataset size {n}")

    params = mlp.init_params(config.seed)
    state = mlp.init_adam_state(params)
    sampler = _EpochSampler(n, np.random.default_rng([int(config.seed) & (2**64 - 1), 1]))

    rows: list[LogRow] = []
    for iteration in range(1, config.iterations + 1):
        idx = sampler.next_batch(config.batch_size)
        trace = mlp.forward(params, x[idx], config.hidden_activation)
        batch_loss = mlp.mean_cross_entropy(trace.probs, y[idx])
        if not np.isfinite(batch_loss):
            raise NonFiniteLoss(f"non-finite loss at iteration {iteration}")
        grads = mlp.backward(trace, params, y[idx])
        params, state = mlp.adam_step(params, grads, state, config.hyper)

        if iteration % config.log_every == 0 or iteration == config.iterations:
            probs = mlp.forward(params, x, config.hidden_activation).probs
            predictions = probs[:, 1] > 0.5
            accuracy = float(np.mean(predictions == (y == 1)))
            rows.append(LogRow(iteration=iteration, loss=batch_loss, train_accuracy=accuracy))

    return params, TrainingLog(rows=tuple(rows))


# --- checkpoint binary format -------------------------------------------
# magic "MLPW" | u32 version=1 | u32 n_in, n_hidden, n_out |
# little-endian float32: w1 row-major, b1, w2 row-major, b2

_HEADER = struct.Struct("<4sIIII")


def save_checkpoint(params: mlp.MlpParams, path: str | Path) -> None:
    n_in, n_hidden, n_out = params.dims
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, n_in, n_hidden, n_out))
        for tensor in (params.w1, params.b1, params.w2, params.b2):
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> mlp.MlpParams:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise TruncatedFile(f"{path}: {len(blob)} bytes is shorter than the header")
    magic, version, n_in, n_hidden, n_out = _HEADER.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersion(f"{path}: unsupported version {version}")
    if min(n_in, n_hidden, n_out) < 1:
        raise DimensionMismatch(f"{path}: non-positive dimensions {(n_in, n_hidden, n_out)}")

    counts = (n_hidden * n_in, n_hidden, n_out * n_hidden, n_out)
    expected = _HEADER.size + 4 * sum(counts)
    if len(blob) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, got {len(blob)}")
    if len(blob) > expected:
        raise DimensionMismatch(f"{path}: {len(blob) - expected} trailing byte(s) beyond declared dims")

    values = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).astype(np.float32)
    offsets = np.cumsum((0,) + counts)
    w1, b1, w2, b2 = (values[offsets[i] : offsets[i + 1]] for i in range(4))
    return mlp.MlpParams(
        w1=w1.reshape(n_hidden, n_in),
        b1=b1,
        w2=w2.reshape(n_out, n_hidden),
        b2=b2,
    )


def write_training_log(log: TrainingLog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CURVE_HEADER + "\n")
        for row in log.rows:
            fh.write(f"{row.iteration},{row.loss!r},{row.train_accuracy!r}\n")


def read_training_log(path: str | Path) -> TrainingLog:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CURVE_HEADER:
        raise ValueError(f"{path}: expected header {CURVE_HEADER!r}")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        iteration, loss, accuracy = line.split(",")
        rows.append(LogRow(int(iteration), float(loss), float(accuracy)))
    return TrainingLog(rows=tuple(rows))


def make_separable_features(
    n: int = 200,
    dim: int = mlp.INPUT_DIM,
    seed: int = 0,
    separation: float = 0.3,
    noise: float = 0.05,
) -> tuple[list[tuple[str, np.ndarray]], dict[str, int]]:
    """Two Gaussian clusters with means +-separation*u for a random unit
    direction u: linearly separable with overwhelming probability at the
    default 6-sigma margin, used as an end-to-end training oracle."""
    rng = np.random.default_rng(int(seed) & (2**64 - 1))
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)

    features = []
    labels = {}
    for i in range(n):
        label = i % 2
        mean = (separation if label == 1 else -separation) * direction
        vec = (mean + noise * rng.normal(size=dim)).astype(np.float32)
        image_id = f"synth_{i:04d}"
        features.append((image_id, vec))
        labels[image_id] = label
    return features, labels
