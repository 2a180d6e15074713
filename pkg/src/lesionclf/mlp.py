"""The two-layer feed-forward classifier, implemented from first principles.

Forward pass, softmax, cross-entropy, analytic backpropagation and Adam
updates are all hand-written here; no autodiff. Parameters and optimizer
state are immutable values: every update returns new instances.

Shapes follow the 1000-1000-2 architecture (1000 inputs, 1000 hidden
units, 2 output units with softmax), but the functions work at any
dimensions so the gradient math can be checked on small instances in
double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    LabelOutOfDomain,
    NonFiniteGradient,
    NonFiniteInput,
    ShapeMismatch,
)

INPUT_DIM = 1000
HIDDEN_DIM = 1000
OUTPUT_DIM = 2

# -ln(0) is avoided by clipping the predicted probability at this floor;
# the bound is part of the loss contract, not a tunable.
LOSS_CLIP = 1e-12

ACTIVATIONS = ("relu", "tanh")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class MlpParams:
    """Weights and biases; w1 is (hidden, in), w2 is (out, hidden)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.w1.shape[1], self.w1.shape[0], self.w2.shape[0]


@dataclass(frozen=True)
class Gradients:
    dw1: np.ndarray
    db1: np.ndarray
    dw2: np.ndarray
    db2: np.ndarray


@dataclass(frozen=True)
class AdamState:
    """First/second moment buffers plus the step counter."""

    m: Gradients
    v: Gradients
    t: int


@dataclass(frozen=True)
class AdamHyper:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate >= 0.0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {value}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass(frozen=True)
class ForwardTrace:
    """All forward intermediates, retained for the backward pass."""

    x: np.ndarray
    pre_h: np.ndarray
    h: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    activation: str


def init_params(
    seed: int,
    n_in: int = INPUT_DIM,
    n_hidden: int = HIDDEN_DIM,
    n_out: int = OUTPUT_DIM,
    dtype=np.float32,
) -> MlpParams:
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(int(seed) & _MASK64)
    bound1 = np.sqrt(6.0 / (n_in + n_hidden))
    bound2 = np.sqrt(6.0 / (n_hidden + n_out))
    return MlpParams(
        w1=rng.uniform(-bound1, bound1, size=(n_hidden, n_in)).astype(dtype),
        b1=np.zeros(n_hidden, dtype=dtype),
        w2=rng.uniform(-bound2, bound2, size=(n_out, n_hidden)).astype(dtype),
        b2=np.zeros(n_out, dtype=dtype),
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis (max-subtracted exponentials)."""
    z = np.asarray(logits)
    if not np.isfinite(z).all():
        raise NonFiniteInput("softmax input contains non-finite values")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(params: MlpParams, x: np.ndarray, activation: str = "relu") -> ForwardTrace:
    """Run the network on one feature vector or a (batch, features) matrix."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")
    x = np.asarray(x)
    n_in = params.w1.shape[1]
    if x.ndim not in (1, 2) or x.shape[-1] != n_in:
        raise ShapeMismatch(f"input shape {x.shape} does not match network input width {n_in}")

    pre_h = x @ params.w1.T + params.b1
    h = np.maximum(pre_h, 0) if activation == "relu" else np.tanh(pre_h)
    logits = h @ params.w2.T + params.b2
    return ForwardTrace(x=x, pre_h=pre_h, h=h, logits=logits, probs=softmax(logits), activation=activation)


def _check_labels(labels: np.ndarray, n_out: int) -> np.ndarray:
    if labels.dtype.kind not in "iub":
        raise LabelOutOfDomain(f"labels must be integers, got dtype {labels.dtype}")
    labels = labels.astype(np.intp)
    if labels.size and (labels.min() < 0 or labels.max() >= n_out):
        raise LabelOutOfDomain(f"labels must be in [0, {n_out - 1}]")
    return labels


def cross_entropy_loss(probs: np.ndarray, label: int) -> float:
    """-ln of the probability assigned to the true class, clipped at 1e-12."""
    probs = np.asarray(probs)
    if probs.ndim != 1:
        raise ShapeMismatch(f"expected a probability vector, got shape {probs.shape}")
    if not isinstance(label, (int, np.integer)) or not 0 <= label < probs.shape[0]:
        raise LabelOutOfDomain(f"label {label!r} out of domain for {probs.shape[0]} classes")
    return float(-np.log(max(float(probs[label]), LOSS_CLIP)))


def mean_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean clipped cross-entropy over a (batch, classes) probability matrix."""
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ShapeMismatch(f"shapes {probs.shape} / {labels.shape} are not a batch of predictions")
    labels = _check_labels(labels, probs.shape[1])
    picked = probs[np.arange(probs.shape[0]), labels]
    return float(np.mean(-np.log(np.maximum(picked, LOSS_CLIP))))


def backward(trace: ForwardTrace, params: MlpParams, labels) -> Gradients:
    """Analytic gradients of the (mean) cross-entropy w.r.t. all parameters.

    For a single-example trace this is the per-example gradient; for a
    batched trace the gradients of the mean batch loss.
    """
    labels = np.asarray(labels)
    single = trace.x.ndim == 1

    x = trace.x[None, :] if single else trace.x
    pre_h = trace.pre_h[None, :] if single else trace.pre_h
    h = trace.h[None, :] if single else trace.h
    probs = trace.probs[None, :] if single else trace.probs
    labels = labels.reshape(-1)

    batch, n_out = probs.shape
    if labels.shape[0] != batch:
        raise ShapeMismatch(f"{labels.shape[0]} labels for a batch of {batch}")
    labels = _check_labels(labels, n_out)

    dlogits = probs.copy()
    dlogits[np.arange(batch), labels] -= 1.0
    dlogits /= batch

    dw2 = dlogits.T @ h
    db2 = dlogits.sum(axis=0)
    dh = dlogits @ params.w2
    if trace.activation == "relu":
        dpre_h = dh * (pre_h > 0)
    else:
        dpre_h = dh * (1.0 - h * h)
    dw1 = dpre_h.T @ x
    db1 = dpre_h.sum(axis=0)
    return Gradients(dw1=dw1, db1=db1, dw2=dw2, db2=db2)


def _zero_grads(params: MlpParams) -> Gradients:
    return Gradients(
        np.zeros_like(params.w1),
        np.zeros_like(params.b1),
        np.zeros_like(params.w2),
        np.zeros_like(params.b2),
    )


def init_adam_state(params: MlpParams) -> AdamState:
    return AdamState(m=_zero_grads(params), v=_zero_grads(params), t=0)


def adam_step(
    params: MlpParams, grads: Gradients, state: AdamState, hyper: AdamHyper
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update; returns new params and new state.

    m' = b1*m + (1-b1)*g;  v' = b2*v + (1-b2)*g^2;
    theta' = theta - lr * (m'/(1-b1^t')) / (sqrt(v'/(1-b2^t')) + eps).
    """
    for g in (grads.dw1, grads.db1, grads.dw2, grads.db2):
        if not np.isfinite(g).all():
            raise NonFiniteGradient("gradient contains non-finite values")

    t = state.t + 1
    bias1 = 1.0 - hyper.beta1**t
    bias2 = 1.0 - hyper.beta2**t

    new_params = []
    new_m = []
    new_v = []
    for theta, g, m, v in zip(
        (params.w1, params.b1, params.w2, params.b2),
        (grads.dw1, grads.db1, grads.dw2, grads.db2),
        (state.m.dw1, state.m.db1, state.m.dw2, state.m.db2),
        (state.v.dw1, state.v.db1, state.v.dw2, state.v.db2),
    ):
        g = g.astype(theta.dtype, copy=False)
        m_next = hyper.beta1 * m
        m_next += (1.0 - hyper.beta1) * g
        v_next = hyper.beta2 * v
        v_next += (1.0 - hyper.beta2) * (g * g)
        denom = np.sqrt(v_next / bias2)
        denom += hyper.epsilon
        step = (hyper.learning_rate / bias1) * m_next
        step /= denom
        new_params.append(theta - step)
        new_m.append(m_next)
        new_v.append(v_next)

    return (
        MlpParams(*new_params),
        AdamState(m=Gradients(*new_m), v=Gradients(*new_v), t=t),
    )
