"""Dense ReLU network with hand-written reverse mode and Adam."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .types import DimensionMismatch, GatedPriceError


class BadDims(GatedPriceError):
    pass


class StaleCache(GatedPriceError):
    pass


class ShapeMismatch(GatedPriceError):
    pass


ROLES = {"classifier": "sigmoid", "regressor": "identity"}


@dataclass
class MlpModel:
    layer_dims: List[int]
    weights: List[np.ndarray]  # (fan_in, fan_out)
    biases: List[np.ndarray]
    role: str
    hidden_activation: str = "relu"
    version: int = field(default=0, compare=False)

    @property
    def output_activation(self) -> str:
        return ROLES[self.role]

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def params(self) -> List[np.ndarray]:
        """Parameters in storage order: W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(list(self.layer_dims), [W.copy() for W in self.weights],
                        [b.copy() for b in self.biases], self.role, self.hidden_activation)

    def touch(self):
        self.version += 1


@dataclass
class Cache:
    model_id: int
    version: int
    activations: List[np.ndarray]  # layer inputs; activations[0] is x
    preacts: List[np.ndarray]
    output: np.ndarray


@dataclass
class Gradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def params(self) -> List[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out


def _check_dims(layer_dims):
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d < 1 for d in dims) or dims[-1] != 1:
        raise BadDims(f"layer dims must be positive with a final output of 1, got {list(layer_dims)}")
    return dims


def mlp_init(layer_dims: Sequence[int], role: str, seed: int) -> MlpModel:
    dims = _check_dims(layer_dims)
    if role not in ROLES:
        raise BadDims(f"role must be one of {sorted(ROLES)}, got {role!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases, role)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(m: MlpModel, x) -> Tuple[np.ndarray, Cache]:
    """Run a batch ``(n, d)`` (or a single ``(d,)`` vector) through the network.

    Returns one output per row and the cache needed by :func:`backward`.
    Sigmoid outputs can round to exactly 0 or 1 for very large logits;
    callers that take logs must clamp.
    """
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != m.input_dim:
        raise DimensionMismatch(f"input dim {X.shape[1]} != model input dim {m.input_dim}")
    activations, preacts = [X], []
    h = X
    last = len(m.weights) - 1
    for i, (W, b) in enumerate(zip(m.weights, m.biases)):
        z = h @ W + b
        preacts.append(z)
        if i < last:
            h = np.maximum(z, 0.0)
            activations.append(h)
    z_out = preacts[-1][:, 0]
    out = sigmoid(z_out) if m.role == "classifier" else z_out.copy()
    return out, Cache(id(m), m.version, activations, preacts, out)


def predict(m: MlpModel, x) -> np.ndarray:
    return forward(m, x)[0]


def backward(m: MlpModel, cache: Cache, dout) -> Gradients:
    """Gradients of ``sum_i dout[i] * output[i]`` with respect to every parameter."""
    if cache.model_id != id(m) or cache.version != m.version:
        raise StaleCache("cache was produced by a different model state; rerun forward")
    g = np.asarray(dout, dtype=np.float64).reshape(-1)
    if g.shape[0] != cache.output.shape[0]:
        raise ShapeMismatch(f"dout has {g.shape[0]} rows, cache has {cache.output.shape[0]}")
    if m.role == "classifier":
        s = cache.output
        g = g * s * (1.0 - s)
    delta = g[:, None]
    dW = [None] * len(m.weights)
    db = [None] * len(m.weights)
    for i in range(len(m.weights) - 1, -1, -1):
        dW[i] = cache.activations[i].T @ delta
        db[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ m.weights[i].T) * (cache.preacts[i - 1] > 0)
    return Gradients(dW, db)


@dataclass
class AdamState:
    lr: float
    m: List[np.ndarray]
    v: List[np.ndarray]
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def for_model(cls, model: MlpModel, lr: float, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        if not lr > 0:
            raise ValueError(f"lr must be > 0, got {lr}")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        zeros = [np.zeros_like(p) for p in model.params()]
        return cls(lr, zeros, [z.copy() for z in zeros], beta1, beta2, eps)


def adam_step(model: MlpModel, grads: Gradients, state: AdamState) -> Tuple[MlpModel, AdamState]:
    """Bias-corrected Adam update, applied in place."""
    params, gs = model.params(), grads.params()
    if len(gs) != len(params) or any(p.shape != g.shape for p, g in zip(params, gs)):
        raise ShapeMismatch("gradients do not match model parameter shapes")
    if len(state.m) != len(params) or any(p.shape != mm.shape for p, mm in zip(params, state.m)):
        raise ShapeMismatch("Adam moments do not match model parameter shapes")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, mm, vv in zip(params, gs, state.m, state.v):
        mm *= b1
        mm += (1.0 - b1) * g
        vv *= b2
        vv += (1.0 - b2) * g * g
        p -= state.lr * (mm / c1) / (np.sqrt(vv / c2) + state.eps)
    model.touch()
    return model, state


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    n_checked: int

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error < self.tolerance)


def relative_error(a, b, floor=1e-7):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def grad_check(
    m: MlpModel,
    loss_fn: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    x,
    tolerance: float = 1e-4,
    h: float = 1e-5,
    backward_fn: Optional[Callable] = None,
) -> GradCheckReport:
    """Compare analytic parameter gradients against central differences.

    ``loss_fn`` maps the network outputs to ``(loss, dloss/doutputs)``.
    """
    backward_fn = backward_fn or backward
    out, cache = forward(m, x)
    _, dout = loss_fn(out)
    analytic = backward_fn(m, cache, dout).params()
    worst, count = 0.0, 0
    for p, g in zip(m.params(), analytic):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            plus = loss_fn(forward(m, x)[0])[0]
            flat[j] = orig - h
            minus = loss_fn(forward(m, x)[0])[0]
            flat[j] = orig
            numeric = (plus - minus) / (2.0 * h)
            worst = max(worst, float(relative_error(gflat[j], numeric)))
            count += 1
    m.touch()
    return GradCheckReport(worst, tolerance, count)


def min_relu_margin(m: MlpModel, x) -> float:
    """Smallest |pre-activation| over hidden units; small values sit near a ReLU kink."""
    _, cache = forward(m, x)
    hidden = cache.preacts[:-1]
    if not hidden:
        return float("inf")
    return float(min(np.abs(z).min() for z in hidden))
