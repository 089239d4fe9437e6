"""Minimal reverse-mode autodiff core on numpy.

Provides exactly the ops the embedding networks need: dense layers,
gather/segment ops for attention over edges, row normalization, the
Huber and contrastive losses, an adaptive-moment optimizer, and a
finite-difference gradient checker. Computation is float64 and
deterministic given a seed; parameters serialize to a JSON manifest
plus a little-endian float32 blob.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np


class NonFiniteLoss(ArithmeticError):
    """Training loss became NaN or infinite; the run should be aborted."""


# ---------------------------------------------------------------------------
# losses (scalar forms)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LossConfig:
    """Contrastive-loss shape: Huber transition, target separation, pair mix."""

    delta: float = 1.0
    target_separation: float = 2.0
    phi: float = 0.5

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if not 0.0 < self.target_separation <= 2.0:
            raise ValueError("target_separation must be in (0, 2]")
        if not 0.0 < self.phi < 1.0:
            raise ValueError("phi must be in (0, 1)")


def huber(a: float, delta: float = 1.0) -> float:
    """Quadratic inside |a| <= delta, linear outside; C1 at the transition."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    a = abs(a)
    if a <= delta:
        return 0.5 * a * a
    return delta * (a - 0.5 * delta)


def contrastive_loss(d: float, y: int, cfg: LossConfig = LossConfig()) -> float:
    """Penalty on a pair at embedding distance d.

    y=0 (same agent and day) pulls the distance toward 0; y=1 (random
    pair) pulls it toward the target separation.
    """
    return huber(d - cfg.target_separation * y, cfg.delta)


# ---------------------------------------------------------------------------
# tensors and ops
# ---------------------------------------------------------------------------


class Tensor:
    """A node in the computation graph: value, accumulated grad, backward closure."""

    __slots__ = ("data", "grad", "needs_grad", "_parents", "_backward", "_grad_borrowed")

    def __init__(self, data, needs_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.needs_grad = needs_grad
        self._parents = parents
        self._backward = backward
        self._grad_borrowed = False

    @property
    def shape(self):
        return self.data.shape

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        return multiply(self, other)


def constant(data) -> Tensor:
    return Tensor(data)


def _accum(t: Tensor, g: np.ndarray) -> None:
    # The first contribution is borrowed (no copy); a second contribution
    # allocates a fresh sum so shared or read-only buffers are never
    # mutated in place.
    if not t.needs_grad:
        return
    if t.grad is None:
        t.grad = g
        t._grad_borrowed = True
    elif t._grad_borrowed:
        t.grad = t.grad + g
        t._grad_borrowed = False
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _node(data, parents, backward) -> Tensor:
    needs = any(p.needs_grad for p in parents)
    return Tensor(data, needs_grad=needs, parents=parents if needs else (), backward=backward if needs else None)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data @ b.data

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(out, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _node(out, (a, b), backward)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(out, (a, b), backward)


def scale(a: Tensor, k: float) -> Tensor:
    def backward(g):
        _accum(a, g * k)

    return _node(a.data * k, (a,), backward)


def leaky_relu(a: Tensor, alpha: float = 0.2) -> Tensor:
    mask = np.where(a.data > 0, 1.0, alpha)

    def backward(g):
        _accum(a, g * mask)

    return _node(a.data * mask, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(g):
        _accum(a, g * (1.0 - out * out))

    return _node(out, (a,), backward)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    def backward(g):
        _accum(a, g.reshape(a.data.shape))

    return _node(a.data.reshape(shape), (a,), backward)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    sizes = [t.data.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, g[tuple(idx)])

    return _node(out, tuple(tensors), backward)


def gather_rows(a: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.intp)

    def backward(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, index, g)
        _accum(a, acc)

    return _node(a.data[index], (a,), backward)


def segment_sum(a: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    segment_ids = np.asarray(segment_ids, dtype=np.intp)
    out = np.zeros((num_segments,) + a.data.shape[1:])
    np.add.at(out, segment_ids, a.data)

    def backward(g):
        _accum(a, g[segment_ids])

    return _node(out, (a,), backward)


def segment_softmax(a: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Softmax along axis 0 within each segment; empty segments are fine."""
    segment_ids = np.asarray(segment_ids, dtype=np.intp)
    tail = a.data.shape[1:]
    peak = np.full((num_segments,) + tail, -np.inf)
    np.maximum.at(peak, segment_ids, a.data)
    z = np.exp(a.data - peak[segment_ids])
    denom = np.zeros((num_segments,) + tail)
    np.add.at(denom, segment_ids, z)
    out = z / denom[segment_ids]

    def backward(g):
        gy = g * out
        tot = np.zeros((num_segments,) + tail)
        np.add.at(tot, segment_ids, gy)
        _accum(a, out * (g - tot[segment_ids]))

    return _node(out, (a,), backward)


def sum_last(a: Tensor) -> Tensor:
    def backward(g):
        _accum(a, np.broadcast_to(g[..., None], a.data.shape))

    return _node(a.data.sum(axis=-1), (a,), backward)


def l2_normalize_rows(a: Tensor, eps: float = 1e-18) -> Tensor:
    """Row-wise x / sqrt(||x||^2 + eps); smooth at the origin."""
    sq = np.sum(a.data * a.data, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(sq + eps)
    out = a.data * inv

    def backward(g):
        dot = np.sum(g * a.data, axis=-1, keepdims=True)
        _accum(a, g * inv - a.data * (dot * inv**3))

    return _node(out, (a,), backward)


def rowwise_distance(a: Tensor, b: Tensor, eps: float = 1e-12) -> Tensor:
    """Euclidean distance per row: sqrt(sum((a-b)^2) + eps)."""
    diff = a.data - b.data
    d = np.sqrt(np.sum(diff * diff, axis=-1) + eps)

    def backward(g):
        gd = (g / d)[..., None] * diff
        _accum(a, gd)
        _accum(b, -gd)

    return _node(d, (a, b), backward)


def huber_loss(a: Tensor, delta: float = 1.0) -> Tensor:
    """Elementwise Huber penalty of a residual tensor."""
    x = a.data
    small = np.abs(x) <= delta
    out = np.where(small, 0.5 * x * x, delta * (np.abs(x) - 0.5 * delta))
    slope = np.where(small, x, delta * np.sign(x))

    def backward(g):
        _accum(a, g * slope)

    return _node(out, (a,), backward)


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Stable elementwise binary cross-entropy on raw scores."""
    z = logits.data
    t = np.asarray(targets, dtype=np.float64)
    out = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    sig = 1.0 / (1.0 + np.exp(-z))

    def backward(g):
        _accum(logits, g * (sig - t))

    return _node(out, (logits,), backward)


def mean(a: Tensor) -> Tensor:
    n = a.data.size

    def backward(g):
        _accum(a, np.full(a.data.shape, float(g) / n))

    return _node(a.data.mean(), (a,), backward)


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into every reachable tensor."""
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

_MANIFEST = "manifest.json"
_BLOB = "params.bin"


class Parameters:
    """Named, ordered collection of trainable tensors with fixed shapes."""

    def __init__(self, arrays: dict[str, np.ndarray]):
        self._tensors: dict[str, Tensor] = {}
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter {name!r} has non-finite entries")
            self._tensors[name] = Tensor(arr, needs_grad=True)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None
            t._grad_borrowed = False

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def copy(self) -> "Parameters":
        return Parameters(self.as_arrays())

    def num_values(self) -> int:
        return sum(t.data.size for t in self._tensors.values())

    def save(self, directory: str) -> None:
        """Write manifest.json plus a little-endian float32 blob (params.bin)."""
        os.makedirs(directory, exist_ok=True)
        manifest = {
            "dtype": "float32",
            "byte_order": "little",
            "tensors": [{"name": n, "shape": list(t.data.shape)} for n, t in self._tensors.items()],
        }
        with open(os.path.join(directory, _MANIFEST), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
        blob = np.concatenate([t.data.ravel() for t in self._tensors.values()]) if self._tensors else np.empty(0)
        with open(os.path.join(directory, _BLOB), "wb") as fh:
            fh.write(blob.astype("<f4").tobytes())

    @classmethod
    def load(cls, directory: str) -> "Parameters":
        with open(os.path.join(directory, _MANIFEST), "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        raw = np.fromfile(os.path.join(directory, _BLOB), dtype="<f4").astype(np.float64)
        arrays = {}
        offset = 0
        for entry in manifest["tensors"]:
            shape = tuple(entry["shape"])
            size = int(np.prod(shape)) if shape else 1
            arrays[entry["name"]] = raw[offset : offset + size].reshape(shape)
            offset += size
        if offset != raw.size:
            raise ValueError(f"blob size mismatch: manifest wants {offset} values, blob has {raw.size}")
        return cls(arrays)


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out)); vectors use fan_out = 1."""
    if len(shape) >= 2:
        fan_in, fan_out = shape[-2], shape[-1]
    else:
        fan_in, fan_out = shape[0], 1
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------


class Adam:
    """Adaptive-moment SGD; deterministic given a fixed update sequence."""

    def __init__(self, params: Parameters, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {n: np.zeros_like(t.data) for n, t in params.items()}
        self._v = {n: np.zeros_like(t.data) for n, t in params.items()}

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for name, tensor in self.params.items():
            if tensor.grad is None:
                continue
            g = tensor.grad
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            tensor.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def train_step(params: Parameters, batch, optimizer: Adam, loss_fn) -> tuple[Parameters, float]:
    """One update: forward loss_fn(params, batch), backprop, optimizer step.

    Returns the parameters and the pre-update mean loss. Raises
    NonFiniteLoss on divergence, leaving the parameters untouched.
    """
    params.zero_grad()
    loss = loss_fn(params, batch)
    value = float(loss.data)
    if not math.isfinite(value):
        raise NonFiniteLoss(f"loss is {value}")
    backward(loss)
    optimizer.step()
    return params, value


def grad_check(
    params: Parameters,
    batch,
    loss_fn,
    epsilon: float = 1e-5,
    num_coords: int = 50,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples at least ``num_coords`` coordinates across all parameter
    tensors (all of them when the model is small).
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must be in [1e-7, 1e-3]")
    rng = rng or np.random.default_rng(0)

    params.zero_grad()
    loss = loss_fn(params, batch)
    backward(loss)
    analytic = {n: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for n, t in params.items()}

    coords: list[tuple[str, int]] = []
    for name, t in params.items():
        coords.extend((name, i) for i in range(t.data.size))
    if len(coords) > num_coords:
        picked = rng.choice(len(coords), size=num_coords, replace=False)
        coords = [coords[i] for i in sorted(picked)]

    worst = 0.0
    for name, flat in coords:
        data = params[name].data
        orig = data.flat[flat]
        data.flat[flat] = orig + epsilon
        up = float(loss_fn(params, batch).data)
        data.flat[flat] = orig - epsilon
        dn = float(loss_fn(params, batch).data)
        data.flat[flat] = orig
        numeric = (up - dn) / (2.0 * epsilon)
        g = analytic[name].flat[flat]
        worst = max(worst, abs(g - numeric) / max(1e-8, abs(g) + abs(numeric)))
    return worst
