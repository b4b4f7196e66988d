"""Reverse-mode automatic differentiation over dense float64 arrays.

Deliberately small: exactly the operations a padded-batch transformer
tagger needs. Every backward rule is checked against central finite
differences in the test suite, so keep new ops analytic and exact.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

Array = np.ndarray

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


class Tensor:
    """A float64 array plus an optional gradient and a graph link.

    Tensors produced by operations remember their parents and a backward
    rule. ``backward()`` on a scalar walks the graph once per node in
    reverse topological order, accumulating into ``.grad`` of every
    gradient-requiring tensor it reaches. Repeated backward calls without
    ``zero_grad`` keep accumulating.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_rule", "_op")

    def __init__(self, values, requires_grad: bool = False):
        self.data: Array = np.asarray(values, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        # maps the upstream gradient to one gradient (or None) per parent
        self._rule: Callable[[Array], tuple[Array | None, ...]] | None = None
        self._op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op!r})"

    # -- operators ---------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        return add(self, _ensure_tensor(other))

    def __radd__(self, other) -> "Tensor":
        return add(_ensure_tensor(other), self)

    def __mul__(self, other) -> "Tensor":
        return mul(self, _ensure_tensor(other))

    def __rmul__(self, other) -> "Tensor":
        return mul(_ensure_tensor(other), self)

    def __neg__(self) -> "Tensor":
        return mul(self, _ensure_tensor(-1.0))

    def __sub__(self, other) -> "Tensor":
        return add(self, -_ensure_tensor(other))

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)

    def reshape(self, *shape: int) -> "Tensor":
        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        return transpose(self, axes)

    def sum(self) -> "Tensor":
        return sum_all(self)

    # -- backward ----------------------------------------------------------

    def backward(self, on_visit: Callable[["Tensor"], None] | None = None) -> None:
        """Accumulate gradients of this scalar into all reachable tensors.

        ``on_visit`` is a test hook called once per graph node processed.
        """
        if self.size != 1:
            raise ShapeError(
                f"backward requires a scalar loss, got shape {self.shape}"
            )

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        upstream: dict[int, Array] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            grad = upstream.pop(id(node), None)
            if grad is None:
                continue
            if on_visit is not None:
                on_visit(node)
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += grad
            if node._rule is None:
                continue
            for parent, pgrad in zip(node._parents, node._rule(grad)):
                if pgrad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in upstream:
                    upstream[key] = upstream[key] + pgrad
                else:
                    upstream[key] = pgrad


class Parameter(Tensor):
    """A named trainable tensor. Names must be unique within a model."""

    __slots__ = ("name", "trainable")

    def __init__(self, values, name: str, trainable: bool = True):
        super().__init__(values, requires_grad=trainable)
        self.name = name
        self.trainable = trainable

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def _ensure_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64))


def _node(
    data: Array,
    parents: tuple[Tensor, ...],
    rule: Callable[[Array], tuple[Array | None, ...]],
    op: str,
) -> Tensor:
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._rule = rule
    out._op = op
    return out


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Reduce a broadcast gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- arithmetic --------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def rule(g: Array):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(data, (a, b), rule, "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def rule(g: Array):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(data, (a, b), rule, "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; batch dimensions broadcast as in numpy."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    data = a.data @ b.data

    def rule(g: Array):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _node(data, (a, b), rule, "matmul")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    data = x.data.reshape(shape)

    def rule(g: Array):
        return (g.reshape(x.shape),)

    return _node(data, (x,), rule, "reshape")


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    data = np.transpose(x.data, axes)

    def rule(g: Array):
        return (np.transpose(g, inverse),)

    return _node(data, (x,), rule, "transpose")


def index_select(x: Tensor, axis: int, indices) -> Tensor:
    """Gather slices along ``axis``; backward scatter-adds into place."""
    idx = np.asarray(indices, dtype=np.intp)
    data = np.take(x.data, idx, axis=axis)

    def rule(g: Array):
        gx = np.zeros_like(x.data)
        np.add.at(np.moveaxis(gx, axis, 0), idx, np.moveaxis(g, axis, 0))
        return (gx,)

    return _node(data, (x,), rule, "index_select")


def sum_all(x: Tensor) -> Tensor:
    data = np.asarray(x.data.sum())

    def rule(g: Array):
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(data, (x,), rule, "sum")


# -- activations -------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0.0)

    def rule(g: Array):
        return (g * (x.data > 0.0),)

    return _node(data, (x,), rule, "relu")


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit (tanh form); smooth, so finite
    differences of the exact same expression converge cleanly."""
    u = _GELU_C * (x.data + _GELU_A * x.data**3)
    t = np.tanh(u)
    data = 0.5 * x.data * (1.0 + t)

    def rule(g: Array):
        du = _GELU_C * (1.0 + 3.0 * _GELU_A * x.data**2)
        local = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t**2) * du
        return (g * local,)

    return _node(data, (x,), rule, "gelu")


def sigmoid(x: Tensor) -> Tensor:
    data = _sigmoid(x.data)

    def rule(g: Array):
        return (g * data * (1.0 - data),)

    return _node(data, (x,), rule, "sigmoid")


def _sigmoid(z: Array) -> Array:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def exp(x: Tensor) -> Tensor:
    data = np.exp(x.data)

    def rule(g: Array):
        return (g * data,)

    return _node(data, (x,), rule, "exp")


# -- normalization and regularization ----------------------------------------


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    n = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xm = x.data - mu
    var = (xm**2).mean(axis=-1, keepdims=True)
    ivar = 1.0 / np.sqrt(var + eps)
    xhat = xm * ivar
    data = xhat * gain.data + bias.data

    def rule(g: Array):
        lead = tuple(range(g.ndim - 1))
        dxhat = g * gain.data
        dvar = (dxhat * xm).sum(axis=-1, keepdims=True) * (-0.5) * ivar**3
        dmu = -(dxhat.sum(axis=-1, keepdims=True)) * ivar + dvar * (
            -2.0 / n
        ) * xm.sum(axis=-1, keepdims=True)
        dx = dxhat * ivar + dvar * (2.0 / n) * xm + dmu / n
        dgain = (g * xhat).sum(axis=lead)
        dbias = g.sum(axis=lead)
        return dx, dgain, dbias

    return _node(data, (x, gain, bias), rule, "layer_norm")


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Zero entries with probability ``p`` and rescale survivors by 1/(1-p).

    Identity (the same tensor object) when not training or p == 0.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    keep = rng.random(x.shape) >= p
    scale = 1.0 / (1.0 - p)
    data = x.data * keep * scale

    def rule(g: Array):
        return (g * keep * scale,)

    return _node(data, (x,), rule, "dropout")


# -- losses ------------------------------------------------------------------


def log_softmax(x: Tensor) -> Tensor:
    """Row-wise log-softmax over the last axis, stabilized by max-subtraction."""
    if not np.isfinite(x.data).all():
        raise NumericError("log_softmax input contains non-finite values")
    z = x.data - x.data.max(axis=-1, keepdims=True)
    data = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    def rule(g: Array):
        return (g - np.exp(data) * g.sum(axis=-1, keepdims=True),)

    return _node(data, (x,), rule, "log_softmax")


def softmax(x: Tensor) -> Tensor:
    return exp(log_softmax(x))


def nll_loss(log_probs: Tensor, targets, mask=None) -> Tensor:
    """Sum of -log_probs[i, targets[i]] over unmasked rows (a sum, not a mean).

    ``mask`` is a boolean row selector; missing means all rows count.
    """
    if log_probs.ndim != 2:
        raise ShapeError(f"nll_loss expects 2-d log-probs, got {log_probs.shape}")
    n, k = log_probs.shape
    tgt = np.asarray(targets, dtype=np.intp)
    if tgt.shape != (n,):
        raise ShapeError(f"targets shape {tgt.shape} does not match {n} rows")
    keep = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if keep.shape != (n,):
        raise ShapeError(f"mask shape {keep.shape} does not match {n} rows")
    active = tgt[keep]
    if active.size and (active.min() < 0 or active.max() >= k):
        raise IndexError(f"target out of range [0, {k}): {active.min()}..{active.max()}")
    rows = np.flatnonzero(keep)
    data = np.asarray(-log_probs.data[rows, tgt[rows]].sum())

    def rule(g: Array):
        gx = np.zeros_like(log_probs.data)
        gx[rows, tgt[rows]] = -g
        return (gx,)

    return _node(data, (log_probs,), rule, "nll_loss")


def bce_with_logit(logit: Tensor, target) -> Tensor:
    """Elementwise binary cross-entropy on logits, computed stably.

    Equals -log(sigmoid(z)) for target 1 and -log(1 - sigmoid(z)) for 0.
    """
    y = np.asarray(target, dtype=np.float64)
    z = logit.data
    data = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))

    def rule(g: Array):
        return (_unbroadcast(g * (_sigmoid(z) - y), logit.shape),)

    return _node(data, (logit,), rule, "bce_with_logit")


# -- optimizer ---------------------------------------------------------------


class Adam:
    """Standard Adam with bias correction.

    lr == 0 is permitted (every update is exactly zero), so a no-op
    schedule behaves as the identity on parameters.
    """

    def __init__(
        self,
        params: Iterable[Parameter],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {lr}")
        if not 0.0 <= betas[0] < 1.0 or not 0.0 <= betas[1] < 1.0:
            raise ConfigError(f"betas must be in [0, 1), got {betas}")
        if eps <= 0:
            raise ConfigError(f"eps must be positive, got {eps}")
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        b1, b2 = self.betas
        self.t += 1
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
