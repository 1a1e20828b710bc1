"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy float64 array.  Operations record a node on the
result (parents plus a vector-Jacobian closure) whenever recording is
enabled and at least one operand requires gradients; `backward` replays
the graph in reverse topological order.  The op set is the minimum a
small encoder-decoder translator needs; everything runs on numpy.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when an operation is applied to incompatibly shaped tensors."""

    def __init__(self, op: str, *shapes: tuple, detail: str = ""):
        joined = " vs ".join(str(tuple(s)) for s in shapes)
        msg = f"{op}: incompatible shapes {joined}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference / finite differences)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("values", "requires_grad", "grad", "_parents", "_vjp")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError("item", self.shape, detail="expected a single element")
        return float(self.values.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar; scalars multiply via `scale`, tensors elementwise
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other), -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self) -> "Tensor":
        return tensor_sum(self)

    def reshape(self, shape: Sequence[int]) -> "Tensor":
        return reshape(self, tuple(shape))

    def transpose(self, axes: Sequence[int]) -> "Tensor":
        return transpose(self, tuple(axes))


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def make_node(values: np.ndarray, parents: Sequence[Tensor], vjp) -> Tensor:
    """Wrap `values` as the result of an op over `parents`.

    `vjp(grad)` must return one gradient array per parent, each exactly the
    parent's shape.  The node records edges only while recording is enabled
    and some parent requires gradients; otherwise the result is a constant.
    """
    out = Tensor(values)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        values = a.values + b.values
    except ValueError:
        raise ShapeError("add", a.shape, b.shape) from None

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_node(values, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        values = a.values * b.values
    except ValueError:
        raise ShapeError("mul", a.shape, b.shape) from None

    def vjp(g):
        return _unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)

    return make_node(values, (a, b), vjp)


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)

    def vjp(g):
        return (g * factor,)

    return make_node(a.values * factor, (a,), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim < 2 or b.values.ndim < 2:
        raise ShapeError("matmul", a.shape, b.shape, detail="operands must be at least 2-d")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape, detail="inner dimensions differ")
    try:
        values = np.matmul(a.values, b.values)
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape) from None

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.values, -1, -2))
        if b.values.ndim == 2 and g.ndim > 2:
            # stacked rows x one weight matrix: fold the batch into a single
            # product instead of a batched one that is then summed back down
            gb = np.matmul(a.values.reshape(-1, a.shape[-1]).T, g.reshape(-1, g.shape[-1]))
            return ga, gb
        gb = np.matmul(np.swapaxes(a.values, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_node(values, (a, b), vjp)


def relu(a: Tensor) -> Tensor:
    values = np.maximum(a.values, 0.0)

    def vjp(g):
        return (g * (a.values > 0.0),)

    return make_node(values, (a,), vjp)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, shifted by the row max for stability.

    An empty last axis passes through unchanged so attention over an empty
    key set stays well defined.
    """
    x = a.values
    if x.shape[-1] == 0:
        return make_node(x.copy(), (a,), lambda g: (g.copy(),))
    shifted = x - x.max(axis=-1, keepdims=True)
    with np.errstate(over="ignore", under="ignore"):
        e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        inner = (g * y).sum(axis=-1, keepdims=True)
        return (y * (g - inner),)

    return make_node(y, (a,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    d = x.shape[-1] if x.values.ndim else 0
    if x.values.ndim < 1 or d < 1:
        raise ShapeError("layer_norm", x.shape, detail="need a non-empty last axis")
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError("layer_norm", x.shape, gain.shape, bias.shape,
                         detail="gain and bias must match the last axis")
    mu = x.values.mean(axis=-1, keepdims=True)
    centered = x.values - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    values = xhat * gain.values + bias.values

    def vjp(g):
        lead = tuple(range(g.ndim - 1))
        g_gain = (g * xhat).sum(axis=lead) if lead else (g * xhat)
        g_bias = g.sum(axis=lead) if lead else g
        # per row: dx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
        dxhat = g * gain.values
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        gx = inv * (dxhat - m1 - xhat * m2)
        return gx, g_gain.reshape(gain.shape), g_bias.reshape(bias.shape)

    return make_node(values, (x, gain, bias), vjp)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of `table` by integer id; gradients scatter-add back."""
    if isinstance(ids, Tensor):
        if ids.requires_grad:
            raise ShapeError("embedding_lookup", ids.shape, detail="ids cannot require gradients")
        ids = ids.values
    idx = np.asarray(ids)
    if table.values.ndim != 2:
        raise ShapeError("embedding_lookup", table.shape, detail="table must be 2-d")
    if not np.issubdtype(idx.dtype, np.integer):
        idx = idx.astype(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError("embedding_lookup", table.shape, idx.shape,
                         detail=f"ids outside [0, {table.shape[0]})")
    values = table.values[idx]

    def vjp(g):
        gt = np.zeros_like(table.values)
        np.add.at(gt, idx, g)
        return (gt,)

    return make_node(values, (table,), vjp)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        values = a.values.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, shape) from None

    def vjp(g):
        return (g.reshape(a.shape),)

    return make_node(values, (a,), vjp)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    if sorted(axes) != list(range(a.values.ndim)):
        raise ShapeError("transpose", a.shape, detail=f"bad axis permutation {axes}")
    inverse = tuple(np.argsort(axes))

    def vjp(g):
        return (g.transpose(inverse),)

    return make_node(a.values.transpose(axes), (a,), vjp)


def tensor_sum(a: Tensor) -> Tensor:
    def vjp(g):
        return (np.full(a.shape, g.reshape(())),)

    return make_node(np.asarray(a.values.sum()), (a,), vjp)


_PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "scale": scale,
    "relu": relu,
    "softmax": softmax,
    "layer_norm": layer_norm,
    "embedding_lookup": embedding_lookup,
}


def apply_primitive(kind: str, *inputs, **kwargs) -> Tensor:
    """Dispatch one of the named primitive kinds; unknown kinds are rejected."""
    try:
        op = _PRIMITIVES[kind]
    except KeyError:
        known = ", ".join(sorted(_PRIMITIVES))
        raise ValueError(f"unknown primitive {kind!r}; expected one of: {known}") from None
    return op(*inputs, **kwargs)


def backward(loss: Tensor, params: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Reverse-mode sweep from a scalar loss.

    Populates `.grad` on every reachable tensor that requires gradients and
    returns a tensor -> gradient map.  Tensors in `params` that the loss
    never touched get explicit zero gradients.  Each call assigns fresh
    gradients; nothing accumulates across calls.
    """
    if loss.values.size != 1:
        raise ShapeError("backward", loss.shape, detail="loss must be a scalar")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    for node in reversed(topo):
        g = grads.get(id(node))
        if g is None or node._vjp is None:
            continue
        parent_grads = node._vjp(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg.shape != parent.shape:
                raise ShapeError("backward", pg.shape, parent.shape,
                                 detail="vjp returned a gradient of the wrong shape")
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg

    result: dict[Tensor, np.ndarray] = {}
    for node in topo:
        if node.requires_grad and id(node) in grads:
            node.grad = grads[id(node)]
            result[node] = node.grad
    if params is not None:
        for p in params:
            if p not in result:
                p.grad = np.zeros_like(p.values)
                result[p] = p.grad
    return result
