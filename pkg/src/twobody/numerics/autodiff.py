"""Reverse-mode differentiation over the small operator set the model uses.

Every op accepts plain ``numpy`` arrays or :class:`Node` objects. With plain
arrays the op is an ordinary numpy computation (used for fast inference and
for oracles); once any argument is a node, the result is recorded on that
node's :class:`Tape` and can be differentiated with :meth:`Tape.backward`.

Supported primitives: broadcasting matmul, add/sub, scalar scale, elementwise
activations, reshape, transpose, softmax over the last axis, sum/mean and the
Euclidean norm over the last axis.
"""

from __future__ import annotations

import numpy as np

from twobody.errors import ArgumentError, ContractError, DimensionError

ACTIVATIONS = ("linear", "relu", "tanh", "leaky_relu")


class Node:
    """A value recorded on a tape, together with how to pull gradients back."""

    __slots__ = ("value", "tape", "index", "parents", "vjp", "name")
    # makes ``ndarray @ node`` dispatch to Node.__rmatmul__
    __array_priority__ = 1000

    def __init__(self, tape, value, parents=(), vjp=None, name=None):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.name = name
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node#{self.index}{label}(shape={self.shape})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, factor):
        if isinstance(factor, (Node, np.ndarray)):
            raise ContractError("only scalar multiplication is differentiable")
        return scale(self, factor)

    __rmul__ = __mul__

    def __truediv__(self, factor):
        return scale(self, 1.0 / factor)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None):
        return reduce_sum(self, axis)

    def mean(self, axis=None):
        return reduce_mean(self, axis)


class Tape:
    """Ordered record of primitive operations.

    Nodes are appended in creation order, which is already a topological
    order, so the backward sweep walks the list in reverse.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.leaves: dict[str, Node] = {}

    def parameter(self, name: str, value) -> Node:
        if name in self.leaves:
            raise ContractError(f"parameter {name!r} already on tape")
        node = Node(self, np.asarray(value, dtype=np.float64), name=name)
        self.leaves[name] = node
        return node

    def parameters(self, params: dict) -> dict[str, Node]:
        return {name: self.parameter(name, value) for name, value in params.items()}

    def record(self, value, parents, vjp) -> Node:
        return Node(self, value, tuple(parents), vjp)

    def backward(self, loss: Node) -> dict[str, np.ndarray]:
        """Gradient of a scalar ``loss`` with respect to every parameter leaf.

        Leaves the loss does not depend on get zero gradients.
        """
        if not isinstance(loss, Node) or loss.tape is not self:
            raise ContractError("loss must be a node recorded on this tape")
        if loss.value.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.shape}")
        grads: list = [None] * (loss.index + 1)
        grads[loss.index] = np.ones_like(loss.value)
        for i in range(loss.index, -1, -1):
            g = grads[i]
            node = self.nodes[i]
            if g is None or node.vjp is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not isinstance(parent, Node):
                    continue
                j = parent.index
                grads[j] = pg if grads[j] is None else grads[j] + pg
        out = {}
        for name, leaf in self.leaves.items():
            g = grads[leaf.index] if leaf.index <= loss.index else None
            if g is None:
                out[name] = np.zeros_like(leaf.value)
            else:
                out[name] = np.array(g, dtype=np.float64).reshape(leaf.shape)
        return out


def value(x):
    """Underlying array of a node, or ``x`` itself."""
    return x.value if isinstance(x, Node) else x


def _tape_of(*args):
    tape = None
    for a in args:
        if isinstance(a, Node):
            if tape is None:
                tape = a.tape
            elif a.tape is not tape:
                raise ContractError("operands recorded on different tapes")
    return tape


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` undoing numpy broadcasting."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def matmul(a, b):
    """Broadcasting matrix product over the last two axes (``np.matmul``)."""
    av, bv = value(a), value(b)
    if av.ndim < 2 or bv.ndim < 2:
        raise DimensionError(f"matmul needs >=2-d operands, got {av.shape} and {bv.shape}")
    if av.shape[-1] != bv.shape[-2]:
        raise DimensionError(f"matmul inner extents differ: {av.shape} @ {bv.shape}")
    try:
        out = np.matmul(av, bv)
    except ValueError as exc:
        raise DimensionError(f"matmul batch extents do not broadcast: {av.shape} @ {bv.shape}") from exc
    tape = _tape_of(a, b)
    if tape is None:
        return out

    def vjp(g):
        ga = gb = None
        if isinstance(a, Node):
            ga = _unbroadcast(np.matmul(g, np.swapaxes(bv, -1, -2)), av.shape)
        if isinstance(b, Node):
            if bv.ndim == 2 and av.ndim > 2:
                gb = av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(av, -1, -2), g), bv.shape)
        return ga, gb

    return tape.record(out, (a, b), vjp)


def add(a, b):
    av, bv = np.asarray(value(a), dtype=np.float64), np.asarray(value(b), dtype=np.float64)
    try:
        out = av + bv
    except ValueError as exc:
        raise DimensionError(f"add extents do not broadcast: {av.shape} + {bv.shape}") from exc
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return tape.record(out, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = np.asarray(value(a), dtype=np.float64), np.asarray(value(b), dtype=np.float64)
    try:
        out = av - bv
    except ValueError as exc:
        raise DimensionError(f"sub extents do not broadcast: {av.shape} - {bv.shape}") from exc
    tape = _tape_of(a, b)
    if tape is None:
        return out
    return tape.record(out, (a, b), lambda g: (_unbroadcast(g, av.shape), -_unbroadcast(g, bv.shape)))


def scale(x, factor: float):
    factor = float(factor)
    out = value(x) * factor
    if not isinstance(x, Node):
        return out
    return x.tape.record(out, (x,), lambda g: (g * factor,))


def _check_kind(kind, slope):
    if kind not in ACTIVATIONS:
        raise ArgumentError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
    if kind == "leaky_relu" and not 0.0 < slope < 1.0:
        raise ArgumentError(f"leaky_relu slope must lie in (0, 1), got {slope}")


def activation(x, kind: str, slope: float = 0.2):
    """Elementwise ``linear``, ``relu``, ``tanh`` or ``leaky_relu(slope)``."""
    _check_kind(kind, slope)
    xv = value(x)
    if kind == "linear":
        out = xv
    elif kind == "relu":
        out = np.maximum(xv, 0.0)
    elif kind == "tanh":
        out = np.tanh(xv)
    else:
        out = np.where(xv >= 0.0, xv, slope * xv)
    if not isinstance(x, Node):
        return out

    def vjp(g):
        if kind == "linear":
            return (g,)
        if kind == "relu":
            return (g * (xv > 0.0),)
        if kind == "tanh":
            return (g * (1.0 - out * out),)
        return (g * np.where(xv >= 0.0, 1.0, slope),)

    return x.tape.record(out, (x,), vjp)


def reshape(x, shape):
    xv = value(x)
    out = xv.reshape(shape)
    if not isinstance(x, Node):
        return out
    return x.tape.record(out, (x,), lambda g: (g.reshape(xv.shape),))


def transpose(x, axes=None):
    xv = value(x)
    axes = tuple(range(xv.ndim))[::-1] if axes is None else tuple(axes)
    out = xv.transpose(axes)
    if not isinstance(x, Node):
        return out
    inverse = tuple(np.argsort(axes))
    return x.tape.record(out, (x,), lambda g: (g.transpose(inverse),))


def softmax(x):
    """Softmax over the last axis."""
    xv = value(x)
    e = np.exp(xv - xv.max(axis=-1, keepdims=True))
    out = e / e.sum(axis=-1, keepdims=True)
    if not isinstance(x, Node):
        return out
    return x.tape.record(out, (x,), lambda g: (out * (g - (g * out).sum(axis=-1, keepdims=True)),))


def reduce_sum(x, axis=None):
    xv = value(x)
    out = np.asarray(xv.sum(axis=axis, keepdims=True))
    kept = out.shape
    out = out.reshape(np.sum(xv, axis=axis).shape)
    if not isinstance(x, Node):
        return out
    return x.tape.record(out, (x,), lambda g: (np.broadcast_to(g.reshape(kept), xv.shape),))


def reduce_mean(x, axis=None):
    xv = value(x)
    count = xv.size if axis is None else int(np.prod([xv.shape[a] for a in np.atleast_1d(axis)]))
    return scale(reduce_sum(x, axis), 1.0 / count)


def norm(x):
    """Euclidean norm over the last axis; the subgradient at zero is zero."""
    xv = value(x)
    out = np.sqrt((xv * xv).sum(axis=-1))
    if not isinstance(x, Node):
        return out

    def vjp(g):
        safe = np.where(out > 0.0, out, 1.0)
        return ((g / safe)[..., None] * xv * (out > 0.0)[..., None],)

    return x.tape.record(out, (x,), vjp)
