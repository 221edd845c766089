"""Dense float64 tensors with reverse-mode differentiation.

A :class:`Tensor` produced by an operation on at least one tensor that
requires gradients remembers its parents and a closure mapping the output
gradient to parent gradients.  :meth:`Tensor.backward` walks that graph in
reverse topological order.  Only leaves (parameters) and tensors marked
with :meth:`Tensor.retain_grad` keep a ``.grad`` buffer; intermediate
gradients are dropped as soon as they have been propagated.

The graph is acyclic by construction: a node can only reference tensors
that existed before it.
"""

from __future__ import annotations

import numpy as np

from .errors import GraphCycle, NonScalarLoss, ShapeMismatch

DTYPE = np.float64


def _as_array(data):
    arr = np.asarray(data, dtype=DTYPE)
    return arr


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_retain", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._retain = False
        self.name = name

    # -- introspection ---------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self):
        return self.data

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self):
        return len(self.data)

    # -- graph -----------------------------------------------------------
    @property
    def is_leaf(self):
        return self._backward is None

    def detach(self):
        return Tensor(self.data)

    def retain_grad(self):
        """Keep ``.grad`` on this (non-leaf) tensor after backward."""
        self._retain = True
        return self

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise NonScalarLoss(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        else:
            grad = _as_array(grad)
            if grad.shape != self.shape:
                raise ShapeMismatch(f"seed gradient {grad.shape} vs tensor {self.shape}")
        if not self.requires_grad:
            return
        order = _topological_order(self)
        pending = {id(self): grad}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None or node._retain:
                node.grad = g.copy() if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + pg
                else:
                    pending[key] = pg

    # -- operator sugar --------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self):
        return tsum(self)

    def mean(self):
        return mean(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _topological_order(root):
    order = []
    state = {}  # id -> 1 visiting, 2 done
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        key = id(node)
        if expanded:
            state[key] = 2
            order.append(node)
            continue
        st = state.get(key)
        if st == 2:
            continue
        if st == 1:
            raise GraphCycle("cycle detected in autograd graph")
        state[key] = 1
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and state.get(id(parent)) != 2:
                if state.get(id(parent)) == 1:
                    raise GraphCycle("cycle detected in autograd graph")
                stack.append((parent, False))
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def make_result(data, parents, backward):
    """Wrap ``data`` as an op output, recording the graph edge when needed."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise ---------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return make_result(a.data + b.data, (a, b),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return make_result(a.data - b.data, (a, b),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return make_result(ad * bd, (a, b),
                       lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def tabs(a):
    a = as_tensor(a)
    sign = np.sign(a.data)  # subgradient 0 at exact zero
    return make_result(np.abs(a.data), (a,), lambda g: (g * sign,))


def square(a):
    a = as_tensor(a)
    ad = a.data
    return make_result(ad * ad, (a,), lambda g: (2.0 * ad * g,))


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return make_result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a):
    a = as_tensor(a)
    s = _sigmoid(a.data)
    return make_result(s, (a,), lambda g: (g * s * (1.0 - s),))


def _sigmoid(x):
    # split by sign so exp never overflows
    x = np.asarray(x, dtype=DTYPE)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(a):
    """ln(1 + e^x), evaluated without overflow."""
    a = as_tensor(a)
    x = a.data
    val = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    s = _sigmoid(x)
    return make_result(val, (a,), lambda g: (g * s,))


def dropout(a, p, rng, training):
    """Inverted dropout: kept units are scaled by 1/(1-p); identity when not training."""
    a = as_tensor(a)
    if not training or p == 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {p}")
    keep = (rng.random(a.shape) >= p) / (1.0 - p)
    return make_result(a.data * keep, (a,), lambda g: (g * keep,))


# -- reductions and shape ops ---------------------------------------------

def tsum(a):
    a = as_tensor(a)
    shape = a.shape
    return make_result(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a):
    a = as_tensor(a)
    shape, n = a.shape, a.size
    return make_result(np.asarray(a.data.mean()), (a,),
                       lambda g: (np.full(shape, float(g) / n),))


def reshape(a, shape):
    a = as_tensor(a)
    old = a.shape
    return make_result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def getitem(a, index):
    """Basic or integer-array indexing; the gradient is scattered back with add.at."""
    a = as_tensor(a)
    shape = a.shape
    out = a.data[index]

    basic = _is_basic_index(index)

    def backward(g):
        full = np.zeros(shape, dtype=DTYPE)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return make_result(np.array(out, dtype=DTYPE, copy=True), (a,), backward)


def _is_basic_index(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(tensors)))

    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    return make_result(np.stack([t.data for t in tensors], axis=axis), tensors,
                       lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(tensors))))


def dense(x, weight, bias):
    """Fully-connected layer: ``weight @ x + bias`` for a vector ``x``."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.ndim != 1 or weight.ndim != 2 or weight.shape[1] != x.shape[0] or bias.shape != (weight.shape[0],):
        raise ShapeMismatch(f"dense: x {x.shape}, weight {weight.shape}, bias {bias.shape}")
    xd, wd = x.data, weight.data
    return make_result(wd @ xd + bias.data, (x, weight, bias),
                       lambda g: (wd.T @ g, np.outer(g, xd), g))


class ParamSet:
    """Ordered name -> trainable tensor mapping."""

    def __init__(self, items=None):
        self._tensors = {}
        if items is not None:
            pairs = items.items() if isinstance(items, dict) else items
            for name, value in pairs:
                self.add(name, value)

    def add(self, name, value):
        if name in self._tensors:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = value if isinstance(value, Tensor) else Tensor(value)
        t.requires_grad = True
        t.name = name
        self._tensors[name] = t
        return t

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def names(self):
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def values(self):
        return self._tensors.values()

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def n_params(self):
        return int(sum(t.size for t in self._tensors.values()))

    def detached(self):
        """Same values, no gradient tracking; forward passes on it build no graph."""
        out = ParamSet.__new__(ParamSet)
        out._tensors = {name: Tensor(t.data, name=name) for name, t in self._tensors.items()}
        return out

    def copy(self):
        return ParamSet({name: t.data.copy() for name, t in self._tensors.items()})

    def arrays(self):
        return {name: t.data for name, t in self._tensors.items()}

    def equal(self, other):
        return self.names() == other.names() and all(
            np.array_equal(self[n].data, other[n].data) for n in self
        )

    def __repr__(self):
        return f"ParamSet({len(self)} tensors, {self.n_params()} scalars)"
