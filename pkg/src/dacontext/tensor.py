"""Dense float64 tensors with reverse-mode automatic differentiation.

Every differentiable operation builds a node that remembers its parents and a
closure mapping the output gradient to parent gradients. ``backward`` orders
the nodes reachable from a scalar loss topologically (the :class:`Tape`) and
replays them in reverse.

Binary elementwise operations are strict: operand shapes must be identical.
Broadcasting is explicit through :func:`broadcast_to`.
"""

from __future__ import annotations

from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class NonFiniteError(FloatingPointError):
    """A NaN or infinity appeared in tensor data or gradients."""


class _Node:
    __slots__ = ("op", "parents", "backward")

    def __init__(self, op: str, parents: tuple, backward: Callable):
        self.op = op
        self.parents = parents
        self.backward = backward


def _check_finite(data: np.ndarray, where: str) -> None:
    if not np.isfinite(data).all():
        raise NonFiniteError(f"non-finite values produced by {where}")


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_node", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=DTYPE)
        _check_finite(arr, "Tensor()")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._node: _Node | None = None
        self.name = name

    @classmethod
    def _wrap(cls, data: np.ndarray, parents: tuple, backward: Callable, op: str) -> "Tensor":
        _check_finite(data, op)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out._node = _Node(op, parents, backward) if out.requires_grad else None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, tensor has shape {self.shape}")
        return float(self.data.item())

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __len__(self) -> int:
        return self.shape[0]

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __getitem__(self, index):
        return index_select(self, index)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


# --------------------------------------------------------------------------
# tape and backward
# --------------------------------------------------------------------------


class Tape:
    """Topologically ordered list of the non-leaf tensors behind ``root``."""

    def __init__(self, root: Tensor):
        self.root = root
        self.ops: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            t, expanded = stack.pop()
            if t._node is None:
                continue
            if expanded:
                self.ops.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            for p in t._node.parents:
                if p._node is not None and id(p) not in seen:
                    stack.append((p, False))

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)


def backward(loss: Tensor) -> None:
    """Accumulate d loss / d leaf into ``.grad`` of every requires_grad leaf."""
    if loss.shape != ():
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any tensor that requires grad")
    if loss._node is None:
        loss.grad = np.ones((), dtype=DTYPE) if loss.grad is None else loss.grad + 1.0
        return
    tape = Tape(loss)
    pending: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=DTYPE)}
    for t in reversed(tape.ops):
        g = pending.pop(id(t), None)
        if g is None:
            continue
        node = t._node
        for p, pg in zip(node.parents, node.backward(g)):
            if pg is None or not p.requires_grad:
                continue
            _check_finite(pg, f"backward of {node.op}")
            if p._node is None:
                p.grad = pg.copy() if p.grad is None else p.grad + pg
            else:
                key = id(p)
                pending[key] = pg if key not in pending else pending[key] + pg


# --------------------------------------------------------------------------
# elementwise
# --------------------------------------------------------------------------


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return Tensor._wrap(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return Tensor._wrap(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return Tensor._wrap(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return Tensor._wrap(x.data * c, (x,), lambda g: (g * c,), "scale")


def relu(x: Tensor) -> Tensor:
    # subgradient at exactly 0 is 0
    on = x.data > 0
    return Tensor._wrap(np.where(on, x.data, 0.0), (x,), lambda g: (g * on,), "relu")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return Tensor._wrap(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def sigmoid(x: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Tensor._wrap(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        y = np.exp(x.data)
    return Tensor._wrap(y, (x,), lambda g: (g * y,), "exp")


def log(x: Tensor) -> Tensor:
    if (x.data <= 0).any():
        raise DomainError("log of a non-positive value")
    xd = x.data
    return Tensor._wrap(np.log(xd), (x,), lambda g: (g / xd,), "log")


_UNARY = {"relu": relu, "tanh": tanh, "sigmoid": sigmoid, "exp": exp, "log": log}
_BINARY = {"add": add, "sub": sub, "mul": mul}


def elementwise(op: str, *args):
    """Dispatch by name: ``elementwise("mul", a, b)``, ``elementwise("scale", x, 2.0)``."""
    if op in _UNARY:
        (x,) = args
        return _UNARY[op](x)
    if op in _BINARY:
        a, b = args
        return _BINARY[op](a, b)
    if op == "scale":
        x, c = args
        return scale(x, c)
    raise ValueError(f"unknown elementwise op {op!r}")


# --------------------------------------------------------------------------
# linear algebra and reductions
# --------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data

    def bw(g):
        return (g @ bd.T if a.requires_grad else None, ad.T @ g if b.requires_grad else None)

    return Tensor._wrap(ad @ bd, (a, b), bw, "matmul")


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = x.shape
    axes = _norm_axes(axis, x.ndim)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor._wrap(np.sum(x.data, axis=axes, keepdims=keepdims), (x,), bw, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    n = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return scale(sum(x, axis=axes, keepdims=keepdims), 1.0 / n)


def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    out = []
    for a in axis:
        if not -ndim <= a < ndim:
            raise ShapeError(f"axis {a} out of range for {ndim}-d tensor")
        out.append(a % ndim)
    return tuple(sorted(set(out)))


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    try:
        y = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot reshape {old} to {shape}") from exc
    return Tensor._wrap(y, (x,), lambda g: (g.reshape(old),), "reshape")


def transpose(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return Tensor._wrap(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),), "transpose")


def broadcast_to(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    src = x.shape
    try:
        y = np.broadcast_to(x.data, shape)
    except ValueError as exc:
        raise ShapeError(f"broadcast_to: cannot broadcast {src} to {shape}") from exc
    lead = len(shape) - len(src)
    kept = tuple(i for i, n in enumerate(src) if n == 1 and shape[lead + i] != 1)

    def bw(g):
        g = g.sum(axis=tuple(range(lead))) if lead else g
        if kept:
            g = g.sum(axis=kept, keepdims=True)
        return (g,)

    return Tensor._wrap(np.ascontiguousarray(y), (x,), bw, "broadcast_to")


def index_select(x: Tensor, index) -> Tensor:
    """``x[index]`` for basic or advanced numpy indices; repeated indices accumulate."""
    shape = x.shape
    basic = _is_basic_index(index)

    def bw(g):
        out = np.zeros(shape, dtype=DTYPE)
        if basic:
            out[index] = g
        else:
            np.add.at(out, index, g)
        return (out,)

    return Tensor._wrap(np.array(x.data[index], dtype=DTYPE), (x,), bw, "index")


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ShapeError("concat: no tensors given")
    nd = parts[0].ndim
    if any(p.ndim != nd for p in parts):
        raise ShapeError(f"concat: rank mismatch {[p.shape for p in parts]}")
    ax = axis % nd
    for p in parts[1:]:
        if p.shape[:ax] + p.shape[ax + 1:] != parts[0].shape[:ax] + parts[0].shape[ax + 1:]:
            raise ShapeError(f"concat: incompatible shapes {[q.shape for q in parts]} on axis {axis}")
    bounds = np.cumsum([p.shape[ax] for p in parts])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=ax))

    return Tensor._wrap(np.concatenate([p.data for p in parts], axis=ax), tuple(parts), bw, "concat")


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ShapeError("stack: no tensors given")
    ax = axis % (parts[0].ndim + 1)
    expanded = [reshape(p, p.shape[:ax] + (1,) + p.shape[ax:]) for p in parts]
    return concat(expanded, axis=ax)


# --------------------------------------------------------------------------
# normalization, pooling, losses
# --------------------------------------------------------------------------


def softmax(x: Tensor, axis: int = -1, mask=None) -> Tensor:
    """Softmax along ``axis``; entries where ``mask`` is False get exactly 0."""
    if x.size == 0 or x.shape[axis] == 0:
        raise ShapeError("softmax of an empty tensor")
    z = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not mask.any(axis=axis).all():
            raise ValueError("softmax: every position masked along the reduction axis")
        z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._wrap(y, (x,), bw, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    y = z - lse

    def bw(g):
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)

    return Tensor._wrap(y, (x,), bw, "log_softmax")


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under softmax(logits).

    ``logits`` is (C,) for one example or (B, C) for a batch.
    """
    single = logits.ndim == 1
    z = logits.data[None, :] if single else logits.data
    t = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if z.ndim != 2 or t.shape != (z.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs targets {t.shape}")
    if ((t < 0) | (t >= z.shape[1])).any():
        raise ValueError("cross_entropy: target index out of range")
    zs = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(zs).sum(axis=1))
    rows = np.arange(len(t))
    nll = lse - zs[rows, t]
    n = len(t)

    def bw(g):
        p = np.exp(zs - lse[:, None])
        p[rows, t] -= 1.0
        p *= g / n
        return (p[0] if single else p,)

    return Tensor._wrap(np.asarray(nll.mean()), (logits,), bw, "cross_entropy")


class MaxResult(NamedTuple):
    values: Tensor
    argmax: np.ndarray


def max_pool(x: Tensor, axes=None, mask=None) -> MaxResult:
    """Maximum over ``axes`` (all by default), skipping entries where ``mask`` is False.

    Returns the pooled tensor and, per output element, the flat index of the
    winner within the reduced sub-block. Ties go to the lowest flat index.
    """
    axes = _norm_axes(axes, x.ndim)
    keep = tuple(i for i in range(x.ndim) if i not in axes)
    perm = keep + axes
    out_shape = tuple(x.shape[i] for i in keep)
    red = int(np.prod([x.shape[i] for i in axes])) if axes else 1
    if red == 0:
        raise ShapeError("max_pool: empty reduction")
    flat = x.data.transpose(perm).reshape(out_shape + (red,))
    if mask is not None:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape).transpose(perm).reshape(flat.shape)
        if not m.any(axis=-1).all():
            raise ShapeError("max_pool: every element masked in a reduction")
        flat = np.where(m, flat, -np.inf)
    arg = flat.argmax(axis=-1)
    vals = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    in_shape = x.shape
    perm_shape = tuple(x.shape[i] for i in perm)
    inv = tuple(np.argsort(perm))

    def bw(g):
        out = np.zeros(out_shape + (red,), dtype=DTYPE)
        np.put_along_axis(out, arg[..., None], np.asarray(g)[..., None], axis=-1)
        return (out.reshape(perm_shape).transpose(inv).reshape(in_shape),)

    return MaxResult(Tensor._wrap(np.asarray(vals, dtype=DTYPE), (x,), bw, "max_pool"), arg)


def dropout(x: Tensor, rate: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate), eval mode is identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return Tensor._wrap(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
