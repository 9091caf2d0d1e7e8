"""Reverse-mode parameter tape over NumPy arrays.

Every elementary operation on a :class:`Tensor` that depends on a watched leaf is
appended to the owning :class:`ParamTape`. Replaying the tape backward yields the
gradient of a scalar output with respect to the watched parameter vector.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from errors import ContractError

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that broadcasting added to reach ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(
        isinstance(item, (slice, int, np.integer)) or item is None or item is Ellipsis
        for item in items
    )


class Tensor:
    """An array value that may be recorded on a :class:`ParamTape`."""

    __slots__ = ("data", "tape", "parents", "backward_fn")
    # let NumPy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(
        self,
        data,
        tape: "ParamTape | None" = None,
        parents: tuple["Tensor", ...] = (),
        backward_fn: BackwardFn | None = None,
    ) -> None:
        self.data = np.asarray(data, dtype=float)
        self.tape = tape
        self.parents = parents
        self.backward_fn = backward_fn

    def __repr__(self) -> str:
        tracked = "tracked" if self.tape is not None else "constant"
        return f"Tensor(shape={self.data.shape}, {tracked})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def requires_grad(self) -> bool:
        return self.tape is not None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __add__(self, other) -> "Tensor":
        return add(self, other)

    def __radd__(self, other) -> "Tensor":
        return add(other, self)

    def __sub__(self, other) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return take(self, index)

    def sum(self, axis=None) -> "Tensor":
        return reduce_sum(self, axis)

    def mean(self) -> "Tensor":
        return reduce_sum(self) / max(self.data.size, 1)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)


class ParamTape:
    """Append-only record of elementary operations for one evaluation context.

    A tape must not be shared between concurrent evaluations. Use it as a context
    manager so it is cleared when the evaluation ends.
    """

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []

    def __enter__(self) -> "ParamTape":
        self.clear()
        return self

    def __exit__(self, *exc) -> None:
        self.clear()

    def __len__(self) -> int:
        return len(self.nodes)

    def watch(self, values) -> Tensor:
        """Register ``values`` as a differentiable leaf (copied)."""
        leaf = Tensor(np.array(values, dtype=float, copy=True), tape=self)
        self.nodes.append(leaf)
        return leaf

    def record(self, node: Tensor) -> None:
        self.nodes.append(node)

    def clear(self) -> None:
        self.nodes = []

    def gradient(
        self, output: Tensor, wrt: Tensor, out: np.ndarray | None = None
    ) -> np.ndarray:
        """Return d(output)/d(wrt) by replaying the tape backward.

        When ``out`` is given the gradient is added into it, which is the only way
        gradients accumulate across evaluations.
        """
        if output.data.size != 1:
            raise ContractError(
                f"gradient needs a scalar output, got shape {output.data.shape}"
            )
        if wrt.tape is not self or output.tape not in (self, None):
            raise ContractError("output and leaf must belong to this tape")

        result = np.zeros_like(wrt.data)
        if output.tape is None:
            return result if out is None else out

        adjoints: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
        for node in reversed(self.nodes):
            grad = adjoints.pop(id(node), None)
            if grad is None:
                continue
            if node is wrt:
                result = grad
                continue
            if node.backward_fn is None:
                continue
            for parent, parent_grad in zip(node.parents, node.backward_fn(grad)):
                if parent_grad is None or parent.tape is not self:
                    continue
                key = id(parent)
                if key in adjoints:
                    adjoints[key] = adjoints[key] + parent_grad
                else:
                    adjoints[key] = parent_grad

        if out is not None:
            out += result
            return out
        return np.array(result, copy=True)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(
    data: np.ndarray, parents: tuple[Tensor, ...], backward_fn: BackwardFn
) -> Tensor:
    tape = None
    for parent in parents:
        if parent.tape is None:
            continue
        if tape is not None and parent.tape is not tape:
            raise ContractError("cannot mix tensors recorded on different tapes")
        tape = parent.tape
    if tape is None:
        return Tensor(data)
    node = Tensor(data, tape=tape, parents=parents, backward_fn=backward_fn)
    tape.record(node)
    return node


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _result(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = (
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
            if b.requires_grad
            else None
        )
        return ga, gb

    return _result(a.data / b.data, (a, b), backward)


def matmul(a, b) -> Tensor:
    """``a @ b`` for a batched left operand and a 2-D right operand."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2:
        raise ContractError("matmul expects a 2-D right operand")

    def backward(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = None
        if b.requires_grad:
            n_in, n_out = b.shape
            gb = a.data.reshape(-1, n_in).T @ g.reshape(-1, n_out)
        return ga, gb

    return _result(a.data @ b.data, (a, b), backward)


def take(a, index) -> Tensor:
    a = as_tensor(a)
    basic = _is_basic_index(index)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _result(a.data[index], (a,), backward)


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def reduce_sum(a, axis=None) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _result(np.sum(a.data, axis=axis), (a,), backward)


def concat(tensors: Iterable, axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(
        np.concatenate([t.data for t in tensors], axis=axis), tensors, backward
    )


def elementwise(
    a, family: Callable[[np.ndarray, int], np.ndarray], order: int = 0
) -> Tensor:
    """Apply the ``order``-th derivative of an elementwise function family.

    ``family(z, k)`` must return the k-th derivative of the function at ``z``;
    the backward pass uses ``family(z, order + 1)``.
    """
    a = as_tensor(a)
    return _result(
        family(a.data, order), (a,), lambda g: (g * family(a.data, order + 1),)
    )
