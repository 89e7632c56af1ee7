"""Reverse-mode automatic differentiation over dense float64 tensors.

The graph is built eagerly: every operation returns a new :class:`Tensor`
holding its forward value plus a closure that routes the upstream gradient to
the operation's inputs. Calling :meth:`Tensor.backward` on a scalar root
topologically sorts the graph and runs the closures in reverse order.

Gradients accumulate additively across fan-out, so callers must zero
parameter gradients between optimization steps (see :func:`zero_gradients`).
Tensor values are treated as immutable once computed; all arithmetic is in
64-bit floats.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

# Inputs to log() are floored here so cross-entropy terms stay finite when a
# softmax or sigmoid output underflows.
LOG_FLOOR = 1e-12


def _shape_error(op: str, a, b) -> ValueError:
    return ValueError(f"{op}: shape mismatch {tuple(a)} vs {tuple(b)}")


class Tensor:
    """A node of the computation graph.

    ``data`` is the cached forward value, ``grad`` the accumulated gradient
    of the same shape. Leaf tensors are built from raw arrays; interior nodes
    are produced by the ops below and remember their parents.
    """

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self._parents = tuple(_parents)
        self._backward = _backward

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, data={self.data!r})"

    # -- elementwise arithmetic -------------------------------------------

    def _coerce(self, other, op: str) -> np.ndarray:
        """Validate a non-Tensor operand: a scalar or a same-shape constant."""
        c = np.asarray(other, dtype=np.float64)
        if c.ndim != 0 and c.shape != self.data.shape:
            raise _shape_error(op, self.data.shape, c.shape)
        return c

    def __add__(self, other):
        if isinstance(other, Tensor):
            if other.data.shape != self.data.shape:
                raise _shape_error("add", self.data.shape, other.data.shape)
            out = Tensor(self.data + other.data, (self, other))

            def backward():
                self.grad += out.grad
                other.grad += out.grad

        else:
            c = self._coerce(other, "add")
            out = Tensor(self.data + c, (self,))

            def backward():
                self.grad += out.grad

        out._backward = backward
        return out

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        if isinstance(other, Tensor):
            if other.data.shape != self.data.shape:
                raise _shape_error("sub", self.data.shape, other.data.shape)
            out = Tensor(self.data - other.data, (self, other))

            def backward():
                self.grad += out.grad
                other.grad -= out.grad

        else:
            c = self._coerce(other, "sub")
            out = Tensor(self.data - c, (self,))

            def backward():
                self.grad += out.grad

        out._backward = backward
        return out

    def __rsub__(self, other):
        c = self._coerce(other, "rsub")
        out = Tensor(c - self.data, (self,))

        def backward():
            self.grad -= out.grad

        out._backward = backward
        return out

    def __mul__(self, other):
        if isinstance(other, Tensor):
            if other.data.shape != self.data.shape:
                raise _shape_error("mul", self.data.shape, other.data.shape)
            out = Tensor(self.data * other.data, (self, other))

            def backward():
                self.grad += out.grad * other.data
                other.grad += out.grad * self.data

        else:
            c = self._coerce(other, "mul")
            out = Tensor(self.data * c, (self,))

            def backward():
                self.grad += out.grad * c

        out._backward = backward
        return out

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return self.__mul__(-1.0)

    # -- elementwise nonlinearities ---------------------------------------

    def relu(self) -> "Tensor":
        out = Tensor(np.maximum(self.data, 0.0), (self,))

        def backward():
            self.grad += out.grad * (self.data > 0.0)

        out._backward = backward
        return out

    def sigmoid(self) -> "Tensor":
        # Split by sign to avoid overflow in exp.
        x = self.data
        value = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                         np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        out = Tensor(value, (self,))

        def backward():
            self.grad += out.grad * value * (1.0 - value)

        out._backward = backward
        return out

    def log(self) -> "Tensor":
        """Elementwise natural log with inputs floored at ``LOG_FLOOR``.

        Below the floor the forward value is constant, so the gradient there
        is zero rather than ``1/x``.
        """
        out = Tensor(np.log(np.maximum(self.data, LOG_FLOOR)), (self,))

        def backward():
            self.grad += np.where(self.data > LOG_FLOOR,
                                  out.grad / np.maximum(self.data, LOG_FLOOR),
                                  0.0)

        out._backward = backward
        return out

    def square(self) -> "Tensor":
        out = Tensor(self.data * self.data, (self,))

        def backward():
            self.grad += out.grad * 2.0 * self.data

        out._backward = backward
        return out

    # -- reductions --------------------------------------------------------

    def sum(self, axis=None) -> "Tensor":
        if axis not in (None, 0):
            raise ValueError(f"sum: unsupported axis {axis!r}")
        out = Tensor(self.data.sum(axis=axis), (self,))

        def backward():
            if axis is None:
                self.grad += out.grad
            else:
                self.grad += np.broadcast_to(out.grad, self.data.shape)

        out._backward = backward
        return out

    def mean(self, axis=None) -> "Tensor":
        if axis not in (None, 0):
            raise ValueError(f"mean: unsupported axis {axis!r}")
        n = self.data.size if axis is None else self.data.shape[0]
        out = Tensor(self.data.mean(axis=axis), (self,))

        def backward():
            scaled = out.grad / n
            if axis is None:
                self.grad += scaled
            else:
                self.grad += np.broadcast_to(scaled, self.data.shape)

        out._backward = backward
        return out

    # -- structured ops ----------------------------------------------------

    def softmax_rows(self) -> "Tensor":
        """Row-wise softmax of a [batch, K] tensor, K >= 2, max-subtracted."""
        if self.data.ndim != 2 or self.data.shape[1] < 2:
            raise ValueError(
                f"softmax_rows needs a [batch, K>=2] tensor, got {self.data.shape}")
        shifted = self.data - self.data.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        value = e / e.sum(axis=1, keepdims=True)
        out = Tensor(value, (self,))

        def backward():
            inner = (out.grad * value).sum(axis=1, keepdims=True)
            self.grad += value * (out.grad - inner)

        out._backward = backward
        return out

    def reverse_gradient(self, trade_off: float) -> "Tensor":
        """Identity forward; backward multiplies the gradient by -trade_off."""
        lam = float(trade_off)
        if not np.isfinite(lam) or lam < 0.0:
            raise ValueError(f"reverse_gradient: trade_off must be finite and >= 0, got {lam}")
        out = Tensor(self.data.copy(), (self,))

        def backward():
            self.grad += -lam * out.grad

        out._backward = backward
        return out

    def select_rows(self, indices) -> "Tensor":
        """Gather rows of a 2-D tensor; backward scatter-adds into them."""
        if self.data.ndim != 2:
            raise ValueError(f"select_rows needs a 2-D tensor, got {self.data.shape}")
        idx = np.asarray(indices, dtype=np.intp)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("select_rows needs a non-empty 1-D index list")
        if idx.min() < 0 or idx.max() >= self.data.shape[0]:
            raise ValueError(
                f"select_rows: index out of range for {self.data.shape[0]} rows")
        out = Tensor(self.data[idx], (self,))

        def backward():
            np.add.at(self.grad, idx, out.grad)

        out._backward = backward
        return out

    # -- backward pass -----------------------------------------------------

    def backward(self) -> None:
        """Run reverse-mode accumulation from a scalar root."""
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar root, got shape {self.data.shape}")
        order = _topological_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()


def _topological_order(root: Tensor) -> list:
    """Iterative post-order walk; robust to long op chains."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value) -> Tensor:
    """Wrap raw data as a leaf tensor; pass existing tensors through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def affine(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Dense layer: out[b, o] = sum_i x[b, i] * weights[i, o] + bias[o]."""
    x, weights, bias = as_tensor(x), as_tensor(weights), as_tensor(bias)
    if x.data.ndim != 2 or weights.data.ndim != 2 or bias.data.ndim != 1:
        raise ValueError(
            "affine expects input [batch, in], weights [in, out], bias [out]; "
            f"got {x.data.shape}, {weights.data.shape}, {bias.data.shape}")
    if x.data.shape[1] != weights.data.shape[0]:
        raise _shape_error("affine input/weights", x.data.shape, weights.data.shape)
    if bias.data.shape[0] != weights.data.shape[1]:
        raise _shape_error("affine weights/bias", weights.data.shape, bias.data.shape)
    out = Tensor(x.data @ weights.data + bias.data, (x, weights, bias))

    def backward():
        x.grad += out.grad @ weights.data.T
        weights.grad += x.data.T @ out.grad
        bias.grad += out.grad.sum(axis=0)

    out._backward = backward
    return out


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack 2-D tensors along rows; backward splits the gradient back."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ValueError("concat_rows needs at least one tensor")
    cols = parts[0].data.shape[1]
    for p in parts:
        if p.data.ndim != 2 or p.data.shape[1] != cols:
            raise _shape_error("concat_rows", parts[0].data.shape, p.data.shape)
    out = Tensor(np.concatenate([p.data for p in parts], axis=0), tuple(parts))

    def backward():
        offset = 0
        for p in parts:
            n = p.data.shape[0]
            p.grad += out.grad[offset:offset + n]
            offset += n

    out._backward = backward
    return out


def zero_gradients(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.zero_grad()
