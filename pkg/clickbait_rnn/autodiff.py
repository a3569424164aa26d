#
#  autodiff.py
#
#  Copyright (c) 2024 The clickbait-rnn Authors
#
#  This file is part of clickbait-rnn.
#
#  clickbait-rnn is free software: you can redistribute it and/or modify
#  it under the terms of the GNU General Public License as published by
#  the Free Software Foundation, either version 3 of the License, or
#  (at your option) any later version.
#
#  clickbait-rnn is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with clickbait-rnn. If not, see <http://www.gnu.org/licenses/>.
"""Provide a dense tensor and a define-by-run tape for reverse-mode differentiation.

A :class:`Tape` is created for every forward pass. Each primitive operation
is a method of the tape: it computes its result with numpy and, when any
input requires a gradient, appends a record holding the inputs, the outputs
and a closure computing the input gradients from the output gradients.
:func:`backward` walks the records once in reverse order.

The operation set is deliberately small. The only broadcasting allowed is
the row-wise bias addition of :meth:`Tape.add_bias`.

Example:

.. code-block:: python

   tape = Tape()
   x = Tensor([[0.5, -1.0]], requires_grad=True)
   w = Tensor([[1.0], [2.0]], requires_grad=True)
   loss = tape.sum(tape.tanh(tape.matmul(x, w)))
   backward(loss, tape)
   print(w.grad)
"""
from dataclasses import dataclass
from typing import Any, Callable, Final, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike, DTypeLike, NDArray
from scipy.special import expit

from clickbait_rnn.errors import DimensionError

DEFAULT_DTYPE: Final = np.float64
"""Double precision is the default and the only precision used in gradient checks."""

Array = NDArray[Any]
GradFn = Callable[[Sequence[Array]], Sequence[Optional[Array]]]


class Tensor:
    """Dense n-dimensional array which may take part in a tape.

    Args:
      data: values of the tensor; copied.
      requires_grad: if True, gradients are accumulated into :attr:`grad`.
      dtype: element type, float64 by default.
      name: optional name used in error messages.
    """

    data: Array
    """Values of this tensor."""
    requires_grad: bool
    """True if this tensor takes part in differentiation."""
    grad: Optional[Array]
    """Gradient accumulator of a leaf tensor, same shape as :attr:`data`."""
    name: Optional[str]
    """Name of this tensor."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_produced")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Optional[DTypeLike] = None,
        name: Optional[str] = None,
    ) -> None:
        self.data = np.array(data, dtype=dtype if dtype is not None else DEFAULT_DTYPE)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._produced = False

    @classmethod
    def _from_op(cls, data: Array, requires_grad: bool) -> "Tensor":
        # ufuncs on 0-d arrays return numpy scalars.
        data = np.asarray(data)
        out = cls.__new__(cls)
        data.flags.writeable = False
        out.data = data
        out.requires_grad = requires_grad
        out.grad = None
        out.name = None
        out._produced = True
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        """Extents of this tensor."""
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        """Number of axes."""
        return int(self.data.ndim)

    @property
    def is_leaf(self) -> bool:
        """True if this tensor was not produced by a tape operation."""
        return not self._produced

    def item(self) -> float:
        """Returns the value of a one-element tensor."""
        if self.data.size != 1:
            raise DimensionError(f"item needs a one-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> Array:
        """Returns a copy of the values."""
        return np.array(self.data)

    def zero_grad(self) -> None:
        """Drop the accumulated gradient."""
        self.grad = None

    def accumulate_grad(self, grad: Array) -> None:
        """Add a gradient to the accumulator.

        Args:
          grad: gradient with the same shape as this tensor.
        """
        if grad.shape != self.data.shape:
            raise DimensionError(f"gradient of shape {grad.shape} does not match tensor of shape {self.data.shape}")
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad += grad

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


@dataclass(frozen=True)
class _Record:
    """One executed primitive operation."""

    op: str
    inputs: tuple[Tensor, ...]
    outputs: tuple[Tensor, ...]
    grad_fn: GradFn


class Tape:
    """Ordered record of the primitive operations of one forward pass.

    A tape and the tensors it produces belong to a single thread. A tape is
    consumed by :func:`backward` and cannot record further operations.

    Args:
      record: if False, nothing is recorded and every result is a constant;
        used for inference.
    """

    recording: Final[bool]
    """True if operations are recorded."""

    __slots__ = ("recording", "_records", "_consumed")

    def __init__(self, record: bool = True) -> None:
        self.recording = record
        self._records: list[_Record] = []
        self._consumed = False

    def __len__(self) -> int:
        return len(self._records)

    @property
    def consumed(self) -> bool:
        """True once :func:`backward` has run on this tape."""
        return self._consumed

    def ops(self) -> list[str]:
        """Names of the recorded operations in execution order."""
        return [r.op for r in self._records]

    def produced(self, t: Tensor) -> bool:
        """Check a tensor is an output of a recorded operation."""
        return any(o is t for r in self._records for o in r.outputs)

    def _emit(self, op: str, inputs: Sequence[Tensor], results: Sequence[Array], grad_fn: GradFn) -> list[Tensor]:
        if self._consumed:
            raise RuntimeError("the tape has already been consumed by backward")
        requires_grad = self.recording and any(t.requires_grad for t in inputs)
        outputs = [Tensor._from_op(r, requires_grad) for r in results]
        if requires_grad:
            self._records.append(_Record(op, tuple(inputs), tuple(outputs), grad_fn))
        return outputs

    def _unary(self, op: str, x: Tensor, result: Array, grad_fn: Callable[[Array], Array]) -> Tensor:
        return self._emit(op, (x,), (result,), lambda gs: (grad_fn(gs[0]),))[0]

    # Linear algebra.

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        """Matrix product of ``a`` [m×k] and ``b`` [k×n]."""
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise DimensionError(f"cannot multiply a tensor of shape {a.shape} by a tensor of shape {b.shape}")
        av, bv = a.data, b.data
        return self._emit("matmul", (a, b), (av @ bv,), lambda gs: (gs[0] @ bv.T, av.T @ gs[0]))[0]

    def transpose(self, x: Tensor) -> Tensor:
        """Transpose of a matrix."""
        if x.ndim != 2:
            raise DimensionError(f"transpose needs a matrix, got shape {x.shape}")
        return self._unary("transpose", x, x.data.T.copy(), lambda g: g.T)

    def reshape(self, x: Tensor, shape: Sequence[int]) -> Tensor:
        """Reshape a tensor keeping the element order."""
        src = x.shape
        try:
            result = x.data.reshape(tuple(shape)).copy()
        except ValueError as e:
            raise DimensionError(f"cannot reshape {src} into {tuple(shape)}") from e
        return self._unary("reshape", x, result, lambda g: g.reshape(src))

    # Element-wise operations.

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        """Element-wise sum of two tensors of identical shape."""
        _same_shape("add", a, b)
        return self._emit("add", (a, b), (a.data + b.data,), lambda gs: (gs[0], gs[0]))[0]

    def add_bias(self, x: Tensor, bias: Tensor) -> Tensor:
        """Add a bias vector to every row of ``x``.

        This is the only broadcasting operation: ``bias`` has shape [n] and
        ``x`` has shape [..., n].
        """
        if bias.ndim != 1 or x.ndim < 1 or x.shape[-1] != bias.shape[0]:
            raise DimensionError(f"cannot add a bias of shape {bias.shape} to rows of shape {x.shape}")
        n = bias.shape[0]
        return self._emit(
            "add_bias", (x, bias), (x.data + bias.data,), lambda gs: (gs[0], gs[0].reshape(-1, n).sum(axis=0))
        )[0]

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        """Element-wise product of two tensors of identical shape."""
        _same_shape("mul", a, b)
        av, bv = a.data, b.data
        return self._emit("mul", (a, b), (av * bv,), lambda gs: (gs[0] * bv, gs[0] * av))[0]

    def sigmoid(self, x: Tensor) -> Tensor:
        """Logistic sigmoid."""
        out = expit(x.data)
        return self._unary("sigmoid", x, out, lambda g: g * out * (1.0 - out))

    def tanh(self, x: Tensor) -> Tensor:
        """Hyperbolic tangent."""
        out = np.tanh(x.data)
        return self._unary("tanh", x, out, lambda g: g * (1.0 - out * out))

    def relu(self, x: Tensor) -> Tensor:
        """Rectified linear unit."""
        positive = x.data > 0
        return self._unary("relu", x, np.where(positive, x.data, 0.0).astype(x.data.dtype), lambda g: g * positive)

    def elementwise(self, op_kind: str, a: Tensor, b: Optional[Tensor] = None) -> Tensor:
        """Apply an element-wise operation by name.

        Args:
          op_kind: one of ``sigmoid``, ``tanh``, ``relu``, ``add``, ``mul``.
          a: first operand.
          b: second operand of the binary kinds.

        Returns:
          the result tensor.
        """
        unary: dict[str, Callable[[Tensor], Tensor]] = {"sigmoid": self.sigmoid, "tanh": self.tanh, "relu": self.relu}
        binary: dict[str, Callable[[Tensor, Tensor], Tensor]] = {"add": self.add, "mul": self.mul}
        if op_kind in unary:
            return unary[op_kind](a)
        if op_kind in binary:
            if b is None:
                raise DimensionError(f"{op_kind} needs two operands")
            return binary[op_kind](a, b)
        raise ValueError(f"unknown element-wise operation: {op_kind}")

    # Structural operations.

    def concat(self, parts: Sequence[Tensor], axis: int) -> Tensor:
        """Concatenate tensors along an axis.

        A single part is returned as is.
        """
        if not parts:
            raise DimensionError("concat needs at least one part")
        if len(parts) == 1:
            return parts[0]
        first = parts[0]
        ax = axis % first.ndim if first.ndim else 0
        for p in parts[1:]:
            if p.ndim != first.ndim or any(
                i != ax and p.shape[i] != first.shape[i] for i in range(first.ndim)
            ):
                raise DimensionError(f"cannot concatenate shapes {[q.shape for q in parts]} along axis {axis}")
        offsets = np.cumsum([p.shape[ax] for p in parts])[:-1]
        return self._emit(
            "concat",
            parts,
            (np.concatenate([p.data for p in parts], axis=ax),),
            lambda gs: np.split(gs[0], offsets, axis=ax),
        )[0]

    def split(self, x: Tensor, sizes: Sequence[int], axis: int) -> list[Tensor]:
        """Split a tensor along an axis into parts of the given extents."""
        ax = axis % x.ndim
        if any(s <= 0 for s in sizes) or sum(sizes) != x.shape[ax]:
            raise DimensionError(f"cannot split extent {x.shape[ax]} of shape {x.shape} into {list(sizes)}")
        offsets = np.cumsum(sizes)[:-1]
        pieces = [p.copy() for p in np.split(x.data, offsets, axis=ax)]
        return self._emit("split", (x,), pieces, lambda gs: (np.concatenate(list(gs), axis=ax),))

    def take(self, table: Tensor, ids: ArrayLike) -> Tensor:
        """Gather rows of a table by integer ids.

        Args:
          table: a [rows×dim] tensor.
          ids: integer array of any shape.

        Returns:
          a tensor of shape ``ids.shape + (dim,)``.
        """
        idx = np.asarray(ids, dtype=np.int64)
        if table.ndim != 2:
            raise DimensionError(f"take needs a table matrix, got shape {table.shape}")
        if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
            raise DimensionError(f"id out of range for a table of {table.shape[0]} rows")

        def grad_fn(gs: Sequence[Array]) -> tuple[Array]:
            g = np.zeros_like(table.data)
            np.add.at(g, idx.reshape(-1), gs[0].reshape(-1, table.shape[1]))
            return (g,)

        return self._emit("take", (table,), (table.data[idx],), grad_fn)[0]

    # Reductions.

    def sum(self, x: Tensor) -> Tensor:
        """Sum of all elements, a scalar tensor."""
        shape = x.data.shape
        return self._unary("sum", x, np.asarray(x.data.sum()), lambda g: np.full(shape, g, dtype=x.data.dtype))

    def max_over_time(self, x: Tensor, valid_len: Union[int, ArrayLike]) -> Tensor:
        """Per-feature maximum over the first valid rows.

        ``x`` has shape [..., T, F]; ``valid_len`` is a count or an array of
        counts with the leading shape of ``x``. Rows at or after the valid
        length are ignored. The gradient is routed to one row per feature,
        the lowest index among ties.
        """
        if x.ndim < 2:
            raise DimensionError(f"max_over_time needs at least 2 axes, got shape {x.shape}")
        steps = x.shape[-2]
        lengths = np.broadcast_to(np.asarray(valid_len, dtype=np.int64), x.shape[:-2])
        if lengths.size and (lengths.min() < 1 or lengths.max() > steps):
            raise DimensionError(f"valid length must be in [1, {steps}], got {valid_len}")
        positions = np.arange(steps).reshape((1,) * (x.ndim - 2) + (steps, 1))
        masked = np.where(positions < lengths[..., None, None], x.data, -np.inf)
        arg = np.argmax(masked, axis=-2)[..., None, :]
        out = np.take_along_axis(x.data, arg, axis=-2)[..., 0, :]

        def grad_fn(g: Array) -> Array:
            gx = np.zeros_like(x.data)
            np.put_along_axis(gx, arg, g[..., None, :], axis=-2)
            return gx

        return self._unary("max_over_time", x, out, grad_fn)

    # Convolution and loss.

    def conv1d(self, x: Tensor, w: Tensor) -> Tensor:
        """One-dimensional convolution with symmetric zero padding.

        Args:
          x: input of shape [N×L×in_ch].
          w: filters of shape [k×in_ch×out_ch] with an odd width ``k``.

        Returns:
          a tensor of shape [N×L×out_ch]; the sequence length is preserved.
        """
        if x.ndim != 3 or w.ndim != 3 or x.shape[2] != w.shape[1]:
            raise DimensionError(f"cannot convolve input of shape {x.shape} with filters of shape {w.shape}")
        width = w.shape[0]
        if width % 2 == 0:
            raise DimensionError(f"kernel width must be odd, got {width}")
        pad, length = width // 2, x.shape[1]
        padded = np.pad(x.data, ((0, 0), (pad, pad), (0, 0)))
        windows = sliding_window_view(padded, width, axis=1)
        wv = w.data

        def grad_fn(gs: Sequence[Array]) -> tuple[Array, Array]:
            g = gs[0]
            gw = np.einsum("nlik,nlo->kio", windows, g)
            gp = np.zeros_like(padded)
            for j in range(width):
                gp[:, j : j + length, :] += g @ wv[j].T
            return gp[:, pad : pad + length, :], gw

        return self._emit("conv1d", (x, w), (np.einsum("nlik,kio->nlo", windows, wv),), grad_fn)[0]

    def binary_cross_entropy(self, p: Tensor, y: ArrayLike, eps: float) -> Tensor:
        """Mean binary cross-entropy of probabilities clamped to ``[eps, 1 - eps]``."""
        labels = np.asarray(y, dtype=p.data.dtype)
        if p.ndim != 1 or labels.shape != p.shape:
            raise DimensionError(f"probabilities of shape {p.shape} do not match labels of shape {labels.shape}")
        pc = np.clip(p.data, eps, 1.0 - eps)
        inside = (p.data >= eps) & (p.data <= 1.0 - eps)
        n = p.shape[0]
        loss = np.asarray(-np.mean(labels * np.log(pc) + (1.0 - labels) * np.log(1.0 - pc)))
        return self._unary("bce", p, loss, lambda g: g * inside * (-(labels / pc) + (1.0 - labels) / (1.0 - pc)) / n)


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op} needs identical shapes, got {a.shape} and {b.shape}")


def constant(data: ArrayLike, dtype: Optional[DTypeLike] = None) -> Tensor:
    """Create a tensor which never receives a gradient."""
    return Tensor(data, requires_grad=False, dtype=dtype)


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate gradients of every leaf which requires them.

    Gradients accumulate: calling :func:`backward` on a new tape without
    resetting leaves adds to the existing :attr:`Tensor.grad`. The tape is
    consumed afterwards.

    Args:
      loss: a scalar tensor produced by ``tape``.
      tape: the tape of the forward pass.
    """
    if loss.data.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if tape.consumed:
        raise RuntimeError("the tape has already been consumed by backward")
    if not tape.produced(loss):
        raise ValueError("the loss was not produced by the given tape")

    grads: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
    for record in reversed(tape._records):
        upstream = [grads.pop(id(o), None) for o in record.outputs]
        if all(g is None for g in upstream):
            continue
        filled = [g if g is not None else np.zeros_like(o.data) for g, o in zip(upstream, record.outputs)]
        for t, g in zip(record.inputs, record.grad_fn(filled)):
            if g is None or not t.requires_grad:
                continue
            if t.is_leaf:
                t.accumulate_grad(np.asarray(g))
            elif id(t) in grads:
                grads[id(t)] = grads[id(t)] + g
            else:
                grads[id(t)] = np.asarray(g)
    tape._records.clear()
    tape._consumed = True


def glorot_uniform(
    shape: Sequence[int], fan_in: int, fan_out: int, rng: np.random.Generator, dtype: DTypeLike = DEFAULT_DTYPE
) -> Tensor:
    """Create a trainable tensor with values uniform in ±sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=tuple(shape)), requires_grad=True, dtype=dtype)


def zeros(shape: Sequence[int], dtype: DTypeLike = DEFAULT_DTYPE) -> Tensor:
    """Create a trainable tensor filled with zeros."""
    return Tensor(np.zeros(tuple(shape)), requires_grad=True, dtype=dtype)
