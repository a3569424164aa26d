#
#  recurrent.py
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
"""Implement the hidden layer: RNN, LSTM and GRU cells run in both directions.

Every step function works on a row batch: ``x`` is [B×D] and the state
holds [B×H] tensors; a single vector is a one-row batch. Weight matrices
are stored as [H×D] and [H×H], so ``W·x`` of a row batch is computed as
``x·Wᵀ``.

The cells compute

* RNN: :math:`h_t = \\tanh(U h_{t-1} + W_x x_t + b)`,
* LSTM with peepholes:

  .. math::
     i_t &= \\sigma(W_{xi} x_t + W_{hi} h_{t-1} + W_{ci} c_{t-1} + b_i) \\\\
     f_t &= \\sigma(W_{xf} x_t + W_{hf} h_{t-1} + W_{cf} c_{t-1} + b_f) \\\\
     c_t &= f_t \\odot c_{t-1} + i_t \\odot \\tanh(W_{xc} x_t + W_{hc} h_{t-1} + b_c) \\\\
     o_t &= \\sigma(W_{xo} x_t + W_{ho} h_{t-1} + W_{co} c_t + b_o) \\\\
     h_t &= o_t \\odot \\tanh(c_t)

* GRU:

  .. math::
     z_t &= \\sigma(W_z x_t + U_z h_{t-1}) \\\\
     r_t &= \\sigma(W_r x_t + U_r h_{t-1}) \\\\
     \\tilde{h}_t &= \\tanh(W_h x_t + U (r_t \\odot h_{t-1})) \\\\
     h_t &= (1 - z_t) \\odot h_{t-1} + z_t \\odot \\tilde{h}_t
"""
from dataclasses import dataclass, fields
from typing import Callable, Iterator, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, DTypeLike

from clickbait_rnn.autodiff import DEFAULT_DTYPE, Tape, Tensor, constant, glorot_uniform, zeros
from clickbait_rnn.errors import ConfigError, DataError, DimensionError
from clickbait_rnn.labels import CellKind, Mode, Peephole


class _CellParams:
    """Common helpers of cell parameter sets."""

    def named_tensors(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        """Iterate over tensors with stable names."""
        for f in fields(self):  # type: ignore[arg-type]
            value = getattr(self, f.name)
            if isinstance(value, Tensor):
                yield prefix + f.name, value


def _linear(tape: Tape, x: Tensor, w: Tensor) -> Tensor:
    return tape.matmul(x, tape.transpose(w))


def _negate(tape: Tape, x: Tensor) -> Tensor:
    return tape.mul(x, constant(np.full(x.shape, -1.0), dtype=x.data.dtype))


def _check_input(x: Tensor, h: Tensor, input_size: int, hidden_size: int) -> None:
    if x.ndim != 2 or x.shape[1] != input_size:
        raise DimensionError(f"input of shape {x.shape} does not fit a cell with input size {input_size}")
    if h.shape != (x.shape[0], hidden_size):
        raise DimensionError(f"state of shape {h.shape} does not fit {x.shape[0]} rows of hidden size {hidden_size}")


@dataclass
class RnnCellParams(_CellParams):
    """Parameters of a standard RNN cell."""

    U: Tensor
    """[H×H] recurrent weights."""
    W_x: Tensor
    """[H×D] input weights."""
    b: Tensor
    """[H] bias."""

    @property
    def hidden_size(self) -> int:
        """Width of the hidden state."""
        return self.U.shape[0]

    @property
    def input_size(self) -> int:
        """Width of an input row."""
        return self.W_x.shape[1]

    @classmethod
    def initialize(
        cls, input_size: int, hidden_size: int, rng: np.random.Generator, dtype: DTypeLike = DEFAULT_DTYPE
    ) -> "RnnCellParams":
        """Create Glorot-uniform weights and a zero bias."""
        h, d = hidden_size, input_size
        recurrent = glorot_uniform((h, h), h, h, rng, dtype)
        return cls(recurrent, glorot_uniform((h, d), d, h, rng, dtype), zeros((h,), dtype))


@dataclass
class LstmCellParams(_CellParams):
    """Parameters of an LSTM cell with peephole connections.

    With :attr:`Peephole.DIAGONAL` only the diagonals of ``W_ci``, ``W_cf``
    and ``W_co`` take part in the computation, so off-diagonal entries never
    receive a gradient.
    """

    W_xi: Tensor
    """[H×D] input weights of the input gate."""
    W_xf: Tensor
    """[H×D] input weights of the forget gate."""
    W_xc: Tensor
    """[H×D] input weights of the cell candidate."""
    W_xo: Tensor
    """[H×D] input weights of the output gate."""
    W_hi: Tensor
    """[H×H] recurrent weights of the input gate."""
    W_hf: Tensor
    """[H×H] recurrent weights of the forget gate."""
    W_hc: Tensor
    """[H×H] recurrent weights of the cell candidate."""
    W_ho: Tensor
    """[H×H] recurrent weights of the output gate."""
    W_ci: Tensor
    """[H×H] peephole from the previous cell state to the input gate."""
    W_cf: Tensor
    """[H×H] peephole from the previous cell state to the forget gate."""
    W_co: Tensor
    """[H×H] peephole from the new cell state to the output gate."""
    b_i: Tensor
    """[H] input gate bias."""
    b_f: Tensor
    """[H] forget gate bias."""
    b_c: Tensor
    """[H] cell candidate bias."""
    b_o: Tensor
    """[H] output gate bias."""
    peephole: Peephole = Peephole.FULL
    """Whether the peephole matrices are full or diagonal."""

    @property
    def hidden_size(self) -> int:
        """Width of the hidden and cell states."""
        return self.W_hi.shape[0]

    @property
    def input_size(self) -> int:
        """Width of an input row."""
        return self.W_xi.shape[1]

    @classmethod
    def initialize(
        cls,
        input_size: int,
        hidden_size: int,
        rng: np.random.Generator,
        peephole: Peephole = Peephole.FULL,
        dtype: DTypeLike = DEFAULT_DTYPE,
    ) -> "LstmCellParams":
        """Create Glorot-uniform weights; biases are zero except the forget bias, which is one."""
        h, d = hidden_size, input_size
        inputs = [glorot_uniform((h, d), d, h, rng, dtype) for _ in range(4)]
        recurrent = [glorot_uniform((h, h), h, h, rng, dtype) for _ in range(4)]
        peepholes = [glorot_uniform((h, h), h, h, rng, dtype) for _ in range(3)]
        if peephole is Peephole.DIAGONAL:
            for p in peepholes:
                p.data = p.data * np.eye(h)
        forget = zeros((h,), dtype)
        forget.data = np.ones(h, dtype=forget.data.dtype)
        biases = [zeros((h,), dtype), forget, zeros((h,), dtype), zeros((h,), dtype)]
        return cls(*inputs, *recurrent, *peepholes, *biases, peephole)

    def peephole_weights(self, tape: Tape) -> tuple[Tensor, Tensor, Tensor]:
        """Peephole matrices as used in the computation."""
        if self.peephole is Peephole.FULL:
            return self.W_ci, self.W_cf, self.W_co
        eye = constant(np.eye(self.hidden_size), dtype=self.W_ci.data.dtype)
        return tape.mul(self.W_ci, eye), tape.mul(self.W_cf, eye), tape.mul(self.W_co, eye)


@dataclass
class GruCellParams(_CellParams):
    """Parameters of a GRU cell."""

    W_z: Tensor
    """[H×D] input weights of the update gate."""
    W_r: Tensor
    """[H×D] input weights of the reset gate."""
    W_h: Tensor
    """[H×D] input weights of the candidate state."""
    U_z: Tensor
    """[H×H] recurrent weights of the update gate."""
    U_r: Tensor
    """[H×H] recurrent weights of the reset gate."""
    U: Tensor
    """[H×H] recurrent weights of the candidate state."""

    @property
    def hidden_size(self) -> int:
        """Width of the hidden state."""
        return self.U.shape[0]

    @property
    def input_size(self) -> int:
        """Width of an input row."""
        return self.W_z.shape[1]

    @classmethod
    def initialize(
        cls, input_size: int, hidden_size: int, rng: np.random.Generator, dtype: DTypeLike = DEFAULT_DTYPE
    ) -> "GruCellParams":
        """Create Glorot-uniform weights; the GRU has no biases."""
        h, d = hidden_size, input_size
        inputs = [glorot_uniform((h, d), d, h, rng, dtype) for _ in range(3)]
        recurrent = [glorot_uniform((h, h), h, h, rng, dtype) for _ in range(3)]
        return cls(*inputs, *recurrent)


CellParams = Union[RnnCellParams, LstmCellParams, GruCellParams]

_PARAMS_OF: dict[CellKind, type] = {
    CellKind.RNN: RnnCellParams,
    CellKind.GRU: GruCellParams,
    CellKind.LSTM: LstmCellParams,
}


def initialize_cell(
    kind: CellKind,
    input_size: int,
    hidden_size: int,
    rng: np.random.Generator,
    peephole: Peephole = Peephole.FULL,
    dtype: DTypeLike = DEFAULT_DTYPE,
) -> CellParams:
    """Create randomly initialized parameters of a cell kind."""
    if kind is CellKind.LSTM:
        return LstmCellParams.initialize(input_size, hidden_size, rng, peephole, dtype)
    params: CellParams = _PARAMS_OF[kind].initialize(input_size, hidden_size, rng, dtype)
    return params


@dataclass(frozen=True)
class StepState:
    """Hidden state of a cell; ``c`` is present only for LSTM cells."""

    h: Tensor
    c: Optional[Tensor] = None


def initial_state(kind: CellKind, batch_size: int, hidden_size: int, dtype: DTypeLike = DEFAULT_DTYPE) -> StepState:
    """Zero state of a cell kind."""
    h = constant(np.zeros((batch_size, hidden_size)), dtype=dtype)
    c = constant(np.zeros((batch_size, hidden_size)), dtype=dtype) if kind is CellKind.LSTM else None
    return StepState(h, c)


def rnn_step(x: Tensor, state: StepState, p: RnnCellParams, tape: Tape) -> StepState:
    """One step of a standard RNN cell."""
    _check_input(x, state.h, p.input_size, p.hidden_size)
    pre = tape.add(_linear(tape, state.h, p.U), _linear(tape, x, p.W_x))
    return StepState(tape.tanh(tape.add_bias(pre, p.b)))


def lstm_step(x: Tensor, state: StepState, p: LstmCellParams, tape: Tape) -> StepState:
    """One step of an LSTM cell.

    The output gate peeks at the new memory cell ``c_t``, the input and
    forget gates at the previous one.
    """
    if state.c is None:
        raise DimensionError("an LSTM step needs a memory cell state")
    _check_input(x, state.h, p.input_size, p.hidden_size)
    h, c = state.h, state.c
    w_ci, w_cf, w_co = p.peephole_weights(tape)

    def gate(w_x: Tensor, w_h: Tensor, cell: Optional[Tensor], w_c: Optional[Tensor], b: Tensor) -> Tensor:
        pre = tape.add(_linear(tape, x, w_x), _linear(tape, h, w_h))
        if cell is not None and w_c is not None:
            pre = tape.add(pre, _linear(tape, cell, w_c))
        return tape.add_bias(pre, b)

    i = tape.sigmoid(gate(p.W_xi, p.W_hi, c, w_ci, p.b_i))
    f = tape.sigmoid(gate(p.W_xf, p.W_hf, c, w_cf, p.b_f))
    candidate = tape.tanh(gate(p.W_xc, p.W_hc, None, None, p.b_c))
    c_new = tape.add(tape.mul(f, c), tape.mul(i, candidate))
    o = tape.sigmoid(gate(p.W_xo, p.W_ho, c_new, w_co, p.b_o))
    return StepState(tape.mul(o, tape.tanh(c_new)), c_new)


def gru_step(x: Tensor, state: StepState, p: GruCellParams, tape: Tape) -> StepState:
    """One step of a GRU cell."""
    _check_input(x, state.h, p.input_size, p.hidden_size)
    h = state.h
    z = tape.sigmoid(tape.add(_linear(tape, x, p.W_z), _linear(tape, h, p.U_z)))
    r = tape.sigmoid(tape.add(_linear(tape, x, p.W_r), _linear(tape, h, p.U_r)))
    candidate = tape.tanh(tape.add(_linear(tape, x, p.W_h), _linear(tape, tape.mul(r, h), p.U)))
    # (1 - z) h + z h~ == h + z (h~ - h)
    return StepState(tape.add(h, tape.mul(z, tape.add(candidate, _negate(tape, h)))))


_STEPS: dict[CellKind, Callable[..., StepState]] = {
    CellKind.RNN: rnn_step,
    CellKind.GRU: gru_step,
    CellKind.LSTM: lstm_step,
}


def step(kind: CellKind, x: Tensor, state: StepState, p: CellParams, tape: Tape) -> StepState:
    """Run one step of a cell kind."""
    if not isinstance(p, _PARAMS_OF[kind]):
        raise ConfigError(f"{type(p).__name__} cannot run a {kind.value} cell")
    return _STEPS[kind](x, state, p, tape)


def _blend(tape: Tape, keep: Tensor, drop: Tensor, new: Tensor, old: Tensor) -> Tensor:
    return tape.add(tape.mul(keep, new), tape.mul(drop, old))


def run_unidirectional(
    steps: list[Tensor], mask: np.ndarray, kind: CellKind, p: CellParams, tape: Tape, reverse: bool = False
) -> Tensor:
    """Run a cell over a sequence of row batches and return the final hidden state.

    Rows whose mask is 0 at a step keep their state unchanged, so the
    result of a row is its state after its last valid step (first valid
    step when ``reverse`` is set).

    Args:
      steps: T tensors of shape [B×D].
      mask: [B×T] array of 0 and 1.
      kind: cell kind.
      p: cell parameters.
      tape: tape of the forward pass.
      reverse: run from the last step to the first.

    Returns:
      a [B×H] tensor.
    """
    batch_size = steps[0].shape[0]
    dtype = steps[0].data.dtype
    state = initial_state(kind, batch_size, p.hidden_size, dtype)
    order = range(len(steps) - 1, -1, -1) if reverse else range(len(steps))
    for t in order:
        valid = mask[:, t]
        if not valid.any():
            continue
        new = step(kind, steps[t], state, p, tape)
        if valid.all():
            state = new
            continue
        keep = constant(np.broadcast_to(valid[:, None], (batch_size, p.hidden_size)), dtype=dtype)
        drop = constant(np.broadcast_to(1.0 - valid[:, None], (batch_size, p.hidden_size)), dtype=dtype)
        h = _blend(tape, keep, drop, new.h, state.h)
        c = _blend(tape, keep, drop, new.c, state.c) if new.c is not None and state.c is not None else None
        state = StepState(h, c)
    return state.h


def run_bidirectional(
    seq: Tensor, mask: ArrayLike, kind: CellKind, forward: CellParams, backward: CellParams, tape: Tape
) -> Tensor:
    """Encode sequences into fixed-size vectors with a bidirectional cell.

    The result concatenates the forward state at the last valid step and the
    backward state at the first step. Padded steps never update a state.

    Args:
      seq: [T×D] sequence, or [B×T×D] batch of sequences.
      mask: [T] or [B×T] array of 0 and 1.
      kind: cell kind.
      forward: parameters of the forward direction.
      backward: parameters of the backward direction.
      tape: tape of the forward pass.

    Returns:
      a [2H] vector, or [B×2H] for a batch.
    """
    single = seq.ndim == 2
    m = np.asarray(mask, dtype=np.float64)
    if single:
        seq = tape.reshape(seq, (1, *seq.shape))
        m = m.reshape(1, -1)
    if seq.ndim != 3 or m.shape != seq.shape[:2]:
        raise DimensionError(f"mask of shape {m.shape} does not match sequences of shape {seq.shape}")
    if not (m.sum(axis=1) > 0).all():
        raise DataError("cannot encode a sequence without valid steps")

    batch_size, length, dim = seq.shape
    steps = [tape.reshape(s, (batch_size, dim)) for s in tape.split(seq, [1] * length, axis=1)]
    h_fwd = run_unidirectional(steps, m, kind, forward, tape)
    h_bwd = run_unidirectional(steps, m, kind, backward, tape, reverse=True)
    out = tape.concat([h_fwd, h_bwd], axis=1)
    return tape.reshape(out, (out.shape[1],)) if single else out


def apply_dropout(x: Tensor, rate: float, mode: Mode, rng: np.random.Generator, tape: Tape) -> Tensor:
    """Inverted dropout.

    In training mode every component is zeroed with probability ``rate``
    and survivors are scaled by ``1 / (1 - rate)``; in evaluation mode the
    input is returned unchanged.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if mode is Mode.EVAL or rate == 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    return tape.mul(x, constant(keep / (1.0 - rate), dtype=x.data.dtype))
