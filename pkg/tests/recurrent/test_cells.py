#
#  test_cells.py
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
"""Tests for the recurrent cells.

Every cell is compared with a straight-line transcription of its equations
written with column vectors.
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose
from numpy.typing import NDArray
from scipy.special import expit

from clickbait_rnn.autodiff import Tape, Tensor, constant
from clickbait_rnn.errors import ConfigError, DimensionError
from clickbait_rnn.labels import CellKind, Peephole
from clickbait_rnn.recurrent import (
    CellParams,
    GruCellParams,
    LstmCellParams,
    RnnCellParams,
    StepState,
    gru_step,
    initial_state,
    initialize_cell,
    lstm_step,
    rnn_step,
    run_unidirectional,
    step,
)
from tests.gradcheck import check_gradients

DRAWS = 100


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)


def randomize(params: CellParams, rng: np.random.Generator) -> None:
    for _, t in params.named_tensors():
        t.data = rng.normal(size=t.shape)


def zero(params: CellParams) -> None:
    for _, t in params.named_tensors():
        t.data = np.zeros(t.shape)


def row(v: NDArray[np.float64]) -> Tensor:
    return constant(v.reshape(1, -1))


def test_rnn_zero_params() -> None:
    """Test zero parameters give a zero state."""
    p = RnnCellParams.initialize(3, 3, np.random.default_rng(0))
    zero(p)
    out = rnn_step(row(np.ones(3)), StepState(row(np.full(3, 0.5))), p, Tape())
    assert_allclose(out.h.data, np.zeros((1, 3)))
    assert out.c is None


def test_rnn_identity_recurrence() -> None:
    """Test U = I, W_x = 0, b = 0 gives tanh of the previous state."""
    p = RnnCellParams.initialize(3, 3, np.random.default_rng(0))
    zero(p)
    p.U.data = np.eye(3)
    h = np.array([0.5, -1.0, 2.0])
    out = rnn_step(row(np.ones(3)), StepState(row(h)), p, Tape())
    assert_allclose(out.h.data[0], np.tanh(h))


def test_rnn_oracle(rng: np.random.Generator) -> None:
    """Test the RNN step against its equation."""
    p = RnnCellParams.initialize(3, 3, rng)
    for _ in range(DRAWS):
        randomize(p, rng)
        x, h = rng.normal(size=3), rng.normal(size=3)
        expected = np.tanh(p.U.data @ h + p.W_x.data @ x + p.b.data)
        out = rnn_step(row(x), StepState(row(h)), p, Tape())
        assert np.abs(out.h.data[0] - expected).max() <= 1e-12


def lstm_oracle(
    p: LstmCellParams, x: NDArray[np.float64], h: NDArray[np.float64], c: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    i = expit(p.W_xi.data @ x + p.W_hi.data @ h + p.W_ci.data @ c + p.b_i.data)
    f = expit(p.W_xf.data @ x + p.W_hf.data @ h + p.W_cf.data @ c + p.b_f.data)
    c_new = f * c + i * np.tanh(p.W_xc.data @ x + p.W_hc.data @ h + p.b_c.data)
    o = expit(p.W_xo.data @ x + p.W_ho.data @ h + p.W_co.data @ c_new + p.b_o.data)
    return o * np.tanh(c_new), c_new


def test_lstm_zero_params() -> None:
    """Test zero parameters halve the memory cell."""
    p = LstmCellParams.initialize(3, 2, np.random.default_rng(0))
    zero(p)
    out = lstm_step(row(np.ones(3)), StepState(row(np.zeros(2)), row(np.zeros(2))), p, Tape())
    assert_allclose(out.h.data, np.zeros((1, 2)))
    assert out.c is not None
    assert_allclose(out.c.data, np.zeros((1, 2)))

    out = lstm_step(row(np.ones(3)), StepState(row(np.zeros(2)), row(np.ones(2))), p, Tape())
    assert out.c is not None
    assert_allclose(out.c.data, np.full((1, 2), 0.5))
    assert_allclose(out.h.data, np.full((1, 2), 0.5 * np.tanh(0.5)))
    assert_allclose(out.h.data[0, 0], 0.2311, atol=1e-4)


def test_lstm_oracle(rng: np.random.Generator) -> None:
    """Test the LSTM step with full peepholes against its equations."""
    p = LstmCellParams.initialize(3, 2, rng)
    for _ in range(DRAWS):
        randomize(p, rng)
        x, h, c = rng.normal(size=3), rng.normal(size=2), rng.normal(size=2)
        expected_h, expected_c = lstm_oracle(p, x, h, c)
        out = lstm_step(row(x), StepState(row(h), row(c)), p, Tape())
        assert out.c is not None
        assert np.abs(out.h.data[0] - expected_h).max() <= 1e-12
        assert np.abs(out.c.data[0] - expected_c).max() <= 1e-12


def test_lstm_diagonal_peephole(rng: np.random.Generator) -> None:
    """Test diagonal peepholes use only the diagonals and train nothing else."""
    p = LstmCellParams.initialize(3, 2, rng, Peephole.DIAGONAL)
    for name in ("W_ci", "W_cf", "W_co"):
        assert getattr(p, name).data[0, 1] == 0.0
    randomize(p, rng)
    x, h, c = rng.normal(size=3), rng.normal(size=2), rng.normal(size=2)
    out = lstm_step(row(x), StepState(row(h), row(c)), p, Tape())

    diagonal = LstmCellParams(**{n: Tensor(t.data) for n, t in p.named_tensors()})
    for name in ("W_ci", "W_cf", "W_co"):
        getattr(diagonal, name).data = np.diag(np.diag(getattr(p, name).data))
    expected_h, _ = lstm_oracle(diagonal, x, h, c)
    assert np.abs(out.h.data[0] - expected_h).max() <= 1e-12

    def build(t: Tape) -> Tensor:
        return t.sum(lstm_step(row(x), StepState(row(h), row(c)), p, t).h)

    check_gradients(build, [p.W_ci, p.W_cf, p.W_co])
    assert p.W_ci.grad is not None
    assert p.W_ci.grad[0, 1] == 0.0


def test_lstm_forget_bias() -> None:
    """Test the forget bias starts at one and the other biases at zero."""
    p = LstmCellParams.initialize(3, 4, np.random.default_rng(0))
    assert_allclose(p.b_f.data, np.ones(4))
    for b in (p.b_i, p.b_c, p.b_o):
        assert_allclose(b.data, np.zeros(4))


def test_lstm_needs_memory_cell() -> None:
    """Test an LSTM step without a memory cell is rejected."""
    p = LstmCellParams.initialize(3, 2, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        lstm_step(row(np.ones(3)), StepState(row(np.zeros(2))), p, Tape())


def test_gru_zero_params() -> None:
    """Test zero parameters halve the state."""
    p = GruCellParams.initialize(3, 2, np.random.default_rng(0))
    zero(p)
    h = np.array([1.0, -2.0])
    out = gru_step(row(np.ones(3)), StepState(row(h)), p, Tape())
    assert_allclose(out.h.data[0], 0.5 * h)


def test_gru_zero_state(rng: np.random.Generator) -> None:
    """Test a zero state gives z ⊙ tanh(W_h x)."""
    p = GruCellParams.initialize(3, 2, rng)
    randomize(p, rng)
    x = rng.normal(size=3)
    out = gru_step(row(x), StepState(row(np.zeros(2))), p, Tape())
    z = expit(p.W_z.data @ x)
    assert_allclose(out.h.data[0], z * np.tanh(p.W_h.data @ x), rtol=0, atol=1e-12)


def test_gru_oracle(rng: np.random.Generator) -> None:
    """Test the GRU step against its equations."""
    p = GruCellParams.initialize(3, 2, rng)
    for _ in range(DRAWS):
        randomize(p, rng)
        x, h = rng.normal(size=3), rng.normal(size=2)
        z = expit(p.W_z.data @ x + p.U_z.data @ h)
        r = expit(p.W_r.data @ x + p.U_r.data @ h)
        candidate = np.tanh(p.W_h.data @ x + p.U.data @ (r * h))
        expected = (1 - z) * h + z * candidate
        out = gru_step(row(x), StepState(row(h)), p, Tape())
        assert np.abs(out.h.data[0] - expected).max() <= 1e-12


@pytest.mark.parametrize("kind", list(CellKind))
def test_step_shape_errors(kind: CellKind) -> None:
    """Test inputs and states must fit the cell."""
    p = initialize_cell(kind, 3, 2, np.random.default_rng(0))
    state = initial_state(kind, 1, 2)
    with pytest.raises(DimensionError):
        step(kind, row(np.ones(4)), state, p, Tape())
    with pytest.raises(DimensionError):
        step(kind, row(np.ones(3)), initial_state(kind, 1, 3), p, Tape())


def test_step_params_mismatch() -> None:
    """Test parameters of another cell kind are rejected."""
    p = initialize_cell(CellKind.GRU, 3, 2, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        step(CellKind.LSTM, row(np.ones(3)), initial_state(CellKind.LSTM, 1, 2), p, Tape())


@pytest.mark.parametrize("kind", list(CellKind))
def test_activations_bounded(kind: CellKind, rng: np.random.Generator) -> None:
    """Test hidden states stay in (-1, 1)."""
    p = initialize_cell(kind, 3, 4, rng)
    randomize(p, rng)
    state = initial_state(kind, 5, 4)
    for _ in range(3):
        state = step(kind, constant(rng.normal(size=(5, 3))), state, p, Tape())
        assert np.abs(state.h.data).max() <= 1.0


@pytest.mark.parametrize("kind", list(CellKind))
def test_unrolled_gradients(kind: CellKind, rng: np.random.Generator) -> None:
    """Test gradients through three steps of every cell against finite differences."""
    p = initialize_cell(kind, 3, 2, rng)
    inputs = [Tensor(rng.normal(size=(2, 3)), requires_grad=True) for _ in range(3)]
    mask = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 0.0]])

    def build(t: Tape) -> Tensor:
        return t.sum(t.tanh(run_unidirectional(inputs, mask, kind, p, t)))

    check_gradients(build, [tensor for _, tensor in p.named_tensors()] + inputs)
