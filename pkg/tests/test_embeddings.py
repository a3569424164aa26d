#
#  test_embeddings.py
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
"""Tests for embeddings module in clickbait_rnn package.
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from clickbait_rnn.autodiff import Tape, Tensor, backward
from clickbait_rnn.embeddings import CharCnnParams, EmbeddingLayerParams, char_cnn_encode, embed_tokens, encode_words
from clickbait_rnn.errors import DataError, DimensionError
from clickbait_rnn.text import EmbeddingTable, HeadlineExample, build_vocab, encode_batch
from tests.gradcheck import check_gradients


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(7)


@pytest.fixture
def params(rng: np.random.Generator) -> CharCnnParams:
    return CharCnnParams.initialize(10, rng, char_dim=4, channels=(5, 5, 6), kernel_width=3)


def test_forced_arithmetic() -> None:
    """Test one k=1 layer of weight 1 over embeddings (2, -1, 3) pools to 3."""
    params = CharCnnParams(
        Tensor([[0.0], [2.0], [-1.0], [3.0]], requires_grad=True),
        [Tensor(np.ones((1, 1, 1)), requires_grad=True)],
        [Tensor(np.zeros(1), requires_grad=True)],
    )
    assert_array_equal(char_cnn_encode([1, 2, 3], params).data, [3.0])


def test_zero_filters(params: CharCnnParams) -> None:
    """Test zero weights and biases give zero vectors for any word."""
    for w, b in zip(params.filters, params.biases):
        w.data = np.zeros_like(w.data)
        b.data = np.zeros_like(b.data)
    assert_array_equal(char_cnn_encode([3, 4, 5, 6], params).data, np.zeros(6))


def test_output_width(params: CharCnnParams) -> None:
    """Test words of any length give out_channels components."""
    assert char_cnn_encode([2, 3], params).shape == (6,)
    assert char_cnn_encode([2] * 24, params).shape == (6,)
    with pytest.raises(DataError):
        char_cnn_encode([], params)


def test_padding_invariance(params: CharCnnParams) -> None:
    """Test trailing padding does not change the encoding of a word."""
    bare = encode_words([[3, 4, 5]], [3], params, Tape()).data
    padded = encode_words([[3, 4, 5, 0, 0, 0, 0]], [3], params, Tape()).data
    assert_allclose(padded, bare, rtol=0, atol=1e-12)


def test_encode_words_errors(params: CharCnnParams) -> None:
    """Test malformed inputs."""
    with pytest.raises(DimensionError):
        encode_words([[1, 2]], [2, 2], params, Tape())
    with pytest.raises(DataError):
        encode_words([[1, 2]], [0], params, Tape())
    with pytest.raises(DataError):
        encode_words([[1, 10]], [2], params, Tape())


def test_params_validation(rng: np.random.Generator) -> None:
    """Test layers must chain channels and use odd widths."""
    table = Tensor(np.zeros((4, 3)))
    with pytest.raises(DimensionError):
        CharCnnParams(table, [Tensor(np.zeros((3, 2, 4)))], [Tensor(np.zeros(4))])
    with pytest.raises(DimensionError):
        CharCnnParams(table, [Tensor(np.zeros((2, 3, 4)))], [Tensor(np.zeros(4))])
    with pytest.raises(DimensionError):
        CharCnnParams(table, [], [])


def test_char_cnn_gradients(params: CharCnnParams) -> None:
    """Test gradients of the character encoder against finite differences."""
    ids = np.array([[1, 2, 3, 4], [5, 6, 0, 0]])
    lengths = [4, 2]
    tensors = [t for _, t in params.named_tensors()]
    check_gradients(lambda t: t.sum(t.tanh(encode_words(ids, lengths, params, t))), tensors)


def test_named_tensors(params: CharCnnParams) -> None:
    """Test tensor names are stable."""
    names = [n for n, _ in params.named_tensors()]
    assert names[:3] == ["char_cnn.char_embed", "char_cnn.conv1.weight", "char_cnn.conv1.bias"]
    assert len(names) == 7


def make_batch() -> tuple[list[HeadlineExample], EmbeddingTable]:
    train = [HeadlineExample.from_text("cats like milk", 1), HeadlineExample.from_text("dogs bark", 0)]
    vocab = build_vocab(train)
    return train, EmbeddingTable.random(vocab, 3, np.random.default_rng(1))


def test_embed_tokens() -> None:
    """Test widths, the zero word vector of unknown words and zero padding."""
    train, table = make_batch()
    char_cnn = CharCnnParams.initialize(table.vocab.char_count, np.random.default_rng(2), 4, (5, 5, 6), 3)
    layer = EmbeddingLayerParams.from_table(char_cnn, table)
    assert layer.output_width == 9

    batch = encode_batch([HeadlineExample.from_text("cats bark"), HeadlineExample.from_text("owl")], table.vocab)
    out, mask = embed_tokens(batch, layer, Tape())
    assert out.shape == (2, 2, 9)
    assert_array_equal(mask.data, [[1, 1], [1, 0]])
    assert_array_equal(out.data[0, 0, :3], table["cats"])
    assert_array_equal(out.data[1, 0, :3], np.zeros(3))
    assert_array_equal(out.data[1, 1], np.zeros(9))
    assert_allclose(out.data[0, 1, 3:], char_cnn_encode([table.vocab.char_id(c) for c in "bark"], char_cnn).data)


def test_embed_tokens_gradients() -> None:
    """Test gradients reach the character channel and never the frozen word table."""
    train, table = make_batch()
    char_cnn = CharCnnParams.initialize(table.vocab.char_count, np.random.default_rng(2), 3, (4, 4, 4), 3)
    layer = EmbeddingLayerParams.from_table(char_cnn, table)
    batch = encode_batch(train, table.vocab)
    tape = Tape()
    out, _ = embed_tokens(batch, layer, tape)
    backward(tape.sum(tape.tanh(out)), tape)
    assert layer.word_table is not None
    assert layer.word_table.grad is None
    assert char_cnn.char_embed.grad is not None
    assert not char_cnn.char_embed.grad[0].any()

    tensors = [t for _, t in char_cnn.named_tensors()]
    check_gradients(lambda t: t.sum(t.tanh(embed_tokens(batch, layer, t)[0])), tensors)


def test_embed_tokens_fine_tune() -> None:
    """Test the word table is trained when fine-tuning is requested."""
    train, table = make_batch()
    layer = EmbeddingLayerParams.from_table(None, table, fine_tune=True)
    assert layer.output_width == 3
    assert layer.word_table is not None
    batch = encode_batch(train, table.vocab)
    check_gradients(lambda t: t.sum(t.tanh(embed_tokens(batch, layer, t)[0])), [layer.word_table])


def test_embedding_layer_needs_a_channel() -> None:
    """Test a layer without channels is rejected."""
    with pytest.raises(DimensionError):
        EmbeddingLayerParams(None, None)
