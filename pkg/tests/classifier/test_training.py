#
#  test_training.py
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
"""Tests for mini-batch training.
"""
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from clickbait_rnn.autodiff import Tensor
from clickbait_rnn.classifier import ModelConfig, ModelParams, bce_loss, predict_proba, train
from clickbait_rnn.errors import DataError
from clickbait_rnn.labels import CellKind, FeatureMode
from clickbait_rnn.text import EmbeddingTable, HeadlineExample, Vocabulary, build_vocab, make_marker_dataset


def accuracy(probs: np.ndarray, examples: list[HeadlineExample]) -> float:
    labels = np.array([int(e.label) for e in examples])
    return float(np.mean((probs >= 0.5) == labels))


def test_deterministic(
    tiny_config: ModelConfig, headlines: list[HeadlineExample], vocab: Vocabulary, word_table: EmbeddingTable
) -> None:
    """Test two runs with the same seed give identical loss logs and parameters."""
    config = replace(tiny_config, dropout=0.3, epochs=3)
    a = train(headlines, config, word_table, vocab)
    b = train(headlines, config, word_table, vocab)
    assert a.losses == b.losses
    assert len(a.losses) == 3
    for (name, x), (_, y) in zip(a.params.named_tensors(), b.params.named_tensors()):
        assert_array_equal(x.data, y.data, err_msg=name)


def test_seed_changes_run(
    tiny_config: ModelConfig, headlines: list[HeadlineExample], vocab: Vocabulary, word_table: EmbeddingTable
) -> None:
    """Test another seed gives another run."""
    a = train(headlines, tiny_config, word_table, vocab)
    b = train(headlines, replace(tiny_config, seed=1), word_table, vocab)
    assert a.losses != b.losses


def test_overfit(headlines: list[HeadlineExample], vocab: Vocabulary, word_table: EmbeddingTable) -> None:
    """Test a small model memorizes eight headlines."""
    config = ModelConfig(
        arch=CellKind.LSTM,
        features=FeatureMode.CE_WE,
        hidden_size=16,
        char_dim=8,
        char_channels=(8,),
        dropout=0.0,
        batch_size=4,
        learning_rate=0.02,
        epochs=50,
        seed=5,
    )
    result = train(headlines, config, word_table, vocab)
    assert len(result.losses) == 50
    assert result.losses[-1] * 10 <= result.losses[0]
    assert accuracy(predict_proba(headlines, result.params, vocab), headlines) == 1.0


def test_frozen_words_trained_chars(
    tiny_config: ModelConfig, headlines: list[HeadlineExample], vocab: Vocabulary, word_table: EmbeddingTable
) -> None:
    """Test training updates character embeddings but not the frozen word table."""
    initial = ModelParams.initialize(tiny_config, vocab, word_table, np.random.default_rng(tiny_config.seed))
    result = train(headlines, tiny_config, word_table, vocab)
    params = dict(result.params.named_tensors())
    assert_array_equal(params["word_table"].data, word_table.matrix)
    assert initial.embedding.char_cnn is not None
    assert not np.allclose(params["char_cnn.char_embed"].data, initial.embedding.char_cnn.char_embed.data)


def test_fine_tune_words(
    tiny_config: ModelConfig, headlines: list[HeadlineExample], vocab: Vocabulary, word_table: EmbeddingTable
) -> None:
    """Test fine-tuning moves the word vectors of training words only."""
    result = train(headlines, replace(tiny_config, fine_tune_words=True), word_table, vocab)
    table = dict(result.params.named_tensors())["word_table"].data
    assert not np.allclose(table[vocab.word_id("cat")], word_table["cat"])
    assert_array_equal(table[0], word_table.matrix[0])
    assert_array_equal(table[1], word_table.matrix[1])


def test_builds_vocabulary(tiny_config: ModelConfig, headlines: list[HeadlineExample]) -> None:
    """Test a character-only run builds its own vocabulary."""
    result = train(headlines, replace(tiny_config, features=FeatureMode.CE, min_count=2))
    assert result.vocab == build_vocab(headlines, 2)
    assert result.params.embedding.word_table is None


def test_early_stopping(
    tiny_config: ModelConfig, headlines: list[HeadlineExample], vocab: Vocabulary, word_table: EmbeddingTable
) -> None:
    """Test early stopping keeps the parameters of the best validation epoch."""
    config = replace(
        tiny_config, epochs=12, early_stopping=True, validation_fraction=0.25, patience=2, learning_rate=0.05
    )
    result = train(headlines * 2, config, word_table, vocab)
    assert len(result.validation_losses) == len(result.losses)
    assert result.best_epoch == int(np.argmin(result.validation_losses)) + 1
    assert len(result.losses) <= result.best_epoch + config.patience

    # the held-out split is drawn right after initialization
    rng = np.random.default_rng(config.seed)
    ModelParams.initialize(config, vocab, word_table, rng)
    order = rng.permutation(16)
    held_out = [(headlines * 2)[i] for i in order[:4]]
    probs = predict_proba(held_out, result.params, vocab)
    labels = np.array([int(e.label) for e in held_out], dtype=np.float64)
    assert_allclose(bce_loss(Tensor(probs), labels).item(), min(result.validation_losses), rtol=1e-12)


def test_empty_data(tiny_config: ModelConfig) -> None:
    """Test training on nothing is rejected."""
    with pytest.raises(DataError):
        train([], tiny_config)


@pytest.mark.slow
@pytest.mark.parametrize(("kind", "target"), [(CellKind.LSTM, 0.97), (CellKind.GRU, 0.95), (CellKind.RNN, 0.95)])
def test_marker_task(kind: CellKind, target: float) -> None:
    """Test every architecture learns whether a headline contains a marker token."""
    rng = np.random.default_rng(2019)
    data = make_marker_dataset(2000, rng)
    training, held_out = data[:1600], data[1600:]
    vocab = build_vocab(training)
    table = EmbeddingTable.random(vocab, 16, rng, scale=0.5)
    config = ModelConfig(
        arch=kind,
        features=FeatureMode.CE_WE,
        hidden_size=32,
        char_dim=8,
        char_channels=(16,),
        dropout=0.1,
        batch_size=32,
        learning_rate=5e-3,
        epochs=10,
        seed=7,
    )
    result = train(training, config, table, vocab)
    assert accuracy(predict_proba(held_out, result.params, vocab), held_out) >= target
