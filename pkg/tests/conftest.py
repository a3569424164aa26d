#
#  conftest.py
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
"""Fixtures shared by the test modules.
"""
import numpy as np
import pytest

from clickbait_rnn.classifier import ModelConfig
from clickbait_rnn.labels import CellKind, FeatureMode
from clickbait_rnn.text import EmbeddingTable, HeadlineExample, Vocabulary, build_vocab

HEADLINES = (
    ("You won't believe what this cat did next", 1),
    ("17 things only 90s kids will remember", 1),
    ("This one trick will change your life", 1),
    ("What happens next will shock you", 1),
    ("Parliament approves the annual budget", 0),
    ("Central bank holds interest rates steady", 0),
    ("Storm closes schools across the region", 0),
    ("Court rejects appeal in fraud case", 0),
)
"""Small labeled corpus."""


@pytest.fixture
def headlines() -> list[HeadlineExample]:
    """Eight headlines, half of them clickbait."""
    return [HeadlineExample.from_text(text, label) for text, label in HEADLINES]


@pytest.fixture
def vocab(headlines: list[HeadlineExample]) -> Vocabulary:
    """Vocabulary of the small corpus."""
    return build_vocab(headlines)


@pytest.fixture
def word_table(vocab: Vocabulary) -> EmbeddingTable:
    """Random 5-d word vectors aligned with the vocabulary."""
    return EmbeddingTable.random(vocab, 5, np.random.default_rng(3), scale=0.5)


@pytest.fixture
def tiny_config() -> ModelConfig:
    """A BiLSTM small enough for finite differences."""
    return ModelConfig(
        arch=CellKind.LSTM,
        features=FeatureMode.CE_WE,
        hidden_size=4,
        char_dim=4,
        char_channels=(3,),
        kernel_width=3,
        dropout=0.0,
        batch_size=4,
        epochs=2,
        seed=0,
    )
