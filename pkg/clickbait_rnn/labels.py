#
#  labels.py
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
"""Define constants used in clickbait_rnn package.
"""
from enum import Enum, IntEnum
from typing import Final


class HeadlineLabel(IntEnum):
    """Headline label."""

    NON_CLICKBAIT: Final = 0
    """Constant representing a non-clickbait headline."""
    CLICKBAIT: Final = 1
    """Constant representing a clickbait headline."""


class CellKind(Enum):
    """Kind of the recurrent cell used in the hidden layer."""

    RNN: Final = "rnn"
    """Standard recurrent cell with a tanh non-linearity."""
    GRU: Final = "gru"
    """Gated recurrent unit."""
    LSTM: Final = "lstm"
    """Long short-term memory cell with peephole connections."""

    @property
    def display_name(self) -> str:
        """Name of the bidirectional architecture, e.g. ``BiLSTM``."""
        return "Bi" + self.name


class FeatureMode(Enum):
    """Features fed to the hidden layer."""

    CE: Final = "ce"
    """Character embeddings only."""
    WE: Final = "we"
    """Word embeddings only."""
    CE_WE: Final = "ce+we"
    """Concatenation of word embeddings and character embeddings."""

    @property
    def uses_chars(self) -> bool:
        """True if the character channel is active."""
        return self in (FeatureMode.CE, FeatureMode.CE_WE)

    @property
    def uses_words(self) -> bool:
        """True if the word channel is active."""
        return self in (FeatureMode.WE, FeatureMode.CE_WE)

    @property
    def display_name(self) -> str:
        """Name used in result tables, e.g. ``CE+WE``."""
        return self.value.upper()


class Mode(Enum):
    """Mode of a forward pass."""

    TRAIN: Final = "train"
    """Dropout is active."""
    EVAL: Final = "eval"
    """Dropout is the identity."""


class Peephole(Enum):
    """Shape of the LSTM peephole matrices."""

    FULL: Final = "full"
    """Full H×H matrices."""
    DIAGONAL: Final = "diagonal"
    """Only the diagonal of each matrix is used and trained."""
