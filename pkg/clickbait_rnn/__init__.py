#
#  __init__.py
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
"""Clickbait headline detection with bidirectional recurrent networks.

Words are embedded by a character-level convolutional encoder and by
pretrained word vectors, a bidirectional RNN, GRU or LSTM encodes the
headline, and a sigmoid output node scores it. Everything, including the
reverse-mode differentiation used in training, is implemented on top of
numpy.
"""
from typing import Final

from clickbait_rnn.checkpoint import load_checkpoint, save_checkpoint
from clickbait_rnn.classifier import Checkpoint, ModelConfig, Prediction, forward_headline, predict, train
from clickbait_rnn.evaluation import MetricsReport, crossval_run, evaluate_predictions, stratified_kfold
from clickbait_rnn.labels import CellKind, FeatureMode, HeadlineLabel
from clickbait_rnn.text import EmbeddingTable, HeadlineExample, Vocabulary, load_dataset, load_pretrained_embeddings

__all__: Final = (
    "CellKind",
    "Checkpoint",
    "EmbeddingTable",
    "FeatureMode",
    "HeadlineExample",
    "HeadlineLabel",
    "MetricsReport",
    "ModelConfig",
    "Prediction",
    "Vocabulary",
    "crossval_run",
    "evaluate_predictions",
    "forward_headline",
    "load_checkpoint",
    "load_dataset",
    "load_pretrained_embeddings",
    "predict",
    "save_checkpoint",
    "stratified_kfold",
    "train",
)
