#
#  embeddings.py
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
"""Implement the embedding layer: character-CNN word encodings and pretrained word vectors.

Each word is represented by the concatenation of its pretrained vector and
a vector computed from its characters: character embeddings go through a
stack of same-padded 1-D convolutions with ReLU, followed by max-pooling
over the character positions. The word table is frozen unless fine-tuning
is requested; the character parameters are always trained.
"""
from dataclasses import dataclass, field
from typing import Final, Iterator, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, DTypeLike, NDArray

from clickbait_rnn.autodiff import DEFAULT_DTYPE, Tape, Tensor, constant, glorot_uniform
from clickbait_rnn.errors import DataError, DimensionError
from clickbait_rnn.text import PAD_ID, EmbeddingTable, EncodedBatch

CHAR_DIM: Final = 16
"""Default dimension of character embeddings."""
CHAR_CHANNELS: Final = (32, 32, 32)
"""Default output channels of the three convolution layers."""
KERNEL_WIDTH: Final = 3
"""Default convolution width."""


@dataclass
class CharCnnParams:
    """Trainable parameters of the character-level word encoder."""

    char_embed: Tensor
    """[char_count×d_c] character embeddings."""
    filters: list[Tensor] = field(default_factory=list)
    """Per layer [k×in_ch×out_ch] convolution filters."""
    biases: list[Tensor] = field(default_factory=list)
    """Per layer [out_ch] biases."""

    def __post_init__(self) -> None:
        if not self.filters or len(self.filters) != len(self.biases):
            raise DimensionError("every convolution layer needs one filter tensor and one bias")
        channels = self.char_embed.shape[1]
        for i, (w, b) in enumerate(zip(self.filters, self.biases), start=1):
            if w.ndim != 3 or w.shape[1] != channels or w.shape[0] % 2 == 0 or b.shape != (w.shape[2],):
                raise DimensionError(f"layer {i}: filters {w.shape} and bias {b.shape} do not fit {channels} inputs")
            channels = w.shape[2]

    @property
    def out_channels(self) -> int:
        """Width of an encoded word."""
        return self.filters[-1].shape[2]

    @classmethod
    def initialize(
        cls,
        char_count: int,
        rng: np.random.Generator,
        char_dim: int = CHAR_DIM,
        channels: Sequence[int] = CHAR_CHANNELS,
        kernel_width: int = KERNEL_WIDTH,
        dtype: DTypeLike = DEFAULT_DTYPE,
    ) -> "CharCnnParams":
        """Create randomly initialized parameters.

        Character embeddings are uniform in ±0.5 with a zero padding row;
        filters use Glorot-uniform values and biases start at zero.
        """
        table = rng.uniform(-0.5, 0.5, size=(char_count, char_dim))
        table[PAD_ID] = 0.0
        filters, biases = [], []
        in_ch = char_dim
        for out_ch in channels:
            shape = (kernel_width, in_ch, out_ch)
            filters.append(glorot_uniform(shape, kernel_width * in_ch, kernel_width * out_ch, rng, dtype))
            biases.append(Tensor(np.zeros(out_ch), requires_grad=True, dtype=dtype))
            in_ch = out_ch
        return cls(Tensor(table, requires_grad=True, dtype=dtype), filters, biases)

    def named_tensors(self) -> Iterator[tuple[str, Tensor]]:
        """Iterate over trainable tensors with stable names."""
        yield "char_cnn.char_embed", self.char_embed
        for i, (w, b) in enumerate(zip(self.filters, self.biases), start=1):
            yield f"char_cnn.conv{i}.weight", w
            yield f"char_cnn.conv{i}.bias", b


def _position_mask(lengths: NDArray[np.int64], steps: int, channels: int, dtype: DTypeLike) -> Tensor:
    valid = np.arange(steps)[None, :] < lengths[:, None]
    return constant(np.broadcast_to(valid[:, :, None], (len(lengths), steps, channels)), dtype=dtype)


def encode_words(char_ids: ArrayLike, lengths: ArrayLike, params: CharCnnParams, tape: Tape) -> Tensor:
    """Encode a batch of words from their characters.

    Positions at or after a word's length are zeroed after every layer, so
    the result does not depend on how much padding follows the word.

    Args:
      char_ids: [N×C] character ids.
      lengths: [N] number of characters per word, each at least 1.
      params: encoder parameters.
      tape: tape of the forward pass.

    Returns:
      a [N×out_channels] tensor.
    """
    ids = np.asarray(char_ids, dtype=np.int64)
    lens = np.asarray(lengths, dtype=np.int64)
    if ids.ndim != 2 or lens.shape != ids.shape[:1]:
        raise DimensionError(f"character ids of shape {ids.shape} do not match lengths of shape {lens.shape}")
    if lens.size and lens.min() < 1:
        raise DataError("cannot encode a word without characters")
    if ids.size and ids.max() >= params.char_embed.shape[0]:
        raise DataError(f"character id {ids.max()} out of range for {params.char_embed.shape[0]} characters")
    dtype = params.char_embed.data.dtype
    steps = ids.shape[1]

    x = tape.take(params.char_embed, ids)
    x = tape.mul(x, _position_mask(lens, steps, x.shape[2], dtype))
    for w, b in zip(params.filters, params.biases):
        x = tape.relu(tape.add_bias(tape.conv1d(x, w), b))
        x = tape.mul(x, _position_mask(lens, steps, x.shape[2], dtype))
    return tape.max_over_time(x, lens)


def char_cnn_encode(word_char_ids: Sequence[int], params: CharCnnParams, tape: Optional[Tape] = None) -> Tensor:
    """Encode one word from its character ids.

    Args:
      word_char_ids: character ids of the word.
      params: encoder parameters.
      tape: tape of the forward pass; a non-recording one if omitted.

    Returns:
      a vector with ``params.out_channels`` components, whatever the word length.
    """
    if len(word_char_ids) == 0:
        raise DataError("cannot encode a word without characters")
    tape = tape if tape is not None else Tape(record=False)
    out = encode_words([list(word_char_ids)], [len(word_char_ids)], params, tape)
    return tape.reshape(out, (params.out_channels,))


@dataclass
class EmbeddingLayerParams:
    """Parameters of the embedding layer.

    Either channel may be absent: character-only models have no word table
    and word-only models have no character encoder.
    """

    char_cnn: Optional[CharCnnParams]
    """Character encoder, trainable."""
    word_table: Optional[Tensor]
    """[word_count×d_w] word vectors; frozen unless its ``requires_grad`` is set."""

    def __post_init__(self) -> None:
        if self.char_cnn is None and self.word_table is None:
            raise DimensionError("the embedding layer needs at least one channel")

    @property
    def word_dim(self) -> int:
        """Width of the word channel, 0 if absent."""
        return self.word_table.shape[1] if self.word_table is not None else 0

    @property
    def char_dim(self) -> int:
        """Width of the character channel, 0 if absent."""
        return self.char_cnn.out_channels if self.char_cnn is not None else 0

    @property
    def output_width(self) -> int:
        """Width of an embedded word."""
        return self.word_dim + self.char_dim

    @classmethod
    def from_table(
        cls, char_cnn: Optional[CharCnnParams], table: Optional[EmbeddingTable], fine_tune: bool = False
    ) -> "EmbeddingLayerParams":
        """Build the layer from an embedding table."""
        word_table = None
        if table is not None:
            dtype = char_cnn.char_embed.data.dtype if char_cnn is not None else DEFAULT_DTYPE
            word_table = Tensor(table.matrix, requires_grad=fine_tune, dtype=dtype, name="word_table")
        return cls(char_cnn, word_table)

    def named_tensors(self) -> Iterator[tuple[str, Tensor]]:
        """Iterate over every tensor, frozen ones included."""
        if self.char_cnn is not None:
            yield from self.char_cnn.named_tensors()
        if self.word_table is not None:
            yield "word_table", self.word_table


def embed_tokens(batch: EncodedBatch, params: EmbeddingLayerParams, tape: Tape) -> tuple[Tensor, Tensor]:
    """Embed every position of a batch.

    Args:
      batch: encoded batch.
      params: layer parameters.
      tape: tape of the forward pass.

    Returns:
      a [B×T×width] tensor where padded positions are zero vectors, and the
      [B×T] word mask as a constant tensor.
    """
    batch_size, steps = batch.word_ids.shape
    dtype = next(t for _, t in params.named_tensors()).data.dtype
    parts: list[Tensor] = []

    if params.word_table is not None:
        if batch.word_ids.max() >= params.word_table.shape[0]:
            raise DataError(f"word id {batch.word_ids.max()} out of range for {params.word_table.shape[0]} words")
        parts.append(tape.take(params.word_table, batch.word_ids))

    if params.char_cnn is not None:
        flat_mask = batch.word_mask.reshape(-1) > 0
        encoded = encode_words(
            batch.char_ids.reshape(batch_size * steps, -1)[flat_mask],
            batch.char_lengths.reshape(-1)[flat_mask],
            params.char_cnn,
            tape,
        )
        # Row 0 is a zero vector for padded positions.
        table = tape.concat([constant(np.zeros((1, encoded.shape[1])), dtype=dtype), encoded], axis=0)
        positions = np.zeros(batch_size * steps, dtype=np.int64)
        positions[flat_mask] = np.arange(1, int(flat_mask.sum()) + 1)
        parts.append(tape.reshape(tape.take(table, positions), (batch_size, steps, encoded.shape[1])))

    embedded = tape.concat(parts, axis=2)
    mask = np.broadcast_to(batch.word_mask[:, :, None], embedded.shape)
    return tape.mul(embedded, constant(mask, dtype=dtype)), constant(batch.word_mask, dtype=dtype)
