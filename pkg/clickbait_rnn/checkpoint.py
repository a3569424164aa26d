#
#  checkpoint.py
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
"""Save and load trained models.

A checkpoint file is laid out as follows, every integer being little endian:

.. code-block:: text

   b"HRNN"                      magic bytes
   uint32 version
   uint32 n, n bytes            model configuration, ``key = value`` lines in UTF-8
   uint32 n, n × (uint32 m, m bytes)   vocabulary words, reserved entries excluded
   uint32 n, n × (uint32 m, m bytes)   vocabulary characters, reserved entries excluded
   uint32 n, n × tensor
     uint32 m, m bytes          tensor name
     uint32 ndim, ndim × uint32 extents
     float64 values             row-major

Values are always stored in double precision, so a double precision model
round-trips bit for bit.
"""
import os
import struct
from logging import getLogger
from typing import Final, Union

import numpy as np
from numpy.typing import NDArray

from clickbait_rnn.classifier import Checkpoint, ModelParams
from clickbait_rnn.config import format_model_config, model_config_from_text
from clickbait_rnn.errors import CheckpointError, ConfigError
from clickbait_rnn.text import EmbeddingTable, Vocabulary

_LOGGER: Final = getLogger(__name__)
"""Logging object."""

MAGIC: Final = b"HRNN"
"""First bytes of every checkpoint file."""

CHECKPOINT_VERSION: Final = 1
"""Format version written by :func:`save_checkpoint`."""

_UINT32: Final = struct.Struct("<I")
_PAYLOAD_DTYPE: Final = np.dtype("<f8")

PathLike = Union[str, "os.PathLike[str]"]


def _pack_bytes(data: bytes) -> bytes:
    return _UINT32.pack(len(data)) + data


def _pack_strings(values: tuple[str, ...]) -> bytes:
    return _UINT32.pack(len(values)) + b"".join(_pack_bytes(v.encode("utf-8")) for v in values)


def _pack_tensor(name: str, values: NDArray[np.floating]) -> bytes:
    header = _pack_bytes(name.encode("utf-8")) + _UINT32.pack(values.ndim)
    header += b"".join(_UINT32.pack(n) for n in values.shape)
    return header + np.ascontiguousarray(values, dtype=_PAYLOAD_DTYPE).tobytes()


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """Serialize a checkpoint into the binary format."""
    tensors = list(checkpoint.params.named_tensors())
    return b"".join(
        [
            MAGIC,
            _UINT32.pack(CHECKPOINT_VERSION),
            _pack_bytes(format_model_config(checkpoint.config).encode("utf-8")),
            _pack_strings(checkpoint.vocab.words[2:]),
            _pack_strings(checkpoint.vocab.chars[2:]),
            _UINT32.pack(len(tensors)),
            *(_pack_tensor(name, t.data) for name, t in tensors),
        ]
    )


class _Reader:
    """Cursor over the bytes of a checkpoint."""

    __slots__ = ("_data", "_offset", "_source")

    def __init__(self, data: bytes, source: str) -> None:
        self._data = data
        self._offset = 0
        self._source = source

    def take(self, size: int) -> bytes:
        if self._offset + size > len(self._data):
            raise CheckpointError(
                f"{self._source}: truncated checkpoint, needs {size} bytes at offset {self._offset} "
                f"but the file has {len(self._data)}"
            )
        chunk = self._data[self._offset : self._offset + size]
        self._offset += size
        return chunk

    def uint32(self) -> int:
        value: int = _UINT32.unpack(self.take(_UINT32.size))[0]
        return value

    def text(self) -> str:
        try:
            return self.take(self.uint32()).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"{self._source}: invalid text at offset {self._offset}") from e

    def strings(self) -> list[str]:
        return [self.text() for _ in range(self.uint32())]

    def tensor(self) -> tuple[str, NDArray[np.float64]]:
        name = self.text()
        shape = tuple(self.uint32() for _ in range(self.uint32()))
        size = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(self.take(size * _PAYLOAD_DTYPE.itemsize), dtype=_PAYLOAD_DTYPE)
        return name, values.reshape(shape).astype(np.float64)

    def finish(self) -> None:
        if self._offset != len(self._data):
            raise CheckpointError(f"{self._source}: {len(self._data) - self._offset} trailing bytes")


def decode_checkpoint(data: bytes, source: str = "<checkpoint>") -> Checkpoint:
    """Rebuild a checkpoint from the binary format.

    Args:
      data: file contents.
      source: name used in error messages.

    Returns:
      the checkpoint; its tensors have the precision of its configuration.
    """
    reader = _Reader(data, source)
    magic = reader.take(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint file (magic {magic!r})")
    version = reader.uint32()
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{source}: checkpoint format version {version} is not supported, expected version {CHECKPOINT_VERSION}"
        )
    try:
        config = model_config_from_text(reader.text(), source)
    except ConfigError as e:
        raise CheckpointError(f"{source}: invalid model configuration: {e}") from e
    vocab = Vocabulary(reader.strings(), reader.strings())
    stored = dict(reader.tensor() for _ in range(reader.uint32()))
    reader.finish()

    table = None
    if "word_table" in stored:
        table = EmbeddingTable(vocab, stored["word_table"])
    params = ModelParams.initialize(config, vocab, table, np.random.default_rng(0))
    expected = dict(params.named_tensors())
    if set(expected) != set(stored):
        missing = sorted(set(expected) - set(stored))
        extra = sorted(set(stored) - set(expected))
        raise CheckpointError(
            f"{source}: tensors do not match the configuration (missing {missing}, unexpected {extra})"
        )
    for name, t in expected.items():
        if t.shape != stored[name].shape:
            raise CheckpointError(f"{source}: tensor {name} has shape {stored[name].shape}, expected {t.shape}")
        t.data = stored[name].astype(config.dtype)
    return Checkpoint(config, vocab, params)


def save_checkpoint(path: PathLike, checkpoint: Checkpoint) -> None:
    """Write a checkpoint file.

    Args:
      path: destination; overwritten if it exists.
      checkpoint: trained model.
    """
    try:
        with open(path, "wb") as fp:
            fp.write(encode_checkpoint(checkpoint))
    except OSError as e:
        raise CheckpointError(f"cannot write checkpoint {path}: {e}") from e
    _LOGGER.info("Saved checkpoint to %s", path)


def load_checkpoint(path: PathLike) -> Checkpoint:
    """Read a checkpoint file written by :func:`save_checkpoint`."""
    try:
        with open(path, "rb") as fp:
            data = fp.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(data, str(path))
