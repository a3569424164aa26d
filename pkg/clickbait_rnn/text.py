#
#  text.py
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
"""Ingest headlines, build vocabularies, load pretrained vectors and encode mini-batches.

Dataset files are UTF-8 TSV with one ``<label>\\t<headline>`` per line,
where the label is ``1`` for clickbait and ``0`` otherwise. Lines starting
with ``#`` and blank lines are ignored.

Pretrained vector files use the common text serialization: a header line
``<vocab_size> <dim>`` followed by ``<token> <v1> ... <v_dim>`` lines.
"""
import os
import re
from collections import Counter
from dataclasses import dataclass
from logging import getLogger
from typing import Final, Iterable, Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from clickbait_rnn.errors import DataError
from clickbait_rnn.labels import HeadlineLabel

_LOGGER: Final = getLogger(__name__)
"""Logging object."""

PAD_ID: Final = 0
"""Reserved id of the padding token and the padding character."""
UNK_ID: Final = 1
"""Reserved id of unknown words and unknown characters."""
PAD_TOKEN: Final = "<pad>"
UNK_TOKEN: Final = "<unk>"

MAX_WORDS: Final = 30
"""Headlines are truncated to this many tokens."""
MAX_WORD_LENGTH: Final = 24
"""Words are truncated to this many characters."""

_SEPARATOR: Final = re.compile(r"[\W_]+")

PathLike = Union[str, "os.PathLike[str]"]


def tokenize(text: str) -> list[str]:
    """Split a headline into lowercase words.

    Any maximal run of non-alphanumeric characters separates two words, and
    empty words are dropped, so ``"You'll Never Believe"`` becomes
    ``["you", "ll", "never", "believe"]``.

    Args:
      text: a headline.

    Returns:
      list of words; empty if the headline has no alphanumeric character.
    """
    return [t for t in _SEPARATOR.split(text.lower()) if t]


@dataclass(frozen=True)
class HeadlineExample:
    """A tokenized, labeled headline."""

    raw_text: str
    """The headline as given."""
    tokens: tuple[str, ...]
    """Lowercase words of the headline."""
    label: HeadlineLabel
    """Clickbait or not."""

    @classmethod
    def from_text(cls, text: str, label: Union[int, HeadlineLabel] = HeadlineLabel.NON_CLICKBAIT) -> "HeadlineExample":
        """Tokenize a headline.

        Args:
          text: the headline.
          label: 1 for clickbait, 0 otherwise.

        Returns:
          a new example.
        """
        return cls(text, tuple(tokenize(text)), HeadlineLabel(int(label)))


class Vocabulary:
    """Bidirectional maps between words, characters and dense integer ids.

    Id 0 is the padding entry and id 1 the unknown entry in both maps.

    Args:
      words: corpus words in id order, reserved entries excluded.
      chars: corpus characters in id order, reserved entries excluded.
    """

    words: Final[tuple[str, ...]]
    """Id to word, including the reserved entries."""
    chars: Final[tuple[str, ...]]
    """Id to character, including the reserved entries."""

    __slots__ = ("words", "chars", "_word_ids", "_char_ids")

    def __init__(self, words: Iterable[str], chars: Iterable[str]) -> None:
        self.words = (PAD_TOKEN, UNK_TOKEN, *words)
        self.chars = (PAD_TOKEN, UNK_TOKEN, *chars)
        self._word_ids = {w: i for i, w in enumerate(self.words)}
        self._char_ids = {c: i for i, c in enumerate(self.chars)}
        if len(self._word_ids) != len(self.words) or len(self._char_ids) != len(self.chars):
            raise DataError("vocabulary entries must be unique and must not use reserved tokens")

    @property
    def word_count(self) -> int:
        """Number of word ids, reserved ones included."""
        return len(self.words)

    @property
    def char_count(self) -> int:
        """Number of character ids, reserved ones included."""
        return len(self.chars)

    def word_id(self, word: str) -> int:
        """Id of a word, :data:`UNK_ID` if unknown."""
        if word in (PAD_TOKEN, UNK_TOKEN):
            return UNK_ID
        return self._word_ids.get(word, UNK_ID)

    def char_id(self, char: str) -> int:
        """Id of a character, :data:`UNK_ID` if unknown."""
        if char in (PAD_TOKEN, UNK_TOKEN):
            return UNK_ID
        return self._char_ids.get(char, UNK_ID)

    def __contains__(self, word: object) -> bool:
        return isinstance(word, str) and word not in (PAD_TOKEN, UNK_TOKEN) and word in self._word_ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.words == other.words and self.chars == other.chars

    def __hash__(self) -> int:
        return hash((self.words, self.chars))

    def __repr__(self) -> str:
        return f"Vocabulary(words={self.word_count}, chars={self.char_count})"


def build_vocab(corpus: Sequence[HeadlineExample], min_count: int = 1) -> Vocabulary:
    """Build a vocabulary from a corpus.

    Words occurring at least ``min_count`` times get ids by descending
    frequency, ties broken lexicographically. Every character of every word
    gets an id, in code point order.

    Args:
      corpus: tokenized examples.
      min_count: frequency threshold for words.

    Returns:
      the vocabulary.
    """
    if not corpus:
        raise DataError("cannot build a vocabulary from an empty corpus")
    counts = Counter(t for ex in corpus for t in ex.tokens)
    words = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    chars = sorted({c for w in counts for c in w})
    return Vocabulary(words, chars)


class EmbeddingTable:
    """Word vectors aligned with the word ids of a vocabulary.

    Args:
      vocab: the vocabulary the rows are aligned with.
      matrix: a [word_count×dim] array; padding and unknown rows are zero.
      coverage: fraction of vocabulary words found in the source file.
    """

    vocab: Final[Vocabulary]
    """Vocabulary of the rows."""
    matrix: Final[NDArray[np.float64]]
    """Row ``i`` is the vector of word id ``i``."""
    coverage: Final[float]
    """Fraction of vocabulary words which have a pretrained vector."""

    __slots__ = ("vocab", "matrix", "coverage")

    def __init__(self, vocab: Vocabulary, matrix: NDArray[np.float64], coverage: float = 1.0) -> None:
        if matrix.ndim != 2 or matrix.shape[0] != vocab.word_count:
            raise DataError(f"embedding matrix of shape {matrix.shape} does not fit {vocab.word_count} words")
        self.vocab = vocab
        self.matrix = matrix
        self.coverage = coverage

    @property
    def dim(self) -> int:
        """Number of components of every vector."""
        return int(self.matrix.shape[1])

    def __getitem__(self, word: str) -> NDArray[np.float64]:
        """Vector of a word; the zero vector for unknown words."""
        return self.matrix[self.vocab.word_id(word)]

    def reindex(self, vocab: Vocabulary) -> "EmbeddingTable":
        """Align this table with another vocabulary.

        Words of ``vocab`` unknown to this table get the zero vector.
        """
        matrix = np.zeros((vocab.word_count, self.dim), dtype=self.matrix.dtype)
        found = 0
        for i, word in enumerate(vocab.words[2:], start=2):
            if word in self.vocab and self.matrix[self.vocab.word_id(word)].any():
                matrix[i] = self.matrix[self.vocab.word_id(word)]
                found += 1
        words = vocab.word_count - 2
        return EmbeddingTable(vocab, matrix, found / words if words else 1.0)

    @classmethod
    def random(cls, vocab: Vocabulary, dim: int, rng: np.random.Generator, scale: float = 1.0) -> "EmbeddingTable":
        """Create a table of random vectors, used when no pretrained file is available.

        Args:
          vocab: vocabulary.
          dim: vector dimension.
          rng: random generator.
          scale: standard deviation of the components.

        Returns:
          a table whose reserved rows are zero.
        """
        matrix = rng.normal(0.0, scale, size=(vocab.word_count, dim))
        matrix[PAD_ID] = 0.0
        matrix[UNK_ID] = 0.0
        return cls(vocab, matrix)


def load_pretrained_embeddings(path: PathLike, vocab: Vocabulary) -> EmbeddingTable:
    """Load word vectors of vocabulary words from a text vector file.

    Only rows of vocabulary words are kept. Vocabulary words absent from the
    file get the zero vector, leaving the character channel to represent
    them.

    Args:
      path: path to the vector file.
      vocab: vocabulary restricting the loaded words.

    Returns:
      the embedding table; its ``coverage`` is the found fraction of words.
    """
    try:
        with open(path, encoding="utf-8") as fp:
            header = fp.readline().split()
            if len(header) != 2 or not all(h.isdigit() for h in header) or int(header[1]) <= 0:
                raise DataError(f"{path}:1: malformed header, expected '<vocab_size> <dim>'")
            declared, dim = int(header[0]), int(header[1])
            matrix = np.zeros((vocab.word_count, dim))
            found: set[int] = set()
            rows = 0
            for lineno, line in enumerate(fp, start=2):
                parts = line.split()
                if not parts:
                    continue
                rows += 1
                if len(parts) - 1 != dim:
                    raise DataError(f"{path}:{lineno}: expected {dim} components, found {len(parts) - 1}")
                try:
                    vector = np.array(parts[1:], dtype=np.float64)
                except ValueError as e:
                    raise DataError(f"{path}:{lineno}: non-numeric component") from e
                if parts[0] not in vocab:
                    continue
                word_id = vocab.word_id(parts[0])
                if word_id not in found:
                    matrix[word_id] = vector
                    found.add(word_id)
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read embeddings from {path}: {e}") from e

    if rows != declared:
        _LOGGER.warning("%s declares %d vectors but contains %d", path, declared, rows)
    words = vocab.word_count - 2
    coverage = len(found) / words if words else 1.0
    _LOGGER.info("Loaded %d-dimensional vectors for %d of %d words (coverage %.4f)", dim, len(found), words, coverage)
    return EmbeddingTable(vocab, matrix, coverage)


def load_dataset(path: PathLike) -> list[HeadlineExample]:
    """Load a labeled headline file.

    Args:
      path: path to a TSV file.

    Returns:
      one example per non-empty, non-comment line, in file order.
    """
    examples: list[HeadlineExample] = []
    try:
        with open(path, encoding="utf-8") as fp:
            for lineno, line in enumerate(fp, start=1):
                line = line.rstrip("\r\n")
                if not line.strip() or line.startswith("#"):
                    continue
                fields = line.split("\t", 1)
                if len(fields) != 2:
                    raise DataError(f"{path}:{lineno}: expected '<label>\\t<headline>'")
                label, text = fields[0].strip(), fields[1].strip()
                if label not in ("0", "1"):
                    raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
                example = HeadlineExample.from_text(text, int(label))
                if not example.tokens:
                    raise DataError(f"{path}:{lineno}: headline has no words: {text!r}")
                examples.append(example)
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read dataset {path}: {e}") from e
    _LOGGER.info("Loaded %d headlines from %s", len(examples), path)
    return examples


def write_dataset(path: PathLike, examples: Iterable[HeadlineExample]) -> None:
    """Write examples in the dataset TSV format."""
    try:
        with open(path, "w", encoding="utf-8") as fp:
            for ex in examples:
                fp.write(f"{int(ex.label)}\t{ex.raw_text}\n")
    except OSError as e:
        raise DataError(f"cannot write dataset {path}: {e}") from e


@dataclass(frozen=True)
class EncodedBatch:
    """Padded id arrays of a mini-batch.

    Padded positions hold :data:`PAD_ID`. ``T`` is the longest headline of
    the batch and ``C`` the longest word.
    """

    word_ids: NDArray[np.int64]
    """[B×T] word ids."""
    char_ids: NDArray[np.int64]
    """[B×T×C] character ids."""
    word_mask: NDArray[np.float64]
    """[B×T] 1 at real words, 0 at padding."""
    word_lengths: NDArray[np.int64]
    """[B] number of words per headline."""
    char_lengths: NDArray[np.int64]
    """[B×T] number of characters per word, 0 at padding."""
    labels: NDArray[np.int64]
    """[B] labels."""

    @property
    def batch_size(self) -> int:
        """Number of headlines."""
        return int(self.word_ids.shape[0])

    @property
    def max_words(self) -> int:
        """Padded headline length ``T``."""
        return int(self.word_ids.shape[1])

    @property
    def max_chars(self) -> int:
        """Padded word length ``C``."""
        return int(self.char_ids.shape[2])


def encode_batch(
    examples: Sequence[HeadlineExample],
    vocab: Vocabulary,
    max_words: int = MAX_WORDS,
    max_word_length: int = MAX_WORD_LENGTH,
) -> EncodedBatch:
    """Encode examples into padded id arrays.

    Headlines longer than ``max_words`` and words longer than
    ``max_word_length`` are truncated. Unknown words and characters map to
    :data:`UNK_ID`.

    Args:
      examples: non-empty list of tokenized examples.
      vocab: vocabulary.
      max_words: headline length cap.
      max_word_length: word length cap.

    Returns:
      the encoded batch.
    """
    if not examples:
        raise DataError("cannot encode an empty batch")
    for ex in examples:
        if not ex.tokens:
            raise DataError(f"headline has no words: {ex.raw_text!r}")

    sentences = [[w[:max_word_length] for w in ex.tokens[:max_words]] for ex in examples]
    batch = len(sentences)
    steps = max(len(s) for s in sentences)
    width = max(len(w) for s in sentences for w in s)

    word_ids = np.full((batch, steps), PAD_ID, dtype=np.int64)
    char_ids = np.full((batch, steps, width), PAD_ID, dtype=np.int64)
    char_lengths = np.zeros((batch, steps), dtype=np.int64)
    word_lengths = np.array([len(s) for s in sentences], dtype=np.int64)
    for i, sentence in enumerate(sentences):
        for t, word in enumerate(sentence):
            word_ids[i, t] = vocab.word_id(word)
            char_lengths[i, t] = len(word)
            char_ids[i, t, : len(word)] = [vocab.char_id(c) for c in word]
    word_mask = (np.arange(steps)[None, :] < word_lengths[:, None]).astype(np.float64)
    labels = np.array([int(ex.label) for ex in examples], dtype=np.int64)
    return EncodedBatch(word_ids, char_ids, word_mask, word_lengths, char_lengths, labels)


def iterate_batches(
    examples: Sequence[HeadlineExample], batch_size: int, rng: Optional[np.random.Generator] = None
) -> Iterable[list[HeadlineExample]]:
    """Split examples into mini-batches.

    The last batch may be smaller. If ``rng`` is given, examples are shuffled
    first.

    Args:
      examples: examples.
      batch_size: maximum number of examples per batch.
      rng: optional random generator for shuffling.

    Yields:
      lists of examples.
    """
    order = rng.permutation(len(examples)) if rng is not None else np.arange(len(examples))
    for start in range(0, len(order), batch_size):
        yield [examples[i] for i in order[start : start + batch_size]]


def make_marker_dataset(
    size: int,
    rng: np.random.Generator,
    vocab_size: int = 200,
    markers: int = 5,
    min_words: int = 4,
    max_words: int = 12,
) -> list[HeadlineExample]:
    """Generate a balanced synthetic task.

    Headlines are random sequences over ``vocab_size`` tokens ``t000``,
    ``t001``, and so on. The first ``markers`` tokens are markers and a
    headline is clickbait iff it contains at least one of them.

    Args:
      size: number of headlines.
      rng: random generator.
      vocab_size: number of distinct tokens.
      markers: number of marker tokens.
      min_words: shortest headline.
      max_words: longest headline.

    Returns:
      examples; every other one is clickbait before shuffling.
    """
    if not 0 < markers < vocab_size:
        raise ValueError(f"markers must be in (0, {vocab_size}), got {markers}")
    if not 1 <= min_words <= max_words:
        raise ValueError(f"invalid headline length range [{min_words}, {max_words}]")
    tokens = [f"t{i:03d}" for i in range(vocab_size)]
    examples = []
    for i in range(size):
        length = int(rng.integers(min_words, max_words + 1))
        words = [tokens[j] for j in rng.integers(markers, vocab_size, size=length)]
        label = HeadlineLabel(i % 2)
        if label is HeadlineLabel.CLICKBAIT:
            for position in rng.choice(length, size=int(rng.integers(1, min(3, length) + 1)), replace=False):
                words[position] = tokens[int(rng.integers(markers))]
        examples.append(HeadlineExample.from_text(" ".join(words), label))
    return [examples[i] for i in rng.permutation(size)]
