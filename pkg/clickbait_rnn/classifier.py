#
#  classifier.py
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
"""Assemble the headline classifier, train it with Adam and score headlines.

The model embeds every word, applies dropout, encodes the headline with a
bidirectional recurrent cell, applies dropout again and maps the resulting
vector to a clickbait probability with a sigmoid output node. Training
minimizes the binary cross-entropy over shuffled mini-batches.
"""
from dataclasses import dataclass, field
from logging import getLogger
from typing import Final, Iterator, NamedTuple, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from clickbait_rnn.autodiff import Tape, Tensor, backward, glorot_uniform, zeros
from clickbait_rnn.embeddings import (
    CHAR_CHANNELS,
    CHAR_DIM,
    KERNEL_WIDTH,
    CharCnnParams,
    EmbeddingLayerParams,
    embed_tokens,
)
from clickbait_rnn.errors import ConfigError, DataError, NumericError
from clickbait_rnn.labels import CellKind, FeatureMode, HeadlineLabel, Mode, Peephole
from clickbait_rnn.recurrent import CellParams, apply_dropout, initialize_cell, run_bidirectional
from clickbait_rnn.text import (
    MAX_WORD_LENGTH,
    MAX_WORDS,
    EmbeddingTable,
    EncodedBatch,
    HeadlineExample,
    Vocabulary,
    build_vocab,
    encode_batch,
    iterate_batches,
)

_LOGGER: Final = getLogger(__name__)
"""Logging object."""

BCE_EPSILON: Final = 1e-7
"""Probabilities are clamped to [BCE_EPSILON, 1 - BCE_EPSILON] in the loss."""

PRECISIONS: Final = {"double": np.float64, "single": np.float32}
"""Supported floating point precisions."""


@dataclass(frozen=True)
class ModelConfig:
    """Hyper parameters of a model and of its training.

    Defaults follow the published training setup where it is stated (batch
    size 64, dropout 0.3, Adam) and common practice elsewhere.
    """

    arch: CellKind = CellKind.LSTM
    features: FeatureMode = FeatureMode.CE_WE
    hidden_size: int = 128
    char_dim: int = CHAR_DIM
    char_channels: tuple[int, ...] = CHAR_CHANNELS
    kernel_width: int = KERNEL_WIDTH
    dropout: float = 0.3
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 10
    seed: Optional[int] = None
    min_count: int = 1
    max_words: int = MAX_WORDS
    max_word_length: int = MAX_WORD_LENGTH
    peephole: Peephole = Peephole.FULL
    fine_tune_words: bool = False
    clip_norm: float = 5.0
    early_stopping: bool = False
    validation_fraction: float = 0.1
    patience: int = 2
    precision: str = "double"

    def __post_init__(self) -> None:
        positive = ("hidden_size", "char_dim", "kernel_width", "batch_size", "epochs", "min_count", "max_words")
        for name in positive + ("max_word_length", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("learning_rate", "epsilon"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.char_channels or min(self.char_channels) < 1:
            raise ConfigError(f"char_channels must be positive, got {self.char_channels}")
        if self.kernel_width % 2 == 0:
            raise ConfigError(f"kernel_width must be odd, got {self.kernel_width}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {getattr(self, name)}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError(f"validation_fraction must be in (0, 1), got {self.validation_fraction}")
        if self.clip_norm < 0:
            raise ConfigError(f"clip_norm must not be negative, got {self.clip_norm}")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be one of {sorted(PRECISIONS)}, got {self.precision!r}")

    @property
    def dtype(self) -> type:
        """Numpy type of the parameters."""
        return PRECISIONS[self.precision]


@dataclass
class ModelParams:
    """Every parameter of a model.

    Word vectors are part of the embedding layer; they are frozen unless
    :attr:`ModelConfig.fine_tune_words` is set.
    """

    config: ModelConfig
    embedding: EmbeddingLayerParams
    forward: CellParams
    backward: CellParams
    W_out: Tensor
    """[1×2H] output weights."""
    b_out: Tensor
    """[1] output bias."""

    @classmethod
    def initialize(
        cls, config: ModelConfig, vocab: Vocabulary, word_table: Optional[EmbeddingTable], rng: np.random.Generator
    ) -> "ModelParams":
        """Create randomly initialized parameters.

        Args:
          config: model configuration.
          vocab: vocabulary of the training data.
          word_table: word vectors aligned with ``vocab``; required unless
            the model uses character embeddings only, in which case it is
            never read.
          rng: random generator.

        Returns:
          new parameters.
        """
        table = None
        if config.features.uses_words:
            if word_table is None:
                raise ConfigError(f"feature mode {config.features.value} needs word embeddings")
            if word_table.vocab != vocab:
                raise ConfigError("the word table is not aligned with the vocabulary")
            table = word_table
        char_cnn = None
        if config.features.uses_chars:
            char_cnn = CharCnnParams.initialize(
                vocab.char_count, rng, config.char_dim, config.char_channels, config.kernel_width, config.dtype
            )
        embedding = EmbeddingLayerParams.from_table(char_cnn, table, config.fine_tune_words)
        if embedding.word_table is not None:
            embedding.word_table.data = embedding.word_table.data.astype(config.dtype)
        d, h = embedding.output_width, config.hidden_size
        return cls(
            config,
            embedding,
            initialize_cell(config.arch, d, h, rng, config.peephole, config.dtype),
            initialize_cell(config.arch, d, h, rng, config.peephole, config.dtype),
            glorot_uniform((1, 2 * h), 2 * h, 1, rng, config.dtype),
            zeros((1,), config.dtype),
        )

    def named_tensors(self) -> Iterator[tuple[str, Tensor]]:
        """Iterate over every tensor, frozen ones included, in a stable order."""
        yield from self.embedding.named_tensors()
        yield from self.forward.named_tensors("forward.")
        yield from self.backward.named_tensors("backward.")
        yield "output.W", self.W_out
        yield "output.b", self.b_out

    def trainable(self) -> list[tuple[str, Tensor]]:
        """Tensors updated by the optimizer."""
        return [(n, t) for n, t in self.named_tensors() if t.requires_grad]

    def parameter_count(self) -> int:
        """Number of trainable scalars."""
        return sum(t.data.size for _, t in self.trainable())

    def zero_grad(self) -> None:
        """Drop accumulated gradients."""
        for _, t in self.named_tensors():
            t.zero_grad()

    def snapshot(self) -> dict[str, NDArray[np.floating]]:
        """Copy the values of the trainable tensors."""
        return {n: t.data.copy() for n, t in self.trainable()}

    def restore(self, values: dict[str, NDArray[np.floating]]) -> None:
        """Restore values taken by :meth:`snapshot`."""
        for n, t in self.trainable():
            t.data = values[n].copy()


def forward_headline(
    batch: EncodedBatch,
    params: ModelParams,
    mode: Mode = Mode.EVAL,
    rng: Optional[np.random.Generator] = None,
    tape: Optional[Tape] = None,
) -> Tensor:
    """Compute clickbait probabilities of a batch.

    Args:
      batch: encoded batch, against the vocabulary of the parameters.
      params: model parameters.
      mode: training mode enables dropout.
      rng: random generator of the dropout masks; required in training mode.
      tape: tape of the forward pass; a non-recording one if omitted.

    Returns:
      a [B] tensor of probabilities in (0, 1).
    """
    config = params.config
    tape = tape if tape is not None else Tape(record=False)
    if mode is Mode.TRAIN and config.dropout > 0 and rng is None:
        raise ValueError("training mode needs a random generator for dropout")
    generator = rng if rng is not None else np.random.default_rng(0)

    embedded, _ = embed_tokens(batch, params.embedding, tape)
    embedded = apply_dropout(embedded, config.dropout, mode, generator, tape)
    sentence = run_bidirectional(embedded, batch.word_mask, config.arch, params.forward, params.backward, tape)
    sentence = apply_dropout(sentence, config.dropout, mode, generator, tape)
    logits = tape.add_bias(tape.matmul(sentence, tape.transpose(params.W_out)), params.b_out)
    return tape.reshape(tape.sigmoid(logits), (batch.batch_size,))


def bce_loss(p: Tensor, y: ArrayLike, tape: Optional[Tape] = None) -> Tensor:
    """Mean binary cross-entropy of probabilities and labels.

    Probabilities are clamped to ``[1e-7, 1 - 1e-7]`` so the loss stays finite.
    """
    tape = tape if tape is not None else Tape(record=False)
    return tape.binary_cross_entropy(p, y, BCE_EPSILON)


@dataclass
class AdamState:
    """Moment estimates of the Adam optimizer."""

    m: dict[str, NDArray[np.floating]] = field(default_factory=dict)
    """First moments by parameter name."""
    v: dict[str, NDArray[np.floating]] = field(default_factory=dict)
    """Second moments by parameter name."""
    t: int = 0
    """Number of updates done."""


def adam_update(
    params: Sequence[tuple[str, Tensor]],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Apply one bias-corrected Adam update in place.

    Parameters without a gradient are treated as having a zero gradient.

    Args:
      params: named tensors to update; their ``grad`` holds the gradient.
      state: optimizer state, updated in place.
      lr: learning rate.
      beta1: decay of the first moment.
      beta2: decay of the second moment.
      eps: term added to the denominator.
    """
    for name, p in params:
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient for parameter {name}")
    state.t += 1
    correction1 = 1.0 - beta1**state.t
    correction2 = 1.0 - beta2**state.t
    for name, p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = beta1 * state.m.get(name, np.zeros_like(p.data)) + (1.0 - beta1) * g
        v = beta2 * state.v.get(name, np.zeros_like(p.data)) + (1.0 - beta2) * g * g
        state.m[name], state.v[name] = m, v
        p.data = p.data - lr * (m / correction1) / (np.sqrt(v / correction2) + eps)


def clip_gradients(params: Sequence[tuple[str, Tensor]], max_norm: float) -> float:
    """Scale gradients so that their global norm is at most ``max_norm``.

    Returns:
      the norm before clipping.
    """
    norm = float(np.sqrt(sum(float(np.sum(t.grad * t.grad)) for _, t in params if t.grad is not None)))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for _, t in params:
            if t.grad is not None:
                t.grad *= scale
    return norm


def predict_proba(
    examples: Sequence[HeadlineExample], params: ModelParams, vocab: Vocabulary, batch_size: int = 256
) -> NDArray[np.float64]:
    """Evaluation-mode probabilities of examples, in order."""
    config = params.config
    out: list[NDArray[np.float64]] = []
    for chunk in iterate_batches(examples, batch_size):
        batch = encode_batch(chunk, vocab, config.max_words, config.max_word_length)
        out.append(np.asarray(forward_headline(batch, params, Mode.EVAL).data, dtype=np.float64))
    return np.concatenate(out) if out else np.zeros(0)


def _mean_loss(examples: Sequence[HeadlineExample], params: ModelParams, vocab: Vocabulary) -> float:
    p = predict_proba(examples, params, vocab)
    labels = np.array([int(e.label) for e in examples], dtype=np.float64)
    return bce_loss(Tensor(p), labels).item()


@dataclass
class TrainingResult:
    """Outcome of :func:`train`."""

    params: ModelParams
    vocab: Vocabulary
    losses: list[float]
    """Mean training loss of every epoch."""
    validation_losses: list[float] = field(default_factory=list)
    """Mean validation loss of every epoch, when early stopping is enabled."""
    best_epoch: Optional[int] = None
    """1-based epoch whose parameters were kept by early stopping."""


def _split_validation(
    data: Sequence[HeadlineExample], fraction: float, rng: np.random.Generator
) -> tuple[list[HeadlineExample], list[HeadlineExample]]:
    order = rng.permutation(len(data))
    size = max(1, int(round(len(data) * fraction)))
    if size >= len(data):
        raise DataError(f"cannot hold out {size} of {len(data)} examples for validation")
    return [data[i] for i in order[size:]], [data[i] for i in order[:size]]


def train(
    data: Sequence[HeadlineExample],
    config: ModelConfig,
    word_table: Optional[EmbeddingTable] = None,
    vocab: Optional[Vocabulary] = None,
) -> TrainingResult:
    """Train a model with mini-batch Adam.

    Examples are reshuffled every epoch with a generator seeded by
    ``config.seed``; the last partial batch is used. Gradients are clipped
    to ``config.clip_norm``. With early stopping, a validation split is held
    out and the parameters of the epoch with the lowest validation loss are
    kept.

    Args:
      data: training examples.
      config: configuration.
      word_table: word vectors aligned with ``vocab``; see :meth:`ModelParams.initialize`.
      vocab: vocabulary; built from ``data`` if omitted.

    Returns:
      the trained parameters, the vocabulary and the loss log.
    """
    if not data:
        raise DataError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    vocab = vocab if vocab is not None else build_vocab(data, config.min_count)
    params = ModelParams.initialize(config, vocab, word_table, rng)
    _LOGGER.info(
        "Training Bi%s (%s) with %d parameters on %d headlines",
        config.arch.name,
        config.features.display_name,
        params.parameter_count(),
        len(data),
    )

    training: Sequence[HeadlineExample] = data
    validation: list[HeadlineExample] = []
    if config.early_stopping:
        training, validation = _split_validation(data, config.validation_fraction, rng)

    result = TrainingResult(params, vocab, [])
    state = AdamState()
    trainable = params.trainable()
    best: Optional[tuple[float, dict[str, NDArray[np.floating]]]] = None
    waited = 0
    for epoch in range(1, config.epochs + 1):
        total = 0.0
        for index, chunk in enumerate(iterate_batches(training, config.batch_size, rng), start=1):
            batch = encode_batch(chunk, vocab, config.max_words, config.max_word_length)
            tape = Tape()
            probs = forward_headline(batch, params, Mode.TRAIN, rng, tape)
            loss = bce_loss(probs, batch.labels, tape)
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {index}")
            params.zero_grad()
            backward(loss, tape)
            norm = clip_gradients(trainable, config.clip_norm)
            adam_update(trainable, state, config.learning_rate, config.beta1, config.beta2, config.epsilon)
            total += value * batch.batch_size
            _LOGGER.debug("epoch %d batch %d: loss=%.6f grad_norm=%.4f", epoch, index, value, norm)
        result.losses.append(total / len(training))

        if not validation:
            _LOGGER.info("epoch %d: loss=%.6f", epoch, result.losses[-1])
            continue
        val_loss = _mean_loss(validation, params, vocab)
        result.validation_losses.append(val_loss)
        _LOGGER.info("epoch %d: loss=%.6f validation_loss=%.6f", epoch, result.losses[-1], val_loss)
        if best is None or val_loss < best[0]:
            best, waited, result.best_epoch = (val_loss, params.snapshot()), 0, epoch
            continue
        waited += 1
        if waited >= config.patience:
            _LOGGER.info("Stopping early at epoch %d; keeping epoch %s", epoch, result.best_epoch)
            break

    if best is not None:
        params.restore(best[1])
    params.zero_grad()
    return result


@dataclass
class Checkpoint:
    """A trained model ready for prediction."""

    config: ModelConfig
    vocab: Vocabulary
    params: ModelParams


class Prediction(NamedTuple):
    """Prediction for one headline.

    ``label`` and ``probability`` are None when the headline could not be
    scored, and ``error`` tells why.
    """

    label: Optional[HeadlineLabel]
    probability: Optional[float]
    error: Optional[str] = None


def predict(texts: Sequence[str], checkpoint: Checkpoint, threshold: float = 0.5) -> list[Prediction]:
    """Classify headlines with a trained model.

    A headline is clickbait when its probability is at least ``threshold``.
    Headlines without words are reported individually.

    Args:
      texts: headlines.
      checkpoint: trained model.
      threshold: decision threshold.

    Returns:
      one prediction per headline, in order.
    """
    examples = [HeadlineExample.from_text(t) for t in texts]
    scorable = [i for i, e in enumerate(examples) if e.tokens]
    probs = predict_proba([examples[i] for i in scorable], checkpoint.params, checkpoint.vocab)
    results = [Prediction(None, None, f"headline has no words: {t!r}") for t in texts]
    for i, p in zip(scorable, probs):
        label = HeadlineLabel.CLICKBAIT if p >= threshold else HeadlineLabel.NON_CLICKBAIT
        results[i] = Prediction(label, float(p))
    return results
