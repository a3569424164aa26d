#
#  cli.py
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
"""Command line interface.

Subcommands:

* ``train`` trains a model and writes a checkpoint,
* ``crossval`` runs stratified k-fold cross-validation over configurations,
* ``evaluate`` scores a labeled file with a checkpoint,
* ``predict`` classifies headlines with a checkpoint,
* ``synthesize`` writes a synthetic marker task for smoke runs.

Progress is logged to standard error; results go to standard output. Every
option can also be set in a ``--config`` file; options given on the command
line take precedence.
"""
import sys
from argparse import ArgumentParser, Namespace
from logging import DEBUG, INFO, Formatter, StreamHandler, getLogger
from pathlib import Path
from typing import Final, NoReturn, Optional, Sequence

import numpy as np

from clickbait_rnn.checkpoint import load_checkpoint, save_checkpoint
from clickbait_rnn.classifier import Checkpoint, predict, predict_proba, train
from clickbait_rnn.config import KNOWN_KEYS, RawConfig, RunConfig, build_run_config, read_config
from clickbait_rnn.errors import ConfigError, DataError, NumericError
from clickbait_rnn.evaluation import (
    METRIC_NAMES,
    crossval_run,
    evaluate_predictions,
    parse_grid,
    render_baseline_comparison,
    render_csv,
    render_table,
)
from clickbait_rnn.labels import CellKind, FeatureMode, Peephole
from clickbait_rnn.text import build_vocab, load_dataset, load_pretrained_embeddings, make_marker_dataset, write_dataset

_LOGGER: Final = getLogger(__name__)
"""Logging object."""

EXIT_OK: Final = 0
EXIT_USAGE: Final = 1
EXIT_DATA: Final = 2
EXIT_NUMERIC: Final = 3


class _UsageError(Exception):
    """Raised instead of exiting when the command line cannot be parsed."""


class _Parser(ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def _common(parser: ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="configuration file of key = value lines")
    parser.add_argument("--seed", help="random seed; a random one is chosen and logged if omitted")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every mini-batch")


def _model_options(parser: ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--arch", choices=[k.value for k in CellKind])
    group.add_argument("--features", choices=[f.value for f in FeatureMode])
    group.add_argument("--hidden-size", dest="hidden_size")
    group.add_argument("--epochs")
    group.add_argument("--batch-size", dest="batch_size")
    group.add_argument("--dropout")
    group.add_argument("--learning-rate", dest="learning_rate")
    group.add_argument("--min-count", dest="min_count")
    group.add_argument("--peephole", choices=[p.value for p in Peephole])
    group.add_argument("--precision", choices=["double", "single"])
    group.add_argument("--fine-tune-words", dest="fine_tune_words", action="store_const", const="true")
    group.add_argument("--early-stopping", dest="early_stopping", action="store_const", const="true")
    group.add_argument("--embeddings", help="pretrained word vector file")


def _build_parser() -> ArgumentParser:
    parser = _Parser(prog="clickbait-rnn", description="Clickbait headline detection with bidirectional RNNs.")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = commands.add_parser("train", help="train a model and save a checkpoint")
    _common(p)
    _model_options(p)
    p.add_argument("--data", help="labeled headline TSV file")
    p.add_argument("--out", dest="model", help="checkpoint to write")

    p = commands.add_parser("crossval", help="cross-validate architectures and feature modes")
    _common(p)
    _model_options(p)
    p.add_argument("--data", help="labeled headline TSV file")
    p.add_argument("--folds")
    p.add_argument("--grid", help="'all' or a list such as lstm:ce+we,gru:we")
    p.add_argument("--jobs", help="number of worker processes")
    p.add_argument("--output-dir", dest="output_dir", help="directory receiving results.csv and table.txt")
    p.add_argument("--threshold")
    p.add_argument("--pooled", action="store_const", const="true", help="also report metrics of pooled predictions")
    p.add_argument(
        "--compare-baselines",
        dest="compare_baselines",
        action="store_const",
        const="true",
        help="compare every configuration with feature-based baselines",
    )

    p = commands.add_parser("evaluate", help="score a labeled file with a checkpoint")
    _common(p)
    p.add_argument("--model", help="checkpoint file")
    p.add_argument("--data", help="labeled headline TSV file")
    p.add_argument("--threshold")

    p = commands.add_parser("predict", help="classify headlines with a checkpoint")
    _common(p)
    p.add_argument("--model", help="checkpoint file")
    p.add_argument("--text", action="append", help="headline; repeatable; read from standard input if omitted")
    p.add_argument("--threshold")

    p = commands.add_parser("synthesize", help="write a synthetic marker task")
    _common(p)
    p.add_argument("--out", dest="data", help="TSV file to write")
    p.add_argument("--size", type=int, default=2000, help="number of headlines")
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=200, help="number of distinct tokens")
    return parser


def _run_config(args: Namespace) -> RunConfig:
    raw: RawConfig = read_config(args.config) if args.config is not None else {}
    for key in sorted(KNOWN_KEYS):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = (f"option {key}", str(value))
    config = build_run_config(raw)
    if config.model.seed is None:
        seed = int(np.random.default_rng().integers(2**31))
        _LOGGER.info("Using random seed %d", seed)
        config = build_run_config({**raw, "seed": ("random seed", str(seed))})
    return config


def _train(config: RunConfig) -> int:
    model = config.model
    data_path = config.required("data", must_exist=True)
    model_path = config.required("model_path")
    embeddings = config.required("embeddings", must_exist=True) if model.features.uses_words else None

    data = load_dataset(data_path)
    vocab = build_vocab(data, model.min_count)
    table = load_pretrained_embeddings(embeddings, vocab) if embeddings is not None else None
    result = train(data, model, table, vocab)
    save_checkpoint(model_path, Checkpoint(model, vocab, result.params))
    for epoch, loss in enumerate(result.losses, start=1):
        line = f"epoch {epoch} loss {loss:.6f}"
        if result.validation_losses:
            line += f" validation_loss {result.validation_losses[epoch - 1]:.6f}"
        print(line)
    if result.best_epoch is not None:
        print(f"best_epoch {result.best_epoch}")
    return EXIT_OK


def _crossval(config: RunConfig) -> int:
    grid = parse_grid(config.grid)
    data_path = config.required("data", must_exist=True)
    uses_words = any(features.uses_words for _, features in grid)
    embeddings = config.required("embeddings", must_exist=True) if uses_words else None

    data = load_dataset(data_path)
    table = load_pretrained_embeddings(embeddings, build_vocab(data)) if embeddings is not None else None
    results = crossval_run(
        data,
        grid,
        config.model,
        k=config.folds,
        seed=config.model.seed,
        word_table=table,
        jobs=config.jobs,
        pooled=config.pooled,
        threshold=config.threshold,
    )

    sections = [render_table(results)]
    if config.pooled:
        sections.append(render_table(results, pooled=True))
    if config.compare_baselines:
        sections.extend(render_baseline_comparison(r) for r in results if r.mean is not None)
    csv_text = render_csv(results)
    if config.output_dir is not None:
        config.output_dir.mkdir(parents=True, exist_ok=True)
        (config.output_dir / "results.csv").write_text(csv_text, encoding="utf-8")
        (config.output_dir / "table.txt").write_text("\n".join(sections), encoding="utf-8")
        _LOGGER.info("Wrote results to %s", config.output_dir)
    else:
        sections.append(csv_text)
    print("\n".join(sections), end="")

    errors = [r.error for r in results if r.error is not None]
    if any(isinstance(e, NumericError) for e in errors):
        return EXIT_NUMERIC
    return EXIT_DATA if errors else EXIT_OK


def _evaluate(config: RunConfig) -> int:
    checkpoint = load_checkpoint(config.required("model_path", must_exist=True))
    data = load_dataset(config.required("data", must_exist=True))
    probs = predict_proba(data, checkpoint.params, checkpoint.vocab)
    report = evaluate_predictions(probs, [int(e.label) for e in data], config.threshold)
    for name, value in zip(METRIC_NAMES, report.values()):
        print(f"{name} {value:.6f}")
    print(f"tp {report.tp}\nfp {report.fp}\ntn {report.tn}\nfn {report.fn}")
    return EXIT_OK


def _predict(config: RunConfig, texts: Optional[Sequence[str]]) -> int:
    checkpoint = load_checkpoint(config.required("model_path", must_exist=True))
    if texts is None:
        texts = [line.rstrip("\r\n") for line in sys.stdin if line.strip()]
    for prediction in predict(texts, checkpoint, config.threshold):
        if prediction.label is None or prediction.probability is None:
            _LOGGER.warning("%s", prediction.error)
            print("- -")
        else:
            print(f"{int(prediction.label)} {prediction.probability:.6f}")
    return EXIT_OK


def _synthesize(config: RunConfig, size: int, vocab_size: int) -> int:
    out = config.required("data")
    try:
        examples = make_marker_dataset(size, np.random.default_rng(config.model.seed), vocab_size=vocab_size)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    write_dataset(out, examples)
    _LOGGER.info("Wrote %d headlines to %s", len(examples), out)
    return EXIT_OK


def _configure_logging(verbose: bool) -> None:
    handler = StreamHandler(sys.stderr)
    handler.setFormatter(Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logger = getLogger("clickbait_rnn")
    logger.handlers[:] = [handler]
    logger.setLevel(DEBUG if verbose else INFO)


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run a command.

    Args:
      argv: arguments without the program name; ``sys.argv[1:]`` if omitted.

    Returns:
      the exit code: 0 on success, 1 on a usage error, 2 on a data or
      configuration error and 3 on a numeric failure.
    """
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError:
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)
    _configure_logging(args.verbose)

    try:
        config = _run_config(args)
        if args.command == "train":
            return _train(config)
        if args.command == "crossval":
            return _crossval(config)
        if args.command == "evaluate":
            return _evaluate(config)
        if args.command == "predict":
            return _predict(config, args.text)
        return _synthesize(config, args.size, args.vocab_size)
    except NumericError as e:
        _LOGGER.error("%s", e)
        return EXIT_NUMERIC
    except (DataError, ConfigError) as e:
        _LOGGER.error("%s", e)
        return EXIT_DATA


def main() -> NoReturn:
    """Console entry point."""
    sys.exit(run_cli())
