#
#  config.py
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
"""Parse run configurations.

A configuration file holds one ``key = value`` pair per line; ``#`` starts
a comment and blank lines are ignored. Every key must be known, so a typo
is an error rather than a silently ignored setting. Command-line flags use
the same keys and the same conversions, and override file values, which
override defaults.

Example:

.. code-block:: text

   # paper settings
   arch = lstm
   features = ce+we
   batch_size = 64
   dropout = 0.3
"""
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Final, Mapping, Optional, Union

from clickbait_rnn.classifier import ModelConfig
from clickbait_rnn.errors import ConfigError
from clickbait_rnn.labels import CellKind, FeatureMode, Peephole


def _boolean(text: str) -> bool:
    value = text.strip().lower()
    if value in ("true", "yes", "on", "1"):
        return True
    if value in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("none", "") else int(text)


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _optional_path(text: str) -> Optional[Path]:
    return Path(text) if text else None


_MODEL_CONVERTERS: Final[dict[str, Callable[[str], Any]]] = {
    "arch": CellKind,
    "features": FeatureMode,
    "hidden_size": int,
    "char_dim": int,
    "char_channels": _int_tuple,
    "kernel_width": int,
    "dropout": float,
    "batch_size": int,
    "learning_rate": float,
    "beta1": float,
    "beta2": float,
    "epsilon": float,
    "epochs": int,
    "seed": _optional_int,
    "min_count": int,
    "max_words": int,
    "max_word_length": int,
    "peephole": Peephole,
    "fine_tune_words": _boolean,
    "clip_norm": float,
    "early_stopping": _boolean,
    "validation_fraction": float,
    "patience": int,
    "precision": str,
}
"""Conversions of the keys of :class:`ModelConfig`."""

_RUN_CONVERTERS: Final[dict[str, Callable[[str], Any]]] = {
    "data": _optional_path,
    "embeddings": _optional_path,
    "model": _optional_path,
    "output_dir": _optional_path,
    "folds": int,
    "jobs": int,
    "threshold": float,
    "grid": str,
    "pooled": _boolean,
    "compare_baselines": _boolean,
}
"""Conversions of the keys of :class:`RunConfig` outside the model configuration."""

KNOWN_KEYS: Final = frozenset(_MODEL_CONVERTERS) | frozenset(_RUN_CONVERTERS)
"""Every key accepted in a configuration file."""

RawConfig = dict[str, tuple[str, str]]
"""Key to (location, raw value); the location names a file line or a flag."""


@dataclass(frozen=True)
class RunConfig:
    """Model configuration plus the paths and options of a command."""

    model: ModelConfig = field(default_factory=ModelConfig)
    data: Optional[Path] = None
    """Labeled headline TSV file."""
    embeddings: Optional[Path] = None
    """Pretrained word vector file."""
    model_path: Optional[Path] = None
    """Checkpoint file."""
    output_dir: Optional[Path] = None
    """Directory receiving result files."""
    folds: int = 10
    jobs: int = 1
    threshold: float = 0.5
    grid: str = "all"
    pooled: bool = False
    compare_baselines: bool = False

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ConfigError(f"folds must be at least 2, got {self.folds}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be positive, got {self.jobs}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in [0, 1], got {self.threshold}")

    def required(self, name: str, must_exist: bool = False) -> Path:
        """A path which must be set.

        Args:
          name: one of ``data``, ``embeddings``, ``model_path`` and ``output_dir``.
          must_exist: the path must name an existing file.

        Returns:
          the path.
        """
        path: Optional[Path] = getattr(self, name)
        if path is None:
            raise ConfigError(f"{name.removesuffix('_path')} is required")
        if must_exist and not path.is_file():
            raise ConfigError(f"{name.removesuffix('_path')} file not found: {path}")
        return path


def read_config(path: Union[str, "os.PathLike[str]"]) -> RawConfig:
    """Read the raw key/value pairs of a configuration file.

    Args:
      path: configuration file.

    Returns:
      raw values by key; later lines override earlier ones.
    """
    raw: RawConfig = {}
    try:
        with open(path, encoding="utf-8") as fp:
            lines = fp.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    for lineno, line in enumerate(lines, start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, value = content.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        raw[key] = (f"{path}:{lineno}", value.strip())
    return raw


def _convert(key: str, location: str, value: str, converters: Mapping[str, Callable[[str], Any]]) -> Any:
    try:
        return converters[key](value)
    except ValueError as e:
        raise ConfigError(f"{location}: invalid value {value!r} for {key}: {e}") from e


def build_run_config(raw: RawConfig) -> RunConfig:
    """Convert and validate raw values.

    Every value is checked on its own first, so an error names the line or
    the flag it comes from.

    Args:
      raw: raw values by key.

    Returns:
      the run configuration.
    """
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    model_values: dict[str, Any] = {}
    run_values: dict[str, Any] = {}
    for key, (location, value) in raw.items():
        if key in _MODEL_CONVERTERS:
            converted = _convert(key, location, value, _MODEL_CONVERTERS)
            try:
                replace(ModelConfig(), **{key: converted})
            except ConfigError as e:
                raise ConfigError(f"{location}: {e}") from e
            model_values[key] = converted
        else:
            converted = _convert(key, location, value, _RUN_CONVERTERS)
            try:
                RunConfig(**{"model_path" if key == "model" else key: converted})
            except ConfigError as e:
                raise ConfigError(f"{location}: {e}") from e
            run_values["model_path" if key == "model" else key] = converted
    return RunConfig(model=ModelConfig(**model_values), **run_values)


def parse_config(path: Union[str, "os.PathLike[str]"]) -> RunConfig:
    """Parse a configuration file.

    Args:
      path: configuration file.

    Returns:
      the run configuration with defaults for absent keys.
    """
    return build_run_config(read_config(path))


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (CellKind, FeatureMode, Peephole)):
        return str(value.value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "none"
    return str(value)


def format_model_config(config: ModelConfig) -> str:
    """Serialize a model configuration as ``key = value`` lines.

    Floats are written with :func:`repr` so that parsing the text back
    gives identical values.
    """
    return "".join(f"{f.name} = {_format(getattr(config, f.name))}\n" for f in fields(config))


def model_config_from_text(text: str, source: str = "<config>") -> ModelConfig:
    """Parse lines written by :func:`format_model_config`."""
    raw: RawConfig = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _MODEL_CONVERTERS:
            raise ConfigError(f"{source}:{lineno}: unknown model key {key!r}")
        raw[key] = (f"{source}:{lineno}", value.strip())
    return build_run_config(raw).model
