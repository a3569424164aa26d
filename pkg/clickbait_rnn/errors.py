#
#  errors.py
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
"""Define exceptions raised in clickbait_rnn package.

All exceptions derive from the builtin ones so that callers catching
:class:`ValueError` or :class:`ArithmeticError` keep working.
"""


class DimensionError(ValueError):
    """Raised when tensor shapes are incompatible with an operation."""


class DataError(ValueError):
    """Raised when a dataset, an embedding file, or a batch is malformed."""


class ConfigError(ValueError):
    """Raised when a configuration key or value is invalid."""


class CheckpointError(DataError):
    """Raised when a checkpoint file cannot be loaded."""


class NumericError(ArithmeticError):
    """Raised when a loss or a gradient is not finite."""
