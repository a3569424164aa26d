#
#  __main__.py
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
"""Run the command line interface with ``python -m clickbait_rnn``."""
from clickbait_rnn.cli import main

if __name__ == "__main__":
    main()
