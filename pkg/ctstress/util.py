#!/bin/true
#
# util.py - part of ctstress
# Copyright (C) 2015 Intel Corporation
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
#

import hashlib
import json
import os
import sys

VERSION = "0.1.0"

debugging: bool = False


class HarnessError(Exception):
    """Base class for every error raised by ctstress."""


class ValidationError(HarnessError):
    """Invalid input: configuration, manifest, score file or image."""


class UndefinedMetricError(ValidationError):
    """A metric was requested on data where it is not defined."""


class TrainingDivergedError(HarnessError):
    """Gradient descent produced a non-finite loss."""

    def __init__(self, epoch, loss):
        """Keep the epoch index at which the loss stopped being finite."""
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class Marker(object):
    """Distinguished value standing in for a number that does not exist."""

    def __init__(self, name, json_value, text):
        """Create a named marker."""
        self.name = name
        self.json_value = json_value
        self.text = text

    def __repr__(self):
        return self.name

    def __str__(self):
        return self.text

    def __reduce__(self):
        return (_marker_by_name, (self.name,))


UNDEFINED = Marker("UNDEFINED", None, "undefined")
INFINITE = Marker("INFINITE", "+inf", "+inf")


def _marker_by_name(name):
    return {"UNDEFINED": UNDEFINED, "INFINITE": INFINITE}[name]


def is_marker(value):
    """Check if value is one of the distinguished markers."""
    return value is UNDEFINED or value is INFINITE


def to_json_value(value):
    """Encode a metric value for JSON, markers included."""
    if is_marker(value):
        return value.json_value
    return value


def from_json_value(value):
    """Decode a metric value written by to_json_value."""
    if value is None:
        return UNDEFINED
    if value == INFINITE.json_value:
        return INFINITE
    return value


def to_text_value(value):
    """Render a metric value for CSV output."""
    if is_marker(value):
        return value.text
    return repr(float(value)) if isinstance(value, float) else str(value)


def canonical_json(obj):
    """Serialize obj with sorted keys so equal objects give equal bytes."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def get_sha1sum_text(text):
    """Get sha1 sum of a string."""
    sh = hashlib.sha1()
    sh.update(text.encode("utf-8"))
    return sh.hexdigest()


def get_contents(filename):
    """Get contents of filename."""
    with open(filename, "rb") as f:
        return f.read()


def get_sha1sum(filename):
    """Get sha1 sum of filename."""
    sh = hashlib.sha1()
    sh.update(get_contents(filename))
    return sh.hexdigest()


def _supports_color():
    # FIXME: check terminfo instead
    return sys.stdout.isatty()


def _print_message(message, level, color=None):
    prefix = level
    if color and _supports_color():
        # FIXME: use terminfo instead
        if color == 'red':
            params = '31;1'
        elif color == 'green':
            params = '32;1'
        elif color == 'yellow':
            params = '33;1'
        elif color == 'blue':
            params = '34;1'
        prefix = f'\033[{params}m{level}\033[0m'
    print(f'[{prefix}] {message}')


def print_error(message):
    """Print error, color coded for TTYs."""
    _print_message(message, 'ERROR', 'red')


def print_fatal(message):
    """Print fatal error, color coded for TTYs."""
    _print_message(message, 'FATAL', 'red')


def print_warning(message):
    """Print warning, color coded for TTYs."""
    _print_message(message, 'WARNING', 'red')


def print_info(message):
    """Print informational message, color coded for TTYs."""
    _print_message(message, 'INFO', 'yellow')


def print_success(message):
    """Print success message, color coded for TTYs."""
    _print_message(message, 'SUCCESS', 'green')


def print_debug(message):
    """Print debug messages, color coded for TTYs."""
    _print_message(message, 'DEBUG', 'blue')


def makedirs_for(filename):
    """Create the parent directory of filename if needed."""
    parent = os.path.dirname(filename)
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_out(filename, content, mode="w"):
    """File.write convenience wrapper."""
    makedirs_for(filename)
    with open_auto(filename, mode) as require_f:
        require_f.write(content)


def open_auto(*args, **kwargs):
    """Open a file with UTF-8 encoding.

    Open file with UTF-8 encoding and "surrogate" escape characters that are
    not valid UTF-8 to avoid data corruption.
    """
    # 'encoding' and 'errors' are fourth and fifth positional arguments, so
    # restrict the args tuple to (file, mode, buffering) at most
    assert len(args) <= 3
    assert 'encoding' not in kwargs
    assert 'errors' not in kwargs
    return open(*args, encoding="utf-8", errors="surrogateescape", **kwargs)
