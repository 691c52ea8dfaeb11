#!/bin/true
#
# image.py - part of ctstress
# Copyright (C) 2026 ctstress contributors
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
# Grayscale slice type shared by the simulators and the metrics, plus PNG
# input/output and resampling.
#

import numpy as np
from PIL import Image
from scipy import ndimage

import util
from util import ValidationError

MAX_8BIT = 255
MAX_16BIT = 65535


class GrayImage(object):
    """Single-channel slice with finite intensities in [0, 1].

    Pixels are held as a read-only float64 array of shape (height, width), so
    a GrayImage can be shared between workers without copying.
    """

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        """Validate and freeze the pixel grid."""
        arr = np.array(pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"image must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("image contains non-finite pixels")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError(f"image intensities outside [0,1]: [{arr.min()}, {arr.max()}]")
        arr.setflags(write=False)
        self.pixels = arr

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def shape(self):
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


def as_array(img):
    """Return the pixel grid of a GrayImage or an array-like as float64."""
    if isinstance(img, GrayImage):
        return img.pixels
    return np.asarray(img, dtype=np.float64)


def constant(value, width, height):
    """Create a constant image."""
    return GrayImage(np.full((height, width), float(value)))


def clip01(img):
    """Clamp every value into [0, 1]; NaN is rejected."""
    arr = as_array(img)
    if np.isnan(arr).any():
        raise ValidationError("cannot clip an image containing NaN")
    return GrayImage(np.clip(arr, 0.0, 1.0))


def load_image(path):
    """Load a PNG slice and map its intensities onto [0, 1].

    8-bit and 16-bit grayscale files are divided by their bit-depth maximum.
    RGB files are collapsed by the unweighted mean of the three channels.
    """
    with Image.open(path) as im:
        im.load()
        mode = im.mode
        if mode in ("I;16", "I;16B", "I;16L", "I"):
            data = np.asarray(im).astype(np.float64)
            if data.size and data.max() > MAX_16BIT:
                raise ValidationError(f"{path}: unsupported bit depth (values above 16 bits)")
            scale = MAX_16BIT
        elif mode == "L":
            data = np.asarray(im).astype(np.float64)
            scale = MAX_8BIT
        elif mode == "LA":
            data = np.asarray(im.getchannel("L")).astype(np.float64)
            scale = MAX_8BIT
        elif mode in ("RGB", "RGBA"):
            data = np.asarray(im.convert("RGB")).astype(np.float64).mean(axis=2)
            scale = MAX_8BIT
        else:
            raise ValidationError(f"{path}: unsupported PNG mode {mode}")

    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
        raise ValidationError(f"{path}: zero-dimension image")
    if util.debugging:
        util.print_debug(f"loaded {path} mode={mode} shape={data.shape}")
    return GrayImage(data / scale)


def save_image(img, path):
    """Write img as a 16-bit grayscale PNG."""
    arr = as_array(img)
    quantized = np.round(arr * MAX_16BIT).astype(np.uint16)
    util.makedirs_for(path)
    Image.fromarray(quantized).save(path, format="PNG")


def resize_bilinear(img, w, h):
    """Resample img to w x h with bilinear interpolation.

    Corner pixels of the source map onto corner pixels of the target, so
    every output value is a convex combination of input values.
    """
    if w < 1 or h < 1:
        raise ValidationError(f"target size must be positive, got {w}x{h}")
    arr = as_array(img)
    src_h, src_w = arr.shape
    if (src_w, src_h) == (w, h):
        return GrayImage(arr)

    rows = np.linspace(0.0, src_h - 1, h) if h > 1 else np.array([(src_h - 1) / 2.0])
    cols = np.linspace(0.0, src_w - 1, w) if w > 1 else np.array([(src_w - 1) / 2.0])
    grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")
    out = ndimage.map_coordinates(arr, [grid_r, grid_c], order=1, mode="nearest")
    return GrayImage(np.clip(out, 0.0, 1.0))
