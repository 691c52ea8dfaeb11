#!/bin/true
#
# iqmetrics.py - part of ctstress
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
# Image quality of a corrupted or denoised slice against its clean
# reference: MSE, PSNR and SSIM.
#

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from skimage.metrics import structural_similarity

import image
from util import INFINITE, UNDEFINED, Marker, ValidationError

MAX_INTENSITY = 1.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class IQResult:
    mse: float
    psnr_db: Union[float, Marker]
    ssim: float

    def to_dict(self):
        return {"mse": self.mse, "psnr_db": self.psnr_db, "ssim": self.ssim}


def _pair(a, b):
    x = image.as_array(a)
    y = image.as_array(b)
    if x.shape != y.shape:
        raise ValidationError(f"image dimensions differ: {x.shape[::-1]} vs {y.shape[::-1]}")
    return x, y


def mse(a, b):
    """Mean over all pixels of the squared difference."""
    x, y = _pair(a, b)
    return float(np.mean((x - y) ** 2))


def psnr_from_mse(err):
    """Convert an MSE into PSNR in dB; zero error gives the INFINITE marker."""
    if err == 0.0:
        return INFINITE
    return 10.0 * math.log10(MAX_INTENSITY ** 2 / err)


def psnr(a, b):
    """Peak signal-to-noise ratio with MAX_I = 1."""
    return psnr_from_mse(mse(a, b))


def ssim(a, b):
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5)."""
    x, y = _pair(a, b)
    if x.shape[0] < SSIM_WINDOW or x.shape[1] < SSIM_WINDOW:
        raise ValidationError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape[1]}x{x.shape[0]}")
    # truncate 3.5 sigma -> radius 5 -> the 11x11 window
    value = structural_similarity(x, y, win_size=SSIM_WINDOW, gaussian_weights=True, sigma=SSIM_SIGMA,
                                  use_sample_covariance=False, data_range=MAX_INTENSITY,
                                  K1=SSIM_K1, K2=SSIM_K2)
    return float(value)


def evaluate(reference, test):
    """Compute all image-quality metrics of test against reference."""
    err = mse(reference, test)
    return IQResult(err, psnr_from_mse(err), ssim(reference, test))


def summarize(results):
    """Average per-image results over a test set.

    Infinite PSNR values are left out of the PSNR mean and counted
    separately.
    """
    if not results:
        return {"n": 0, "mse": UNDEFINED, "psnr_db": UNDEFINED, "ssim": UNDEFINED, "psnr_infinite": 0}
    finite = [r.psnr_db for r in results if r.psnr_db is not INFINITE]
    if finite:
        psnr_mean = float(np.mean(finite))
    else:
        psnr_mean = INFINITE
    return {
        "n": len(results),
        "mse": float(np.mean([r.mse for r in results])),
        "psnr_db": psnr_mean,
        "ssim": float(np.mean([r.ssim for r in results])),
        "psnr_infinite": len(results) - len(finite),
    }
