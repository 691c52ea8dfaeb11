#!/bin/true
#
# artifacts.py - part of ctstress
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
# Portable-CT acquisition artifacts: linear motion blur and concentric ring
# bands, composed with dose noise under a five level severity schedule.
#

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import ndimage

import dosesim
import image
import util
from dosesim import DoseLevel
from util import ValidationError

# sub-pixel positions are snapped to this grid so cos(90) lands on zero
_POSITION_DECIMALS = 9

DEFAULT_N_BANDS = (3, 8)
DEFAULT_BAND_SIGMA = (1.0, 3.0)


@dataclass(frozen=True)
class MotionParams:
    """Linear motion kernel of odd length L at angle theta (degrees)."""

    length_px: int
    angle_deg: float = 0.0

    def __post_init__(self):
        if int(self.length_px) != self.length_px or self.length_px < 1 or self.length_px % 2 == 0:
            raise ValidationError(f"motion length must be an odd positive integer, got {self.length_px!r}")
        if not (0.0 <= self.angle_deg < 180.0):
            raise ValidationError(f"motion angle must lie in [0,180), got {self.angle_deg!r}")


@dataclass(frozen=True)
class RingParams:
    """Gaussian ring bands (radius, sigma in pixels) and their peak strength."""

    alpha: float
    band_radii: Tuple[float, ...] = ()
    band_sigmas: Tuple[float, ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 <= self.alpha < 1.0):
            raise ValidationError(f"ring strength must lie in [0,1), got {self.alpha!r}")
        if len(self.band_radii) != len(self.band_sigmas):
            raise ValidationError("ring band radii and sigmas must have equal length")
        if any(s <= 0 for s in self.band_sigmas):
            raise ValidationError("ring band sigmas must be positive")
        if any(r < 0 for r in self.band_radii):
            raise ValidationError("ring band radii must be non-negative")

    @property
    def n_bands(self):
        return len(self.band_radii)


@dataclass(frozen=True)
class SeverityLevel:
    """One row of the severity schedule."""

    level: int
    dose: DoseLevel
    motion_length: int
    ring_alpha: float

    def to_dict(self):
        return {"dose": self.dose.lam, "motion_length": self.motion_length, "ring_alpha": self.ring_alpha}


@dataclass(frozen=True)
class RingSampling:
    """Ranges used when drawing ring bands for an image."""

    n_bands: Tuple[int, int] = DEFAULT_N_BANDS
    sigma: Tuple[float, float] = DEFAULT_BAND_SIGMA


DEFAULT_SCHEDULE = {
    1: SeverityLevel(1, DoseLevel(40.0), 3, 0.02),
    2: SeverityLevel(2, DoseLevel(20.0), 3, 0.02),
    3: SeverityLevel(3, DoseLevel(10.0), 5, 0.05),
    4: SeverityLevel(4, DoseLevel(5.0), 5, 0.05),
    5: SeverityLevel(5, DoseLevel(1.0), 7, 0.10),
}


@dataclass(frozen=True)
class Severity:
    """A severity level resolved against a schedule."""

    level: int
    schedule: dict = field(default_factory=lambda: dict(DEFAULT_SCHEDULE), compare=False)
    ring_sampling: RingSampling = RingSampling()

    def __post_init__(self):
        if self.level not in self.schedule:
            raise ValidationError(f"severity {self.level} is not in the schedule {sorted(self.schedule)}")

    @property
    def resolved(self):
        return self.schedule[self.level]


def check_schedule(schedule):
    """Require lambda non-increasing and L, alpha non-decreasing with level."""
    levels = sorted(schedule)
    for lo, hi in zip(levels, levels[1:]):
        a, b = schedule[lo], schedule[hi]
        if b.dose.lam > a.dose.lam:
            raise ValidationError(f"severity {hi} raises the dose factor above severity {lo}")
        if b.motion_length < a.motion_length:
            raise ValidationError(f"severity {hi} shortens the motion kernel of severity {lo}")
        if b.ring_alpha < a.ring_alpha:
            raise ValidationError(f"severity {hi} weakens the ring strength of severity {lo}")
    for row in schedule.values():
        MotionParams(row.motion_length)
        RingParams(row.ring_alpha)


def motion_kernel(params):
    """Build the normalized L x L line kernel for params.

    L unit-spaced samples along a segment through the center are splatted
    bilinearly onto the grid, then the grid is normalized to sum to 1.
    """
    size = params.length_px
    kernel = np.zeros((size, size), dtype=np.float64)
    center = (size - 1) / 2.0
    theta = math.radians(params.angle_deg)
    dx, dy = math.cos(theta), -math.sin(theta)
    for t in np.arange(size) - center:
        x = round(center + t * dx, _POSITION_DECIMALS)
        y = round(center + t * dy, _POSITION_DECIMALS)
        x0, y0 = math.floor(x), math.floor(y)
        fx, fy = x - x0, y - y0
        for yy, wy in ((y0, 1.0 - fy), (y0 + 1, fy)):
            for xx, wx in ((x0, 1.0 - fx), (x0 + 1, fx)):
                weight = wx * wy
                if weight > 0.0 and 0 <= yy < size and 0 <= xx < size:
                    kernel[yy, xx] += weight
    return kernel / kernel.sum()


def motion_blur(img, params):
    """Convolve img with the motion kernel of params, reflecting at borders."""
    arr = image.as_array(img)
    size = params.length_px
    if size > arr.shape[0] or size > arr.shape[1]:
        raise ValidationError(f"motion kernel {size}x{size} is larger than image {arr.shape[1]}x{arr.shape[0]}")
    if size == 1:
        return image.GrayImage(arr)
    out = ndimage.convolve(arr, motion_kernel(params), mode="reflect")
    return image.clip01(out)


def half_diagonal(width, height):
    """Distance from the slice center to a corner pixel."""
    return math.hypot((width - 1) / 2.0, (height - 1) / 2.0)


def radius_grid(width, height):
    """Radius of every pixel from the slice center."""
    ys, xs = np.mgrid[0:height, 0:width]
    return np.hypot(xs - (width - 1) / 2.0, ys - (height - 1) / 2.0)


def sample_ring_params(alpha, img_dims, seed, sampling=RingSampling()):
    """Draw band count, radii and widths for one image.

    The draw depends only on seed, so re-sampling for the same image returns
    the same bands.
    """
    if not math.isfinite(alpha) or alpha < 0:
        raise ValidationError(f"ring strength must be non-negative, got {alpha!r}")
    width, height = img_dims
    rng = dosesim.derive_rng(seed, dosesim.STAGE_RING)
    lo, hi = sampling.n_bands
    n_bands = int(rng.integers(lo, hi + 1))
    radii = rng.uniform(0.0, half_diagonal(width, height), size=n_bands)
    sigmas = rng.uniform(sampling.sigma[0], sampling.sigma[1], size=n_bands)
    return RingParams(float(alpha), tuple(float(r) for r in radii), tuple(float(s) for s in sigmas))


def ring_profile(params, width, height):
    """Evaluate s(r) on the pixel grid, scaled so its maximum is 1."""
    radius = radius_grid(width, height)
    raw = np.zeros_like(radius)
    for r0, sigma in zip(params.band_radii, params.band_sigmas):
        raw += np.exp(-((radius - r0) ** 2) / (2.0 * sigma * sigma))
    peak = raw.max() if raw.size else 0.0
    if peak <= 0.0:
        return raw
    return raw / peak


def ring_artifact(img, params):
    """Apply I * (1 + alpha * s(r)) and clip to [0, 1]."""
    arr = image.as_array(img)
    if params.alpha == 0.0 or params.n_bands == 0:
        return image.GrayImage(arr)
    profile = ring_profile(params, arr.shape[1], arr.shape[0])
    return image.clip01(arr * (1.0 + params.alpha * profile))


def sample_motion_params(length_px, seed):
    """Draw theta ~ U[0, 180) for an image and pair it with length_px."""
    rng = dosesim.derive_rng(seed, dosesim.STAGE_MOTION)
    angle = float(rng.uniform(0.0, 180.0))
    # uniform() is half open, the guard only matters after float rounding
    if angle >= 180.0:
        angle = 0.0
    return MotionParams(length_px, angle)


def apply_severity(img, sev, seed):
    """Corrupt img at severity sev: dose noise, then motion, then rings."""
    row = sev.resolved
    low_dose = dosesim.simulate_low_dose(img, row.dose, seed)
    motion = sample_motion_params(row.motion_length, seed)
    blurred = motion_blur(low_dose, motion)
    ring = sample_ring_params(row.ring_alpha, (blurred.width, blurred.height), seed, sev.ring_sampling)
    if util.debugging:
        util.print_debug(f"severity {sev.level}: lambda={row.dose.lam:g} L={motion.length_px} "
                         f"theta={motion.angle_deg:.2f} alpha={row.ring_alpha} bands={ring.n_bands}")
    return ring_artifact(blurred, ring)
