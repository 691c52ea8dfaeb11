#!/bin/true
#
# dosesim.py - part of ctstress
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
# Low-dose simulation: every pixel becomes Poisson(lambda * I) / lambda.
#

import hashlib
import math
from dataclasses import dataclass

import numpy as np

import image
from util import ValidationError

DEFAULT_DOSES = (1.0, 5.0, 10.0, 20.0, 40.0)

# stage tags keep the random streams of the corruption stages apart
STAGE_DOSE = 0
STAGE_MOTION = 1
STAGE_RING = 2
STAGE_AUGMENT = 3
STAGE_BOOTSTRAP = 4
STAGE_SHUFFLE = 5

UINT64_MAX = 2 ** 64 - 1
# numpy rejects Poisson means above roughly int64 max minus ten standard deviations
MAX_POISSON_MEAN = 9.2e18


@dataclass(frozen=True)
class DoseLevel:
    """Photon-count scaling factor; lower means noisier."""

    lam: float

    def __post_init__(self):
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam > 0):
            raise ValidationError(f"dose factor must be a positive finite real, got {self.lam!r}")

    @property
    def tag(self):
        return f"{self.lam:g}"


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus the per-image stream it is derived for."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 0 or value > UINT64_MAX:
                raise ValidationError(f"{name} must be a 64-bit unsigned integer, got {value!r}")

    def for_item(self, item_id):
        """Return the seed of item_id under the same master seed."""
        return SeedSpec(self.master_seed, stream_index_for(item_id))


def stream_index_for(item_id):
    """Derive a stable 64-bit stream index from a record id."""
    digest = hashlib.sha1(str(item_id).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(seed, stage):
    """Build the random generator for one corruption stage of one image.

    The Philox bit generator is counter based: its output depends only on
    (master_seed, stream_index, stage), never on what other images drew.
    """
    seq = np.random.SeedSequence([int(seed.master_seed), int(seed.stream_index), int(stage)])
    return np.random.Generator(np.random.Philox(seq))


def poisson_draw(mean, rng):
    """Draw one Poisson variate with the given mean."""
    if not math.isfinite(mean) or mean < 0:
        raise ValidationError(f"Poisson mean must be finite and non-negative, got {mean!r}")
    if mean > MAX_POISSON_MEAN:
        raise ValidationError(f"Poisson mean {mean!r} is above the sampler limit {MAX_POISSON_MEAN:g}")
    return int(rng.poisson(mean))


def _check_inputs(img, dose):
    if not isinstance(dose, DoseLevel):
        dose = DoseLevel(float(dose))
    arr = image.as_array(img)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("image contains non-finite pixels")
    return arr, dose


def dose_counts(img, dose, seed):
    """Return Poisson(lambda * I) / lambda before clipping."""
    arr, dose = _check_inputs(img, dose)
    peak = dose.lam * float(arr.max()) if arr.size else 0.0
    if peak > MAX_POISSON_MEAN:
        raise ValidationError(f"dose factor {dose.tag} gives a photon count of {peak:g}, "
                              f"above the sampler limit {MAX_POISSON_MEAN:g}")
    rng = derive_rng(seed, STAGE_DOSE)
    # generator.poisson samples by inversion at small means and by
    # transformed rejection (PTRS) at large means, both exact
    counts = rng.poisson(dose.lam * arr)
    return counts.astype(np.float64) / dose.lam


def simulate_low_dose(img, dose, seed):
    """Simulate a low-dose acquisition of img at the given dose factor."""
    return image.clip01(dose_counts(img, dose, seed))
