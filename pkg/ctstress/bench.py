#!/bin/true
#
# bench.py - part of ctstress
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
# Per-image wall-clock timings of the corruption and metric stages.
#

import math
import time
from collections import OrderedDict

import numpy as np
from scipy import ndimage

import artifacts
import dosesim
import image
import iqmetrics
import util

MIN_REPETITIONS = 20


def bench_image(size):
    """Smooth synthetic slice of size x size used for timing."""
    rng = dosesim.derive_rng(dosesim.SeedSpec(0, size), dosesim.STAGE_AUGMENT)
    field = ndimage.gaussian_filter(rng.random((size, size)), sigma=max(1.0, size / 32.0), mode="reflect")
    lo, hi = field.min(), field.max()
    return image.GrayImage((field - lo) / (hi - lo) if hi > lo else np.zeros_like(field))


def time_call(func, repetitions):
    """Run func repetitions times; return the wall-clock seconds of each call."""
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        func()
        t1 = time.perf_counter()
        times.append(t1 - t0)
    return times


def timing_summary(times):
    q1, median, q3 = np.percentile(times, [25.0, 50.0, 75.0])
    return OrderedDict([
        ("repetitions", len(times)),
        ("median_s", float(median)),
        ("iqr_s", float(q3 - q1)),
        ("min_s", float(min(times))),
    ])


def cmd_bench(conf, size=None, repetitions=MIN_REPETITIONS, severity=None):
    """Time dose corruption, severity corruption and the IQ metrics.

    The scaling entry compares dose corruption of the bench image with a
    slice of twice its area.
    """
    repetitions = max(int(repetitions), MIN_REPETITIONS)
    size = size or conf.image_size
    img = bench_image(size)
    seed = dosesim.SeedSpec(conf.seeds[0], 1)
    dose = conf.dose_levels()[0]
    level = severity if severity is not None else conf.severities[-1]
    sev = conf.severity(level)
    noisy = dosesim.simulate_low_dose(img, dose, seed)

    stages = OrderedDict([
        ("dose_" + dose.tag, lambda: dosesim.simulate_low_dose(img, dose, seed)),
        ("severity_" + str(level), lambda: artifacts.apply_severity(img, sev, seed)),
        ("iq_metrics", lambda: iqmetrics.evaluate(img, noisy)),
    ])
    result = OrderedDict([("image_size", size), ("stages", OrderedDict())])
    for name, func in stages.items():
        result["stages"][name] = timing_summary(time_call(func, repetitions))
        if util.debugging:
            util.print_debug(f"bench {name}: {result['stages'][name]}")

    big = bench_image(int(round(size * math.sqrt(2.0))))
    small_t = timing_summary(time_call(lambda: dosesim.simulate_low_dose(img, dose, seed), repetitions))
    big_t = timing_summary(time_call(lambda: dosesim.simulate_low_dose(big, dose, seed), repetitions))
    ratio = big_t["median_s"] / small_t["median_s"] if small_t["median_s"] > 0 else util.UNDEFINED
    result["scaling"] = OrderedDict([
        ("small_pixels", img.width * img.height),
        ("large_pixels", big.width * big.height),
        ("small_median_s", small_t["median_s"]),
        ("large_median_s", big_t["median_s"]),
        ("time_ratio", ratio),
    ])
    return result
