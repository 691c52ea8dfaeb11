#!/bin/true
#
# config.py - part of ctstress
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
# Parse config files
#

import math
import os
from collections import OrderedDict

import toml

import artifacts
import baseline
import dataset
import dosesim
import util
from util import ValidationError

DEFAULT_CONFIG_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "ctstress.toml")

POOLING_RULES = ("none", "max", "mean")
CONDITION_MODES = ("dose", "severity")

# section -> known keys; anything else in a config file is rejected
KNOWN_KEYS = {
    "run": ("doses", "severities", "seeds", "threshold", "bootstrap_n", "ci_level", "ece_bins",
            "image_size", "patient_pooling", "condition_mode"),
    "ring": ("n_bands_min", "n_bands_max", "sigma_min", "sigma_max"),
    "augment": ("rotate_deg_max", "flip_h_prob", "flip_v_prob", "translate_frac_max"),
    "baseline": ("denoiser", "gaussian_sigma", "nlm_patch", "nlm_window", "nlm_h", "learning_rate",
                 "epochs", "l2", "batch_size", "augment"),
}
SEVERITY_KEYS = ("dose", "motion_length", "ring_alpha")


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


class Config(object):
    """Class to handle ctstress run configuration."""

    def __init__(self):
        """Initialize default configuration settings."""
        self.doses = list(dosesim.DEFAULT_DOSES)
        self.severities = [1, 2, 3, 4, 5]
        self.seeds = [7, 17, 27]
        self.threshold = 0.5
        self.bootstrap_n = 2000
        self.ci_level = 0.95
        self.ece_bins = 15
        self.image_size = 128
        self.patient_pooling = "none"
        self.condition_mode = "dose"
        self.n_bands_min, self.n_bands_max = artifacts.DEFAULT_N_BANDS
        self.sigma_min, self.sigma_max = artifacts.DEFAULT_BAND_SIGMA
        self.schedule = OrderedDict((level, row.to_dict()) for level, row in artifacts.DEFAULT_SCHEDULE.items())
        self.rotate_deg_max = 15.0
        self.flip_h_prob = 0.5
        self.flip_v_prob = 0.5
        self.translate_frac_max = 0.10
        self.denoiser = "nlm"
        self.gaussian_sigma = 1.0
        self.nlm_patch = 5
        self.nlm_window = 13
        self.nlm_h = 0.05
        self.learning_rate = 0.1
        self.epochs = 500
        self.l2 = 1e-3
        self.batch_size = 0
        self.augment = True
        self.out_dir = "."
        self.config_files = []

    def read_config_file(self, path):
        """Merge the TOML document at path over the current settings."""
        with util.open_auto(path, "r") as conffile:
            try:
                doc = toml.loads(conffile.read())
            except toml.TomlDecodeError as err:
                raise ValidationError(f"{path}: {err}") from err
        self.config_files.append(path)
        self.merge(doc, path)

    def merge(self, doc, origin="<config>"):
        """Merge a parsed config document; unknown sections or keys fail."""
        for section, body in doc.items():
            if section == "severity":
                self._merge_severity(body, origin)
                continue
            if section not in KNOWN_KEYS or not isinstance(body, dict):
                raise ValidationError(f"{origin}: unknown config section [{section}]")
            for key, value in body.items():
                if key not in KNOWN_KEYS[section]:
                    raise ValidationError(f"{origin}: unknown key {key!r} in [{section}]")
                setattr(self, key, value)
                if util.debugging:
                    util.print_debug(f"config {origin}: {section}.{key} = {value!r}")

    def _merge_severity(self, body, origin):
        for level, row in body.items():
            try:
                level_int = int(level)
            except ValueError:
                raise ValidationError(f"{origin}: severity section [severity.{level}] is not an integer level")
            current = dict(self.schedule.get(level_int, {}))
            for key, value in row.items():
                if key not in SEVERITY_KEYS:
                    raise ValidationError(f"{origin}: unknown key {key!r} in [severity.{level}]")
                current[key] = value
            missing = [k for k in SEVERITY_KEYS if k not in current]
            if missing:
                raise ValidationError(f"{origin}: [severity.{level}] is missing {', '.join(missing)}")
            self.schedule[level_int] = current
        self.schedule = OrderedDict(sorted(self.schedule.items()))

    def apply_args(self, args):
        """Let command-line flags override the file settings."""
        if getattr(args, "seed", None) is not None:
            self.seeds = [args.seed]
        if getattr(args, "threshold", None) is not None:
            self.threshold = args.threshold
        if getattr(args, "out", None):
            self.out_dir = args.out
        if getattr(args, "pooling", None):
            self.patient_pooling = args.pooling

    def validate(self):
        """Check every setting; raise ValidationError on the first bad one."""
        if not isinstance(self.doses, list) or not self.doses:
            raise ValidationError("run.doses must be a non-empty list")
        for lam in self.doses:
            if not _is_real(lam):
                raise ValidationError(f"run.doses: {lam!r} is not a number")
            dosesim.DoseLevel(float(lam))
        if not isinstance(self.seeds, list) or not self.seeds:
            raise ValidationError("run.seeds must be a non-empty list")
        for seed in self.seeds:
            if not _is_int(seed):
                raise ValidationError(f"run.seeds: {seed!r} is not an integer")
            dosesim.SeedSpec(seed)
        if not _is_real(self.threshold) or not 0.0 < self.threshold < 1.0:
            raise ValidationError(f"run.threshold must lie in (0,1), got {self.threshold!r}")
        if not _is_int(self.bootstrap_n) or self.bootstrap_n < 0:
            raise ValidationError(f"run.bootstrap_n must be a non-negative integer, got {self.bootstrap_n!r}")
        if not _is_real(self.ci_level) or not 0.0 < self.ci_level < 1.0:
            raise ValidationError(f"run.ci_level must lie in (0,1), got {self.ci_level!r}")
        if not _is_int(self.ece_bins) or self.ece_bins < 1:
            raise ValidationError(f"run.ece_bins must be a positive integer, got {self.ece_bins!r}")
        if not _is_int(self.image_size) or self.image_size < 1:
            raise ValidationError(f"run.image_size must be a positive integer, got {self.image_size!r}")
        if self.patient_pooling not in POOLING_RULES:
            raise ValidationError(f"run.patient_pooling must be one of {', '.join(POOLING_RULES)}")
        if self.condition_mode not in CONDITION_MODES:
            raise ValidationError(f"run.condition_mode must be one of {', '.join(CONDITION_MODES)}")

        schedule = self.build_schedule()
        artifacts.check_schedule(schedule)
        if not isinstance(self.severities, list) or not self.severities:
            raise ValidationError("run.severities must be a non-empty list")
        for level in self.severities:
            if not _is_int(level) or level not in schedule:
                raise ValidationError(f"run.severities: {level!r} has no row in the severity schedule")

        if not (_is_int(self.n_bands_min) and _is_int(self.n_bands_max) and 1 <= self.n_bands_min <= self.n_bands_max):
            raise ValidationError("ring.n_bands_min and ring.n_bands_max must be integers with 1 <= min <= max")
        if not (_is_real(self.sigma_min) and _is_real(self.sigma_max) and 0.0 < self.sigma_min <= self.sigma_max):
            raise ValidationError("ring.sigma_min and ring.sigma_max must satisfy 0 < min <= max")

        self.augment_config()
        self.denoiser_spec()
        if not _is_real(self.learning_rate) or self.learning_rate <= 0:
            raise ValidationError(f"baseline.learning_rate must be positive, got {self.learning_rate!r}")
        if not _is_int(self.epochs) or self.epochs < 1:
            raise ValidationError(f"baseline.epochs must be a positive integer, got {self.epochs!r}")
        if not _is_real(self.l2) or self.l2 < 0:
            raise ValidationError(f"baseline.l2 must be non-negative, got {self.l2!r}")
        if not _is_int(self.batch_size) or self.batch_size < 0:
            raise ValidationError(f"baseline.batch_size must be a non-negative integer, got {self.batch_size!r}")
        if not isinstance(self.augment, bool):
            raise ValidationError(f"baseline.augment must be true or false, got {self.augment!r}")

    def build_schedule(self):
        """Return the severity schedule as {level: SeverityLevel}."""
        schedule = OrderedDict()
        for level, row in self.schedule.items():
            if not (_is_real(row["dose"]) and _is_int(row["motion_length"]) and _is_real(row["ring_alpha"])):
                raise ValidationError(f"severity {level}: dose and ring_alpha must be numbers, motion_length an integer")
            schedule[level] = artifacts.SeverityLevel(level, dosesim.DoseLevel(float(row["dose"])),
                                                      row["motion_length"], float(row["ring_alpha"]))
        return schedule

    def ring_sampling(self):
        return artifacts.RingSampling((self.n_bands_min, self.n_bands_max),
                                      (float(self.sigma_min), float(self.sigma_max)))

    def severity(self, level):
        """Resolve one severity level against the configured schedule."""
        return artifacts.Severity(level, self.build_schedule(), self.ring_sampling())

    def dose_levels(self):
        return [dosesim.DoseLevel(float(lam)) for lam in self.doses]

    def augment_config(self):
        return dataset.AugmentConfig(float(self.rotate_deg_max), float(self.flip_h_prob),
                                     float(self.flip_v_prob), float(self.translate_frac_max))

    def denoiser_spec(self):
        return baseline.DenoiserSpec(self.denoiser, float(self.gaussian_sigma), self.nlm_patch,
                                     self.nlm_window, float(self.nlm_h))

    def train_config(self, seed=0):
        return baseline.TrainConfig(float(self.learning_rate), self.epochs, float(self.l2), seed,
                                    self.batch_size or None)

    def severity_table(self):
        """Severity schedule keyed by level (as text, for JSON)."""
        return OrderedDict((str(level), row.to_dict()) for level, row in self.build_schedule().items())

    def to_dict(self):
        """Every setting that influences results; paths are left out."""
        return OrderedDict([
            ("run", OrderedDict((key, getattr(self, key)) for key in KNOWN_KEYS["run"])),
            ("ring", OrderedDict((key, getattr(self, key)) for key in KNOWN_KEYS["ring"])),
            ("severity", self.severity_table()),
            ("augment", OrderedDict((key, getattr(self, key)) for key in KNOWN_KEYS["augment"])),
            ("baseline", OrderedDict((key, getattr(self, key)) for key in KNOWN_KEYS["baseline"])),
        ])

    def config_hash(self):
        return util.get_sha1sum_text(util.canonical_json(self.to_dict()))


def load_config(path=None, args=None):
    """Read the shipped defaults, then path, then flags, and validate."""
    conf = Config()
    conf.read_config_file(DEFAULT_CONFIG_FILE)
    if path:
        conf.read_config_file(path)
    if args is not None:
        conf.apply_args(args)
    conf.validate()
    return conf
