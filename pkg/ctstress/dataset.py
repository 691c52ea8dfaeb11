#!/bin/true
#
# dataset.py - part of ctstress
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
# Manifest ingestion, patient-level split validation and the train-only
# augmentation.
#

import csv
import io
import math
import os
from collections import OrderedDict
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import ndimage

import dosesim
import image
import util
from util import ValidationError

MANIFEST_FIELDS = ["id", "image_path", "label", "patient_id", "split"]
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    image_path: str
    label: int
    patient_id: str
    split: str


@dataclass(frozen=True)
class AugmentConfig:
    rotate_deg_max: float = 15.0
    flip_h_prob: float = 0.5
    flip_v_prob: float = 0.5
    translate_frac_max: float = 0.10
    seed: dosesim.SeedSpec = dosesim.SeedSpec(0)

    def __post_init__(self):
        if self.rotate_deg_max < 0:
            raise ValidationError(f"rotate_deg_max must be non-negative, got {self.rotate_deg_max}")
        for name in ("flip_h_prob", "flip_v_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must lie in [0,1], got {value}")
        if not 0.0 <= self.translate_frac_max < 1.0:
            raise ValidationError(f"translate_frac_max must lie in [0,1), got {self.translate_frac_max}")


class Dataset(object):
    """Records of a manifest, with image paths resolved against root."""

    def __init__(self, records, root=""):
        """Hold the records; ids must be unique."""
        self.records: List[ManifestRecord] = list(records)
        self.root = root
        self._by_id = OrderedDict()
        for rec in self.records:
            if rec.id in self._by_id:
                raise ValidationError(f"duplicate id {rec.id!r} in manifest")
            self._by_id[rec.id] = rec

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __contains__(self, item_id):
        return item_id in self._by_id

    def split(self, name):
        return [r for r in self.records if r.split == name]

    def by_id(self, item_id):
        return self._by_id[item_id]

    def image_path(self, rec):
        if os.path.isabs(rec.image_path):
            return rec.image_path
        return os.path.join(self.root, rec.image_path)

    def load(self, rec, size=None):
        """Load the slice of rec, resized to size x size when size is set."""
        img = image.load_image(self.image_path(rec))
        if size:
            img = image.resize_bilinear(img, size, size)
        return img


def _parse_row(row, lineno):
    missing = [f for f in MANIFEST_FIELDS if row.get(f) in (None, "")]
    if missing:
        raise ValidationError(f"manifest line {lineno}: missing value for {', '.join(missing)}")
    if row["label"].strip() not in ("0", "1"):
        raise ValidationError(f"manifest line {lineno}: label must be 0 or 1, got {row['label']!r}")
    split = row["split"].strip()
    if split not in SPLITS:
        raise ValidationError(f"manifest line {lineno}: unknown split value {split!r}")
    return ManifestRecord(row["id"].strip(), row["image_path"].strip(), int(row["label"]),
                          row["patient_id"].strip(), split)


def load_manifest(path):
    """Parse and validate a manifest CSV (id,image_path,label,patient_id,split)."""
    records = []
    seen = {}
    with util.open_auto(path, "r", newline="") as fp:
        reader = csv.DictReader(fp)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != MANIFEST_FIELDS:
            raise ValidationError(f"{path}: header must be {','.join(MANIFEST_FIELDS)}, got {reader.fieldnames}")
        for row in reader:
            lineno = reader.line_num
            if None in row:
                raise ValidationError(f"manifest line {lineno}: too many fields")
            rec = _parse_row(row, lineno)
            if rec.id in seen:
                raise ValidationError(f"manifest line {lineno}: duplicate id {rec.id!r} (first on line {seen[rec.id]})")
            seen[rec.id] = lineno
            records.append(rec)
    if util.debugging:
        util.print_debug(f"manifest {path}: {len(records)} records")
    return Dataset(records, os.path.dirname(os.path.abspath(path)))


def manifest_text(ds):
    """Render ds as manifest CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_FIELDS)
    for rec in ds.records:
        writer.writerow([rec.id, rec.image_path, rec.label, rec.patient_id, rec.split])
    return buf.getvalue()


def write_manifest(ds, path):
    """Write ds back to a manifest CSV."""
    util.write_out(path, manifest_text(ds))


class SplitReport(object):
    """Outcome of the patient-level leakage check."""

    def __init__(self, leaks, n_patients, n_records):
        """Keep the leaking patients and their splits."""
        self.leaks = leaks
        self.n_patients = n_patients
        self.n_records = n_records

    @property
    def passed(self):
        return not self.leaks

    def to_text(self):
        if self.passed:
            return f"PASS: {self.n_patients} patients in {self.n_records} records, each in a single split"
        lines = [f"FAIL: {len(self.leaks)} of {self.n_patients} patients appear in more than one split"]
        for patient, splits in self.leaks.items():
            lines.append(f"  {patient}:{{{','.join(splits)}}}")
        return "\n".join(lines)

    def to_dict(self):
        return OrderedDict([
            ("status", "PASS" if self.passed else "FAIL"),
            ("n_patients", self.n_patients),
            ("n_records", self.n_records),
            ("leaks", OrderedDict((p, list(s)) for p, s in self.leaks.items())),
        ])

    def to_json(self):
        return util.canonical_json(self.to_dict())


def validate_splits(ds):
    """Check that every patient falls in exactly one split."""
    splits_of = {}
    for rec in ds.records:
        splits_of.setdefault(rec.patient_id, set()).add(rec.split)
    leaks = OrderedDict()
    for patient in sorted(splits_of):
        if len(splits_of[patient]) > 1:
            leaks[patient] = [s for s in SPLITS if s in splits_of[patient]]
    return SplitReport(leaks, len(splits_of), len(ds.records))


def apply_augmentation(img, angle_deg=0.0, flip_h=False, flip_v=False, shift_x=0.0, shift_y=0.0):
    """Flip, then rotate about the center and translate by (shift_x, shift_y) pixels.

    Resampling is bilinear with reflected borders.
    """
    arr = image.as_array(img)
    if flip_h:
        arr = arr[:, ::-1]
    if flip_v:
        arr = arr[::-1, :]
    if angle_deg == 0.0 and shift_x == 0.0 and shift_y == 0.0:
        return image.GrayImage(arr)

    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    # output (row, col) -> input (row, col): inverse rotation, then inverse shift
    matrix = np.array([[cos_t, sin_t], [-sin_t, cos_t]])
    center = np.array([(arr.shape[0] - 1) / 2.0, (arr.shape[1] - 1) / 2.0])
    shift = np.array([shift_y, shift_x])
    offset = center - matrix @ (center + shift)
    out = ndimage.affine_transform(arr, matrix, offset=offset, order=1, mode="reflect")
    return image.clip01(out)


def augment(img, cfg, item_seed=None):
    """Randomly rotate, flip and translate a training slice.

    item_seed, when given, overrides cfg.seed.
    """
    rng = dosesim.derive_rng(cfg.seed if item_seed is None else item_seed, dosesim.STAGE_AUGMENT)
    angle = float(rng.uniform(-cfg.rotate_deg_max, cfg.rotate_deg_max))
    flip_h = bool(rng.random() < cfg.flip_h_prob)
    flip_v = bool(rng.random() < cfg.flip_v_prob)
    tx = float(rng.uniform(-cfg.translate_frac_max, cfg.translate_frac_max))
    ty = float(rng.uniform(-cfg.translate_frac_max, cfg.translate_frac_max))
    arr = image.as_array(img)
    return apply_augmentation(img, angle, flip_h, flip_v, tx * arr.shape[1], ty * arr.shape[0])
