#!/bin/true
#
# baseline.py - part of ctstress
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
# Classical denoise-then-classify baseline: a pluggable denoiser, intensity
# histogram features and a logistic regression trained by full-batch
# gradient descent.
#

import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import ndimage
from skimage.restoration import denoise_nl_means

import artifacts
import clfmetrics
import dataset
import dosesim
import image
import iqmetrics
import util
from util import TrainingDivergedError, ValidationError

HIST_BINS = 32
PERCENTILES = (10.0, 50.0, 90.0)
N_FEATURES = HIST_BINS + 2 + len(PERCENTILES)
FEATURE_SCHEMA = f"hist{HIST_BINS}-range01+mean+sd+p10+p50+p90:v1"
MODEL_FORMAT_VERSION = 1

DENOISERS = ("identity", "gaussian", "nlm")


@dataclass(frozen=True)
class DenoiserSpec:
    kind: str = "identity"
    sigma: float = 1.0
    patch: int = 5
    window: int = 13
    h: float = 0.05

    def __post_init__(self):
        if self.kind not in DENOISERS:
            raise ValidationError(f"unknown denoiser {self.kind!r}, expected one of {', '.join(DENOISERS)}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ValidationError(f"gaussian sigma must be positive, got {self.sigma}")
        if self.kind == "nlm":
            if self.patch < 1 or self.patch % 2 == 0 or self.window < 1 or self.window % 2 == 0:
                raise ValidationError("nlm patch and window sizes must be odd positive integers")
            if self.patch > self.window:
                raise ValidationError(f"nlm patch {self.patch} is larger than its search window {self.window}")
            if not self.h > 0:
                raise ValidationError(f"nlm h must be positive, got {self.h}")

    def to_dict(self):
        if self.kind == "gaussian":
            return {"kind": self.kind, "sigma": self.sigma}
        if self.kind == "nlm":
            return {"kind": self.kind, "patch": self.patch, "window": self.window, "h": self.h}
        return {"kind": self.kind}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-3
    seed: int = 0
    batch_size: Optional[int] = None

    def to_dict(self):
        return {"learning_rate": self.learning_rate, "epochs": self.epochs, "l2": self.l2,
                "seed": self.seed, "batch_size": self.batch_size}


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    l2: float
    train_meta: dict = field(default_factory=dict)
    loss_history: List[float] = field(default_factory=list, compare=False)


def denoise(img, spec):
    """Run the denoiser named by spec over img."""
    if spec.kind == "identity":
        return img
    arr = image.as_array(img)
    if spec.kind == "gaussian":
        out = ndimage.gaussian_filter(arr, sigma=spec.sigma, mode="reflect")
    else:
        if spec.window > arr.shape[0] or spec.window > arr.shape[1]:
            raise ValidationError(f"nlm window {spec.window} is larger than image {arr.shape[1]}x{arr.shape[0]}")
        # non fast mode weights patch distances with a Gaussian kernel
        out = denoise_nl_means(arr, patch_size=spec.patch, patch_distance=(spec.window - 1) // 2,
                               h=spec.h, fast_mode=False, channel_axis=None)
    return image.clip01(out)


def extract_features(img):
    """Intensity histogram (32 bins on [0,1]) plus mean, SD and percentiles."""
    arr = image.as_array(img).ravel()
    hist, _ = np.histogram(arr, bins=HIST_BINS, range=(0.0, 1.0))
    hist = hist / arr.size
    summary = [arr.mean(), arr.std()] + list(np.percentile(arr, PERCENTILES))
    return np.concatenate([hist, np.array(summary, dtype=np.float64)])


def sigmoid(z):
    """Numerically stable logistic function."""
    return np.exp(-np.logaddexp(0.0, -z))


def logreg_loss_and_grad(weights, bias, X, y, l2):
    """Mean binary cross-entropy plus l2/2 * |w|^2, and its gradient."""
    z = X @ weights + bias
    # log(1 + e^z) - y z, written without overflow
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(weights, weights))
    residual = sigmoid(z) - y
    grad_w = X.T @ residual / len(y) + l2 * weights
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


def _standardize(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    return (X - mean) / scale, mean, scale


def train_logreg(features, config=TrainConfig()):
    """Fit a logistic regression by gradient descent from zero weights.

    features is a list of (feature vector, label) pairs. Inputs are
    standardized for the optimisation and the scaling is folded back into
    the returned weights, so predict_logreg works on raw features.
    """
    if len(features) < 2:
        raise ValidationError("logistic regression needs at least two training examples")
    X = np.array([np.asarray(f, dtype=np.float64) for f, _ in features])
    y = np.array([int(label) for _, label in features], dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValidationError("training features contain non-finite values")
    if y.min() == y.max():
        raise ValidationError("training set contains a single class")

    Xs, mean, scale = _standardize(X)
    weights = np.zeros(X.shape[1])
    bias = 0.0
    rng = dosesim.derive_rng(dosesim.SeedSpec(config.seed), dosesim.STAGE_SHUFFLE)
    history = []
    for epoch in range(config.epochs):
        if config.batch_size:
            order = rng.permutation(len(y))
            batches = [order[i:i + config.batch_size] for i in range(0, len(y), config.batch_size)]
        else:
            batches = [slice(None)]
        for batch in batches:
            _, grad_w, grad_b = logreg_loss_and_grad(weights, bias, Xs[batch], y[batch], config.l2)
            weights = weights - config.learning_rate * grad_w
            bias = bias - config.learning_rate * grad_b
        loss, _, _ = logreg_loss_and_grad(weights, bias, Xs, y, config.l2)
        if not math.isfinite(loss) or not np.all(np.isfinite(weights)):
            raise TrainingDivergedError(epoch, loss)
        history.append(loss)

    if util.debugging:
        util.print_debug(f"logreg: {config.epochs} epochs, final loss {history[-1]:.6f}" if history else "logreg: no epochs")
    raw_weights = weights / scale
    raw_bias = float(bias - np.dot(raw_weights, mean))
    return LogRegModel(raw_weights, raw_bias, config.l2, config.to_dict(), history)


def predict_logreg(model, features):
    """Probability of the positive class, sigmoid(w.x + b)."""
    z = float(np.dot(model.weights, np.asarray(features, dtype=np.float64)) + model.bias)
    return float(sigmoid(z))


def model_to_dict(model):
    return OrderedDict([
        ("format_version", MODEL_FORMAT_VERSION),
        ("feature_schema", util.get_sha1sum_text(FEATURE_SCHEMA)),
        ("weights", [float(w) for w in model.weights]),
        ("bias", model.bias),
        ("l2", model.l2),
        ("train_meta", model.train_meta),
    ])


def save_model(model, path):
    """Write model as a versioned JSON document."""
    util.write_out(path, util.canonical_json(model_to_dict(model)))


def load_model(path):
    """Read a model written by save_model."""
    with util.open_auto(path, "r") as fp:
        doc = json.load(fp)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported model format {doc.get('format_version')!r}")
    if doc.get("feature_schema") != util.get_sha1sum_text(FEATURE_SCHEMA):
        raise ValidationError(f"{path}: model was trained on a different feature schema")
    return LogRegModel(np.array(doc["weights"], dtype=np.float64), float(doc["bias"]), float(doc["l2"]),
                       doc.get("train_meta", {}))


def corrupt(img, corruption, seed):
    """Apply a dose level or a severity to img; None leaves it clean."""
    if corruption is None:
        return img
    if isinstance(corruption, artifacts.Severity):
        return artifacts.apply_severity(img, corruption, seed)
    return dosesim.simulate_low_dose(img, corruption, seed)


@dataclass
class BaselineRun:
    """Test-split predictions of one baseline run and what produced them."""

    predictions: List[clfmetrics.Prediction]
    model: LogRegModel
    iq_corrupted: List[iqmetrics.IQResult]
    iq_denoised: List[iqmetrics.IQResult]


def run_baseline(ds, corruption, denoiser, train_config=TrainConfig(), seed=0, image_size=128,
                 augment_config=None):
    """Corrupt, denoise, featurize, train on train split, score test split.

    Augmentation, when configured, only touches training slices.
    """
    master = dosesim.SeedSpec(seed)
    train_records = ds.split("train")
    test_records = ds.split("test")
    if not test_records:
        raise ValidationError("dataset has no test split")

    def prepare(rec, training):
        item_seed = master.for_item(rec.id)
        img = ds.load(rec, image_size)
        if training and augment_config is not None:
            img = dataset.augment(img, augment_config, item_seed)
        noisy = corrupt(img, corruption, item_seed)
        return img, noisy, denoise(noisy, denoiser)

    training = []
    for rec in train_records:
        _, _, cleaned = prepare(rec, True)
        training.append((extract_features(cleaned), rec.label))
    config = TrainConfig(train_config.learning_rate, train_config.epochs, train_config.l2, seed,
                         train_config.batch_size)
    model = train_logreg(training, config)

    predictions = []
    iq_corrupted = []
    iq_denoised = []
    for rec in test_records:
        clean, noisy, cleaned = prepare(rec, False)
        score = predict_logreg(model, extract_features(cleaned))
        predictions.append(clfmetrics.Prediction(rec.id, score, rec.label, rec.patient_id))
        if min(clean.shape) >= iqmetrics.SSIM_WINDOW:
            iq_corrupted.append(iqmetrics.evaluate(clean, noisy))
            iq_denoised.append(iqmetrics.evaluate(clean, cleaned))
    return BaselineRun(predictions, model, iq_corrupted, iq_denoised)
