#!/bin/true
#
# clfmetrics.py - part of ctstress
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
# Classification metrics and their uncertainty: confusion counts at a
# threshold, rank AUC with DeLong and bootstrap intervals, calibration
# error and robustness deltas.
#

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import stats
from sklearn.metrics import roc_curve

import dosesim
from util import UNDEFINED, Marker, UndefinedMetricError, ValidationError, is_marker

DEFAULT_THRESHOLD = 0.5
DEFAULT_BOOTSTRAP_N = 2000
DEFAULT_LEVEL = 0.95
DEFAULT_ECE_BINS = 15

DISCRETE_METRICS = ("accuracy", "sensitivity", "specificity", "precision", "f1")


@dataclass(frozen=True)
class Prediction:
    id: str
    score: float
    label: int
    patient_id: Optional[str] = None

    def __post_init__(self):
        if not (isinstance(self.score, (int, float)) and 0.0 <= self.score <= 1.0):
            raise ValidationError(f"{self.id}: score must lie in [0,1], got {self.score!r}")
        if self.label not in (0, 1):
            raise ValidationError(f"{self.id}: label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricWithCI:
    """Point estimate with an optional confidence interval."""

    point: Union[float, Marker]
    ci_low: Union[float, Marker] = UNDEFINED
    ci_high: Union[float, Marker] = UNDEFINED
    method: str = "none"
    n_resamples_used: int = 0

    def to_dict(self):
        return {"point": self.point, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "method": self.method, "n_resamples_used": self.n_resamples_used}


@dataclass(frozen=True)
class RunSummary:
    """Mean and unbiased SD of a metric across training seeds."""

    mean: Union[float, Marker]
    sd: Union[float, Marker]
    n: int

    def to_dict(self):
        return {"mean": self.mean, "sd": self.sd, "n": self.n}


class PredictionSet(object):
    """Column view of (id, score, label) triples.

    Every metric accepts either a list of Prediction or a PredictionSet; the
    bootstrap resamples PredictionSets so resampling stays in numpy.
    """

    def __init__(self, ids, scores, labels, patient_ids=None):
        """Hold parallel columns."""
        self.ids = list(ids)
        self.scores = np.asarray(scores, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.patient_ids = list(patient_ids) if patient_ids is not None else [None] * len(self.ids)

    @classmethod
    def from_predictions(cls, preds):
        if isinstance(preds, cls):
            return preds
        preds = list(preds)
        return cls([p.id for p in preds], [p.score for p in preds], [p.label for p in preds],
                   [p.patient_id for p in preds])

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        for i in range(len(self.ids)):
            yield Prediction(self.ids[i], float(self.scores[i]), int(self.labels[i]), self.patient_ids[i])

    def take(self, idx):
        return PredictionSet([self.ids[i] for i in idx], self.scores[idx], self.labels[idx],
                             [self.patient_ids[i] for i in idx])


def _arrays(preds):
    if isinstance(preds, PredictionSet):
        return preds.scores, preds.labels
    scores = np.array([p.score for p in preds], dtype=np.float64)
    labels = np.array([p.label for p in preds], dtype=np.int64)
    return scores, labels


def confusion(preds, threshold=DEFAULT_THRESHOLD):
    """Count outcomes; a score at or above threshold is a positive call."""
    if not preds:
        raise ValidationError("cannot build a confusion matrix from an empty prediction set")
    scores, labels = _arrays(preds)
    called = scores >= threshold
    positive = labels == 1
    return ConfusionCounts(tp=int(np.sum(called & positive)),
                           tn=int(np.sum(~called & ~positive)),
                           fp=int(np.sum(called & ~positive)),
                           fn=int(np.sum(~called & positive)))


def _ratio(num, den):
    if den == 0:
        return UNDEFINED
    return num / den


def threshold_metrics(c):
    """Accuracy, sensitivity, specificity, precision and F1 from counts."""
    if c.total <= 0:
        raise ValidationError("confusion counts are empty")
    return OrderedDict([
        ("accuracy", _ratio(c.tp + c.tn, c.total)),
        ("sensitivity", _ratio(c.tp, c.tp + c.fn)),
        ("specificity", _ratio(c.tn, c.tn + c.fp)),
        ("precision", _ratio(c.tp, c.tp + c.fp)),
        ("f1", _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)),
    ])


def _split_scores(preds):
    scores, labels = _arrays(preds)
    return scores[labels == 1], scores[labels == 0]


def roc_auc(preds):
    """Mann-Whitney AUC with average ranks for ties."""
    pos, neg = _split_scores(preds)
    if len(pos) == 0 or len(neg) == 0:
        raise UndefinedMetricError("AUC is undefined unless both classes are present")
    ranks = stats.rankdata(np.concatenate([pos, neg]))
    u = ranks[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def _midrank_components(pos, neg):
    m, n = len(pos), len(neg)
    tx = stats.rankdata(pos)
    ty = stats.rankdata(neg)
    tz = stats.rankdata(np.concatenate([pos, neg]))
    auc = (tz[:m].sum() - m * (m + 1) / 2.0) / (m * n)
    v10 = (tz[:m] - tx) / n
    v01 = 1.0 - (tz[m:] - ty) / m
    return float(auc), v10, v01


def delong_components(preds):
    """Return (auc, V10, V01), the DeLong structural components.

    V10[i] is the fraction of negatives positive i outscores, V01[j] the
    fraction of positives that outscore negative j (ties count one half).
    """
    pos, neg = _split_scores(preds)
    if len(pos) < 2 or len(neg) < 2:
        raise UndefinedMetricError("DeLong variance needs at least two positives and two negatives")
    return _midrank_components(pos, neg)


def _z(level):
    return float(stats.norm.ppf(1.0 - (1.0 - level) / 2.0))


def delong_auc_ci(preds, level=DEFAULT_LEVEL):
    """AUC with a DeLong normal-approximation interval, truncated to [0,1]."""
    auc, v10, v01 = delong_components(preds)
    var = np.var(v10, ddof=1) / len(v10) + np.var(v01, ddof=1) / len(v01)
    se = math.sqrt(max(var, 0.0))
    half = _z(level) * se
    return MetricWithCI(auc, max(0.0, auc - half), min(1.0, auc + half), "delong", 0)


def delong_se(preds):
    """Standard error of the AUC under DeLong's estimator."""
    _, v10, v01 = delong_components(preds)
    return math.sqrt(np.var(v10, ddof=1) / len(v10) + np.var(v01, ddof=1) / len(v01))


def delong_paired_test(preds_a, preds_b):
    """Compare the AUCs of two pipelines scored on the same test set."""
    by_id_b = {p.id: p for p in preds_b}
    if len(by_id_b) != len(preds_b) or set(by_id_b) != {p.id for p in preds_a}:
        raise ValidationError("paired comparison needs both prediction sets to cover the same ids")
    ordered_b = []
    for p in preds_a:
        q = by_id_b[p.id]
        if q.label != p.label:
            raise ValidationError(f"{p.id}: labels differ between the compared prediction sets")
        ordered_b.append(q)

    pos_a, neg_a = _split_scores(preds_a)
    pos_b, neg_b = _split_scores(ordered_b)
    if len(pos_a) < 2 or len(neg_a) < 2:
        raise UndefinedMetricError("DeLong variance needs at least two positives and two negatives")
    auc_a, v10_a, v01_a = _midrank_components(pos_a, neg_a)
    auc_b, v10_b, v01_b = _midrank_components(pos_b, neg_b)
    s10 = np.cov(np.vstack([v10_a, v10_b]))
    s01 = np.cov(np.vstack([v01_a, v01_b]))
    cov = s10 / len(v10_a) + s01 / len(v01_a)
    var = cov[0, 0] + cov[1, 1] - 2.0 * cov[0, 1]
    delta = auc_a - auc_b
    if var <= 0.0:
        # identical component vectors: no difference, or no usable variance
        if delta == 0.0:
            z, p_value = 0.0, 1.0
        else:
            z, p_value = UNDEFINED, UNDEFINED
    else:
        z = delta / math.sqrt(var)
        p_value = float(2.0 * stats.norm.sf(abs(z)))
    return OrderedDict([("auc_a", auc_a), ("auc_b", auc_b), ("delta", delta), ("z", z), ("p_value", p_value)])


def bootstrap_ci(metric, preds, n_resamples=DEFAULT_BOOTSTRAP_N, level=DEFAULT_LEVEL, seed=None):
    """Percentile bootstrap interval of metric over image-level resamples.

    metric maps a prediction list to a number, UNDEFINED, or raises
    UndefinedMetricError; such resamples are skipped.
    """
    if not preds:
        raise ValidationError("cannot bootstrap an empty prediction set")
    if seed is None:
        seed = dosesim.SeedSpec(0)
    pset = PredictionSet.from_predictions(preds)
    point = metric(pset)
    rng = dosesim.derive_rng(seed, dosesim.STAGE_BOOTSTRAP)
    n = len(pset)
    values = []
    for _ in range(n_resamples):
        idx = rng.integers(0, n, size=n)
        try:
            value = metric(pset.take(idx))
        except UndefinedMetricError:
            continue
        if is_marker(value):
            continue
        values.append(value)
    if not values:
        raise UndefinedMetricError("metric was undefined on every bootstrap resample")
    tail = (1.0 - level) / 2.0 * 100.0
    low, high = np.percentile(values, [tail, 100.0 - tail])
    return MetricWithCI(point, float(low), float(high), "bootstrap", len(values))


def discrete_metric(name, threshold=DEFAULT_THRESHOLD):
    """Return a metric function computing one threshold metric."""
    def metric(preds):
        return threshold_metrics(confusion(preds, threshold))[name]

    metric.__name__ = name
    return metric


def calibration_bins(preds, n_bins=DEFAULT_ECE_BINS):
    """Reliability data on equal-width bins (left closed, last bin closed)."""
    if n_bins < 1:
        raise ValidationError(f"need at least one calibration bin, got {n_bins}")
    if not preds:
        raise ValidationError("cannot calibrate an empty prediction set")
    scores, labels = _arrays(preds)
    idx = np.minimum(np.floor(scores * n_bins).astype(np.int64), n_bins - 1)
    bins = []
    for b in range(n_bins):
        mask = idx == b
        count = int(mask.sum())
        bins.append(OrderedDict([
            ("lower", b / n_bins),
            ("upper", (b + 1) / n_bins),
            ("count", count),
            ("mean_score", float(scores[mask].mean()) if count else UNDEFINED),
            ("mean_label", float(labels[mask].mean()) if count else UNDEFINED),
        ]))
    return bins


def ece(preds, n_bins=DEFAULT_ECE_BINS):
    """Expected calibration error on the positive-class probability."""
    total = len(preds)
    error = 0.0
    for b in calibration_bins(preds, n_bins):
        if b["count"]:
            error += b["count"] / total * abs(b["mean_label"] - b["mean_score"])
    return error


def roc_points(preds):
    """False/true positive rates along the ROC curve."""
    scores, labels = _arrays(preds)
    if labels.size == 0 or labels.min() == labels.max():
        raise UndefinedMetricError("ROC curve is undefined unless both classes are present")
    fpr, tpr, thresholds = roc_curve(labels, scores)
    # sklearn reports an inf threshold for the (0, 0) corner
    thresholds = np.minimum(thresholds, 1.0)
    return fpr.tolist(), tpr.tolist(), thresholds.tolist()


def robustness_delta(corrupt, baseline):
    """Corrupted-condition metric minus baseline metric."""
    if is_marker(corrupt) or is_marker(baseline) or corrupt is None or baseline is None:
        raise UndefinedMetricError("robustness delta needs two defined values")
    return corrupt - baseline


def aggregate_runs(per_run):
    """Mean and unbiased SD over runs; undefined runs are left out."""
    if not per_run:
        raise ValidationError("cannot aggregate zero runs")
    values = [v for v in per_run if not is_marker(v) and v is not None]
    if not values:
        return RunSummary(UNDEFINED, UNDEFINED, 0)
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else UNDEFINED
    return RunSummary(mean, sd, len(values))


def aggregate_records(records):
    """Aggregate a list of {metric: value} records metric by metric."""
    if not records:
        raise ValidationError("cannot aggregate zero runs")
    out = OrderedDict()
    for key in records[0]:
        out[key] = aggregate_runs([r[key] for r in records])
    return out


def pool_by_patient(preds, rule="max"):
    """Collapse slices to one prediction per patient.

    The pooled score is the max or mean slice score; the pooled label is
    positive if any slice of the patient is positive.
    """
    if rule not in ("max", "mean"):
        raise ValidationError(f"unknown pooling rule {rule!r}")
    groups = OrderedDict()
    for p in preds:
        if p.patient_id is None:
            raise ValidationError(f"{p.id}: patient pooling needs a patient id")
        groups.setdefault(p.patient_id, []).append(p)
    pooled = []
    for patient in sorted(groups):
        members = groups[patient]
        scores = [p.score for p in members]
        score = max(scores) if rule == "max" else float(np.mean(scores))
        label = max(p.label for p in members)
        pooled.append(Prediction(patient, score, label, patient))
    return pooled


def summarize(preds, threshold=DEFAULT_THRESHOLD, bootstrap_n=DEFAULT_BOOTSTRAP_N, level=DEFAULT_LEVEL,
              ece_bins=DEFAULT_ECE_BINS, seed=None):
    """Full metric suite for one prediction set.

    Discrete metrics carry bootstrap intervals, AUC carries both a DeLong
    and a bootstrap interval.
    """
    preds = PredictionSet.from_predictions(preds)
    out = OrderedDict()
    counts = confusion(preds, threshold)
    out["confusion"] = OrderedDict([("tp", counts.tp), ("tn", counts.tn), ("fp", counts.fp), ("fn", counts.fn)])
    points = threshold_metrics(counts)
    for name in DISCRETE_METRICS:
        if bootstrap_n > 0:
            try:
                out[name] = bootstrap_ci(discrete_metric(name, threshold), preds, bootstrap_n, level, seed)
                continue
            except UndefinedMetricError:
                pass
        out[name] = MetricWithCI(points[name])

    try:
        out["auc_delong"] = delong_auc_ci(preds, level)
    except UndefinedMetricError:
        try:
            out["auc_delong"] = MetricWithCI(roc_auc(preds))
        except UndefinedMetricError:
            out["auc_delong"] = MetricWithCI(UNDEFINED)
    try:
        if bootstrap_n <= 0:
            raise UndefinedMetricError("bootstrap disabled")
        out["auc_bootstrap"] = bootstrap_ci(roc_auc, preds, bootstrap_n, level, seed)
    except UndefinedMetricError:
        out["auc_bootstrap"] = MetricWithCI(out["auc_delong"].point)
    out["ece"] = MetricWithCI(ece(preds, ece_bins))
    return out
