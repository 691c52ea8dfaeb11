#!/bin/true
#
# report.py - part of ctstress
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
# Per-condition metrics reports and their CSV, JSON and SVG renderings.
#

import json
import math
from collections import OrderedDict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

import clfmetrics  # noqa: E402
import util  # noqa: E402
from util import INFINITE, UNDEFINED, ValidationError, is_marker  # noqa: E402

FORMATS = ("csv", "json", "svg")
REPORT_FORMAT_VERSION = 1
DELTA_METRICS = ("auc", "accuracy")
PLOT_METRICS = {"dose": ("accuracy", "auc"), "severity": ("accuracy", "auc")}


def encode(obj):
    """Turn report content into plain JSON values, markers included."""
    if is_marker(obj):
        return obj.json_value
    if hasattr(obj, "to_dict"):
        return encode(obj.to_dict())
    if isinstance(obj, dict):
        return OrderedDict((str(k), encode(v)) for k, v in obj.items())
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, float):
        if math.isnan(obj):
            return UNDEFINED.json_value
        if math.isinf(obj):
            if obj < 0:
                raise ValidationError("negative infinity cannot be stored in a report")
            return INFINITE.json_value
    if hasattr(obj, "item"):
        # numpy scalar
        return encode(obj.item())
    return obj


def decode(obj):
    """Inverse of encode: null becomes UNDEFINED, "+inf" becomes INFINITE."""
    if isinstance(obj, dict):
        return OrderedDict((k, decode(v)) for k, v in obj.items())
    if isinstance(obj, list):
        return [decode(v) for v in obj]
    return util.from_json_value(obj)


def provenance(conf, **extra):
    """Self-description embedded in every report."""
    prov = OrderedDict([
        ("config_hash", conf.config_hash()),
        ("seeds", list(conf.seeds)),
        ("severity_table", conf.severity_table()),
        ("tool_version", util.VERSION),
    ])
    prov.update(extra)
    return prov


def make_row(condition, kind, n, clf=None, iq=None, level=None, **extra):
    """Build one report row; condition and sample count are mandatory."""
    if not condition:
        raise ValidationError("report row needs a condition tag")
    if not isinstance(n, int) or n < 0:
        raise ValidationError(f"{condition}: sample count must be a non-negative integer")
    row = OrderedDict([("condition", condition), ("kind", kind), ("n", n)])
    if level is not None:
        row["level"] = level
    if iq is not None:
        row["iq"] = iq
    row["clf"] = clf if clf is not None else OrderedDict()
    row.update(extra)
    return decode(encode(row))


def metric_point(clf, name):
    """Point value of a metric entry, whether a MetricWithCI or a RunSummary."""
    candidates = [name, "auc_delong"] if name == "auc" else [name]
    for key in candidates:
        entry = clf.get(key)
        if entry is None:
            continue
        if "point" in entry:
            return entry["point"]
        return entry["mean"]
    return UNDEFINED


class MetricsReport(object):
    """Ordered per-condition rows plus provenance."""

    def __init__(self, provenance, rows=None, baseline_condition=None):
        """Start a report; rows may be added later."""
        self.provenance = decode(encode(provenance))
        self.rows = []
        self.baseline_condition = baseline_condition
        for row in rows or []:
            self.add_row(row)

    def add_row(self, row):
        if "condition" not in row or "n" not in row:
            raise ValidationError("report rows carry a condition tag and a sample count")
        if any(r["condition"] == row["condition"] for r in self.rows):
            raise ValidationError(f"duplicate report condition {row['condition']!r}")
        self.rows.append(row)

    def row(self, condition):
        for r in self.rows:
            if r["condition"] == condition:
                return r
        raise KeyError(condition)

    def compute_deltas(self, baseline_condition, metrics=DELTA_METRICS):
        """Attach corrupted-minus-baseline deltas to every other row."""
        base = self.row(baseline_condition)
        self.baseline_condition = baseline_condition
        for r in self.rows:
            if r is base:
                continue
            deltas = OrderedDict()
            for name in metrics:
                try:
                    deltas[name] = clfmetrics.robustness_delta(metric_point(r["clf"], name),
                                                               metric_point(base["clf"], name))
                except util.UndefinedMetricError:
                    deltas[name] = UNDEFINED
            r["deltas"] = deltas

    def to_dict(self):
        doc = OrderedDict([
            ("format_version", REPORT_FORMAT_VERSION),
            ("provenance", self.provenance),
            ("rows", self.rows),
        ])
        if self.baseline_condition is not None:
            doc["baseline_condition"] = self.baseline_condition
        return encode(doc)

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format_version") != REPORT_FORMAT_VERSION:
            raise ValidationError(f"unsupported report format {doc.get('format_version')!r}")
        return cls(doc["provenance"], [decode(r) for r in doc["rows"]], doc.get("baseline_condition"))

    def __eq__(self, other):
        if not isinstance(other, MetricsReport):
            return NotImplemented
        return util.canonical_json(self.to_dict()) == util.canonical_json(other.to_dict())

    def to_json(self):
        # keys keep row order; CSV columns follow it
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def flat_rows(self):
        """One flat record per row: nested keys joined with underscores."""
        flat = []
        for r in self.rows:
            record = OrderedDict()
            for key in ("condition", "kind", "level", "n"):
                if key in r:
                    record[key] = r[key]
            for section in ("iq", "clf", "deltas", "paired"):
                _flatten(r.get(section, {}), section, record)
            flat.append(record)
        return flat

    def to_csv(self):
        records = [OrderedDict((k, util.to_text_value(v)) for k, v in rec.items()) for rec in self.flat_rows()]
        columns = []
        for rec in records:
            columns.extend(k for k in rec if k not in columns)
        frame = pd.DataFrame(records, columns=columns).fillna("")
        return frame.to_csv(index=False, lineterminator="\n")


def _flatten(value, prefix, out):
    if isinstance(value, dict):
        for key, sub in value.items():
            if key == "method":
                continue
            _flatten(sub, f"{prefix}_{key}", out)
    elif not isinstance(value, list):
        out[prefix] = value


def read_report(path):
    with util.open_auto(path, "r") as fp:
        return MetricsReport.from_dict(json.load(fp, object_pairs_hook=OrderedDict))


def write_json(report, path):
    util.write_out(path, report.to_json())


def write_csv(report, path):
    util.write_out(path, report.to_csv())


def _plot_value(value):
    if is_marker(value) or value is None:
        return math.nan
    return float(value)


def severity_doses(report, levels):
    """Dose factor of each severity level per the report's schedule, or None."""
    table = report.provenance.get("severity_table") or {}
    rows = [table.get(str(level)) for level in levels]
    if any(row is None or "dose" not in row for row in rows):
        return None
    return [row["dose"] for row in rows]


def write_svg(report, path):
    """Line charts of accuracy and AUC against dose and severity.

    Every series is a single line whose SVG group id is series-<metric>,
    with the condition kind added when both kinds are drawn. Severity charts
    carry a top axis giving each level's dose factor.
    """
    kinds = [k for k in PLOT_METRICS if any(r["kind"] == k and "level" in r for r in report.rows)]
    if not kinds:
        raise ValidationError("report has no dose or severity rows to plot")
    plt.rcParams["svg.hashsalt"] = "ctstress"
    fig, axes = plt.subplots(1, len(kinds), figsize=(5.0 * len(kinds), 4.0), squeeze=False)
    for ax, kind in zip(axes[0], kinds):
        rows = sorted((r for r in report.rows if r["kind"] == kind and "level" in r), key=lambda r: r["level"])
        xs = [r["level"] for r in rows]
        for metric in PLOT_METRICS[kind]:
            ys = [_plot_value(metric_point(r["clf"], metric)) for r in rows]
            line, = ax.plot(xs, ys, marker="o", label=metric)
            line.set_gid(f"series-{metric}" if len(kinds) == 1 else f"series-{kind}-{metric}")
        if kind == "dose":
            ax.set_xscale("log")
            ax.set_xlabel("dose factor")
        else:
            ax.set_xlabel("severity")
            ax.set_xticks(xs)
            doses = severity_doses(report, xs)
            if doses is not None:
                top = ax.secondary_xaxis("top")
                top.set_xticks(xs)
                top.set_xticklabels([f"{lam:g}" for lam in doses])
                top.set_xlabel("dose factor")
                top.set_gid("axis-severity-dose")
        ax.set_ylim(0.0, 1.0)
        ax.set_ylabel("metric")
        ax.legend()
    fig.tight_layout()
    util.makedirs_for(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


WRITERS = {"csv": write_csv, "json": write_json, "svg": write_svg}


def write_report(report, path, fmt):
    if fmt not in WRITERS:
        raise ValidationError(f"unknown report format {fmt!r}, expected one of {', '.join(FORMATS)}")
    WRITERS[fmt](report, path)
