#!/bin/true
#
# harness.py - part of ctstress
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
# Subcommand implementations: corrupt, eval, stress, baseline, report and
# split-check. Every command takes a validated config.Config.
#

import csv
import io
import math
import os
import re
from collections import OrderedDict

import baseline
import clfmetrics
import dataset
import dosesim
import image
import iqmetrics
import report
import util
from util import UndefinedMetricError, ValidationError

SCORE_FIELDS = ["id", "score"]
CLEAN_CONDITION = "clean"
PATIENT_SUFFIX = ":patient"

_condition_re = re.compile(r"^(dose|severity)_([0-9.eE+-]+)$")


def dose_tag(dose):
    return f"dose_{dose.tag}"


def severity_tag(level):
    return f"severity_{level}"


def parse_condition(tag):
    """Return (kind, level) of a condition tag; other tags have no level."""
    match = _condition_re.match(tag)
    if not match:
        return "clean" if tag == CLEAN_CONDITION else "other", None
    kind, value = match.groups()
    try:
        level = int(value) if kind == "severity" else float(value)
    except ValueError:
        return "other", None
    return kind, level


def conditions(conf, mode=None):
    """Condition tags and their corruptions for a corrupt or baseline run."""
    mode = mode or conf.condition_mode
    if mode == "dose":
        return [(dose_tag(d), d) for d in conf.dose_levels()]
    if mode == "severity":
        return [(severity_tag(s), conf.severity(s)) for s in conf.severities]
    raise ValidationError(f"unknown condition mode {mode!r}")


def load_checked_dataset(path):
    """Load a manifest and refuse it when patients leak across splits."""
    ds = dataset.load_manifest(path)
    split_report = dataset.validate_splits(ds)
    if not split_report.passed:
        raise ValidationError(split_report.to_text())
    return ds


def _file_name(rec):
    if not rec.id or "/" in rec.id or "\\" in rec.id or rec.id in (".", ".."):
        raise ValidationError(f"id {rec.id!r} cannot be used as a file name")
    return f"{rec.id}.png"


def cmd_corrupt(conf, manifest_path, out_dir, mode=None):
    """Materialize corrupted copies of every manifest image.

    Writes <out>/<condition>/seed_<s>/<id>.png, provenance.json with the
    parameters that produced the tree and report.json with per-condition
    image quality of the test split. Returns (files written, report).
    """
    ds = dataset.load_manifest(manifest_path)
    mode = mode or conf.condition_mode
    plan = conditions(conf, mode)
    rows = []
    written = 0
    clean = OrderedDict((rec.id, ds.load(rec, conf.image_size)) for rec in ds.records)
    for tag, corruption in plan:
        iq_results = []
        for seed in conf.seeds:
            master = dosesim.SeedSpec(seed)
            for rec in ds.records:
                noisy = baseline.corrupt(clean[rec.id], corruption, master.for_item(rec.id))
                image.save_image(noisy, os.path.join(out_dir, tag, f"seed_{seed}", _file_name(rec)))
                written += 1
                if rec.split == "test" and min(noisy.shape) >= iqmetrics.SSIM_WINDOW:
                    iq_results.append(iqmetrics.evaluate(clean[rec.id], noisy))
        kind, level = parse_condition(tag)
        rows.append(report.make_row(tag, kind, len(iq_results), iq=iqmetrics.summarize(iq_results), level=level))
        util.print_info(f"{tag}: {len(conf.seeds) * len(ds)} images written")

    prov = report.provenance(conf, mode=mode, image_size=conf.image_size,
                             manifest_sha1=util.get_sha1sum(manifest_path),
                             conditions=[tag for tag, _ in plan], ring=conf.to_dict()["ring"])
    util.write_out(os.path.join(out_dir, "provenance.json"), util.canonical_json(report.encode(prov)))
    corrupt_report = report.MetricsReport(prov, rows)
    report.write_json(corrupt_report, os.path.join(out_dir, "report.json"))
    return written, corrupt_report


def read_scores(path):
    """Read an id,score CSV into an ordered {id: score} map.

    Every problem in the file is collected and raised together.
    """
    scores = OrderedDict()
    problems = []
    duplicates = []
    with util.open_auto(path, "r", newline="") as fp:
        reader = csv.DictReader(fp)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != SCORE_FIELDS:
            raise ValidationError(f"{path}: header must be id,score, got {reader.fieldnames}")
        for row in reader:
            item_id = (row.get("id") or "").strip()
            try:
                score = float(row.get("score"))
            except (TypeError, ValueError):
                problems.append(f"line {reader.line_num}: score {row.get('score')!r} is not a number")
                continue
            if not (math.isfinite(score) and 0.0 <= score <= 1.0):
                problems.append(f"line {reader.line_num}: score {score!r} outside [0,1]")
                continue
            if item_id in scores:
                duplicates.append(item_id)
                continue
            scores[item_id] = score
    if duplicates:
        problems.append(f"duplicate ids: {', '.join(sorted(set(duplicates)))}")
    if problems:
        raise ValidationError(f"{path}: " + "; ".join(problems))
    return scores


def join_scores(ds, scores, origin="scores"):
    """Pair scores with test-split labels; the join must be a bijection."""
    test = ds.split("test")
    if not test:
        raise ValidationError(f"{origin}: manifest has no test split")
    test_ids = {rec.id for rec in test}
    problems = []
    missing = [rec.id for rec in test if rec.id not in scores]
    if missing:
        problems.append(f"missing test ids: {', '.join(missing)}")
    not_test = [i for i in scores if i not in test_ids and i in ds]
    if not_test:
        problems.append(f"ids outside the test split: {', '.join(not_test)}")
    extra = [i for i in scores if i not in ds]
    if extra:
        problems.append(f"unknown ids: {', '.join(extra)}")
    if problems:
        raise ValidationError(f"{origin}: " + "; ".join(problems))
    return [clfmetrics.Prediction(rec.id, scores[rec.id], rec.label, rec.patient_id) for rec in test]


def scores_text(preds):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORE_FIELDS)
    for p in preds:
        writer.writerow([p.id, repr(float(p.score))])
    return buf.getvalue()


def write_scores(preds, path):
    util.write_out(path, scores_text(preds))


def _bootstrap_seed(conf):
    return dosesim.SeedSpec(conf.seeds[0])


def clf_summary(conf, preds):
    return clfmetrics.summarize(preds, conf.threshold, conf.bootstrap_n, conf.ci_level, conf.ece_bins,
                                _bootstrap_seed(conf))


def eval_row(conf, condition, preds, **extra):
    """Full metric row of one prediction set, with ROC and reliability data."""
    kind, level = parse_condition(condition.replace(PATIENT_SUFFIX, ""))
    try:
        fpr, tpr, thresholds = clfmetrics.roc_points(preds)
        extra["roc"] = OrderedDict([("fpr", fpr), ("tpr", tpr), ("thresholds", thresholds)])
    except UndefinedMetricError:
        pass
    extra["calibration"] = clfmetrics.calibration_bins(preds, conf.ece_bins)
    return report.make_row(condition, kind, len(preds), clf=clf_summary(conf, preds), level=level, **extra)


def _add_pooled(conf, rows, condition, preds):
    if conf.patient_pooling == "none":
        return
    pooled = clfmetrics.pool_by_patient(preds, conf.patient_pooling)
    rows.append(eval_row(conf, condition + PATIENT_SUFFIX, pooled, pooling=conf.patient_pooling))


def cmd_eval(conf, scores_path, manifest_path, condition=CLEAN_CONDITION):
    """Score an external model's predictions on the test split."""
    ds = load_checked_dataset(manifest_path)
    preds = join_scores(ds, read_scores(scores_path), scores_path)
    rows = [eval_row(conf, condition, preds)]
    _add_pooled(conf, rows, condition, preds)
    prov = report.provenance(conf, manifest_sha1=util.get_sha1sum(manifest_path))
    return report.MetricsReport(prov, rows)


def parse_level_files(pairs):
    """Turn LEVEL=PATH arguments into an ordered {level: path} map."""
    out = OrderedDict()
    for pair in pairs or []:
        level, sep, path = pair.partition("=")
        if not sep or not path:
            raise ValidationError(f"expected LEVEL=PATH, got {pair!r}")
        try:
            level = int(level)
        except ValueError:
            raise ValidationError(f"severity level {level!r} is not an integer")
        if level in out:
            raise ValidationError(f"severity {level} given twice")
        out[level] = path
    return out


def _check_severity_files(conf, files, what):
    missing = [s for s in conf.severities if s not in files]
    if missing:
        raise ValidationError(f"no {what} score file for severity {', '.join(str(s) for s in missing)}")
    extra = [s for s in files if s not in conf.severities]
    if extra:
        raise ValidationError(f"{what} score file for unconfigured severity {', '.join(str(s) for s in extra)}")


def cmd_stress(conf, manifest_path, baseline_scores, severity_scores, compare_scores=None):
    """Per-severity metrics with robustness deltas against the baseline file.

    With compare_scores, every severity row also carries a paired DeLong
    comparison against the second pipeline at the same severity.
    """
    ds = load_checked_dataset(manifest_path)
    _check_severity_files(conf, severity_scores, "stress")
    if compare_scores is not None:
        _check_severity_files(conf, compare_scores, "comparison")

    base_preds = join_scores(ds, read_scores(baseline_scores), baseline_scores)
    rows = [eval_row(conf, "baseline", base_preds)]
    for level in conf.severities:
        path = severity_scores[level]
        preds = join_scores(ds, read_scores(path), path)
        extra = {}
        if compare_scores is not None:
            other = join_scores(ds, read_scores(compare_scores[level]), compare_scores[level])
            try:
                extra["paired"] = clfmetrics.delong_paired_test(preds, other)
            except UndefinedMetricError as err:
                util.print_warning(f"severity {level}: no paired comparison ({err})")
        rows.append(eval_row(conf, severity_tag(level), preds, **extra))

    prov = report.provenance(conf, manifest_sha1=util.get_sha1sum(manifest_path))
    stress_report = report.MetricsReport(prov, rows)
    stress_report.compute_deltas("baseline")
    return stress_report


def _run_record(conf, preds):
    summary = clfmetrics.summarize(preds, conf.threshold, 0, conf.ci_level, conf.ece_bins)
    record = OrderedDict((name, summary[name].point) for name in clfmetrics.DISCRETE_METRICS)
    record["auc"] = summary["auc_delong"].point
    record["ece"] = summary["ece"].point
    return record


def cmd_baseline(conf, manifest_path, out_dir, mode=None):
    """Run the denoise-then-classify baseline for every condition and seed.

    Score files land in <out>/scores/<condition>/seed_<s>.csv and models in
    <out>/models/<condition>/seed_<s>.json; report rows hold mean and SD
    over the seeds, with deltas against the uncorrupted condition.
    """
    ds = load_checked_dataset(manifest_path)
    denoiser = conf.denoiser_spec()
    augment_cfg = conf.augment_config() if conf.augment else None
    plan = [(CLEAN_CONDITION, None)] + conditions(conf, mode)
    rows = []
    for tag, corruption in plan:
        records = []
        iq_noisy = []
        iq_denoised = []
        n_test = 0
        for seed in conf.seeds:
            run = baseline.run_baseline(ds, corruption, denoiser, conf.train_config(seed), seed,
                                        conf.image_size, augment_cfg)
            write_scores(run.predictions, os.path.join(out_dir, "scores", tag, f"seed_{seed}.csv"))
            baseline.save_model(run.model, os.path.join(out_dir, "models", tag, f"seed_{seed}.json"))
            records.append(_run_record(conf, run.predictions))
            iq_noisy.extend(run.iq_corrupted)
            iq_denoised.extend(run.iq_denoised)
            n_test = len(run.predictions)
            if util.debugging:
                util.print_debug(f"{tag} seed {seed}: {records[-1]}")
        kind, level = parse_condition(tag)
        iq = OrderedDict([("corrupted", iqmetrics.summarize(iq_noisy)), ("denoised", iqmetrics.summarize(iq_denoised))])
        rows.append(report.make_row(tag, kind, n_test, clf=clfmetrics.aggregate_records(records), iq=iq,
                                    level=level, runs=len(records)))
        util.print_info(f"{tag}: baseline trained on {len(conf.seeds)} seeds")

    prov = report.provenance(conf, manifest_sha1=util.get_sha1sum(manifest_path),
                             denoiser=denoiser.to_dict(), feature_schema=baseline.FEATURE_SCHEMA)
    baseline_report = report.MetricsReport(prov, rows)
    baseline_report.compute_deltas(CLEAN_CONDITION)
    report.write_json(baseline_report, os.path.join(out_dir, "baseline_report.json"))
    report.write_csv(baseline_report, os.path.join(out_dir, "baseline_report.csv"))
    return baseline_report


def cmd_report(report_paths, fmt, out_dir):
    """Render saved JSON reports as csv, json or svg files in out_dir."""
    if fmt not in report.FORMATS:
        raise ValidationError(f"unknown report format {fmt!r}, expected one of {', '.join(report.FORMATS)}")
    if not report_paths:
        raise ValidationError("no reports given")
    written = []
    for path in report_paths:
        loaded = report.read_report(path)
        stem = os.path.splitext(os.path.basename(path))[0]
        target = os.path.join(out_dir, f"{stem}.{fmt}")
        report.write_report(loaded, target, fmt)
        written.append(target)
    return written


def cmd_split_check(manifest_path, out_path=None):
    """Run the patient leakage check; the JSON report goes to out_path."""
    split_report = dataset.validate_splits(dataset.load_manifest(manifest_path))
    if out_path:
        util.write_out(out_path, split_report.to_json())
    return split_report
