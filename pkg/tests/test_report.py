import csv
import io
import json
import os
import tempfile
import unittest
import xml.etree.ElementTree as ET

import numpy as np

import config
import report
from clfmetrics import MetricWithCI, RunSummary
from util import INFINITE, UNDEFINED, ValidationError


def clf(accuracy, auc):
    return {"accuracy": MetricWithCI(accuracy, accuracy - 0.05, accuracy + 0.05, "bootstrap", 100),
            "auc_delong": MetricWithCI(auc)}


def sample_report(kinds=("dose",)):
    rep = report.MetricsReport(report.provenance(config.Config(), manifest_sha1="0" * 40))
    rep.add_row(report.make_row("clean", "clean", 20, clf(0.95, 0.97)))
    if "dose" in kinds:
        for lam, acc, auc in ((40.0, 0.9, 0.94), (5.0, 0.8, 0.85), (1.0, 0.6, 0.7)):
            rep.add_row(report.make_row(f"dose_{lam:g}", "dose", 20, clf(acc, auc), level=lam))
    if "severity" in kinds:
        for level, acc, auc in ((1, 0.9, 0.93), (3, 0.7, 0.8), (5, 0.5, UNDEFINED)):
            rep.add_row(report.make_row(f"severity_{level}", "severity", 20, clf(acc, auc), level=level))
    return rep


def svg_ids(path):
    tree = ET.parse(path)
    return {el.get("id") for el in tree.iter() if el.get("id")}


class TestEncoding(unittest.TestCase):

    def test_markers_and_floats(self):
        doc = report.encode({"a": UNDEFINED, "b": INFINITE, "c": float("nan"), "d": float("inf"),
                             "e": np.int64(3), "f": (1, 2)})
        self.assertEqual(doc, {"a": None, "b": "+inf", "c": None, "d": "+inf", "e": 3, "f": [1, 2]})
        self.assertEqual(json.loads(json.dumps(doc))["e"], 3)

    def test_negative_infinity(self):
        with self.assertRaises(ValidationError):
            report.encode([float("-inf")])

    def test_decode(self):
        back = report.decode({"a": None, "b": ["+inf", 0.5]})
        self.assertIs(back["a"], UNDEFINED)
        self.assertIs(back["b"][0], INFINITE)
        self.assertEqual(back["b"][1], 0.5)

    def test_metric_point(self):
        row = report.make_row("x", "dose", 3, {"auc_delong": MetricWithCI(0.8), "accuracy": RunSummary(0.7, 0.1, 3)})
        self.assertEqual(report.metric_point(row["clf"], "auc"), 0.8)
        self.assertEqual(report.metric_point(row["clf"], "accuracy"), 0.7)
        self.assertIs(report.metric_point(row["clf"], "f1"), UNDEFINED)


class TestMetricsReport(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_provenance(self):
        rep = sample_report()
        prov = rep.provenance
        self.assertEqual(prov["config_hash"], config.Config().config_hash())
        self.assertEqual(prov["seeds"], [7, 17, 27])
        self.assertEqual(sorted(prov["severity_table"]), ["1", "2", "3", "4", "5"])
        self.assertIn("tool_version", prov)

    def test_duplicate_condition(self):
        rep = sample_report()
        with self.assertRaises(ValidationError):
            rep.add_row(report.make_row("clean", "clean", 1))

    def test_bad_row(self):
        with self.assertRaises(ValidationError):
            report.make_row("", "dose", 1)
        with self.assertRaises(ValidationError):
            report.make_row("x", "dose", -1)

    def test_deltas(self):
        """
        Test deltas are corrupted minus baseline for AUC and accuracy
        """
        rep = sample_report(("dose", "severity"))
        rep.compute_deltas("clean")
        self.assertNotIn("deltas", rep.row("clean"))
        self.assertAlmostEqual(rep.row("dose_1")["deltas"]["auc"], 0.7 - 0.97, places=12)
        self.assertAlmostEqual(rep.row("dose_1")["deltas"]["accuracy"], 0.6 - 0.95, places=12)
        self.assertIs(rep.row("severity_5")["deltas"]["auc"], UNDEFINED)
        self.assertEqual(rep.to_dict()["baseline_condition"], "clean")

    def test_json_round_trip(self):
        rep = sample_report(("dose", "severity"))
        rep.compute_deltas("clean")
        path = os.path.join(self.tmp.name, "r", "report.json")
        report.write_report(rep, path, "json")
        back = report.read_report(path)
        self.assertEqual(back, rep)
        self.assertIs(back.row("clean")["clf"]["auc_delong"]["ci_low"], UNDEFINED)

    def test_reloaded_csv_matches(self):
        """
        Test a report read back from JSON renders the same CSV as the original
        """
        rep = sample_report(("dose", "severity"))
        rep.compute_deltas("clean")
        path = os.path.join(self.tmp.name, "report.json")
        report.write_json(rep, path)
        back = report.read_report(path)
        self.assertEqual(back.to_csv(), rep.to_csv())
        self.assertEqual(back.to_json(), rep.to_json())
        self.assertEqual(back.to_dict(), rep.to_dict())

    def test_unsupported_version(self):
        doc = sample_report().to_dict()
        doc["format_version"] = 2
        with self.assertRaises(ValidationError):
            report.MetricsReport.from_dict(doc)

    def test_csv(self):
        """
        Test the CSV holds one row per condition with flattened metric columns
        """
        rep = sample_report()
        rep.compute_deltas("clean")
        text = rep.to_csv()
        rows = list(csv.DictReader(io.StringIO(text)))
        self.assertEqual(len(rows), 4)
        self.assertEqual(rows[0]["condition"], "clean")
        self.assertEqual(rows[0]["clf_auc_delong_ci_low"], "undefined")
        self.assertEqual(rows[0]["deltas_auc"], "")
        self.assertEqual(rows[1]["level"], "40.0")
        self.assertEqual(float(rows[1]["clf_accuracy_point"]), 0.9)
        self.assertNotIn("clf_accuracy_method", rows[0])
        self.assertTrue(text.endswith("\n"))
        self.assertNotIn("\r", text)

    def test_csv_single_row(self):
        rep = report.MetricsReport(report.provenance(config.Config()))
        rep.add_row(report.make_row("clean", "clean", 2, {"ece": MetricWithCI(0.1)}))
        lines = rep.to_csv().splitlines()
        self.assertEqual(len(lines), 2)
        self.assertEqual(lines[0], "condition,kind,n,clf_ece_point,clf_ece_ci_low,clf_ece_ci_high,"
                                   "clf_ece_n_resamples_used")

    def test_svg_series(self):
        """
        Test the SVG chart names one group per plotted metric
        """
        path = os.path.join(self.tmp.name, "report.svg")
        report.write_report(sample_report(), path, "svg")
        ids = svg_ids(path)
        self.assertIn("series-accuracy", ids)
        self.assertIn("series-auc", ids)

    def test_svg_both_kinds(self):
        path = os.path.join(self.tmp.name, "both.svg")
        report.write_svg(sample_report(("dose", "severity")), path)
        ids = svg_ids(path)
        for gid in ("series-dose-accuracy", "series-dose-auc", "series-severity-accuracy", "series-severity-auc"):
            self.assertIn(gid, ids)

    def test_severity_dose_axis(self):
        """
        Test severity charts map each level to its dose factor on a top axis
        """
        rep = sample_report(("severity",))
        self.assertEqual(report.severity_doses(rep, [1, 3, 5]), [40.0, 10.0, 1.0])
        self.assertIsNone(report.severity_doses(rep, [1, 9]))
        path = os.path.join(self.tmp.name, "stress.svg")
        report.write_svg(rep, path)
        self.assertIn("axis-severity-dose", svg_ids(path))
        self.assertNotIn("axis-severity-dose", svg_ids(self.dose_only_svg()))

    def dose_only_svg(self):
        path = os.path.join(self.tmp.name, "dose.svg")
        report.write_svg(sample_report(("dose",)), path)
        return path

    def test_svg_reproducible(self):
        a = os.path.join(self.tmp.name, "a.svg")
        b = os.path.join(self.tmp.name, "b.svg")
        report.write_svg(sample_report(), a)
        report.write_svg(sample_report(), b)
        with open(a, "rb") as fa, open(b, "rb") as fb:
            self.assertEqual(fa.read(), fb.read())

    def test_svg_nothing_to_plot(self):
        rep = report.MetricsReport(report.provenance(config.Config()))
        rep.add_row(report.make_row("clean", "clean", 2))
        with self.assertRaises(ValidationError):
            report.write_svg(rep, os.path.join(self.tmp.name, "x.svg"))

    def test_unknown_format(self):
        with self.assertRaises(ValidationError):
            report.write_report(sample_report(), os.path.join(self.tmp.name, "x.pdf"), "pdf")


if __name__ == '__main__':
    unittest.main(buffer=True)
