#!/usr/bin/env python3
#
# ctstress.py - part of ctstress
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

import argparse
import os
import sys

import bench
import config
import harness
import report
import util
from util import HarnessError, ValidationError, print_fatal, print_info, print_success

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def build_parser():
    """Command line: global flags, then one subcommand."""
    parser = argparse.ArgumentParser(prog="ctstress", description="Low-dose portable-CT stress-test harness")
    parser.add_argument(
        "-c", "--config", dest="config", action="store", default=None, help="TOML configuration merged over the shipped defaults",
    )
    parser.add_argument(
        "-s", "--seed", dest="seed", action="store", type=int, default=None, help="Run with this single seed instead of the configured list",
    )
    parser.add_argument(
        "-o", "--out", dest="out", action="store", default=None, help="Output directory (or file for split-check)",
    )
    parser.add_argument(
        "-t", "--threshold", dest="threshold", action="store", type=float, default=None, help="Decision threshold for positive calls",
    )
    parser.add_argument(
        "-dbg", "--debug", action="store_true", dest="debug", default=False, help="Enable debugging",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("corrupt", help="Write corrupted copies of a dataset")
    p.add_argument("manifest", help="Manifest CSV (id,image_path,label,patient_id,split)")
    p.add_argument("--mode", choices=config.CONDITION_MODES, default=None, help="Corrupt per dose level or per severity")

    p = sub.add_parser("eval", help="Evaluate an id,score file on the test split")
    p.add_argument("scores", help="Score CSV (id,score)")
    p.add_argument("manifest", help="Manifest CSV")
    p.add_argument("--condition", default=harness.CLEAN_CONDITION, help="Condition tag of the scores, e.g. dose_20")
    p.add_argument("--pooling", choices=("max", "mean"), nargs="?", const="max", default=None, help="Add a patient-level row")

    p = sub.add_parser("stress", help="Per-severity metrics and robustness deltas")
    p.add_argument("manifest", help="Manifest CSV")
    p.add_argument("--baseline-scores", dest="baseline_scores", required=True, help="Score CSV of the uncorrupted condition")
    p.add_argument("--severity-scores", dest="severity_scores", nargs="+", required=True, metavar="LEVEL=PATH", help="Score CSV per severity")
    p.add_argument("--compare", nargs="+", default=None, metavar="LEVEL=PATH", help="Second pipeline for paired DeLong tests")

    p = sub.add_parser("baseline", help="Run the denoise + logistic regression baseline")
    p.add_argument("manifest", help="Manifest CSV")
    p.add_argument("--mode", choices=config.CONDITION_MODES, default=None, help="Corrupt per dose level or per severity")

    p = sub.add_parser("report", help="Render saved JSON reports")
    p.add_argument("reports", nargs="+", help="JSON reports")
    p.add_argument("--format", dest="format", default="csv", help="csv, json or svg")

    p = sub.add_parser("bench", help="Time corruption and metric stages")
    p.add_argument("--size", type=int, default=None, help="Bench image side in pixels")
    p.add_argument("--repetitions", type=int, default=bench.MIN_REPETITIONS, help="Timed calls per stage (at least 20)")

    p = sub.add_parser("split-check", help="Check that every patient sits in one split")
    p.add_argument("manifest", help="Manifest CSV")
    return parser


def _out_dir(conf):
    return conf.out_dir or "."


def run(args):
    """Dispatch a parsed command line; return the process exit code."""
    if args.command == "split-check":
        split_report = harness.cmd_split_check(args.manifest, args.out)
        print(split_report.to_text())
        return EXIT_OK if split_report.passed else EXIT_VALIDATION

    conf = config.load_config(args.config, args)
    out = _out_dir(conf)
    if args.command == "corrupt":
        written, _ = harness.cmd_corrupt(conf, args.manifest, out, args.mode)
        print_success(f"{written} corrupted images written under {out}")
    elif args.command == "eval":
        result = harness.cmd_eval(conf, args.scores, args.manifest, args.condition)
        report.write_json(result, os.path.join(out, "eval_report.json"))
        report.write_csv(result, os.path.join(out, "eval_report.csv"))
        print_success(f"evaluation report written under {out}")
    elif args.command == "stress":
        compare = harness.parse_level_files(args.compare) if args.compare else None
        result = harness.cmd_stress(conf, args.manifest, args.baseline_scores,
                                    harness.parse_level_files(args.severity_scores), compare)
        report.write_json(result, os.path.join(out, "stress_report.json"))
        report.write_csv(result, os.path.join(out, "stress_report.csv"))
        print_success(f"stress report written under {out}")
    elif args.command == "baseline":
        harness.cmd_baseline(conf, args.manifest, out, args.mode)
        print_success(f"baseline scores and report written under {out}")
    elif args.command == "report":
        for path in harness.cmd_report(args.reports, args.format, out):
            print_info(f"wrote {path}")
    elif args.command == "bench":
        result = bench.cmd_bench(conf, args.size, args.repetitions)
        print(util.canonical_json(report.encode(result)), end="")
    return EXIT_OK


def main(argv=None):
    """Entry point for ctstress."""
    parser = build_parser()
    args = parser.parse_args(argv)
    util.debugging = args.debug
    try:
        code = run(args)
    except ValidationError as err:
        print_fatal(str(err))
        sys.exit(EXIT_VALIDATION)
    except OSError as err:
        print_fatal(f"{err.filename or ''}: {err.strerror or err}")
        sys.exit(EXIT_IO)
    except HarnessError as err:
        print_fatal(str(err))
        sys.exit(EXIT_VALIDATION)
    sys.exit(code)


if __name__ == '__main__':
    main()
