"""``qsga <experiment> --config <path> [--seed S] [--out <path>] [--csv]``.

Exit codes: 0 when every verdict passes, 1 when any fails or the run was cut
short by its budget, 2 for a configuration error. ``QSGA_THREADS`` sets the
thread count for trial-parallel experiments.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from .runner import EXPERIMENTS, ConfigError, ExperimentConfig, run

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def report_schema() -> dict:
    return json.loads(resources.files("qsga.cli").joinpath("report.schema.json").read_text())


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_csv(rows: list[dict], path: Path) -> None:
    if not rows:
        path.write_text("")
        return
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsga", description="Seeded quantum state group action experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", type=Path, help="JSON config (params, tolerances, seed, budget)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", type=Path, help="report path; stdout when omitted")
    p.add_argument("--csv", action="store_true", help="also write per-trial rows next to --out")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config is not None:
            try:
                raw = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        config = ExperimentConfig.from_dict(raw, args.experiment, args.seed)
        if args.csv and args.out is None:
            raise ConfigError("--csv needs --out to place the CSV file")
        report = run(config)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    doc = {"body": report["body"], "timings": report["timings"]}
    jsonschema.validate(doc, report_schema())
    text = dumps(doc)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
        if args.csv:
            write_csv(report["rows"], args.out.with_suffix(".csv"))
    return EXIT_PASS if report["body"]["all_pass"] else EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
