"""Reading and writing run outputs.

report.json uses canonical key order so identical runs serialize to
identical bytes. Log CSVs carry the COLUMNS schemas; reading them back
re-applies the per-column converters, which keeps report recomputation
exact.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .metrics import COLUMNS, Logs


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def report_csv(report: dict) -> str:
    lines = ["metric,value"]
    for key in sorted(report):
        lines.append(f"{key},{report[key]}")
    return "\n".join(lines) + "\n"


def write_outputs(logs: Logs, report: dict, out_dir: Path,
                  report_format: str = "json") -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if report_format == "csv":
        (out_dir / "report.csv").write_text(report_csv(report))
    else:
        (out_dir / "report.json").write_text(report_json(report))
    for name in COLUMNS:
        with open(out_dir / f"{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([column for column, _ in COLUMNS[name]])
            writer.writerows(logs.get(name, ()))


def read_logs(out_dir: Path) -> Logs:
    out_dir = Path(out_dir)
    logs: Logs = {}
    for name, schema in COLUMNS.items():
        path = out_dir / f"{name}.csv"
        if not path.exists():
            logs[name] = []
            continue
        converters = [conv for _, conv in schema]
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            logs[name] = [tuple(conv(cell) for conv, cell
                                in zip(converters, row))
                          for row in reader]
    return logs
