"""Rebuild a run report from its CSV logs, independently of the runner.

Usage: python -m c3sim.harness.recompute <out-dir>

Prints the report as canonical JSON. A freshly written run directory must
recompute to the very bytes of its report.json; tests and the --check flag
lean on this.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .io import read_logs, report_json
from .metrics import compute_report


def recompute(out_dir: Path) -> dict:
    return compute_report(read_logs(Path(out_dir)))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="recompute a run report from its log directory")
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args(argv)
    sys.stdout.write(report_json(recompute(args.out_dir)))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
