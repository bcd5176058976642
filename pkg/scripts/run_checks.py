"""Run every inequality check on its seeded instance family and print the reports.

    python3 scripts/run_checks.py [out.csv] [seed]
"""
import sys

from _common import out_path

from pmols.experiments import write_csv
from pmols.theory import FAMILIES, REPORT_FIELDS, run_family

if __name__ == "__main__":
    path = out_path("checks.csv")
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    reports = [run_family(name, seed) for name in FAMILIES]
    write_csv([r.as_row() for r in reports], REPORT_FIELDS, path)
    for r in reports:
        print(f"{'ok  ' if r.passed else 'FAIL'} {r.name:<24} {r.instances_tested:>5} instances, "
              f"{r.violations} violations, worst margin {r.worst_margin:.3g}")
    print(f"wrote {path}")
    sys.exit(0 if all(r.passed for r in reports) else 3)
