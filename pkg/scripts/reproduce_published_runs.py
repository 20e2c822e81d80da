#!/usr/bin/env python3
"""Rebuild the bundled confusion tables from row percentages and check the
recovered metrics against the stated summary row, then print the sensor
calibration report."""

import argparse

from rubble_probe import metrics
from rubble_probe.telemetry import bundled_calibration_tables, calibration_report


def show_run(run: metrics.PublishedRun) -> None:
    matrix, report = metrics.reproduce_run(run)
    totals = tuple(int(t) for t in matrix.counts.sum(axis=1) + matrix.uncertain)
    print(f"== {run.name} run ==")
    print(f"recovered row totals: {totals}")
    print(metrics.render_confusion(matrix, percentages=False))
    for lbl, got, want in zip(report.labels, report.f1, run.stated_f1):
        print(f"  F1 {lbl}: {got:.4f} (stated {want:.2f}, delta {got - want:+.4f})")
    acc = 100.0 * report.accuracy
    print(f"  accuracy: {acc:.2f}% (stated {run.stated_accuracy_pct}%)")
    print()


def main() -> int:
    argparse.ArgumentParser(description=__doc__).parse_args()
    for run in metrics.bundled_published_runs():
        show_run(run)
    print("== sensor calibration ==")
    print(calibration_report(bundled_calibration_tables()).render_text())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
