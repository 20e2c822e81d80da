"""Confusion matrices, per-class F1, and count reconstruction from rounded
row percentages.

`uncertain` is a decision, never a class: it gets its own column, counts
against recall and accuracy, and stays out of every precision denominator.
All functions here are pure.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .labels import LABELS, UNCERTAIN

FIXTURES_DIR = Path(__file__).parent / "fixtures"


class UnknownLabel(ValueError):
    pass


class NoConsistentCounts(ValueError):
    pass


def tenths(x: float) -> int:
    """Round half up to one decimal, returned as integer tenths."""
    return int(np.floor(10.0 * x + 0.5 + 1e-9))


def format_pct(x: float) -> str:
    """One-decimal percentage with round-half-up, e.g. '83.3%'."""
    t = tenths(x)
    return f"{t // 10}.{t % 10}%"


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple
    counts: np.ndarray  # rows = truth, cols = prediction
    uncertain: np.ndarray  # per-truth-row count of uncertain decisions

    def __post_init__(self):
        n = len(self.labels)
        if self.counts.shape != (n, n) or self.uncertain.shape != (n,):
            raise ValueError(f"shape mismatch for {n} labels: {self.counts.shape}, {self.uncertain.shape}")
        if (self.counts < 0).any() or (self.uncertain < 0).any():
            raise ValueError("negative counts")

    @property
    def has_uncertain(self) -> bool:
        return bool(self.uncertain.any())

    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1) + self.uncertain

    def total(self) -> int:
        return int(self.row_totals().sum())

    def row_percentages(self) -> np.ndarray:
        """Rows over [labels..., uncertain], as percentages of row totals."""
        totals = np.maximum(self.row_totals(), 1)
        cells = np.concatenate([self.counts, self.uncertain[:, None]], axis=1)
        return 100.0 * cells / totals[:, None]


def confusion(predictions, truths, labels: tuple = LABELS) -> ConfusionMatrix:
    """Count (truth, prediction) pairs; uncertain predictions get their own column."""
    if len(predictions) != len(truths):
        raise ValueError(f"{len(predictions)} predictions vs {len(truths)} truths")
    index = {name: i for i, name in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    uncertain = np.zeros(len(labels), dtype=np.int64)
    for pred, truth in zip(predictions, truths):
        if truth not in index:
            raise UnknownLabel(f"truth label {truth!r} outside {labels}")
        if pred == UNCERTAIN:
            uncertain[index[truth]] += 1
        elif pred in index:
            counts[index[truth], index[pred]] += 1
        else:
            raise UnknownLabel(f"predicted label {pred!r} outside {labels}")
    return ConfusionMatrix(tuple(labels), counts, uncertain)


@dataclass(frozen=True)
class MetricsReport:
    labels: tuple
    precision: tuple
    recall: tuple
    f1: tuple
    accuracy: float
    flags: tuple  # notes about zero-denominator classes

    def as_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "accuracy": self.accuracy,
            "flags": list(self.flags),
        }


def metrics_from_confusion(matrix: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 and overall accuracy.

    Precision denominators are column sums over real labels only; uncertain
    rows still count in recall and accuracy denominators.
    """
    total = matrix.total()
    if total == 0:
        raise ValueError("empty confusion matrix")
    diag = np.diag(matrix.counts).astype(np.float64)
    col_sums = matrix.counts.sum(axis=0).astype(np.float64)
    row_totals = matrix.row_totals().astype(np.float64)
    precision, recall, f1, flags = [], [], [], []
    for i, label in enumerate(matrix.labels):
        p = diag[i] / col_sums[i] if col_sums[i] > 0 else 0.0
        r = diag[i] / row_totals[i] if row_totals[i] > 0 else 0.0
        if col_sums[i] == 0:
            flags.append(f"{label}: never predicted, precision set to 0")
        if row_totals[i] == 0:
            flags.append(f"{label}: no samples, recall set to 0")
        f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
        if p + r == 0 and col_sums[i] > 0 and row_totals[i] > 0:
            flags.append(f"{label}: zero F1 denominator")
        precision.append(p)
        recall.append(r)
        f1.append(f)
    accuracy = float(diag.sum() / total)
    return MetricsReport(matrix.labels, tuple(precision), tuple(recall), tuple(f1), accuracy, tuple(flags))


def _render_cells(pct: float, n: int) -> int:
    return int(np.floor(pct * n / 100.0 + 0.5 + 1e-9))


def _feasible_counts(row, diag_idx: int, n_max: int) -> list[int]:
    """Row totals n whose rounded cells re-render to the printed percentages."""
    out = []
    for n in range(1, n_max + 1):
        cells = [_render_cells(p, n) for p in row]
        if sum(cells) != n:
            continue
        if all(tenths(100.0 * c / n) == tenths(p) for c, p in zip(cells, row)):
            out.append(n)
    return out


def reconstruct_counts(rows, overall_accuracy_pct: float, n_max: int = 200) -> tuple:
    """Per-class totals consistent with printed row percentages and accuracy.

    Each row may carry a trailing uncertain column. Returns the combination
    minimizing (total, sum of squares, lexicographic) whose implied accuracy
    rounds to the printed overall figure at one decimal.
    """
    rows = [list(map(float, r)) for r in rows]
    for i, row in enumerate(rows):
        if abs(sum(row) - 100.0) > 0.5:
            raise NoConsistentCounts(f"row {i} percentages sum to {sum(row):.2f}, not ~100")
    feasible = [_feasible_counts(row, i, n_max) for i, row in enumerate(rows)]
    for i, f in enumerate(feasible):
        if not f:
            raise NoConsistentCounts(f"row {i}: no total <= {n_max} reproduces {rows[i]}")
    target = tenths(overall_accuracy_pct)

    k = len(rows)
    mins = [f[0] for f in feasible]
    best = None
    budget = 2_000_000
    for total in range(sum(mins), k * n_max + 1):
        combos = []

        def walk(i, left, acc):
            nonlocal budget
            if budget <= 0:
                return
            budget -= 1
            if i == k:
                if left == 0:
                    combos.append(tuple(acc))
                return
            tail_min = sum(mins[i + 1 :])
            for n in feasible[i]:
                if n > left - tail_min:
                    break
                walk(i + 1, left - n, acc + [n])

        walk(0, total, [])
        for combo in sorted(combos, key=lambda c: (sum(x * x for x in c), c)):
            correct = sum(_render_cells(rows[i][i], n) for i, n in enumerate(combo))
            if tenths(100.0 * correct / total) == target:
                return combo
        if budget <= 0:
            raise NoConsistentCounts(f"search budget exhausted at total={total}")
    raise NoConsistentCounts(f"no totals <= {n_max} per class match accuracy {overall_accuracy_pct}")


def render_confusion(matrix: ConfusionMatrix, percentages: bool = True) -> str:
    """Text table in the row-percentage layout of the source material."""
    headers = list(matrix.labels) + ([UNCERTAIN] if matrix.has_uncertain else [])
    widths = [max(14, len(h) + 2) for h in headers]
    out = io.StringIO()
    out.write(" " * 16 + "".join(h.ljust(w) for h, w in zip(headers, widths)) + "\n")
    pcts = matrix.row_percentages()
    for i, label in enumerate(matrix.labels):
        cells = []
        for j in range(len(headers)):
            value = pcts[i][j] if j < len(matrix.labels) else pcts[i][-1]
            cells.append(format_pct(value) if percentages else str(int(matrix.counts[i][j]) if j < len(matrix.labels) else int(matrix.uncertain[i])))
        out.write(label.ljust(16) + "".join(c.ljust(w) for c, w in zip(cells, widths)) + "\n")
    return out.getvalue()


def report_csv(matrix: ConfusionMatrix, report: MetricsReport) -> str:
    """CSV with count rows plus precision/recall/F1/accuracy summary lines."""
    out = io.StringIO()
    header = ["truth"] + list(matrix.labels)
    if matrix.has_uncertain:
        header.append(UNCERTAIN)
    out.write(",".join(header) + "\n")
    for i, label in enumerate(matrix.labels):
        row = [label] + [str(int(c)) for c in matrix.counts[i]]
        if matrix.has_uncertain:
            row.append(str(int(matrix.uncertain[i])))
        out.write(",".join(row) + "\n")
    for name, values in (("precision", report.precision), ("recall", report.recall), ("f1", report.f1)):
        out.write(",".join([name] + [f"{v:.4f}" for v in values]) + ("," if matrix.has_uncertain else "") + "\n")
    out.write(f"accuracy,{report.accuracy:.6f}\n")
    return out.getvalue()


@dataclass(frozen=True)
class PublishedRun:
    """A confusion table as printed: row percentages plus stated summary stats."""

    name: str
    labels: tuple
    rows: tuple  # row percentages; trailing uncertain column when has_uncertain
    has_uncertain: bool
    stated_f1: tuple
    stated_accuracy_pct: float


def load_row_percentage_csv(path) -> PublishedRun:
    """Fixture format: '# key: value' metadata lines, then truth,<labels...> rows."""
    meta: dict[str, str] = {}
    rows = []
    header_seen = False
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            header_seen = True
            continue
        cells = [c.strip() for c in line.split(",")]
        rows.append(tuple(float(v) for v in cells[1:]))
    labels = tuple(meta["labels"].split(","))
    return PublishedRun(
        meta.get("name", Path(path).stem),
        labels,
        tuple(rows),
        meta.get("uncertain_column", "false").lower() == "true",
        tuple(float(v) for v in meta["stated_f1"].split(",")),
        float(meta["stated_accuracy_pct"]),
    )


def bundled_published_runs() -> list[PublishedRun]:
    return [
        load_row_percentage_csv(FIXTURES_DIR / f"confusion_pcts_{name}.csv")
        for name in ("validation", "field")
    ]


def matrix_from_percentages(rows, totals, labels: tuple = LABELS, uncertain_column: bool = False) -> ConfusionMatrix:
    """Integer confusion matrix implied by row percentages at given row totals."""
    counts, uncertain = [], []
    for row, n in zip(rows, totals):
        cells = [_render_cells(p, n) for p in row]
        if uncertain_column:
            uncertain.append(cells.pop())
        else:
            uncertain.append(0)
        counts.append(cells)
    return ConfusionMatrix(tuple(labels), np.array(counts, dtype=np.int64), np.array(uncertain, dtype=np.int64))


def reproduce_run(run: PublishedRun, n_max: int = 200) -> tuple[ConfusionMatrix, MetricsReport]:
    """Recover integer counts behind a printed table, then recompute its stats."""
    totals = reconstruct_counts(run.rows, run.stated_accuracy_pct, n_max)
    matrix = matrix_from_percentages(run.rows, totals, run.labels, run.has_uncertain)
    return matrix, metrics_from_confusion(matrix)
