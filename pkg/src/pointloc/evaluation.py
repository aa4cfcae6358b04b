"""Scoring of pointing events against ground truth.

A trial is one ground-truth hold interval. Its detected cell is the cell of the last
stable event inside the interval, ``OUT_OF_BOARD`` when that event fell outside the
board, or ``None`` when no stable event occurred.
"""
from __future__ import annotations

from dataclasses import dataclass
import csv
import io
from typing import Optional, Sequence, Union

import numpy as np

from .stream import PointingEvent

OUT_OF_BOARD = "out_of_board"
NONE_LABEL = "none"

Detected = Union[int, str, None]


class EmptyInput(ValueError):
    pass


class OverlappingIntervals(ValueError):
    pass


@dataclass(frozen=True)
class TrialRecord:
    intended_cell: int
    detected_cell: Detected

    @property
    def correct(self) -> bool:
        return self.detected_cell == self.intended_cell


def match_trials(events: Sequence[PointingEvent], ground_truth) -> list[TrialRecord]:
    """One record per ground-truth interval ``[t_start, t_end)``."""
    intervals = sorted(ground_truth, key=lambda iv: iv.t_start)
    for a, b in zip(intervals, intervals[1:]):
        if b.t_start < a.t_end:
            raise OverlappingIntervals(
                f"[{a.t_start}, {a.t_end}) overlaps [{b.t_start}, {b.t_end})")
    stable = [e for e in events if e.stable]
    times = np.array([e.t for e in stable])
    records = []
    for iv in ground_truth:
        # last stable event with t_start <= t < t_end
        i = int(np.searchsorted(times, iv.t_end, side="left")) - 1
        if i >= 0 and stable[i].t >= iv.t_start:
            cell = stable[i].cell
            detected = OUT_OF_BOARD if cell is None else int(cell)
        else:
            detected = None
        records.append(TrialRecord(int(iv.cell), detected))
    return records


def accuracy(records: Sequence[TrialRecord]) -> float:
    """Percentage of trials whose detected cell equals the intended one."""
    if not records:
        raise EmptyInput("no trial records")
    return 100.0 * sum(r.correct for r in records) / len(records)


class ConfusionMatrix:
    """Counts with intended cells as rows and detected cells, out-of-board and none as columns."""

    def __init__(self, cell_ids: Sequence[int], counts: Optional[np.ndarray] = None):
        self.cell_ids = [int(c) for c in cell_ids]
        n = len(self.cell_ids)
        self.counts = np.zeros((n, n + 2), dtype=np.int64) if counts is None else np.asarray(counts)
        if self.counts.shape != (n, n + 2):
            raise ValueError(f"counts must have shape {(n, n + 2)}")

    @property
    def columns(self) -> list[str]:
        return [str(c) for c in self.cell_ids] + [OUT_OF_BOARD, NONE_LABEL]

    def _col(self, detected: Detected) -> int:
        if detected is None:
            return len(self.cell_ids) + 1
        if detected == OUT_OF_BOARD:
            return len(self.cell_ids)
        return self.cell_ids.index(detected)

    @classmethod
    def from_records(cls, records: Sequence[TrialRecord], cell_ids: Sequence[int]) -> ConfusionMatrix:
        cm = cls(cell_ids)
        for r in records:
            if r.intended_cell not in cm.cell_ids:
                raise ValueError(f"intended cell {r.intended_cell} not in grid")
            cm.counts[cm.cell_ids.index(r.intended_cell), cm._col(r.detected_cell)] += 1
        return cm

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def row_percentages(self) -> np.ndarray:
        tot = self.row_totals[:, None].astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            pct = np.where(tot > 0, 100.0 * self.counts / tot, 0.0)
        return pct

    def accuracy(self) -> float:
        total = int(self.counts.sum())
        if total == 0:
            raise EmptyInput("empty confusion matrix")
        n = len(self.cell_ids)
        return 100.0 * int(np.trace(self.counts[:, :n])) / total


def render_report(matrix: ConfusionMatrix, records: Sequence[TrialRecord],
                  title: str = "") -> tuple[str, str]:
    """Plain-text report and CSV (``intended,detected,count,row_pct``)."""
    acc = accuracy(records)
    pct = matrix.row_percentages()
    cols = matrix.columns
    width = max(8, *(len(c) + 1 for c in cols))
    lines = []
    if title:
        lines += [title, "=" * len(title)]
    lines.append(f"trials: {len(records)}")
    lines.append(f"accuracy: {acc:.2f} %")
    lines.append("")
    lines.append("row-normalised detections (%), rows = intended cell")
    lines.append("intended".ljust(10) + "".join(c.rjust(width) for c in cols) + "n".rjust(7))
    for i, cid in enumerate(matrix.cell_ids):
        lines.append(str(cid).ljust(10) + "".join(f"{p:{width}.2f}" for p in pct[i])
                     + f"{int(matrix.row_totals[i]):7d}")
    text = "\n".join(lines) + "\n"

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["intended", "detected", "count", "row_pct"])
    for i, cid in enumerate(matrix.cell_ids):
        for j, col in enumerate(cols):
            w.writerow([cid, col, int(matrix.counts[i, j]), f"{pct[i, j]:.4f}"])
    return text, buf.getvalue()


def summary_table(results: dict, arms=("left", "right"), grids=("2x3", "3x4")) -> tuple[str, str]:
    """Accuracy table with grids as rows and arms as columns.

    ``results`` maps ``(arm, grid_label)`` to an accuracy percentage.
    """
    lines = ["".ljust(8) + "".join(f"{a.capitalize() + ' Arm':>12}" for a in arms)]
    for g in grids:
        lines.append(g.ljust(8) + "".join(f"{results[(a, g)]:>10.2f} %" for a in arms))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid"] + list(arms))
    for g in grids:
        w.writerow([g] + [f"{results[(a, g)]:.2f}" for a in arms])
    return "\n".join(lines) + "\n", buf.getvalue()
