"""Rank statistics and the metric-vs-MOS evaluation harness."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConstantInputError",
    "EvaluationTable",
    "SUBSET_ORDER",
    "evaluate",
    "rank_average",
    "scatter_export",
    "srocc",
]

SUBSET_ORDER = ("noise_like", "low_contrast", "regular", "unlabeled")
FULL_COLUMN = "full"


class ConstantInputError(ValueError):
    """A rank correlation over a constant vector is undefined (not zero)."""


def rank_average(values) -> np.ndarray:
    """Average-tie ranks (1-based); tied values share the mean of their positions.

    +inf sentinels rank above every finite value; NaN is rejected.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("rank_average expects a 1D vector")
    if np.any(np.isnan(v)):
        raise ValueError("rank_average input contains NaN")
    n = v.size
    order = np.argsort(v, kind="stable")
    ranks = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def srocc(x, y) -> float:
    """Spearman rank-order correlation: Pearson correlation of average-tie ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"srocc needs two equal-length vectors, got {x.shape} and {y.shape}")
    n = x.size
    if n < 2:
        raise ValueError("srocc needs at least 2 observations")
    if np.all(x == x[0]):
        raise ConstantInputError("first input is constant; rank correlation undefined")
    if np.all(y == y[0]):
        raise ConstantInputError("second input is constant; rank correlation undefined")
    rx = rank_average(x)
    ry = rank_average(y)
    # Identical / exactly reversed rank vectors short-circuit to the exact
    # endpoints (the general expression can land 1 ulp off).
    if np.array_equal(rx, ry):
        return 1.0
    if np.array_equal(rx + ry, np.full(n, n + 1.0)):
        return -1.0
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    r = float((dx @ dy) / math.sqrt((dx @ dx) * (dy @ dy)))
    return max(-1.0, min(1.0, r))


@dataclass
class EvaluationTable:
    """SROCC of each metric against MOS, per subset column plus the full set.

    cells[(metric, column)] is a float or None for undefined (constant
    input). subset_sizes counts references per column.
    """

    metrics: list = field(default_factory=list)  # row order
    columns: list = field(default_factory=list)
    cells: dict = field(default_factory=dict)
    subset_sizes: dict = field(default_factory=dict)

    @staticmethod
    def _fmt(cell) -> str:
        return "n/a" if cell is None else repr(cell)

    def to_csv_text(self) -> str:
        lines = ["metric," + ",".join(self.columns)]
        for m in self.metrics:
            lines.append(m + "," + ",".join(self._fmt(self.cells[(m, c)]) for c in self.columns))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        headers = ["metric"] + [
            f"{c} ({self.subset_sizes[c]} refs)" if c in self.subset_sizes else c
            for c in self.columns
        ]
        rows = [
            [m] + [
                "n/a" if self.cells[(m, c)] is None else f"{self.cells[(m, c)]:.4f}"
                for c in self.columns
            ]
            for m in self.metrics
        ]
        widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
        out = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
        for r in rows:
            out.append("  ".join(r[i].ljust(widths[i]) for i in range(len(r))))
        return "\n".join(out) + "\n"


def _column_cell(metric_values, mos, keys):
    if len(keys) < 2:
        return None
    mv = [metric_values[k] for k in keys]
    ms = [mos[k] for k in keys]
    try:
        return srocc(mv, ms)
    except ConstantInputError:
        return None


def evaluate(metric_tables: dict, mos: dict, subsets: dict | None = None) -> EvaluationTable:
    """Build the SROCC table for several metrics against one MOS table.

    metric_tables: {metric_name: {(reference_id, lam): value}}.
    mos: {(reference_id, lam): mos}. subsets: {reference_id: label};
    distorted images pool under their reference's label. Rows come out
    sorted by full-set SROCC descending.
    """
    subsets = subsets or {}
    all_keys = sorted(mos)
    if not all_keys:
        raise ValueError("empty MOS table")
    for name, table in metric_tables.items():
        missing = [k for k in all_keys if k not in table]
        if missing:
            raise ValueError(f"metric {name!r} missing value for image {missing[0][0]!r} "
                             f"(lambda {missing[0][1]})")
        extra = [k for k in table if k not in mos]
        if extra:
            raise ValueError(f"no MOS for image {extra[0][0]!r} (lambda {extra[0][1]})")

    labels = [s for s in SUBSET_ORDER if any(subsets.get(k[0]) == s for k in all_keys)]
    columns = labels + [FULL_COLUMN]
    sizes = {
        label: len({k[0] for k in all_keys if subsets.get(k[0]) == label}) for label in labels
    }
    sizes[FULL_COLUMN] = len({k[0] for k in all_keys})

    table = EvaluationTable(columns=columns, subset_sizes=sizes)
    for name, values in metric_tables.items():
        for label in labels:
            keys = [k for k in all_keys if subsets.get(k[0]) == label]
            table.cells[(name, label)] = _column_cell(values, mos, keys)
        table.cells[(name, FULL_COLUMN)] = _column_cell(values, mos, all_keys)

    def row_key(name):
        cell = table.cells[(name, FULL_COLUMN)]
        return (-cell if cell is not None else math.inf, name)

    table.metrics = sorted(metric_tables, key=row_key)
    return table


def scatter_export(metric_tables: dict, mos: dict, path: str) -> None:
    """Write the per-image scatter data used for metric-vs-MOS plots.

    CSV columns: image_id,lambda,metric_name,metric_value,mos. +inf
    values render as "inf". Plotting is left to external tools.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "lambda", "metric_name", "metric_value", "mos"])
        for name in sorted(metric_tables):
            values = metric_tables[name]
            for key in sorted(values):
                if key not in mos:
                    raise ValueError(f"no MOS for image {key[0]!r} (lambda {key[1]})")
                ref_id, lam = key
                writer.writerow([ref_id, repr(float(lam)), name, repr(float(values[key])),
                                 repr(float(mos[key]))])
