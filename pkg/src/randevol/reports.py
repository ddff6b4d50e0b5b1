"""Density reports and deterministic CSV emission.

A DensityReport records a time series of integrated conserved densities
together with a running drift column: the maximum over the history so far of
|H_n(t) - H_n(0)| / |H_n(0)| (absolute deviation where H_n(0) = 0).  Files
are written with '#'-prefixed metadata lines before the header and 17
significant digits, so identical runs produce byte-identical files and the
reader recovers every double exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_FMT = "%.17g"


@dataclass
class DensityReport:
    """Time series of integrated densities with running max drift."""

    columns: list[str]
    metadata: dict[str, str] = field(default_factory=dict)
    times: list[float] = field(default_factory=list)
    values: list[list[float]] = field(default_factory=list)
    drifts: list[float] = field(default_factory=list)
    _reference: list[float] | None = None

    def add_row(self, t: float, densities) -> float:
        """Append one sample; returns the running drift after this row."""
        row = [float(v) for v in densities]
        if len(row) != len(self.columns):
            raise ValueError(
                f"expected {len(self.columns)} density values, got {len(row)}")
        if self._reference is None:
            self._reference = row
        deviation = 0.0
        for v, v0 in zip(row, self._reference):
            gap = abs(v - v0)
            if v0 != 0.0:
                gap /= abs(v0)
            deviation = max(deviation, gap)
        prev = self.drifts[-1] if self.drifts else 0.0
        drift = max(prev, deviation)
        if self.times and t < self.times[-1]:
            raise ValueError("report times must be non-decreasing")
        self.times.append(float(t))
        self.values.append(row)
        self.drifts.append(drift)
        return drift

    @property
    def max_drift(self) -> float:
        return self.drifts[-1] if self.drifts else 0.0

    def header(self) -> list[str]:
        return ["t"] + list(self.columns) + ["max_drift"]

    def to_csv(self, path) -> None:
        lines = [f"# {key}={value}" for key, value in sorted(self.metadata.items())]
        lines.append(",".join(self.header()))
        for t, row, drift in zip(self.times, self.values, self.drifts):
            cells = [t] + row + [drift]
            lines.append(",".join(_FMT % c for c in cells))
        Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> tuple[dict[str, str], list[str], np.ndarray]:
    """Read back a report CSV: (metadata, header, data array)."""
    metadata: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line.lstrip("# ").partition("=")
            metadata[key] = value
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append([float(cell) for cell in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: no header row found")
    return metadata, header, np.array(rows)


def write_table(path, header: list[str], rows, metadata: dict[str, str] | None = None) -> None:
    """Generic CSV with the same dialect as density reports."""
    lines = [f"# {k}={v}" for k, v in sorted((metadata or {}).items())]
    lines.append(",".join(header))
    for row in rows:
        cells = []
        for cell in row:
            cells.append(_FMT % cell if isinstance(cell, float) else str(cell))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
