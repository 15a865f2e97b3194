"""Time-indexed metric records and their CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """Shortest round-trip text for a number; deterministic across runs."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass
class MetricSeries:
    """Rows of diagnostics keyed by time.  The first column is always ``t``.

    With ``strict=False`` several rows may share a time (e.g. one per z point).
    """

    name: str
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    strict: bool = True

    def __post_init__(self):
        if not self.columns or self.columns[0] != "t":
            raise ValueError("first column of a MetricSeries must be 't'")

    def append(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        if self.rows:
            prev = self.rows[-1][0]
            if (self.strict and not values[0] > prev) or values[0] < prev:
                raise ValueError("t must be increasing")
        self.rows.append(tuple(values))

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([fmt(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path, name: str | None = None, strict: bool = True) -> "MetricSeries":
        path = Path(path)
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            out = cls(name or path.stem, header, strict=strict)
            for row in reader:
                out.append(*(float(v) for v in row))
        return out
