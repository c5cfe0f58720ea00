"""Tabular results and their deterministic CSV serialisation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ShapeError


def format_value(value) -> str:
    """Round-trip text form: floats with 17 significant digits, everything else via ``str``."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


@dataclass
class ScanResult:
    """Named columns, numeric rows and a metadata block carried into the CSV header."""

    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = list(self.columns)
        for row in self.rows:
            self._check(row)
        self.rows = [tuple(r) for r in self.rows]

    def _check(self, row):
        if len(row) != len(self.columns):
            raise ShapeError(f"row has {len(row)} values but there are {len(self.columns)} columns")

    def append(self, row) -> None:
        self._check(row)
        self.rows.append(tuple(row))

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key} = {format_value(value)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv_text())
        return path

    @classmethod
    def read_csv(cls, path) -> ScanResult:
        """Inverse of :meth:`write_csv`; values are parsed as floats where possible."""
        meta, lines = {}, []
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
            else:
                lines.append(line)
        reader = csv.reader(lines)
        columns = next(reader)
        rows = []
        for raw in reader:
            row = []
            for v in raw:
                try:
                    row.append(float(v))
                except ValueError:
                    row.append(v)
            rows.append(tuple(row))
        return cls(columns, rows, meta)
