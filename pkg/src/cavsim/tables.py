"""Comma-separated tables with ``#``-prefixed provenance comments."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


@dataclass
class SweepTable:
    """Named columns of equal length plus the parameters that produced them."""

    name: str
    columns: dict
    params: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise InvalidArgumentError(f"columns of unequal length: {lengths}")

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def column(self, name) -> np.ndarray:
        return np.asarray(self.columns[name])

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# table = {self.name}\n")
        for k, v in self.params.items():
            buf.write(f"# {k} = {fmt(v)}\n")
        for k, v in self.summary.items():
            buf.write(f"# summary.{k} = {fmt(v)}\n")
        names = list(self.columns)
        buf.write(",".join(names) + "\n")
        for row in zip(*(self.columns[n] for n in names)):
            buf.write(",".join(fmt(x) for x in row) + "\n")
        return buf.getvalue()

    def write(self, path):
        if str(path) == "-":
            import sys

            sys.stdout.write(self.to_text())
        else:
            Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "SweepTable":
        name, params, summary = "", {}, {}
        lines = text.splitlines()
        body = []
        for ln in lines:
            if ln.startswith("#"):
                key, _, val = ln[1:].partition("=")
                key, val = key.strip(), val.strip()
                if key == "table":
                    name = val
                elif key.startswith("summary."):
                    summary[key[len("summary."):]] = _parse_value(val)
                elif key:
                    params[key] = _parse_value(val) if key != "argv" else val
            elif ln.strip():
                body.append(ln)
        if not body:
            raise InvalidArgumentError("table has no header")
        header = body[0].split(",")
        cols = {h: [] for h in header}
        for ln in body[1:]:
            for h, x in zip(header, ln.split(",")):
                cols[h].append(_parse_value(x))
        return cls(name, cols, params, summary)


def rows_table(name: str, rows, params=None) -> SweepTable:
    """Two-column ``quantity,value`` table from (name, value) pairs."""
    rows = list(rows)
    return SweepTable(
        name,
        {"quantity": [r[0] for r in rows], "value": [r[1] for r in rows]},
        dict(params or {}),
    )


def isclose_tables(a: SweepTable, b: SweepTable, rel=0.0) -> bool:
    if list(a.columns) != list(b.columns) or len(a) != len(b):
        return False
    for k in a.columns:
        for x, y in zip(a.columns[k], b.columns[k]):
            if isinstance(x, str) or isinstance(y, str):
                if x != y:
                    return False
            elif not (x == y or (math.isnan(x) and math.isnan(y)) or math.isclose(x, y, rel_tol=rel)):
                return False
    return True
