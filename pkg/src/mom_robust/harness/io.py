"""CSV and JSON input/output for the harness.

Floats are written with ``repr``, which round-trips exactly and never depends
on the locale.  Files use ``,`` separators and LF line endings.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, List, Sequence

import numpy as np

from ..errors import IoError, ParseError
from ..learning import PairwiseDataset

__all__ = ["Table", "format_cell", "write_results", "read_results", "write_json", "read_csv_dataset"]


@dataclass
class Table:
    columns: Sequence[str]
    rows: List[Sequence[Any]] = field(default_factory=list)

    def append(self, row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        self.rows.append(tuple(row))

    def column(self, name):
        i = list(self.columns).index(name)
        return [r[i] for r in self.rows]

    def where(self, **match):
        idx = {k: list(self.columns).index(k) for k in match}
        return [r for r in self.rows if all(r[i] == match[k] for k, i in idx.items())]


def format_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _render(table):
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=",", lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([format_cell(v) for v in r])
    return buf.getvalue()


def write_results(path, table):
    """Write ``table`` as CSV; ``path`` of ``None`` or ``"-"`` returns the text instead."""
    text = _render(table)
    if path is None or path == "-":
        return text
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}") from None
    return text


def _parse_cell(s):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_results(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise ParseError(f"{path} is empty", 1)
    t = Table(rows[0])
    for r in rows[1:]:
        t.append([_parse_cell(c) for c in r])
    return t


def write_json(path, obj):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}") from None


def read_csv_dataset(path):
    """Read a pairwise dataset: header row, numeric features, label in the last column.

    Raises
    ------
    ParseError
        Naming the line and column of the first malformed cell.
    IoError
        If the file cannot be opened.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise ParseError(f"{path} has no header row", 1)
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise ParseError(f"{path} needs at least one feature column and a label column", 1)
    data = []
    for lineno, r in enumerate(rows[1:], start=2):
        if not r or all(not c.strip() for c in r):
            continue
        if len(r) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(r)}", lineno)
        vals = []
        for name, cell in zip(header, r):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r}", lineno, name) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell!r}", lineno, name)
            vals.append(v)
        data.append(vals)
    if not data:
        raise ParseError(f"{path} has no data rows", 2)
    a = np.asarray(data, dtype=float)
    return PairwiseDataset(a[:, :-1], a[:, -1])
