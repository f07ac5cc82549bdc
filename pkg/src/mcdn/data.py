"""Rectangular datasets and their CSV form."""

import csv

import numpy as np

from .errors import DataError
from .graph import VariableKind


class Dataset:
    """Named columns over a float matrix; ordinal columns hold integer levels."""

    def __init__(self, columns, values, kinds=None):
        self.columns = tuple(columns)
        if len(set(self.columns)) != len(self.columns):
            raise DataError("duplicate column names")
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            values = values.reshape(0, len(self.columns))
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise DataError(f"values must be (n, {len(self.columns)}), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("missing or non-finite values")
        self.values = values
        self.kinds = dict(kinds or {})
        self._pos = {c: i for i, c in enumerate(self.columns)}

    @property
    def n(self):
        return self.values.shape[0]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Dataset(n={self.n}, columns={list(self.columns)})"

    def column(self, name):
        return self.values[:, self._pos[name]]

    def rows(self, index):
        return Dataset(self.columns, self.values[index], self.kinds)

    def concat(self, other):
        if other.columns != self.columns:
            raise DataError("column mismatch")
        return Dataset(self.columns, np.vstack([self.values, other.values]), self.kinds)

    def aligned(self, graph):
        """Values reordered to the graph's vertex order, checked against its kinds."""
        missing = [v for v in graph.vertices if v not in self._pos]
        if missing:
            raise DataError(f"data lacks columns {missing}")
        out = self.values[:, [self._pos[v] for v in graph.vertices]]
        for j, v in enumerate(graph.vertices):
            kind = graph.kind(v)
            if kind.is_ordinal:
                col = out[:, j]
                if np.any(col != np.round(col)) or np.any(col < 0) or np.any(col >= kind.cardinality):
                    raise DataError(f"column {v!r} must hold integers in 0..{kind.cardinality - 1}")
        return out

    @classmethod
    def from_graph(cls, graph, values):
        return cls(graph.vertices, values, graph.kinds)


def read_csv(path, graph=None) -> Dataset:
    """Read a headed CSV. With ``graph`` given, ordinal columns must hold integers."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty file", 1) from None
        rows = []
        for lineno, rec in enumerate(reader, 2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(rec)}", lineno)
            row = []
            for name, field in zip(header, rec):
                field = field.strip()
                kind = graph.kind(name) if graph is not None and name in graph else None
                try:
                    if kind is not None and kind.is_ordinal:
                        val = int(field)
                        if val < 0 or val >= kind.cardinality:
                            raise DataError(f"{name}={val} outside 0..{kind.cardinality - 1}", lineno)
                    else:
                        val = float(field)
                except ValueError:
                    raise DataError(f"bad value {field!r} for column {name!r}", lineno) from None
                row.append(val)
            rows.append(row)
    kinds = {} if graph is None else {c: graph.kind(c) for c in header if c in graph}
    return Dataset(header, np.array(rows, dtype=float).reshape(len(rows), len(header)), kinds)


def _fmt(value, kind: VariableKind):
    if kind is not None and kind.is_ordinal:
        return str(int(value))
    return repr(float(value))


def write_csv(data: Dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(data.columns)
        kinds = [data.kinds.get(c) for c in data.columns]
        for row in data.values:
            writer.writerow([_fmt(v, k) for v, k in zip(row, kinds)])
