"""CSV persistence for datasets: header of feature names plus a label column.

Missing values are written as empty cells, never as a sentinel number.
`repr` formatting keeps the write/read round trip exact.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..schema import Dataset, UseCaseSchema

LABEL_COLUMN = "label"


def write_csv(path: str | Path, dataset: Dataset) -> None:
    schema = dataset.schema
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema.feature_names + [LABEL_COLUMN])
        for i in range(len(dataset)):
            row = [
                "" if np.isnan(v) else repr(float(v))
                for v in dataset.x[i]
            ]
            row.append(schema.classes[int(dataset.y[i])])
            writer.writerow(row)


def read_csv(path: str | Path, schema: UseCaseSchema) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file") from None
        expected = schema.feature_names + [LABEL_COLUMN]
        unknown = [c for c in header if c not in expected]
        if unknown:
            raise ParseError(f"unknown column {unknown[0]!r}")
        if header != expected:
            raise ParseError(f"header must be {expected}, got {header}")
        rows = []
        labels = []
        for r, row in enumerate(reader):
            if len(row) != len(expected):
                raise ParseError(f"expected {len(expected)} cells, found {len(row)}", row=r)
            values = np.full(schema.n_features, np.nan)
            for j, cell in enumerate(row[:-1]):
                if cell == "":
                    continue
                try:
                    values[j] = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell!r}", row=r, column=header[j]) from None
            label = row[-1]
            if label not in schema.classes:
                raise ParseError(f"unknown label {label!r}", row=r, column=LABEL_COLUMN)
            rows.append(values)
            labels.append(schema.class_index(label))
    x = np.array(rows) if rows else np.empty((0, schema.n_features))
    y = np.array(labels, dtype=np.int64)
    return Dataset(schema, x, y)
