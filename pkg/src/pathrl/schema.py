"""Feature schemas, patient records, and the array-backed dataset container.

A use case (anemia or lupus) is described by a JSON schema file listing its
features in a fixed order and its diagnosis classes. Observations, network
inputs, and CSV columns all follow that feature order. Missing values are
represented as absent keys on `PatientRecord` and as NaN inside `Dataset`
arrays; the -1 sentinel exists only inside the environment's observation
encoding.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ConfigError, SchemaMismatchError

USE_CASES = ("anemia", "lupus")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # continuous | binary | categorical
    unit: str = ""
    derived: bool = False
    values: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "binary", "categorical"):
            raise ConfigError(f"unknown feature kind {self.kind!r} for {self.name!r}")


class UseCaseSchema:
    """Ordered feature list + class list for one use case, plus the raw config."""

    def __init__(self, raw: dict):
        self.raw = raw
        self.use_case: str = raw["use_case"]
        if self.use_case not in USE_CASES:
            raise ConfigError(f"unknown use case {self.use_case!r}")
        self.features: list[FeatureSpec] = [
            FeatureSpec(
                name=f["name"],
                kind=f["kind"],
                unit=f.get("unit", ""),
                derived=bool(f.get("derived", False)),
                values=tuple(f["values"]) if "values" in f else None,
            )
            for f in raw["features"]
        ]
        self.classes: list[str] = list(raw["classes"])
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate feature names in schema")
        if len(set(self.classes)) != len(self.classes):
            raise ConfigError("duplicate class names in schema")
        self._index = {n: i for i, n in enumerate(names)}
        self._class_index = {c: i for i, c in enumerate(self.classes)}

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaMismatchError(f"unknown feature {name!r}") from None

    def class_index(self, label: str) -> int:
        try:
            return self._class_index[label]
        except KeyError:
            raise SchemaMismatchError(f"unknown class {label!r}") from None

    def fingerprint(self) -> str:
        """Stable content hash used to match policy artifacts to schemas."""
        import hashlib

        blob = json.dumps(
            {"use_case": self.use_case, "features": self.feature_names, "classes": self.classes},
            sort_keys=True,
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class PatientRecord:
    """One synthetic patient: feature values (absent key = missing) + label."""

    values: dict[str, float]
    label: str

    def get(self, name: str) -> float | None:
        return self.values.get(name)


@dataclass
class Dataset:
    """Column-ordered array view of many records. NaN encodes missing."""

    schema: UseCaseSchema
    x: np.ndarray  # (n, m) float64
    y: np.ndarray  # (n,) int64 class indices

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.ndim != 2 or self.x.shape[1] != self.schema.n_features:
            raise SchemaMismatchError(
                f"dataset width {self.x.shape} does not match schema ({self.schema.n_features} features)"
            )
        if self.y.shape != (self.x.shape[0],):
            raise SchemaMismatchError("label vector length does not match data")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.schema.n_classes):
            raise SchemaMismatchError("label index out of range")

    def __len__(self) -> int:
        return self.x.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.schema, self.x[idx].copy(), self.y[idx].copy())

    def copy(self) -> "Dataset":
        return Dataset(self.schema, self.x.copy(), self.y.copy())

    def record(self, i: int) -> PatientRecord:
        row = self.x[i]
        values = {
            name: float(row[j])
            for j, name in enumerate(self.schema.feature_names)
            if not np.isnan(row[j])
        }
        return PatientRecord(values=values, label=self.schema.classes[int(self.y[i])])

    def records(self) -> Iterator[PatientRecord]:
        for i in range(len(self)):
            yield self.record(i)

    @classmethod
    def from_records(cls, schema: UseCaseSchema, records: list[PatientRecord]) -> "Dataset":
        n, m = len(records), schema.n_features
        x = np.full((n, m), np.nan)
        y = np.zeros(n, dtype=np.int64)
        for i, rec in enumerate(records):
            for name, value in rec.values.items():
                x[i, schema.index(name)] = value
            y[i] = schema.class_index(rec.label)
        return cls(schema, x, y)

    def class_counts(self) -> dict[str, int]:
        counts = np.bincount(self.y, minlength=self.schema.n_classes)
        return {c: int(counts[i]) for i, c in enumerate(self.schema.classes)}


def record_to_row(schema: UseCaseSchema, record: PatientRecord) -> np.ndarray:
    row = np.full(schema.n_features, np.nan)
    for name, value in record.values.items():
        row[schema.index(name)] = value
    return row


def _load_config(name: str) -> dict:
    path = resources.files("pathrl.configs").joinpath(name)
    return json.loads(path.read_text())


def load_schema(use_case: str, path: str | Path | None = None) -> UseCaseSchema:
    """Load the shipped schema for a use case, or a custom one from `path`."""
    if path is not None:
        return UseCaseSchema(json.loads(Path(path).read_text()))
    if use_case not in USE_CASES:
        raise ConfigError(f"unknown use case {use_case!r}")
    return UseCaseSchema(_load_config(f"{use_case}_schema.json"))
