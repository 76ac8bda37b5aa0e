"""Anemia cohort: class-conditional uniform sampling, derived labs, tree labels.

Each diagnosis class draws its feature values from uniform ranges configured in
the schema file; the ranges sit strictly on one side of the labeling tree's
thresholds, so the tree reproduces the generating class by construction.
Hematocrit, transferrin saturation, and red-cell count are computed from other
labs with the standard clinical identities rather than sampled. The
inconclusive class is carved afterwards by deleting a fraction of the values of
every non-protected feature and re-labeling.
"""
from __future__ import annotations

import numpy as np

from ..dtree import DecisionTreeSpec, load_tree, walk, walk_array
from ..errors import ConfigError
from ..schema import Dataset, PatientRecord, UseCaseSchema, load_schema, record_to_row

GENDER_MALE = 1.0
GENDER_FEMALE = 0.0


def _derived_order(schema: UseCaseSchema) -> list[tuple[str, dict]]:
    return list(schema.raw.get("derived", {}).items())


def derive_features_array(schema: UseCaseSchema, x: np.ndarray) -> None:
    """Fill derived columns in place from their input columns."""
    for name, rule in _derived_order(schema):
        j = schema.index(name)
        if rule["kind"] == "scale":
            x[:, j] = rule["factor"] * x[:, schema.index(rule["of"])]
        elif rule["kind"] == "ratio":
            den = x[:, schema.index(rule["den"])]
            if np.any(den == 0):
                raise ConfigError(f"zero denominator {rule['den']!r} while deriving {name!r}")
            x[:, j] = rule["factor"] * x[:, schema.index(rule["num"])] / den
        else:
            raise ConfigError(f"unknown derived-feature rule {rule['kind']!r}")


def derive_features(record: PatientRecord, schema: UseCaseSchema | None = None) -> PatientRecord:
    """Return a copy of `record` with the derived labs computed."""
    schema = schema or load_schema("anemia")
    for name, rule in _derived_order(schema):
        inputs = [rule["of"]] if rule["kind"] == "scale" else [rule["num"], rule["den"]]
        for inp in inputs:
            if record.get(inp) is None and not schema.features[schema.index(inp)].derived:
                raise ConfigError(f"cannot derive {name!r}: input {inp!r} missing")
    row = record_to_row(schema, record)[None, :]
    derive_features_array(schema, row)
    values = dict(record.values)
    for name, _ in _derived_order(schema):
        values[name] = float(row[0, schema.index(name)])
    return PatientRecord(values=values, label=record.label)


def label_with_tree(record: PatientRecord, tree: DecisionTreeSpec,
                    schema: UseCaseSchema | None = None) -> str:
    schema = schema or load_schema("anemia")
    return walk(tree, schema, record_to_row(schema, record))


def _class_range(schema: UseCaseSchema, label: str, feature: str):
    overrides = schema.raw["class_overrides"].get(label, {})
    if feature in overrides:
        return overrides[feature]
    return schema.raw["base_ranges"][feature]


def generate_anemia(n_per_class: int, schema: UseCaseSchema | None = None,
                    tree: DecisionTreeSpec | None = None, seed: int = 0) -> Dataset:
    """Draw `n_per_class` records for each generated class, labels included.

    The returned dataset is complete (no missing values) and ordered by class;
    every record's label equals what the labeling tree assigns to it.
    """
    schema = schema or load_schema("anemia")
    tree = tree or load_tree("anemia", schema=schema)
    if n_per_class < 0:
        raise ConfigError("n_per_class must be non-negative")
    missing = tree.feature_names() - set(schema.feature_names)
    if missing:
        raise ConfigError(f"tree references features outside the schema: {sorted(missing)}")
    generated = list(schema.raw["generated_classes"])
    uncovered = set(generated) - tree.leaf_labels()
    if uncovered:
        raise ConfigError(f"tree has no leaf for classes: {sorted(uncovered)}")

    rng = np.random.default_rng(seed)
    m = schema.n_features
    blocks = []
    labels = []
    p_male = schema.raw["gender_male_prevalence"]
    hb_ranges = schema.raw["hemoglobin_ranges"]
    for label in generated:
        x = np.empty((n_per_class, m))
        gender = (rng.random(n_per_class) < p_male).astype(float)
        x[:, schema.index("gender")] = gender
        hb_cfg = hb_ranges["No anemia"] if label == "No anemia" else hb_ranges["anemic"]
        hb = np.where(
            gender == GENDER_MALE,
            rng.uniform(*hb_cfg["male"], size=n_per_class),
            rng.uniform(*hb_cfg["female"], size=n_per_class),
        )
        x[:, schema.index("hemoglobin")] = hb
        for feat in schema.features:
            if feat.name in ("gender", "hemoglobin") or feat.derived:
                continue
            spec = _class_range(schema, label, feat.name)
            j = schema.index(feat.name)
            if isinstance(spec, dict):
                x[:, j] = spec["const"]
            else:
                lo, hi = spec
                if not lo < hi:
                    raise ConfigError(f"empty range for {feat.name!r} in class {label!r}")
                x[:, j] = rng.uniform(lo, hi, size=n_per_class)
        derive_features_array(schema, x)
        blocks.append(x)
        labels.append(np.full(n_per_class, schema.class_index(label), dtype=np.int64))

    if not blocks:
        return Dataset(schema, np.empty((0, m)), np.empty(0, dtype=np.int64))
    return Dataset(schema, np.concatenate(blocks), np.concatenate(labels))


def carve_inconclusive(dataset: Dataset, fraction: float | None = None,
                       protected: list[str] | None = None, seed: int = 0,
                       tree: DecisionTreeSpec | None = None) -> Dataset:
    """Delete a fraction of each non-protected feature's values, then re-label.

    Record count is unchanged; records whose tree path loses a value become the
    inconclusive class.
    """
    schema = dataset.schema
    cfg = schema.raw["inconclusive"]
    fraction = cfg["fraction"] if fraction is None else fraction
    protected = set(cfg["protected"] if protected is None else protected)
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError("fraction must lie in [0, 1]")
    tree = tree or load_tree("anemia", schema=schema)

    rng = np.random.default_rng(seed)
    x = dataset.x.copy()
    for feat in schema.features:
        if feat.name in protected:
            continue
        j = schema.index(feat.name)
        present = np.flatnonzero(~np.isnan(x[:, j]))
        k = int(fraction * len(present))
        if k:
            x[rng.choice(present, size=k, replace=False), j] = np.nan
    y = walk_array(tree, schema, x)
    return Dataset(schema, x, y)


def make_anemia_dataset(n_per_class: int = 10_000, seed: int = 0,
                        schema: UseCaseSchema | None = None,
                        tree: DecisionTreeSpec | None = None) -> Dataset:
    """Full pipeline: generate all classes, then carve the inconclusive class."""
    schema = schema or load_schema("anemia")
    tree = tree or load_tree("anemia", schema=schema)
    clean = generate_anemia(n_per_class, schema=schema, tree=tree, seed=seed)
    return carve_inconclusive(clean, seed=seed + 1, tree=tree)
