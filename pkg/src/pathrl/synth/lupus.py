"""Lupus cohort: prevalence-driven draws and weighted-criteria labeling.

Diagnosis uses an entry criterion plus a category score: within each criteria
category only the highest weight among the patient's positive findings counts,
and the diagnosis is positive when the category sum reaches the threshold.
Records failing the entry criterion are negative regardless of score.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..schema import Dataset, PatientRecord, UseCaseSchema, load_schema, record_to_row

NO_LUPUS = "No lupus"
LUPUS = "Lupus"


@dataclass(frozen=True)
class CriteriaItem:
    feature: str
    weights: dict[float, float]  # feature value -> criteria weight


class LupusCriteria:
    def __init__(self, raw: dict):
        self.raw = raw
        self.entry_feature: str = raw["entry_feature"]
        self.threshold: float = float(raw["threshold"])
        if self.threshold <= 0:
            raise ConfigError("criteria threshold must be positive")
        self.categories: dict[str, list[CriteriaItem]] = {}
        seen: set[str] = set()
        for cat, items in raw["categories"].items():
            parsed = []
            for item in items:
                weights = {float(v): float(w) for v, w in item["weights"].items()}
                if any(w <= 0 for w in weights.values()):
                    raise ConfigError(f"criteria weights must be positive ({item['feature']})")
                if item["feature"] in seen:
                    raise ConfigError(f"feature {item['feature']!r} appears in two categories")
                seen.add(item["feature"])
                parsed.append(CriteriaItem(item["feature"], weights))
            self.categories[cat] = parsed

    def max_weight(self, feature: str) -> float:
        for items in self.categories.values():
            for item in items:
                if item.feature == feature:
                    return max(item.weights.values())
        raise ConfigError(f"feature {feature!r} not in criteria")

    def scored_features(self) -> list[str]:
        return [item.feature for items in self.categories.values() for item in items]


def load_criteria(path: str | Path | None = None) -> LupusCriteria:
    if path is not None:
        return LupusCriteria(json.loads(Path(path).read_text()))
    return LupusCriteria(json.loads(resources.files("pathrl.configs").joinpath("lupus_criteria.json").read_text()))


def score_lupus(record: PatientRecord, criteria: LupusCriteria | None = None,
                schema: UseCaseSchema | None = None) -> tuple[float, str]:
    """Weighted criteria score and label for one record.

    Missing values count as absent findings. A negative or missing entry
    criterion forces the negative label whatever the score.
    """
    criteria = criteria or load_criteria()
    schema = schema or load_schema("lupus")
    row = record_to_row(schema, record)[None, :]
    score = score_lupus_array(schema, row, criteria)[0]
    entry = record.get(criteria.entry_feature)
    label = LUPUS if (entry == 1 and score >= criteria.threshold) else NO_LUPUS
    return float(score), label


def score_lupus_array(schema: UseCaseSchema, x: np.ndarray,
                      criteria: LupusCriteria) -> np.ndarray:
    n = x.shape[0]
    total = np.zeros(n)
    for items in criteria.categories.values():
        best = np.zeros(n)
        for item in items:
            col = x[:, schema.index(item.feature)]
            w = np.zeros(n)
            for value, weight in item.weights.items():
                w[col == value] = weight
            np.maximum(best, w, out=best)
        total += best
    return total


def label_lupus_array(schema: UseCaseSchema, x: np.ndarray,
                      criteria: LupusCriteria) -> np.ndarray:
    score = score_lupus_array(schema, x, criteria)
    entry = x[:, schema.index(criteria.entry_feature)] == 1
    positive = entry & (score >= criteria.threshold)
    y = np.where(positive, schema.class_index(LUPUS), schema.class_index(NO_LUPUS))
    return y.astype(np.int64)


def negative_prevalences(schema: UseCaseSchema, criteria: LupusCriteria,
                         cap: float = 0.5) -> dict[str, object]:
    """Prevalence table for the entry-negative cohort.

    Features with larger criteria weights are made rarer (prevalence
    proportional to the inverse weight), scaled so the cohort's aggregate
    positivity matches the entry-positive cohort. Categorical value splits are
    uniform across positive values.
    """
    positive = schema.raw["positive_prevalence"]
    total_positive = 0.0
    inv = {}
    for name, prev in positive.items():
        total_positive += sum(prev.values()) if isinstance(prev, dict) else prev
        inv[name] = 1.0 / criteria.max_weight(name)
    scale = total_positive / sum(inv.values())
    out: dict[str, object] = {}
    for name, prev in positive.items():
        p = min(cap, scale * inv[name])
        if isinstance(prev, dict):
            values = list(prev)
            out[name] = {v: p / len(values) for v in values}
        else:
            out[name] = p
    return out


def _draw_features(rng: np.random.Generator, schema: UseCaseSchema,
                   prevalence: dict[str, object], n: int) -> np.ndarray:
    x = np.zeros((n, schema.n_features))
    for name, prev in prevalence.items():
        j = schema.index(name)
        if isinstance(prev, dict):
            values = [0.0] + [float(v) for v in prev]
            probs = [p for p in prev.values()]
            p0 = 1.0 - sum(probs)
            if p0 < 0 or any(not 0 <= p <= 1 for p in probs):
                raise ConfigError(f"prevalence distribution for {name!r} is not a probability vector")
            x[:, j] = rng.choice(values, size=n, p=[p0] + probs)
        else:
            if not 0.0 <= prev <= 1.0:
                raise ConfigError(f"prevalence for {name!r} outside [0, 1]")
            x[:, j] = (rng.random(n) < prev).astype(float)
    return x


def generate_lupus(n_positive_ana: int, n_negative_ana: int,
                   prevalences: dict[str, object] | None = None,
                   criteria: LupusCriteria | None = None, seed: int = 0,
                   schema: UseCaseSchema | None = None) -> Dataset:
    """Two-cohort generation: entry-positive and entry-negative records."""
    schema = schema or load_schema("lupus")
    criteria = criteria or load_criteria()
    if n_positive_ana < 0 or n_negative_ana < 0:
        raise ConfigError("cohort sizes must be non-negative")
    positive_prev = dict(prevalences or schema.raw["positive_prevalence"])
    expected = {f.name for f in schema.features if f.name != criteria.entry_feature}
    if set(positive_prev) != expected:
        missing = sorted(expected - set(positive_prev))
        extra = sorted(set(positive_prev) - expected)
        raise ConfigError(f"prevalence table mismatch (missing {missing}, unexpected {extra})")

    rng = np.random.default_rng(seed)
    entry_col = schema.index(criteria.entry_feature)

    xp = _draw_features(rng, schema, positive_prev, n_positive_ana)
    xp[:, entry_col] = 1.0
    xn = _draw_features(rng, schema, negative_prevalences(schema, criteria), n_negative_ana)
    xn[:, entry_col] = 0.0

    x = np.concatenate([xp, xn])
    y = label_lupus_array(schema, x, criteria)
    return Dataset(schema, x, y)


def make_lupus_dataset(n_positive_ana: int = 50_000, n_negative_ana: int = 20_000,
                       seed: int = 0, schema: UseCaseSchema | None = None,
                       criteria: LupusCriteria | None = None) -> Dataset:
    return generate_lupus(n_positive_ana, n_negative_ana, seed=seed,
                          schema=schema, criteria=criteria)
