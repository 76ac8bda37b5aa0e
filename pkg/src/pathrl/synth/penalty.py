"""Per-feature acquisition penalty weights.

A feature's weighted score combines three 0-5 ratings; invasiveness dominates:
c = 2*invasiveness + 0.5*turnaround + 0.5*financial.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..schema import UseCaseSchema


def compute_penalty_weight(invasiveness: float, turnaround: float, financial: float) -> float:
    for name, rating in (("invasiveness", invasiveness), ("turnaround", turnaround),
                         ("financial", financial)):
        if not 0.0 <= rating <= 5.0:
            raise ConfigError(f"{name} rating {rating} outside [0, 5]")
    return 2.0 * invasiveness + 0.5 * turnaround + 0.5 * financial


@dataclass
class PenaltyWeightTable:
    ratings: dict[str, tuple[float, float, float]]

    def __post_init__(self):
        self.weights = {
            name: compute_penalty_weight(*r) for name, r in self.ratings.items()
        }

    def weight(self, feature: str) -> float:
        try:
            return self.weights[feature]
        except KeyError:
            raise ConfigError(f"no penalty weight for feature {feature!r}") from None

    def vector(self, schema: UseCaseSchema) -> np.ndarray:
        return np.array([self.weight(name) for name in schema.feature_names])

    def total(self, schema: UseCaseSchema) -> float:
        return float(self.vector(schema).sum())


def load_penalty_table(path: str | Path | None = None) -> PenaltyWeightTable:
    if path is not None:
        raw = json.loads(Path(path).read_text())
    else:
        raw = json.loads(resources.files("pathrl.configs").joinpath("penalty_weights.json").read_text())
    ratings = {
        name: (r["invasiveness"], r["turnaround"], r["financial"])
        for name, r in raw["ratings"].items()
    }
    return PenaltyWeightTable(ratings)
