"""Training-set degradation: missingness, threshold noise, label flips.

These transforms simulate imperfect health records. They are only ever applied
to training splits; validation and test data stay clean so results remain
comparable across degradation levels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dtree import DecisionTreeSpec, load_tree
from ..errors import ConfigError
from ..schema import Dataset

KINDS = ("missingness", "anemia-noise", "lupus-label-noise")


@dataclass
class DegradationSpec:
    kind: str
    level: float
    seed: int = 0
    protected_features: list[str] | None = None
    noise_sigmas: dict[str, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown degradation kind {self.kind!r}")
        if not 0.0 <= self.level <= 1.0:
            raise ConfigError("degradation level must lie in [0, 1]")


def degrade(dataset: Dataset, spec: DegradationSpec,
            tree: DecisionTreeSpec | None = None) -> Dataset:
    use_case = dataset.schema.use_case
    if spec.kind == "anemia-noise" and use_case != "anemia":
        raise ConfigError("anemia-noise applies only to anemia datasets")
    if spec.kind == "lupus-label-noise" and use_case != "lupus":
        raise ConfigError("lupus-label-noise applies only to lupus datasets")
    if spec.level == 0.0 and spec.kind != "anemia-noise":
        return dataset.copy()

    rng = np.random.default_rng(spec.seed)
    if spec.kind == "missingness":
        return _missingness(dataset, spec, rng)
    if spec.kind == "anemia-noise":
        return _anemia_noise(dataset, spec, rng, tree)
    return _label_noise(dataset, spec, rng)


def _protected(dataset: Dataset, spec: DegradationSpec) -> set[str]:
    if spec.protected_features is not None:
        return set(spec.protected_features)
    return set(dataset.schema.raw.get("degradation", {}).get("missingness_protected", []))


def _missingness(dataset: Dataset, spec: DegradationSpec, rng) -> Dataset:
    schema = dataset.schema
    protected = _protected(dataset, spec)
    x = dataset.x.copy()
    for feat in schema.features:
        if feat.name in protected:
            continue
        j = schema.index(feat.name)
        present = np.flatnonzero(~np.isnan(x[:, j]))
        k = int(spec.level * len(present))
        if k:
            x[rng.choice(present, size=k, replace=False), j] = np.nan
    return Dataset(schema, x, dataset.y.copy())


def _anemia_noise(dataset: Dataset, spec: DegradationSpec, rng,
                  tree: DecisionTreeSpec | None) -> Dataset:
    schema = dataset.schema
    tree = tree or load_tree("anemia", schema=schema)
    cfg = schema.raw.get("degradation", {})
    sigmas = dict(cfg.get("noise_sigmas", {}))
    if spec.noise_sigmas:
        sigmas.update(spec.noise_sigmas)
    relabel_fraction = cfg.get("noise_relabel_fraction", 0.10)

    x = dataset.x.copy()
    y = dataset.y.copy()
    paths = tree.class_paths()
    inconclusive = schema.class_index(tree.inconclusive_label)
    no_anemia = schema.class_index("No anemia")
    gender_col = schema.index("gender")

    if spec.level > 0:
        for label, path in paths.items():
            c = schema.class_index(label)
            if c in (inconclusive, no_anemia):
                continue
            rows = np.flatnonzero(y == c)
            if len(rows) == 0:
                continue
            # a feature tested at two cutoffs appears once, with the redraw
            # split evenly between the cutoffs
            per_feature: dict[str, list[float]] = {}
            for feature, threshold in path:
                per_feature.setdefault(feature, [])
                if not np.isnan(threshold) and threshold not in per_feature[feature]:
                    per_feature[feature].append(threshold)
            for feature, thresholds in per_feature.items():
                j = schema.index(feature)
                sigma = sigmas.get(feature)
                if sigma is None:
                    raise ConfigError(f"no noise sigma configured for feature {feature!r}")
                k = int(spec.level * len(rows))
                if k == 0:
                    continue
                chosen = rng.choice(rows, size=k, replace=False)
                if len(thresholds) >= 2:
                    half = k // 2
                    x[chosen[:half], j] = rng.normal(min(thresholds), sigma, size=half)
                    x[chosen[half:], j] = rng.normal(max(thresholds), sigma, size=k - half)
                elif not thresholds:  # gender-dependent cutoff
                    node = next(n for n in tree.nodes.values()
                                if n.feature == feature and n.threshold_by is not None)
                    per_row = np.array([node.threshold_for(g) for g in x[chosen, gender_col]])
                    x[chosen, j] = rng.normal(per_row, sigma)
                else:
                    x[chosen, j] = rng.normal(thresholds[0], sigma, size=k)

    anemic = np.flatnonzero((y != inconclusive) & (y != no_anemia))
    k = int(relabel_fraction * len(anemic))
    if spec.level > 0 and k:
        y[rng.choice(anemic, size=k, replace=False)] = no_anemia
    return Dataset(schema, x, y)


def _label_noise(dataset: Dataset, spec: DegradationSpec, rng) -> Dataset:
    schema = dataset.schema
    if schema.n_classes != 2:
        raise ConfigError("label-flip noise requires a binary use case")
    y = dataset.y.copy()
    k = int(spec.level * len(y))
    if k:
        idx = rng.choice(len(y), size=k, replace=False)
        y[idx] = 1 - y[idx]
    return Dataset(schema, dataset.x.copy(), y)
