"""Labeling decision tree: loading, validation, and record walking.

The tree is shipped as a data file so its thresholds stay configurable.
Internal nodes test one feature against a threshold; the root's threshold may
depend on an auxiliary feature (hemoglobin cutoffs differ by gender), in which
case both features are required to traverse the node. Walking a record with a
missing required value yields the inconclusive label instead of a leaf.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .schema import UseCaseSchema

_OPS = {
    "lt": lambda v, t: v < t,
    "le": lambda v, t: v <= t,
    "gt": lambda v, t: v > t,
    "ge": lambda v, t: v >= t,
}


@dataclass(frozen=True)
class TreeNode:
    name: str
    feature: str
    op: str
    threshold: float | None  # None when threshold_by is set
    threshold_by: tuple[str, dict[float, float]] | None
    on_true: object  # node name (str) or ("leaf", label)
    on_false: object

    def required_features(self) -> list[str]:
        req = [self.feature]
        if self.threshold_by is not None:
            req.append(self.threshold_by[0])
        return req

    def threshold_for(self, aux_value: float | None) -> float:
        if self.threshold_by is None:
            return float(self.threshold)
        _, cases = self.threshold_by
        key = float(aux_value)
        if key not in cases:
            raise ConfigError(f"no threshold case for auxiliary value {aux_value!r} at node {self.name!r}")
        return cases[key]


class DecisionTreeSpec:
    def __init__(self, raw: dict, schema: UseCaseSchema | None = None):
        self.raw = raw
        self.inconclusive_label: str = raw["inconclusive_label"]
        self.root: str = raw["root"]
        self.nodes: dict[str, TreeNode] = {}
        for name, spec in raw["nodes"].items():
            tb = None
            if "threshold_by" in spec:
                cases = {float(k): float(v) for k, v in spec["threshold_by"]["cases"].items()}
                tb = (spec["threshold_by"]["feature"], cases)
            if spec.get("op", "lt") not in _OPS:
                raise ConfigError(f"unknown comparison op {spec.get('op')!r} at node {name!r}")
            self.nodes[name] = TreeNode(
                name=name,
                feature=spec["feature"],
                op=spec.get("op", "lt"),
                threshold=spec.get("threshold"),
                threshold_by=tb,
                on_true=self._child(spec["true"]),
                on_false=self._child(spec["false"]),
            )
        self._validate(schema)

    @staticmethod
    def _child(spec):
        if isinstance(spec, dict):
            return ("leaf", spec["leaf"])
        return spec

    def _validate(self, schema: UseCaseSchema | None):
        if self.root not in self.nodes:
            raise ConfigError(f"root node {self.root!r} missing")
        seen: set[str] = set()
        stack = [self.root]
        while stack:
            name = stack.pop()
            if name in seen:
                raise ConfigError(f"node {name!r} reachable twice; tree must be acyclic")
            seen.add(name)
            node = self.nodes.get(name)
            if node is None:
                raise ConfigError(f"dangling child reference {name!r}")
            if schema is not None:
                for f in node.required_features():
                    schema.index(f)
            for child in (node.on_true, node.on_false):
                if isinstance(child, str):
                    stack.append(child)

    def leaf_labels(self) -> set[str]:
        labels = set()
        for node in self.nodes.values():
            for child in (node.on_true, node.on_false):
                if isinstance(child, tuple):
                    labels.add(child[1])
        return labels

    def feature_names(self) -> set[str]:
        used: set[str] = set()
        for node in self.nodes.values():
            used.update(node.required_features())
        return used

    def class_paths(self) -> dict[str, list[tuple[str, float]]]:
        """Leaf label -> (feature, threshold) pairs tested on the way down.

        Used by the noise injector, which redraws branch-feature values around
        node thresholds. Gender-dependent thresholds are reported as NaN and
        resolved per record; leaves reachable by several paths keep the first
        (shortest) path encountered breadth-first.
        """
        paths: dict[str, list[tuple[str, float]]] = {}
        queue: list[tuple[str, list[tuple[str, float]]]] = [(self.root, [])]
        while queue:
            name, prefix = queue.pop(0)
            node = self.nodes[name]
            here = prefix + [
                (node.feature, math.nan if node.threshold_by else float(node.threshold))
            ]
            for child in (node.on_true, node.on_false):
                if isinstance(child, tuple):
                    paths.setdefault(child[1], here)
                else:
                    queue.append((child, here))
        return paths


def walk(tree: DecisionTreeSpec, schema: UseCaseSchema, row: np.ndarray) -> str:
    """Label one record row (NaN = missing); missing required value -> inconclusive."""
    current = tree.root
    while True:
        node = tree.nodes[current]
        value = row[schema.index(node.feature)]
        if np.isnan(value):
            return tree.inconclusive_label
        if node.threshold_by is not None:
            aux = row[schema.index(node.threshold_by[0])]
            if np.isnan(aux):
                return tree.inconclusive_label
            threshold = node.threshold_for(aux)
        else:
            threshold = node.threshold
        child = node.on_true if _OPS[node.op](value, threshold) else node.on_false
        if isinstance(child, tuple):
            return child[1]
        current = child


def walk_array(tree: DecisionTreeSpec, schema: UseCaseSchema, x: np.ndarray) -> np.ndarray:
    """Vectorized walk over (n, m) rows; returns class indices under `schema`."""
    n = x.shape[0]
    out = np.full(n, schema.class_index(tree.inconclusive_label), dtype=np.int64)
    active = np.arange(n)
    frontier = [(tree.root, active)]
    while frontier:
        name, idx = frontier.pop()
        if len(idx) == 0:
            continue
        node = tree.nodes[name]
        values = x[idx, schema.index(node.feature)]
        ok = ~np.isnan(values)
        if node.threshold_by is not None:
            aux = x[idx, schema.index(node.threshold_by[0])]
            ok &= ~np.isnan(aux)
            thresholds = np.full(len(idx), np.nan)
            for aux_value, t in node.threshold_by[1].items():
                thresholds[aux == aux_value] = t
            ok &= ~np.isnan(thresholds)
        else:
            thresholds = node.threshold
        # rows failing `ok` keep the inconclusive default
        idx, values = idx[ok], values[ok]
        thresholds = thresholds[ok] if isinstance(thresholds, np.ndarray) else thresholds
        test = _OPS[node.op](values, thresholds)
        for child, mask in ((node.on_true, test), (node.on_false, ~test)):
            sub = idx[mask]
            if isinstance(child, tuple):
                out[sub] = schema.class_index(child[1])
            else:
                frontier.append((child, sub))
    return out


def load_tree(use_case: str = "anemia", path: str | Path | None = None,
              schema: UseCaseSchema | None = None) -> DecisionTreeSpec:
    if path is not None:
        raw = json.loads(Path(path).read_text())
    else:
        raw = json.loads(resources.files("pathrl.configs").joinpath(f"{use_case}_tree.json").read_text())
    return DecisionTreeSpec(raw, schema)
