"""Comparison agents and classifiers.

The random agent draws uniformly from the full action set each step. The
tree-based agent replays the labeling tree against the environment, querying
exactly the features on the record's tree path. The classifier baselines see
the whole feature vector at once: a from-scratch CART tree and a softmax
feed-forward network built on the same dense-network kernel as the Q-learner.
A one-nearest-neighbor imputer supports the lupus robustness runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dtree import DecisionTreeSpec, load_tree
from .env import MISSING_OBSERVED, DiagnosisEnv, EnvConfig
from .errors import ConfigError
from .metrics import EpisodeRecord
from .qnet import Adam, Network
from .schema import Dataset, UseCaseSchema

MISSING_CODE = -1.0  # classifier-side encoding of absent values


# -- sequential agents -------------------------------------------------------


def random_agent_step(rng: np.random.Generator, n_actions: int) -> int:
    """Uniform over the full action set, independent each step."""
    return int(rng.integers(0, n_actions))


def run_random_agent(dataset: Dataset, seed: int = 0,
                     config: EnvConfig | None = None) -> list[EpisodeRecord]:
    schema = dataset.schema
    rng = np.random.default_rng(seed)
    env = DiagnosisEnv(schema, config or EnvConfig(use_case=schema.use_case))
    m, n_classes = schema.n_features, schema.n_classes
    n_actions = m + n_classes
    episodes = []
    for i in range(len(dataset)):
        env.reset(dataset.x[i], int(dataset.y[i]))
        e = EpisodeRecord(actions=[], true_class=int(dataset.y[i]))
        while not env.terminal:
            a = random_agent_step(rng, n_actions)
            outcome = env.step(a)
            e.actions.append(a)
            e.values.append(float(dataset.x[i, a]) if a < m else math.nan)
            e.rewards.append(outcome.reward)
            if outcome.terminal:
                e.diagnosis = outcome.diagnosis
                e.repeated = outcome.repeated_action
                e.truncated = outcome.truncated
        scores = np.full(n_classes, 1.0 / n_classes)
        if e.diagnosis is not None:
            scores = np.zeros(n_classes)
            scores[e.diagnosis] = 1.0
        e.diag_scores = scores
        episodes.append(e)
    return episodes


class TreeAgent:
    """Replays the labeling decision tree step by step from the observation.

    At each call it re-walks the tree using only queried values: it asks for
    the first unqueried feature the current node needs, commits to the
    inconclusive class when a needed value was queried but came back missing,
    and commits to the leaf label when a leaf is reached.
    """

    def __init__(self, schema: UseCaseSchema, tree: DecisionTreeSpec | None = None):
        if schema.use_case != "anemia":
            raise ConfigError("the tree-based agent supports only the anemia use case")
        self.schema = schema
        self.tree = tree or load_tree("anemia", schema=schema)
        self._inconclusive = schema.class_index(self.tree.inconclusive_label)

    @classmethod
    def from_raw(cls, schema: UseCaseSchema, raw: dict) -> "TreeAgent":
        return cls(schema, DecisionTreeSpec(raw, schema))

    def act(self, obs: np.ndarray, queried: set[int] | np.ndarray) -> int:
        schema = self.schema
        m = schema.n_features
        if isinstance(queried, np.ndarray):
            is_queried = lambda j: bool(queried[j])
        else:
            is_queried = lambda j: j in queried
        current = self.tree.root
        while True:
            node = self.tree.nodes[current]
            for name in node.required_features():
                j = schema.index(name)
                if not is_queried(j):
                    return j
                if obs[j] == MISSING_OBSERVED:
                    return m + self._inconclusive
            value = obs[schema.index(node.feature)]
            if node.threshold_by is not None:
                threshold = node.threshold_for(obs[schema.index(node.threshold_by[0])])
            else:
                threshold = node.threshold
            ok = {"lt": value < threshold, "le": value <= threshold,
                  "gt": value > threshold, "ge": value >= threshold}[node.op]
            child = node.on_true if ok else node.on_false
            if isinstance(child, tuple):
                return m + schema.class_index(child[1])
            current = child


def run_tree_agent(dataset: Dataset, tree: DecisionTreeSpec | None = None,
                   config: EnvConfig | None = None) -> list[EpisodeRecord]:
    from .drl import _evaluate_tree  # shares the rollout with artifact evaluation
    from .qnet import tree_artifact

    schema = dataset.schema
    tree = tree or load_tree("anemia", schema=schema)
    artifact = tree_artifact(tree.raw, schema)
    return _evaluate_tree(artifact, dataset,
                          config or EnvConfig(use_case=schema.use_case))


# -- whole-vector classifiers -------------------------------------------------


def encode_missing(x: np.ndarray) -> np.ndarray:
    out = x.copy()
    out[np.isnan(out)] = MISSING_CODE
    return out


@dataclass
class _TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    counts: np.ndarray | None = None  # leaves only


class TreeClassifier:
    """CART with Gini impurity, binary numeric splits, deterministic ties."""

    def __init__(self, max_depth: int | None = None, min_samples_leaf: int = 1):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.nodes: list[_TreeNode] = []
        self.n_classes = 0

    @staticmethod
    def _gini(counts: np.ndarray) -> float:
        n = counts.sum()
        if n == 0:
            return 0.0
        p = counts / n
        return float(1.0 - (p * p).sum())

    def _best_split(self, x: np.ndarray, y: np.ndarray):
        n, m = x.shape
        best = None  # (impurity, feature, threshold)
        counts_total = np.bincount(y, minlength=self.n_classes).astype(float)
        for j in range(m):
            order = np.argsort(x[:, j], kind="mergesort")
            xs, ys = x[order, j], y[order]
            onehot = np.zeros((n, self.n_classes))
            onehot[np.arange(n), ys] = 1.0
            left = np.cumsum(onehot, axis=0)
            boundary = np.flatnonzero(np.diff(xs) > 0)
            if len(boundary) == 0:
                continue
            nl = boundary + 1.0
            nr = n - nl
            valid = (nl >= self.min_samples_leaf) & (nr >= self.min_samples_leaf)
            if not valid.any():
                continue
            lc = left[boundary]
            rc = counts_total - lc
            gini_l = 1.0 - ((lc / nl[:, None]) ** 2).sum(axis=1)
            gini_r = 1.0 - ((rc / nr[:, None]) ** 2).sum(axis=1)
            impurity = (nl * gini_l + nr * gini_r) / n
            impurity[~valid] = np.inf
            k = int(np.argmin(impurity))
            if np.isinf(impurity[k]):
                continue
            threshold = (xs[boundary[k]] + xs[boundary[k] + 1]) / 2.0
            cand = (float(impurity[k]), j, float(threshold))
            if best is None or cand[0] < best[0] - 1e-12:
                best = cand
        return best

    def _grow(self, x: np.ndarray, y: np.ndarray, depth: int) -> int:
        counts = np.bincount(y, minlength=self.n_classes).astype(float)
        node_id = len(self.nodes)
        self.nodes.append(_TreeNode(counts=counts))
        pure = counts.max() == counts.sum()
        if pure or len(y) < 2 * self.min_samples_leaf or \
                (self.max_depth is not None and depth >= self.max_depth):
            return node_id
        parent_gini = self._gini(counts)
        best = self._best_split(x, y)
        if best is None or best[0] >= parent_gini - 1e-12:
            return node_id
        _, j, threshold = best
        mask = x[:, j] <= threshold
        node = self.nodes[node_id]
        node.feature, node.threshold, node.counts = j, threshold, None
        node.left = self._grow(x[mask], y[mask], depth + 1)
        node.right = self._grow(x[~mask], y[~mask], depth + 1)
        return node_id

    def fit(self, x: np.ndarray, y: np.ndarray, n_classes: int) -> "TreeClassifier":
        if len(x) == 0:
            raise ConfigError("cannot fit a tree on an empty training set")
        self.n_classes = n_classes
        self.nodes = []
        self._grow(encode_missing(x), np.asarray(y, dtype=np.int64), 0)
        return self

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = encode_missing(np.atleast_2d(x))
        out = np.zeros((len(x), self.n_classes))
        for i, row in enumerate(x):
            node = self.nodes[0]
            while node.counts is None:
                node = self.nodes[node.left if row[node.feature] <= node.threshold else node.right]
            out[i] = node.counts / node.counts.sum()
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)

    def to_json(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "nodes": [
                {
                    "feature": n.feature,
                    "threshold": n.threshold,
                    "left": n.left,
                    "right": n.right,
                    "counts": None if n.counts is None else n.counts.tolist(),
                }
                for n in self.nodes
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TreeClassifier":
        clf = cls(max_depth=doc["max_depth"], min_samples_leaf=doc["min_samples_leaf"])
        clf.n_classes = doc["n_classes"]
        clf.nodes = [
            _TreeNode(
                feature=n["feature"], threshold=n["threshold"], left=n["left"],
                right=n["right"],
                counts=None if n["counts"] is None else np.array(n["counts"]),
            )
            for n in doc["nodes"]
        ]
        return clf


def fit_tree_classifier(train: Dataset, max_depth: int | None = None,
                        min_samples_leaf: int = 1) -> TreeClassifier:
    return TreeClassifier(max_depth, min_samples_leaf).fit(
        train.x, train.y, train.schema.n_classes)


class FFNNClassifier:
    """Softmax classifier trained with cross-entropy on standardized inputs."""

    def __init__(self, hidden: tuple[int, ...] = (64, 64), learning_rate: float = 1e-3,
                 epochs: int = 30, batch_size: int = 64, seed: int = 0):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.net: Network | None = None

    def fit(self, x: np.ndarray, y: np.ndarray, n_classes: int) -> "FFNNClassifier":
        rng = np.random.default_rng(self.seed)
        x = encode_missing(x)
        scale = x.std(axis=0)
        scale[scale == 0] = 1.0
        # standardize into a strictly positive band (mean maps to +3) so the
        # negative missing code stays far from every observed value
        shift = x.mean(axis=0) - 3.0 * scale
        self.net = Network(x.shape[1], n_classes, self.hidden, dueling=False,
                           rng=rng, input_shift=shift, input_scale=scale)
        optimizer = Adam(self.net, learning_rate=self.learning_rate)
        n = len(x)
        y = np.asarray(y, dtype=np.int64)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                logits, cache = self.net.forward_cache(x[idx])
                probs = _stable_softmax(logits)
                dlogits = probs
                dlogits[np.arange(len(idx)), y[idx]] -= 1.0
                dlogits /= len(idx)
                optimizer.step(self.net.backward(cache, dlogits))
        return self

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _stable_softmax(self.net.forward(encode_missing(np.atleast_2d(x))))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)


def _stable_softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def fit_ffnn_classifier(train: Dataset, **kwargs) -> FFNNClassifier:
    return FFNNClassifier(**kwargs).fit(train.x, train.y, train.schema.n_classes)


# -- imputation ----------------------------------------------------------------


def knn_impute(dataset: Dataset, reference: Dataset, k: int = 1,
               chunk: int = 256) -> tuple[Dataset, np.ndarray]:
    """Fill missing values from the nearest reference record.

    Distance is Euclidean over features present in both records. Each missing
    feature takes its value from the nearest reference that has that feature.
    Returns the imputed dataset and a flag vector marking records that could
    not be imputed (no co-present features at all).
    """
    if k != 1:
        raise ConfigError("only k=1 is supported")
    x = dataset.x.copy()
    ref = reference.x
    flags = np.zeros(len(x), dtype=bool)
    todo = np.flatnonzero(np.isnan(x).any(axis=1))
    ref_missing = np.isnan(ref)
    ref_filled = np.where(ref_missing, 0.0, ref)
    for start in range(0, len(todo), chunk):
        rows = todo[start:start + chunk]
        block = x[rows]
        blk_missing = np.isnan(block)
        blk_filled = np.where(blk_missing, 0.0, block)
        # squared distances over co-present features, all pairs in the chunk
        co = (~blk_missing[:, None, :]) & (~ref_missing[None, :, :])
        diff = blk_filled[:, None, :] - ref_filled[None, :, :]
        dist = np.where(co, diff, 0.0) ** 2
        d2 = dist.sum(axis=2)
        any_co = co.any(axis=2)
        d2[~any_co] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")
        for r, row_idx in enumerate(rows):
            if not any_co[r].any():
                flags[row_idx] = True
                continue
            for j in np.flatnonzero(blk_missing[r]):
                for cand in order[r]:
                    if d2[r, cand] == np.inf:
                        break
                    if not ref_missing[cand, j]:
                        x[row_idx, j] = ref[cand, j]
                        break
                else:
                    flags[row_idx] = True
    return Dataset(dataset.schema, x, dataset.y.copy()), flags
