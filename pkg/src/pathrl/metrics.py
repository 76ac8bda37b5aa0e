"""Evaluation quantities for diagnostic episodes.

Conventions, applied consistently across agents and reports:

- accuracy is the fraction of ALL episodes whose terminal action is the
  correct diagnosis; episodes that ended without any diagnosis (step-cap
  truncation or a repeated query) count as incorrect.
- mean episode length counts the feature-acquisition actions an episode
  performed; the terminal decision (diagnosis or terminating repeat) is not
  a measurement and is not counted.
- the pathway score of an episode discounts the summed penalty weights of its
  queried features against the all-features total; the average pathway score
  and the weighted accuracy/pathway harmonic mean only consider episodes that
  reached a diagnosis.
- one-vs-rest macro F1 and ROC-AUC use the terminal softmax over
  diagnostic-action values as the per-class score.

Rates are stored in [0, 1]; multiply by 100 for display.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError
from .schema import UseCaseSchema
from .synth.penalty import PenaltyWeightTable


@dataclass
class EpisodeRecord:
    """One evaluated episode: what was asked, seen, decided, and rewarded."""

    actions: list[int]
    true_class: int
    diagnosis: int | None = None
    truncated: bool = False
    repeated: bool = False
    values: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    diag_scores: np.ndarray | None = None

    @property
    def feature_count(self) -> int:
        # A truncated episode's last action is still a query it performed;
        # otherwise the last action is the terminal decision.
        return len(self.actions) if self.truncated else max(0, len(self.actions) - 1)

    @property
    def correct(self) -> bool:
        return self.diagnosis is not None and self.diagnosis == self.true_class


def accuracy(episodes: list[EpisodeRecord]) -> float:
    if not episodes:
        raise ConfigError("no episodes")
    return float(np.mean([e.correct for e in episodes]))


def mean_episode_length(episodes: list[EpisodeRecord]) -> float:
    if not episodes:
        raise ConfigError("no episodes")
    return float(np.mean([e.feature_count for e in episodes]))


def _present_classes(episodes: list[EpisodeRecord], n_classes: int) -> list[int]:
    present = sorted({e.true_class for e in episodes})
    absent = set(range(n_classes)) - set(present)
    if absent:
        warnings.warn(f"classes absent from truth excluded from macro average: {sorted(absent)}")
    return present


def _confusion_counts(episodes: list[EpisodeRecord], c: int) -> tuple[int, int, int]:
    tp = sum(1 for e in episodes if e.diagnosis == c and e.true_class == c)
    fp = sum(1 for e in episodes if e.diagnosis == c and e.true_class != c)
    fn = sum(1 for e in episodes if e.true_class == c and e.diagnosis != c)
    return tp, fp, fn


def macro_f1(episodes: list[EpisodeRecord], n_classes: int) -> float:
    scores = []
    for c in _present_classes(episodes, n_classes):
        tp, fp, fn = _confusion_counts(episodes, c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        scores.append(f1)
    return float(np.mean(scores))


def _binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def macro_roc_auc(episodes: list[EpisodeRecord], n_classes: int) -> float:
    if any(e.diag_scores is None for e in episodes):
        raise ConfigError("episodes lack diagnostic score vectors")
    scores = np.array([e.diag_scores for e in episodes])
    truth = np.array([e.true_class for e in episodes])
    aucs = []
    for c in _present_classes(episodes, n_classes):
        aucs.append(_binary_auc(scores[:, c], truth == c))
    return float(np.mean(aucs))


def pathway_score(actions: list[int], weights: np.ndarray) -> float:
    """1 - (summed weights of queried features) / (all-features total).

    `actions` is the full episode action sequence; indices below the feature
    count are feature actions and are summed once per occurrence.
    """
    m = len(weights)
    spent = sum(float(weights[a]) for a in actions if a < m)
    return 1.0 - spent / float(weights.sum())


def aps(episodes: list[EpisodeRecord], weights: np.ndarray) -> float:
    diagnosed = [e for e in episodes if e.diagnosis is not None]
    if not diagnosed:
        raise ConfigError("no diagnosed episodes to score")
    return float(np.mean([pathway_score(e.actions, weights) for e in diagnosed]))


def wpahm(accuracy_value: float, aps_value: float,
          w_accuracy: float = 0.9, w_score: float = 0.1) -> float:
    if accuracy_value == 0.0 or aps_value == 0.0:
        return 0.0
    return (w_accuracy + w_score) / (w_accuracy / accuracy_value + w_score / aps_value)


def classification_report(episodes: list[EpisodeRecord], class_names: list[str]) -> dict:
    """Per-class precision/recall/F1/support; supports sum to the episode count."""
    report = {}
    for c, name in enumerate(class_names):
        tp, fp, fn = _confusion_counts(episodes, c)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        report[name] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": support,
        }
    return report


@dataclass
class EvalReport:
    accuracy: float
    mean_episode_length: float
    macro_f1: float
    macro_roc_auc: float
    aps: float | None
    wpahm: float | None
    per_class: dict
    n_episodes: int
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mean_episode_length": self.mean_episode_length,
            "macro_f1": self.macro_f1,
            "macro_roc_auc": self.macro_roc_auc,
            "aps": self.aps,
            "wpahm": self.wpahm,
            "per_class": self.per_class,
            "n_episodes": self.n_episodes,
            "metadata": self.metadata,
        }


def build_report(episodes: list[EpisodeRecord], schema: UseCaseSchema,
                 penalty_table: PenaltyWeightTable | None = None,
                 metadata: dict | None = None) -> EvalReport:
    acc = accuracy(episodes)
    aps_value = wpahm_value = None
    if penalty_table is not None:
        weights = penalty_table.vector(schema)
        aps_value = aps(episodes, weights)
        wpahm_value = wpahm(acc, aps_value)
    meta = {"score_convention": "softmax over terminal diagnostic-action values"}
    meta.update(metadata or {})
    return EvalReport(
        accuracy=acc,
        mean_episode_length=mean_episode_length(episodes),
        macro_f1=macro_f1(episodes, schema.n_classes),
        macro_roc_auc=macro_roc_auc(episodes, schema.n_classes),
        aps=aps_value,
        wpahm=wpahm_value,
        per_class=classification_report(episodes, schema.classes),
        n_episodes=len(episodes),
        metadata=meta,
    )
