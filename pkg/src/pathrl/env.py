"""Episodic diagnosis environment.

The agent starts from an all-unknown observation (every entry -1) and either
queries one feature per step or commits to a diagnosis. Querying reveals the
record's value; a value absent from the record marks the entry with the
distinct no-result code -2 (the query is spent either way). Re-querying an
already-queried feature ends the episode with a -1 penalty, as does a wrong
diagnosis; a correct diagnosis pays +1. Feature queries cost nothing in the
anemia use case and a penalty-weighted amount in the lupus use case. Anemia
episodes additionally truncate at a step cap. Transitions are deterministic
given the drawn record.

The two negative codes keep the observation a function that separates the
three situations a feature can be in (unqueried / queried with a value /
queried without a result). Collapsing the last two onto one sentinel would
make every deterministic policy re-issue its own query on records with a
missing value and terminate with the repeat penalty, so no greedy policy
could ever reach the inconclusive diagnosis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ProtocolError, SchemaMismatchError
from .schema import PatientRecord, UseCaseSchema, record_to_row
from .synth.penalty import PenaltyWeightTable, load_penalty_table

SENTINEL = -1.0          # feature not queried yet
MISSING_OBSERVED = -2.0  # feature queried, record had no value

# The anemia episode cap defaults to the labeling tree's deepest pathway (five
# queries plus the diagnosis) with a little slack; lupus has no cap.
DEFAULT_ANEMIA_CAP = 8


@dataclass(frozen=True)
class ActionSpace:
    features: int
    diagnoses: int

    @property
    def total(self) -> int:
        return self.features + self.diagnoses


@dataclass
class Observation:
    values: np.ndarray      # (m,) with -1 for unknown
    queried: set[int]


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    terminal: bool
    repeated_action: bool = False
    diagnosis: int | None = None
    truncated: bool = False


@dataclass
class EnvConfig:
    use_case: str
    lam: float = 9.0
    max_steps: int | None = None
    penalty_table: PenaltyWeightTable | None = None

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigError("lambda scaling factor must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")


class DiagnosisEnv:
    """Single-episode environment over one drawn record; reuse via reset()."""

    def __init__(self, schema: UseCaseSchema, config: EnvConfig | None = None):
        self.schema = schema
        self.m = schema.n_features
        self.n_classes = schema.n_classes
        config = config or EnvConfig(use_case=schema.use_case)
        if config.use_case != schema.use_case:
            raise ConfigError("environment config and schema disagree on use case")
        self.config = config
        if schema.use_case == "anemia":
            self.max_steps = (config.max_steps if config.max_steps is not None
                              else DEFAULT_ANEMIA_CAP)
            self.feature_rewards = np.zeros(self.m)
        else:
            self.max_steps = config.max_steps
            table = config.penalty_table or load_penalty_table()
            self.feature_rewards = -1.0 / (config.lam * table.vector(schema))
        self._row = np.full(self.m, np.nan)
        self._label: int | None = None
        self.obs = np.full(self.m, SENTINEL)
        self.queried: set[int] = set()
        self._steps = 0
        self.terminal = True  # not usable until reset

    def action_count(self) -> ActionSpace:
        return ActionSpace(features=self.m, diagnoses=self.n_classes)

    def reset(self, record: PatientRecord | np.ndarray, label: int | None = None) -> Observation:
        if isinstance(record, PatientRecord):
            row = record_to_row(self.schema, record)
            label = self.schema.class_index(record.label)
        else:
            row = np.asarray(record, dtype=np.float64)
            if row.shape != (self.m,):
                raise SchemaMismatchError(f"record width {row.shape} != {self.m}")
        self._row = row
        self._label = label
        self.obs = np.full(self.m, SENTINEL)
        self.queried = set()
        self._steps = 0
        self.terminal = False
        return Observation(values=self.obs.copy(), queried=set())

    def set_value(self, feature_index: int, value: float | None) -> None:
        """Inject a value for an upcoming query (interactive sessions)."""
        self._row[feature_index] = np.nan if value is None else value

    def step(self, action: int) -> StepOutcome:
        if self.terminal:
            raise ProtocolError("step() called on a terminated episode")
        if not 0 <= action < self.m + self.n_classes:
            raise ValueError(f"action index {action} out of range")
        self._steps += 1
        repeated = False
        diagnosis = None
        truncated = False

        if action >= self.m:
            diagnosis = action - self.m
            if self._label is None:
                reward = 0.0
            else:
                reward = 1.0 if diagnosis == self._label else -1.0
            self.terminal = True
        elif action in self.queried:
            repeated = True
            reward = -1.0
            self.terminal = True
        else:
            self.queried.add(action)
            value = self._row[action]
            self.obs[action] = MISSING_OBSERVED if np.isnan(value) else value
            reward = float(self.feature_rewards[action])
            if self.max_steps is not None and self._steps >= self.max_steps:
                # running out of steps is a failed episode and is penalized
                # like one; a zero-reward cap would make endless querying a
                # safe haven that strictly dominates risking a diagnosis
                truncated = True
                self.terminal = True
                reward = -1.0

        return StepOutcome(
            observation=self.obs.copy(),
            reward=reward,
            terminal=self.terminal,
            repeated_action=repeated,
            diagnosis=diagnosis,
            truncated=truncated,
        )


def feature_action(j: int) -> int:
    return j


def diagnose_action(schema: UseCaseSchema, class_index: int) -> int:
    return schema.n_features + class_index


def split_action(schema: UseCaseSchema, action: int) -> tuple[str, int]:
    if action < schema.n_features:
        return ("feature", action)
    return ("diagnose", action - schema.n_features)


def action_label(schema: UseCaseSchema, action: int) -> str:
    kind, idx = split_action(schema, action)
    return schema.feature_names[idx] if kind == "feature" else schema.classes[idx]
