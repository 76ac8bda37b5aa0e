"""Q-learning trainer: epsilon-greedy interaction, replay, targets, checkpoints.

The four algorithm variants come from two independent switches. `double`
selects the bootstrap action with the online network but values it with the
target network; `dueling` changes the network head; `per` swaps uniform replay
for prioritized replay. Training is single-threaded and fully determined by
the seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .env import MISSING_OBSERVED, DiagnosisEnv, EnvConfig
from .errors import ConfigError, SchemaMismatchError
from .metrics import EpisodeRecord, accuracy, aps, build_report, mean_episode_length, wpahm
from .qnet import Adam, Network, PolicyArtifact, copy_weights, input_scaling_from_schema, qnet_artifact
from .replay import ReplayBuffer
from .schema import Dataset, UseCaseSchema
from .synth.penalty import PenaltyWeightTable, load_penalty_table

ALGORITHMS = {
    "dqn": (False, False),
    "ddqn": (True, False),
    "dueling": (False, True),
    "dueling-ddqn": (True, True),
}


@dataclass
class TrainConfig:
    use_case: str
    total_timesteps: int
    seed: int = 0
    buffer_size: int = 1_000_000
    learning_rate: float = 1e-4
    target_update_interval: int = 10_000
    learning_starts: int = 50_000
    epsilon_final: float = 0.05
    gamma: float = 0.99
    train_frequency: int = 4
    batch_size: int = 32
    exploration_fraction: float = 0.1
    double: bool = False
    dueling: bool = False
    per: bool = False
    per_alpha: float = 0.6
    per_beta0: float = 0.4
    per_beta_final: float = 1.0
    per_eps: float = 1e-6
    hidden: tuple[int, ...] = (64, 64)
    n_checkpoints: int = 20
    lam: float = 9.0
    max_steps: int | None = None
    input_spread: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        if not 0.0 <= self.epsilon_final <= 1.0:
            raise ConfigError("epsilon_final must lie in [0, 1]")
        if self.total_timesteps < 0 or self.batch_size < 1 or self.train_frequency < 1:
            raise ConfigError("invalid training schedule")
        if not 0.0 < self.exploration_fraction <= 1.0:
            raise ConfigError("exploration_fraction must lie in (0, 1]")

    @classmethod
    def for_algorithm(cls, algo: str, per: bool = False, **kwargs) -> "TrainConfig":
        if algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algo!r} (choose from {sorted(ALGORITHMS)})")
        double, dueling = ALGORITHMS[algo]
        return cls(double=double, dueling=dueling, per=per, **kwargs)


@dataclass
class Checkpoint:
    artifact: PolicyArtifact
    timestep: int
    validation_accuracy: float
    validation_wpahm: float | None = None
    validation_mean_episode_length: float | None = None


def epsilon_at(t: int, cfg: TrainConfig) -> float:
    horizon = max(1, int(cfg.exploration_fraction * cfg.total_timesteps))
    frac = min(1.0, t / horizon)
    return 1.0 + frac * (cfg.epsilon_final - 1.0)


def td_targets(batch: dict, policy: Network, target: Network, cfg: TrainConfig) -> np.ndarray:
    """Bootstrap targets: r on terminal transitions, r + gamma * next value else.

    The bootstrap max runs over actions that are not guaranteed-terminal
    re-queries in the successor state (already-queried features, identified by
    their observation entry having left the unqueried sentinel). Re-querying
    pays exactly -1 and terminates, which never beats the best diagnostic
    action, so the restricted max has the same fixed point as the full max but
    avoids bootstrapping through untrained estimates of those dead actions.
    """
    q_target = target.forward(batch["next_obs"])
    m = target.n_inputs
    repeat_mask = batch["next_obs"][:, :m] != -1.0
    q_target[:, :m][repeat_mask] = -1.0
    if cfg.double:
        q_policy = policy.forward(batch["next_obs"]).copy()
        q_policy[:, :m][repeat_mask] = -1.0
        best = np.argmax(q_policy, axis=1)
        next_value = q_target[np.arange(len(best)), best]
    else:
        next_value = q_target.max(axis=1)
    return batch["rewards"] + cfg.gamma * next_value * ~batch["terminal"]


def _checkpoint_steps(cfg: TrainConfig) -> list[int]:
    if cfg.total_timesteps == 0:
        return [0]
    n = max(1, cfg.n_checkpoints)
    return sorted({max(1, round(cfg.total_timesteps * k / n)) for k in range(1, n + 1)})


def _validation_checkpoint(net: Network, schema: UseCaseSchema, validation: Dataset,
                           cfg: TrainConfig, penalty_table: PenaltyWeightTable | None,
                           t: int, training_meta: dict) -> Checkpoint:
    artifact = qnet_artifact(net.clone(), schema, {**training_meta, "timestep": t})
    episodes = evaluate_policy(artifact, validation,
                               config=_env_config(schema, cfg, penalty_table))
    acc = accuracy(episodes)
    wp = None
    if schema.use_case == "lupus" and penalty_table is not None:
        wp = wpahm(acc, aps(episodes, penalty_table.vector(schema)))
    return Checkpoint(
        artifact=artifact,
        timestep=t,
        validation_accuracy=acc,
        validation_wpahm=wp,
        validation_mean_episode_length=mean_episode_length(episodes),
    )


def _env_config(schema: UseCaseSchema, cfg: TrainConfig,
                penalty_table: PenaltyWeightTable | None) -> EnvConfig:
    return EnvConfig(use_case=schema.use_case, lam=cfg.lam, max_steps=cfg.max_steps,
                     penalty_table=penalty_table)


def train(train_data: Dataset, validation_data: Dataset, cfg: TrainConfig,
          penalty_table: PenaltyWeightTable | None = None) -> list[Checkpoint]:
    """Run the interaction/update loop and return periodic validation checkpoints."""
    schema = train_data.schema
    if schema.use_case != cfg.use_case:
        raise ConfigError("training data and config disagree on use case")
    if schema.use_case == "lupus" and penalty_table is None:
        penalty_table = load_penalty_table()

    rng = np.random.default_rng(cfg.seed)
    env = DiagnosisEnv(schema, _env_config(schema, cfg, penalty_table))
    m, n_actions = schema.n_features, schema.n_features + schema.n_classes
    shift, scale = input_scaling_from_schema(schema, spread=cfg.input_spread)
    policy = Network(m, n_actions, cfg.hidden, cfg.dueling, rng=rng,
                     input_shift=shift, input_scale=scale)
    target = policy.clone()
    optimizer = Adam(policy, learning_rate=cfg.learning_rate)
    capacity = min(cfg.buffer_size, max(cfg.total_timesteps, 1))
    buffer = ReplayBuffer(capacity, m, prioritized=cfg.per,
                          alpha=cfg.per_alpha, eps=cfg.per_eps)

    training_meta = {
        "seed": cfg.seed,
        "double": cfg.double,
        "dueling": cfg.dueling,
        "per": cfg.per,
        "lam": cfg.lam,
        "max_steps": env.max_steps,
        "total_timesteps": cfg.total_timesteps,
        "learning_rate": cfg.learning_rate,
    }
    checkpoints: list[Checkpoint] = []
    if cfg.total_timesteps == 0:
        return [_validation_checkpoint(policy, schema, validation_data, cfg,
                                       penalty_table, 0, training_meta)]
    checkpoint_steps = set(_checkpoint_steps(cfg))

    n_records = len(train_data)
    idx = int(rng.integers(0, n_records))
    env.reset(train_data.x[idx], int(train_data.y[idx]))
    obs = env.obs.copy()

    batch_arange = np.arange(cfg.batch_size)
    for t in range(1, cfg.total_timesteps + 1):
        eps = epsilon_at(t, cfg)
        if rng.random() < eps:
            action = int(rng.integers(0, n_actions))
        else:
            action = int(np.argmax(policy.q_row(obs)))
        outcome = env.step(action)
        buffer.add(obs, action, outcome.reward, outcome.observation, outcome.terminal)
        if outcome.terminal:
            idx = rng.integers(0, n_records)
            env.reset(train_data.x[idx], int(train_data.y[idx]))
            obs = env.obs.copy()
        else:
            obs = outcome.observation

        if t > cfg.learning_starts and t % cfg.train_frequency == 0:
            beta = cfg.per_beta0 + (cfg.per_beta_final - cfg.per_beta0) * min(1.0, t / cfg.total_timesteps)
            idx_b, batch, weights = buffer.sample(cfg.batch_size, rng, beta=beta)
            y = td_targets(batch, policy, target, cfg)
            q, cache = policy.forward_cache(batch["obs"])
            td = q[batch_arange, batch["actions"]] - y
            dq = np.zeros_like(q)
            dq[batch_arange, batch["actions"]] = 2.0 * td * weights / cfg.batch_size
            optimizer.step(policy.backward(cache, dq))
            if cfg.per:
                buffer.update_priorities(idx_b, td)

        if t % cfg.target_update_interval == 0:
            copy_weights(policy, target)

        if t in checkpoint_steps:
            checkpoints.append(_validation_checkpoint(
                policy, schema, validation_data, cfg, penalty_table, t, training_meta))
    return checkpoints


def select_checkpoint(checkpoints: list[Checkpoint], strategy: str = "accuracy") -> Checkpoint:
    if not checkpoints:
        raise ConfigError("no checkpoints to select from")
    if strategy == "accuracy":
        key = lambda c: c.validation_accuracy
    elif strategy == "wpahm":
        if any(c.validation_wpahm is None for c in checkpoints):
            raise ConfigError("checkpoints carry no wpahm metric")
        key = lambda c: c.validation_wpahm
    else:
        raise ConfigError(f"unknown selection strategy {strategy!r}")
    best = checkpoints[0]
    for c in checkpoints[1:]:
        if key(c) > key(best):  # strict: ties keep the earliest timestep
            best = c
    return best


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def evaluate_policy(artifact: PolicyArtifact, dataset: Dataset,
                    config: EnvConfig | None = None) -> list[EpisodeRecord]:
    """Greedy rollout over every record; returns one EpisodeRecord each.

    Q-network policies roll out in lockstep batches; tree policies walk their
    decision tree per episode. Both produce identical structures.
    """
    schema = dataset.schema
    if artifact.meta.get("features") != schema.feature_names:
        raise SchemaMismatchError("artifact feature schema does not match dataset")
    config = config or EnvConfig(use_case=schema.use_case,
                                 lam=artifact.meta.get("training", {}).get("lam", 9.0))
    if artifact.kind == "tree":
        return _evaluate_tree(artifact, dataset, config)
    return _evaluate_qnet(artifact, dataset, config)


def _feature_rewards(schema: UseCaseSchema, config: EnvConfig) -> np.ndarray:
    if schema.use_case == "anemia":
        return np.zeros(schema.n_features)
    table = config.penalty_table or load_penalty_table()
    return -1.0 / (config.lam * table.vector(schema))


def _evaluate_qnet(artifact: PolicyArtifact, dataset: Dataset,
                   config: EnvConfig) -> list[EpisodeRecord]:
    schema = dataset.schema
    net = artifact.network
    m = schema.n_features
    n = len(dataset)
    x = dataset.x
    feature_rewards = _feature_rewards(schema, config)
    if schema.use_case == "anemia":
        cap = config.max_steps if config.max_steps is not None else m + 1
    else:
        cap = config.max_steps

    obs = np.full((n, m), -1.0)
    queried = np.zeros((n, m), dtype=bool)
    active = np.arange(n)
    steps = np.zeros(n, dtype=np.int64)
    episodes = [EpisodeRecord(actions=[], true_class=int(dataset.y[i])) for i in range(n)]

    while len(active):
        q = net.forward(obs[active])
        acts = np.argmax(q, axis=1)
        scores = _softmax(q[:, m:])
        done = np.zeros(len(active), dtype=bool)
        for k, i in enumerate(active):
            a = int(acts[k])
            e = episodes[i]
            e.actions.append(a)
            steps[i] += 1
            if a >= m:
                e.diagnosis = a - m
                e.values.append(math.nan)
                e.rewards.append(1.0 if e.diagnosis == e.true_class else -1.0)
                e.diag_scores = scores[k]
                done[k] = True
            elif queried[i, a]:
                e.repeated = True
                e.values.append(math.nan)
                e.rewards.append(-1.0)
                e.diag_scores = scores[k]
                done[k] = True
            else:
                queried[i, a] = True
                value = x[i, a]
                e.values.append(float(value))
                e.rewards.append(float(feature_rewards[a]))
                obs[i, a] = MISSING_OBSERVED if np.isnan(value) else value
                if cap is not None and steps[i] >= cap:
                    e.truncated = True
                    e.diag_scores = scores[k]
                    done[k] = True
        active = active[~done]
    return episodes


def _evaluate_tree(artifact: PolicyArtifact, dataset: Dataset,
                   config: EnvConfig) -> list[EpisodeRecord]:
    from .baselines import TreeAgent  # local import to avoid a module cycle

    schema = dataset.schema
    agent = TreeAgent.from_raw(schema, artifact.tree_raw)
    env = DiagnosisEnv(schema, config)
    episodes: list[EpisodeRecord] = []
    for i in range(len(dataset)):
        env.reset(dataset.x[i], int(dataset.y[i]))
        e = EpisodeRecord(actions=[], true_class=int(dataset.y[i]))
        while not env.terminal:
            a = agent.act(env.obs, env.queried)
            outcome = env.step(a)
            e.actions.append(a)
            e.values.append(float(dataset.x[i, a]) if a < schema.n_features else math.nan)
            e.rewards.append(outcome.reward)
            if outcome.diagnosis is not None:
                e.diagnosis = outcome.diagnosis
                e.diag_scores = _one_hot(schema.n_classes, outcome.diagnosis)
            e.repeated |= outcome.repeated_action
            e.truncated |= outcome.truncated
        if e.diag_scores is None:
            e.diag_scores = np.full(schema.n_classes, 1.0 / schema.n_classes)
        episodes.append(e)
    return episodes


def _one_hot(n: int, i: int) -> np.ndarray:
    v = np.zeros(n)
    v[i] = 1.0
    return v


def evaluate_policy_scalar(artifact: PolicyArtifact, dataset: Dataset,
                           config: EnvConfig | None = None) -> list[EpisodeRecord]:
    """Reference implementation of evaluate_policy driving one env per record.

    Kept deliberately independent of the batched rollout so the two can be
    cross-checked.
    """
    schema = dataset.schema
    config = config or EnvConfig(use_case=schema.use_case,
                                 lam=artifact.meta.get("training", {}).get("lam", 9.0))
    if artifact.kind == "tree":
        return _evaluate_tree(artifact, dataset, config)
    net = artifact.network
    m = schema.n_features
    env = DiagnosisEnv(schema, config)
    episodes = []
    for i in range(len(dataset)):
        env.reset(dataset.x[i], int(dataset.y[i]))
        e = EpisodeRecord(actions=[], true_class=int(dataset.y[i]))
        while not env.terminal:
            q = net.forward(env.obs[None, :])[0]
            a = int(np.argmax(q))
            outcome = env.step(a)
            e.actions.append(a)
            e.values.append(float(dataset.x[i, a]) if a < m else math.nan)
            e.rewards.append(outcome.reward)
            if outcome.terminal:
                e.diagnosis = outcome.diagnosis
                e.repeated = outcome.repeated_action
                e.truncated = outcome.truncated
                e.diag_scores = _softmax(q[m:])
        episodes.append(e)
    return episodes
