"""Environment semantics: sentinel encoding, rewards, termination."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathrl.env import DiagnosisEnv, EnvConfig, diagnose_action
from pathrl.errors import ConfigError, ProtocolError
from pathrl.schema import PatientRecord, load_schema
from pathrl.synth import load_penalty_table, make_anemia_dataset, make_lupus_dataset

ANEMIA = load_schema("anemia")
LUPUS = load_schema("lupus")


def anemia_env(**kw):
    return DiagnosisEnv(ANEMIA, EnvConfig(use_case="anemia", **kw))


def lupus_env(lam=9.0):
    return DiagnosisEnv(LUPUS, EnvConfig(use_case="lupus", lam=lam))


def test_reset_gives_all_sentinels_and_correct_lengths():
    env = anemia_env()
    obs = env.reset(np.full(17, np.nan), label=0)
    assert obs.values.shape == (17,)
    assert np.all(obs.values == -1.0)
    assert obs.queried == set()
    assert lupus_env().reset(np.full(24, np.nan), label=0).values.shape == (24,)


def test_action_counts():
    assert anemia_env().action_count().total == 25
    assert lupus_env().action_count().total == 26


def test_reset_rejects_wrong_width():
    with pytest.raises(Exception):
        anemia_env().reset(np.zeros(5), label=0)


def test_diagnosis_rewards_and_termination():
    env = anemia_env()
    env.reset(np.zeros(17), label=3)
    out = env.step(diagnose_action(ANEMIA, 3))
    assert out.reward == 1.0 and out.terminal and out.diagnosis == 3
    env.reset(np.zeros(17), label=3)
    out = env.step(diagnose_action(ANEMIA, 2))
    assert out.reward == -1.0 and out.terminal


def test_repeat_query_terminates_with_penalty():
    env = anemia_env()
    env.reset(np.zeros(17), label=0)
    first = env.step(4)
    assert first.reward == 0.0 and not first.terminal
    out = env.step(4)
    assert out.reward == -1.0 and out.terminal and out.repeated_action


def test_query_reveals_value_and_missing_marks_no_result():
    row = np.full(17, np.nan)
    row[0] = 13.5
    env = anemia_env()
    env.reset(row, label=0)
    out = env.step(0)
    assert out.observation[0] == 13.5
    out = env.step(5)  # missing value: query spent, distinct no-result code
    assert out.observation[5] == -2.0
    assert not out.terminal
    out = env.step(5)  # re-query of the spent feature terminates
    assert out.terminal and out.repeated_action


def test_lupus_feature_penalties():
    env = lupus_env(lam=9.0)
    env.reset(np.zeros(24), label=0)
    out = env.step(LUPUS.index("fever"))  # penalty weight 15
    assert out.reward == pytest.approx(-1.0 / 135.0)
    out = env.step(LUPUS.index("renal_biopsy"))  # weight 1: the costliest query
    assert out.reward == pytest.approx(-1.0 / 9.0)
    # anemia feature queries are free
    env2 = anemia_env()
    env2.reset(np.zeros(17), label=0)
    assert env2.step(2).reward == 0.0


def test_reward_bounds_hold_everywhere():
    table = load_penalty_table()
    rewards = -1.0 / (9.0 * table.vector(LUPUS))
    assert np.all(rewards < 0)
    assert np.all(rewards >= -1.0 / (9.0 * table.vector(LUPUS).min()))
    assert np.all(rewards >= -1.0)


def test_step_after_terminal_raises():
    env = anemia_env()
    env.reset(np.zeros(17), label=0)
    env.step(diagnose_action(ANEMIA, 0))
    with pytest.raises(ProtocolError):
        env.step(0)


def test_truncation_at_step_cap():
    env = anemia_env(max_steps=3)
    env.reset(np.zeros(17), label=0)
    assert not env.step(0).terminal
    assert not env.step(1).terminal
    out = env.step(2)
    assert out.terminal and out.truncated and out.diagnosis is None


def test_default_anemia_cap_is_tree_depth_plus_slack():
    env = anemia_env()
    assert env.max_steps == 8
    env.reset(np.zeros(17), label=0)
    out = None
    for j in range(8):
        out = env.step(j)
    assert out.terminal and out.truncated and out.reward == -1.0
    # an uncapped configuration ends only via a terminal action
    env = anemia_env(max_steps=18)
    env.reset(np.zeros(17), label=0)
    for j in range(17):
        out = env.step(j)
    assert not out.terminal
    out = env.step(diagnose_action(ANEMIA, 0))
    assert out.terminal and not out.truncated


def test_determinism_same_record_same_actions():
    ds = make_anemia_dataset(30, seed=1)
    env1, env2 = anemia_env(), anemia_env()
    actions = [0, 8, 3, diagnose_action(ANEMIA, 2)]
    env1.reset(ds.x[5], int(ds.y[5]))
    env2.reset(ds.x[5], int(ds.y[5]))
    for a in actions:
        o1, o2 = env1.step(a), env2.step(a)
        assert np.array_equal(o1.observation, o2.observation)
        assert o1.reward == o2.reward and o1.terminal == o2.terminal


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=24), min_size=1, max_size=30),
       st.integers(min_value=0, max_value=69))
def test_sentinel_invariant_under_any_action_sequence(actions, record_idx):
    ds = make_anemia_dataset(10, seed=2)
    env = anemia_env()
    env.reset(ds.x[record_idx], int(ds.y[record_idx]))
    for a in actions:
        if env.terminal:
            break
        env.step(a)
        for j in range(17):
            if j not in env.queried:
                assert env.obs[j] == -1.0
            elif np.isnan(ds.x[record_idx, j]):
                assert env.obs[j] == -2.0
            else:
                assert env.obs[j] == ds.x[record_idx, j]


def test_episode_length_bound_without_repeats():
    ds = make_lupus_dataset(30, 10, seed=3)
    env = lupus_env()
    env.reset(ds.x[0], int(ds.y[0]))
    steps = 0
    for j in range(24):
        out = env.step(j)
        steps += 1
        assert not out.terminal
    out = env.step(diagnose_action(LUPUS, 0))
    steps += 1
    assert out.terminal
    assert steps == 25  # every feature once plus one diagnosis


def test_config_validation():
    with pytest.raises(ConfigError):
        EnvConfig(use_case="lupus", lam=0.0)
    with pytest.raises(ConfigError):
        EnvConfig(use_case="anemia", max_steps=0)
    with pytest.raises(ConfigError):
        DiagnosisEnv(ANEMIA, EnvConfig(use_case="lupus"))
