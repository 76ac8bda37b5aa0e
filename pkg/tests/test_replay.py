"""Sum tree and replay buffer tests, including the sampling-law oracle."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from pathrl.errors import ConfigError
from pathrl.replay import ReplayBuffer, SumTree


def test_sum_tree_total_and_find():
    tree = SumTree(4)
    tree.set([0, 1, 2, 3], [1.0, 2.0, 3.0, 4.0])
    assert tree.total == 10.0
    assert tree.find(np.array([0.5]))[0] == 0
    assert tree.find(np.array([1.5]))[0] == 1
    assert tree.find(np.array([9.99]))[0] == 3
    assert tree.audit()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(min_value=0, max_value=63),
                          st.floats(min_value=0.0, max_value=100.0)),
                min_size=1, max_size=200))
def test_sum_tree_structural_invariant_under_interleaving(updates):
    tree = SumTree(64)
    for idx, value in updates:
        tree.set_one(idx, value)
    assert tree.audit()
    # batch form agrees
    tree2 = SumTree(64)
    for chunk_start in range(0, len(updates), 7):
        chunk = updates[chunk_start:chunk_start + 7]
        last = {}
        for idx, value in chunk:
            last[idx] = value
        tree2.set(np.array(list(last)), np.array([last[k] for k in last]))
    assert tree2.audit()


def test_priorities_must_be_non_negative():
    tree = SumTree(4)
    with pytest.raises(ConfigError):
        tree.set_one(0, -1.0)


def _filled_buffer(n, prioritized, priorities=None, obs_dim=3):
    buf = ReplayBuffer(n, obs_dim, prioritized=prioritized, alpha=1.0)
    for i in range(n):
        buf.add(np.full(obs_dim, i), i % 2, 0.5, np.zeros(obs_dim), False)
    if priorities is not None:
        buf.tree.set(np.arange(n), np.asarray(priorities, dtype=float))
    return buf


def test_degenerate_priorities_always_pick_the_only_positive_leaf():
    buf = _filled_buffer(2, True, priorities=[1.0, 0.0])
    rng = np.random.default_rng(0)
    idx, _, _ = buf.sample(64, rng, beta=0.5)
    assert np.all(idx == 0)


def test_sampling_frequency_matches_priorities_chi_square():
    buf = _filled_buffer(2, True, priorities=[1.0, 3.0])
    rng = np.random.default_rng(1)
    idx, _, _ = buf.sample(100_000, rng, beta=0.0)
    counts = np.bincount(idx, minlength=2)
    stat, p = chisquare(counts, f_exp=[25_000, 75_000])
    assert p > 0.01


def test_uniform_alpha_zero_reduces_to_uniform_sampling():
    n = 8
    buf = ReplayBuffer(n, 2, prioritized=True, alpha=0.0)
    rng = np.random.default_rng(2)
    for i in range(n):
        buf.add(np.zeros(2), 0, float(i), np.zeros(2), False)
        buf.update_priorities([i], [float(i * 10)])  # alpha=0 flattens these
    idx, _, _ = buf.sample(80_000, rng, beta=0.0)
    counts = np.bincount(idx, minlength=n)
    stat, p = chisquare(counts)
    assert p > 0.01


def test_importance_weights_beta_zero_are_all_one():
    buf = _filled_buffer(5, True, priorities=[1, 2, 3, 4, 5])
    rng = np.random.default_rng(3)
    _, _, weights = buf.sample(32, rng, beta=0.0)
    assert np.all(weights == 1.0)


def test_importance_weights_formula():
    buf = _filled_buffer(4, True, priorities=[1.0, 1.0, 2.0, 4.0])
    rng = np.random.default_rng(4)
    idx, _, weights = buf.sample(2000, rng, beta=0.7)
    probs = buf.tree.get(idx) / buf.tree.total
    expected = (len(buf) * probs) ** -0.7
    assert np.allclose(weights, expected / expected.max())


def test_update_priorities_floor_and_audit():
    buf = _filled_buffer(8, True)
    buf.update_priorities(np.arange(8), np.zeros(8))
    leaves = buf.tree.get(np.arange(8))
    assert np.all(leaves > 0.0)  # epsilon floor keeps everything sampleable
    assert buf.tree.audit()


def test_ring_overwrite_replaces_oldest():
    buf = ReplayBuffer(3, 1, prioritized=False)
    for i in range(5):
        buf.add(np.array([float(i)]), i, 0.0, np.array([0.0]), False)
    assert len(buf) == 3
    assert sorted(buf.obs[:, 0].tolist()) == [2.0, 3.0, 4.0]
    assert buf.actions[buf.pos] == 2  # oldest surviving slot is replaced next


def test_sample_empty_raises():
    buf = ReplayBuffer(4, 2, prioritized=True)
    with pytest.raises(ConfigError):
        buf.sample(4, np.random.default_rng(0))
