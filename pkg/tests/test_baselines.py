"""Baseline agents and classifiers."""
import numpy as np
import pytest
from scipy.stats import chisquare

from pathrl.baselines import (FFNNClassifier, TreeAgent, TreeClassifier,
                              fit_ffnn_classifier, fit_tree_classifier, knn_impute,
                              run_random_agent, run_tree_agent)
from pathrl.dtree import load_tree
from pathrl.errors import ConfigError
from pathrl.metrics import accuracy, mean_episode_length
from pathrl.schema import Dataset, load_schema
from pathrl.synth import (DegradationSpec, degrade, make_anemia_dataset,
                          make_lupus_dataset, split)

ANEMIA = load_schema("anemia")
LUPUS = load_schema("lupus")


@pytest.fixture(scope="module")
def anemia_splits():
    return split(make_anemia_dataset(1429, seed=7), seed=11)


@pytest.fixture(scope="module")
def lupus_splits():
    return split(make_lupus_dataset(7143, 2857, seed=7), seed=11)


def test_random_agent_uniform_action_law():
    rng = np.random.default_rng(0)
    from pathrl.baselines import random_agent_step
    draws = np.array([random_agent_step(rng, 25) for _ in range(100_000)])
    counts = np.bincount(draws, minlength=25)
    stat, p = chisquare(counts)
    assert p > 0.01


def test_random_agent_episode_stats(anemia_splits, lupus_splits):
    eps = run_random_agent(anemia_splits.test, seed=5)
    mel = mean_episode_length(eps)
    assert 1.4 < mel < 1.7
    acc = accuracy(eps)
    assert 0.08 < acc < 0.14  # ~P(diagnosis-terminated)/8 under uniform play
    eps = run_random_agent(lupus_splits.test.subset(range(1000)), seed=6)
    assert 0.15 < accuracy(eps) < 0.26


def test_tree_agent_perfect_on_clean_anemia(anemia_splits):
    eps = run_tree_agent(anemia_splits.test)
    assert accuracy(eps) == 1.0
    mel = mean_episode_length(eps)
    assert 3.88 <= mel <= 4.08
    assert all(not e.repeated for e in eps)


def test_tree_agent_first_action_is_hemoglobin():
    agent = TreeAgent(ANEMIA)
    obs = np.full(17, -1.0)
    assert agent.act(obs, set()) == ANEMIA.index("hemoglobin")


def test_tree_agent_never_repeats_and_depth_bound(anemia_splits):
    eps = run_tree_agent(anemia_splits.test.subset(range(2000)))
    for e in eps:
        feats = [a for a in e.actions if a < 17]
        assert len(feats) == len(set(feats))
        assert len(e.actions) <= 6  # deepest tree path has 5 features + diagnosis


def test_tree_agent_missing_mid_path_gives_inconclusive():
    agent = TreeAgent(ANEMIA)
    obs = np.full(17, -1.0)
    queried = set()
    # walk a male anemic record with MCV missing
    values = {"hemoglobin": 9.5, "gender": 1.0}
    for _ in range(3):
        a = agent.act(obs, queried)
        assert a < 17
        name = ANEMIA.feature_names[a]
        queried.add(a)
        obs[a] = values.get(name, -2.0)  # MCV query comes back missing
        if name == "mcv":
            break
    final = agent.act(obs, queried)
    assert final == 17 + ANEMIA.class_index("Inconclusive diagnosis")


def test_tree_agent_rejects_lupus():
    with pytest.raises(ConfigError):
        TreeAgent(LUPUS)


def test_cart_learns_anemia_and_lupus(anemia_splits, lupus_splits):
    clf = fit_tree_classifier(anemia_splits.train)
    acc = (clf.predict(anemia_splits.test.x) == anemia_splits.test.y).mean()
    assert acc >= 0.995
    clf = fit_tree_classifier(lupus_splits.train)
    acc = (clf.predict(lupus_splits.test.x) == lupus_splits.test.y).mean()
    assert acc >= 0.99


def test_cart_single_class_training():
    x = np.random.default_rng(0).normal(size=(50, 3))
    y = np.ones(50, dtype=np.int64)
    clf = TreeClassifier().fit(x, y, 2)
    assert np.all(clf.predict(x) == 1)


def test_cart_deterministic_refit(anemia_splits):
    sub = anemia_splits.train.subset(range(3000))
    a = fit_tree_classifier(sub).to_json()
    b = fit_tree_classifier(sub).to_json()
    assert a == b


def test_cart_empty_training_set():
    with pytest.raises(ConfigError):
        TreeClassifier().fit(np.empty((0, 3)), np.empty(0, dtype=np.int64), 2)


def test_cart_json_round_trip(anemia_splits):
    sub = anemia_splits.train.subset(range(2000))
    clf = fit_tree_classifier(sub, max_depth=6)
    clone = TreeClassifier.from_json(clf.to_json())
    probe = anemia_splits.test.x[:500]
    assert np.array_equal(clf.predict(probe), clone.predict(probe))


def test_ffnn_learns_both_use_cases(anemia_splits, lupus_splits):
    clf = fit_ffnn_classifier(lupus_splits.train, seed=0)
    acc = (clf.predict(lupus_splits.test.x) == lupus_splits.test.y).mean()
    assert acc >= 0.99
    clf = fit_ffnn_classifier(anemia_splits.train, seed=0)
    acc = (clf.predict(anemia_splits.test.x) == anemia_splits.test.y).mean()
    assert acc >= 0.96
    proba = clf.predict_proba(anemia_splits.test.x[:100])
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_knn_impute_zero_distance_neighbor():
    x = np.array([[1.0, 2.0, 3.0], [1.0, 2.0, np.nan], [9.0, 9.0, 9.0]])
    ds = Dataset(LUPUS, np.zeros((3, 24)), np.zeros(3, dtype=np.int64))
    ds.x[:, :3] = x
    ref = Dataset(LUPUS, ds.x[[0, 2]].copy(), np.zeros(2, dtype=np.int64))
    out, flags = knn_impute(ds, ref)
    assert out.x[1, 2] == 3.0  # copied from the zero-distance reference
    assert not flags.any()


def test_knn_impute_identity_when_complete(lupus_splits):
    sub = lupus_splits.train.subset(range(200))
    out, flags = knn_impute(sub, sub)
    assert np.array_equal(out.x, sub.x)
    assert not flags.any()


def test_knn_impute_matches_bruteforce_oracle(lupus_splits):
    reference = lupus_splits.train.subset(range(400))
    degraded = degrade(lupus_splits.train.subset(range(400, 1400)),
                       DegradationSpec(kind="missingness", level=0.25, seed=3))
    out, flags = knn_impute(degraded, reference)
    assert not flags.any()
    rx = reference.x
    for i in range(0, 1000, 13):  # spot-check a spread of records
        row = degraded.x[i]
        missing = np.flatnonzero(np.isnan(row))
        if len(missing) == 0:
            continue
        dists = np.zeros(len(rx))
        for r in range(len(rx)):
            co = ~np.isnan(row) & ~np.isnan(rx[r])
            dists[r] = np.sum((row[co] - rx[r][co]) ** 2)
        best = int(np.argmin(dists))  # ties: lowest index, matching stable sort
        for j in missing:
            assert out.x[i, j] == rx[best, j]


def test_knn_impute_flags_all_missing_record():
    ds = Dataset(LUPUS, np.full((1, 24), np.nan), np.zeros(1, dtype=np.int64))
    ref = Dataset(LUPUS, np.ones((2, 24)), np.zeros(2, dtype=np.int64))
    out, flags = knn_impute(ds, ref)
    assert flags[0]
    assert np.isnan(out.x[0]).all()
