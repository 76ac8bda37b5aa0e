"""Network kernel tests: exact gradients, dueling head, optimizer, artifacts."""
import numpy as np
import pytest

from pathrl.errors import ConfigError
from pathrl.qnet import (Adam, Network, copy_weights, load_policy, qnet_artifact,
                         save_policy)
from pathrl.schema import load_schema


def finite_difference_grads(net, x, dq, eps=1e-5):
    """Central-difference gradient of L = sum(Q * dq) w.r.t. every parameter."""
    grads = np.zeros_like(net.theta)
    for k in range(len(net.theta)):
        orig = net.theta[k]
        net.theta[k] = orig + eps
        up = float((net.forward(x) * dq).sum())
        net.theta[k] = orig - eps
        down = float((net.forward(x) * dq).sum())
        net.theta[k] = orig
        grads[k] = (up - down) / (2 * eps)
    return grads


@pytest.mark.parametrize("dueling", [False, True])
def test_backward_matches_central_differences(dueling):
    rng = np.random.default_rng(3)
    net = Network(5, 4, hidden=(8, 6), dueling=dueling, rng=rng)
    x = rng.normal(size=(7, 5))
    # Q-learning style upstream gradient: one action per sample
    dq = np.zeros((7, 4))
    dq[np.arange(7), rng.integers(0, 4, size=7)] = rng.normal(size=7)
    _, cache = net.forward_cache(x)
    net.backward(cache, dq)
    analytic = net.grad_flat.copy()
    numeric = finite_difference_grads(net, x, dq)
    denom = np.maximum(np.abs(numeric), 1e-8)
    rel = np.abs(analytic - numeric) / denom
    assert rel.max() < 1e-4


def test_zero_upstream_gradient_gives_zero_parameter_gradients():
    net = Network(3, 2, hidden=(4,), rng=np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(4, 3))
    _, cache = net.forward_cache(x)
    net.backward(cache, np.zeros((4, 2)))
    assert np.all(net.grad_flat == 0.0)


def test_batch_gradient_is_sum_of_per_sample_gradients():
    rng = np.random.default_rng(9)
    net = Network(4, 3, hidden=(6,), dueling=True, rng=rng)
    x = rng.normal(size=(5, 4))
    dq = rng.normal(size=(5, 3))
    _, cache = net.forward_cache(x)
    net.backward(cache, dq)
    batch = net.grad_flat.copy()
    summed = np.zeros_like(batch)
    for i in range(5):
        _, cache_i = net.forward_cache(x[i:i + 1])
        net.backward(cache_i, dq[i:i + 1])
        summed += net.grad_flat
    assert np.allclose(batch, summed, atol=1e-12)


def test_dueling_head_combination():
    # with zero weights only biases matter: V = b[0], advantages = b[1:]
    net = Network(2, 3, hidden=(2,), dueling=True, rng=np.random.default_rng(0))
    net.theta[...] = 0.0
    net.b[-1][...] = np.array([1.0, 1.0, 2.0, 3.0])  # V=1, A=[1,2,3]
    q = net.forward(np.zeros((1, 2)))[0]
    assert np.allclose(q, [0.0, 1.0, 2.0])


def test_dueling_invariant_to_constant_advantage_shift():
    rng = np.random.default_rng(5)
    net = Network(3, 4, hidden=(6,), dueling=True, rng=rng)
    x = rng.normal(size=(2, 3))
    q1 = net.forward(x)
    net.b[-1][1:] += 7.5  # shift every advantage by a constant
    q2 = net.forward(x)
    assert np.allclose(q1, q2, atol=1e-12)


def test_zero_network_outputs_zero_and_identical_rows():
    net = Network(3, 5, hidden=(4,), rng=np.random.default_rng(0))
    net.theta[...] = 0.0
    x = np.ones((2, 3))
    q = net.forward(x)
    assert np.all(q == 0.0)
    assert np.array_equal(q[0], q[1])


def test_q_row_matches_batched_forward():
    rng = np.random.default_rng(11)
    for dueling in (False, True):
        net = Network(6, 4, hidden=(8, 8), dueling=dueling, rng=rng)
        x = rng.normal(size=(10, 6))
        batched = net.forward(x)
        rows = np.stack([net.q_row(x[i]) for i in range(10)])
        assert np.allclose(batched, rows, atol=1e-12)


def test_adam_descends_and_fixed_point():
    net = Network(1, 1, hidden=(1,), rng=np.random.default_rng(0))
    opt = Adam(net, learning_rate=1e-2)
    before = net.theta.copy()
    opt.step(np.ones_like(net.theta))
    assert np.all(net.theta < before)  # constant positive gradient -> decrease
    frozen = net.theta.copy()
    opt2 = Adam(net, learning_rate=1e-2)
    opt2.step(np.zeros_like(net.theta))
    assert np.array_equal(net.theta, frozen)  # zero gradient -> unchanged


def _run_bowl(lr, steps):
    """Drive a single scalar parameter down f(w) = w^2 via the real optimizer."""
    net = Network(1, 1, hidden=(1,), rng=np.random.default_rng(0))
    net.theta[...] = 0.0
    w = net.theta[0:1]  # treat one flat slot as the bowl variable
    w[...] = 1.0
    opt = Adam(net, learning_rate=lr)
    for _ in range(steps):
        g = np.zeros_like(net.theta)
        g[0] = 2 * w[0]
        opt.step(g)
    return abs(float(w[0]))


def test_adam_minimizes_quadratic_bowl():
    # At the default 1e-4 rate the per-step movement is bounded by the rate,
    # so descending from w=1 to |w| < 0.01 takes ~1.4e4 steps (verified against
    # the bias-corrected update recursion); a 10x rate converges 10x sooner.
    assert _run_bowl(1e-3, 10_000) < 0.01
    assert _run_bowl(1e-4, 10_000) > 0.01  # honest bound: not yet converged
    assert _run_bowl(1e-4, 15_000) < 0.01


def test_copy_weights_semantics():
    rng = np.random.default_rng(2)
    src = Network(4, 3, hidden=(5,), rng=rng)
    dst = Network(4, 3, hidden=(5,), rng=rng)
    copy_weights(src, dst)
    x = rng.normal(size=(3, 4))
    assert np.array_equal(src.forward(x), dst.forward(x))
    src.theta += 1.0  # deep copy: dst must not follow
    assert not np.array_equal(src.forward(x), dst.forward(x))


def test_copy_weights_rejects_architecture_mismatch():
    a = Network(4, 3, hidden=(5,))
    b = Network(4, 3, hidden=(6,))
    with pytest.raises(ConfigError):
        copy_weights(a, b)


def test_artifact_round_trip_bitwise(tmp_path):
    schema = load_schema("anemia")
    rng = np.random.default_rng(4)
    net = Network(schema.n_features, schema.n_features + schema.n_classes,
                  dueling=True, rng=rng)
    artifact = qnet_artifact(net, schema, training={"seed": 4})
    path = tmp_path / "net.policy"
    save_policy(path, artifact)
    loaded = load_policy(path)
    probe = rng.normal(size=(16, schema.n_features))
    assert np.array_equal(net.forward(probe), loaded.network.forward(probe))
    assert loaded.meta["use_case"] == "anemia"
    # a second save of the loaded artifact is byte-identical
    path2 = tmp_path / "net2.policy"
    save_policy(path2, loaded)
    assert path.read_bytes() == path2.read_bytes()
