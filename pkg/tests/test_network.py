from __future__ import annotations

import numpy as np
import pytest

from offloader.errors import ShapeError
from offloader.mdp import NUM_ACTIONS, NUM_FEATURES
from offloader.rl.a2c import actor_loss_and_grad, critic_loss_and_grad
from offloader.rl.network import PolicyNet, init_network, log_softmax, orthogonal, softmax

EPS = 1e-5


def _mini_net(kind, seed):
    """9 -> LSTM(4) -> FC(8) network with every parameter perturbed off zero."""

    net = init_network(kind, seed, hidden_size=4, fc_size=8)
    net.params += np.random.default_rng(seed + 100).normal(0.0, 0.1, size=net.size)
    return net


def _numerical_grad(net, loss_fn):
    grad = np.zeros(net.size)
    for i in range(net.size):
        original = net.params[i]
        net.params[i] = original + EPS
        plus = loss_fn()
        net.params[i] = original - EPS
        minus = loss_fn()
        net.params[i] = original
        grad[i] = (plus - minus) / (2 * EPS)
    return grad


def _agreement(analytic, numeric):
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-12)
    ok = (diff / scale < 1e-4) | (diff < 1e-8)
    return ok.mean()


def _batch(seed, T=5, B=3):
    rng = np.random.default_rng(seed)
    states = rng.random((T, B, NUM_FEATURES))
    actions = rng.integers(NUM_ACTIONS, size=(T, B))
    advantages = rng.normal(size=(T, B))
    returns = rng.normal(-3.0, 1.0, size=(T, B))
    return states, actions, advantages, returns


def test_actor_gradient_matches_finite_differences():
    net = _mini_net("actor", 0)
    states, actions, advantages, _ = _batch(1)
    _, analytic, _ = actor_loss_and_grad(net, states, actions, advantages, 0.01)
    numeric = _numerical_grad(net, lambda: actor_loss_and_grad(net, states, actions, advantages, 0.01)[0])

    assert _agreement(analytic, numeric) >= 0.99


def test_actor_entropy_gradient_matches_finite_differences():
    net = _mini_net("actor", 5)
    states, actions, _, _ = _batch(6)
    zeros = np.zeros(actions.shape)
    _, analytic, _ = actor_loss_and_grad(net, states, actions, zeros, 1.0)
    numeric = _numerical_grad(net, lambda: actor_loss_and_grad(net, states, actions, zeros, 1.0)[0])

    assert _agreement(analytic, numeric) >= 0.99


def test_critic_gradient_matches_finite_differences():
    net = _mini_net("critic", 2)
    states, _, _, returns = _batch(3)
    _, analytic = critic_loss_and_grad(net, states, returns)
    numeric = _numerical_grad(net, lambda: critic_loss_and_grad(net, states, returns)[0])

    assert _agreement(analytic, numeric) >= 0.99


def test_layout_and_sizes():
    actor = PolicyNet("actor")
    critic = PolicyNet("critic")
    views = actor.unpack()

    assert views["lstm_W"].shape == (1 + NUM_FEATURES + 64, 256)
    assert views["fc_W"].shape == (64, 256)
    assert views["head_W"].shape == (256, NUM_ACTIONS)
    assert critic.unpack()["head_W"].shape == (256, 1)
    assert actor.size == sum(v.size for v in views.values())

    views["fc_b"][:] = 2.0
    assert np.all(actor.params[(1 + NUM_FEATURES + 64) * 256 + 64 * 256 :][:256] == 2.0)


def test_initialization_is_orthogonal_with_forget_bias():
    net = init_network("actor", seed=0)
    H = net.hidden_size
    W = net.unpack()["lstm_W"]

    inputs = W[1 : NUM_FEATURES + 1]
    np.testing.assert_allclose(inputs @ inputs.T, np.eye(NUM_FEATURES), atol=1e-10)
    for k in range(4):
        block = W[NUM_FEATURES + 1 :, k * H : (k + 1) * H]
        np.testing.assert_allclose(block.T @ block, np.eye(H), atol=1e-10)
    np.testing.assert_array_equal(W[0, 2 * H : 3 * H], 1.0)
    np.testing.assert_array_equal(W[0, :H], 0.0)
    np.testing.assert_array_equal(net.unpack()["fc_b"], 0.0)

    assert np.array_equal(init_network("actor", seed=0).params, net.params)
    assert not np.array_equal(init_network("actor", seed=1).params, net.params)


def test_orthogonal_handles_tall_and_wide_shapes(rng):
    tall = orthogonal((10, 3), rng)
    wide = orthogonal((3, 10), rng)
    np.testing.assert_allclose(tall.T @ tall, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(wide @ wide.T, np.eye(3), atol=1e-12)


def test_zero_parameters_give_uniform_policy_and_zero_value():
    xs = np.random.default_rng(0).random((6, NUM_FEATURES))
    probs, _ = PolicyNet("actor", hidden_size=8, fc_size=16).forward(xs)
    values, _ = PolicyNet("critic", hidden_size=8, fc_size=16).forward(xs)

    np.testing.assert_allclose(probs, 0.25)
    np.testing.assert_array_equal(values, 0.0)


def test_step_by_step_matches_sequence_forward():
    net = _mini_net("actor", 9)
    xs = np.random.default_rng(1).random((7, NUM_FEATURES))
    full, (h_last, c_last) = net.forward(xs)

    h, c = net.initial_state(1)
    for t in range(7):
        p, h, c = net.step(xs[t], h, c)
        np.testing.assert_allclose(p[0], full[t], atol=1e-12)
    np.testing.assert_allclose(h[0], h_last[0], atol=1e-12)
    np.testing.assert_allclose(c[0], c_last[0], atol=1e-12)


def test_batched_forward_matches_single_sequences():
    net = _mini_net("critic", 4)
    xs = np.random.default_rng(2).random((5, 3, NUM_FEATURES))
    batched, _ = net.forward(xs)
    for b in range(3):
        single, _ = net.forward(xs[:, b, :])
        np.testing.assert_allclose(batched[:, b, :], single, atol=1e-12)


def test_softmax_helpers_are_stable():
    z = np.array([[1000.0, 1000.0, -1000.0, 0.0]])
    probs = softmax(z)
    np.testing.assert_allclose(probs.sum(), 1.0)
    np.testing.assert_allclose(probs[0, :2], 0.5)
    assert np.all(np.isfinite(log_softmax(z)))


def test_shape_errors():
    net = PolicyNet("actor", hidden_size=4, fc_size=8)
    with pytest.raises(ShapeError):
        net.forward_cached(np.zeros((3, NUM_FEATURES)))
    with pytest.raises(ShapeError):
        net.step(np.zeros(5), *net.initial_state(1))
    with pytest.raises(ShapeError):
        PolicyNet("actor", hidden_size=4, fc_size=8, params=np.zeros(3))
    with pytest.raises(ValueError):
        PolicyNet("value")


def test_copy_is_independent():
    net = _mini_net("actor", 1)
    clone = net.copy()
    clone.params[:] = 0.0
    assert np.any(net.params != 0.0)
    assert clone.dims() == net.dims()
