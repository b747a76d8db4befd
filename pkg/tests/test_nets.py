"""Network engine tests: init, forward/backward, Adam, finite differences."""

import math

import numpy as np
import pytest

from scorpion_rl.nets import (
    AdamState,
    Mlp,
    adam_update,
    backward,
    copy_params,
    flatten_params,
    forward,
    grad_check,
    init_mlp,
    iter_arrays,
    param_count,
    params_finite,
    unflatten_params,
)


def mlp_oracle(params, x):
    """Plain loop evaluation: tanh hiddens, linear output."""
    a = np.asarray(x, dtype=float)
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w.T + b
        if k < len(params.weights) - 1:
            a = np.tanh(a)
    return a


def test_init_shapes_and_bounds():
    net = init_mlp((5, 128, 64, 3), seed=0, log_std_dim=3)
    assert net.sizes == (5, 128, 64, 3)
    assert [w.shape for w in net.weights] == [(128, 5), (64, 128), (3, 64)]
    assert [b.shape for b in net.biases] == [(128,), (64,), (3,)]
    for b in net.biases:
        assert np.all(b == 0.0)
    for w, (fi, fo) in zip(net.weights, [(5, 128), (128, 64), (64, 3)]):
        bound = math.sqrt(6.0 / (fi + fo))
        assert np.all(np.abs(w) <= bound)
        # a 640+ sample uniform draw should fill most of its range
        assert w.max() > 0.8 * bound and w.min() < -0.8 * bound
    np.testing.assert_allclose(net.log_std, math.log(0.5))


def test_init_seeded_and_distinct():
    a = init_mlp((5, 8, 1), seed=3)
    b = init_mlp((5, 8, 1), seed=3)
    c = init_mlp((5, 8, 1), seed=4)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)
    assert any(not np.array_equal(wa, wc) for wa, wc in zip(a.weights, c.weights))


def test_init_rejects_bad_sizes():
    with pytest.raises(ValueError):
        init_mlp((5,), seed=0)
    with pytest.raises(ValueError):
        init_mlp((5, 0, 3), seed=0)


def test_forward_matches_oracle():
    rng = np.random.default_rng(2)
    net = init_mlp((5, 16, 8, 3), seed=1)
    x = rng.uniform(-1, 1, size=(40, 5))
    out, _ = forward(net, x)
    np.testing.assert_allclose(out, mlp_oracle(net, x), rtol=1e-13)


def test_forward_single_and_batch_agree():
    net = init_mlp((5, 32, 2), seed=9)
    x = np.linspace(-1, 1, 5)
    single, cache_s = forward(net, x)
    batch, cache_b = forward(net, x[None, :])
    assert single.shape == (2,)
    assert batch.shape == (1, 2)
    np.testing.assert_array_equal(single, batch[0])
    assert cache_s.single and not cache_b.single


def test_forward_rejects_wrong_width():
    net = init_mlp((5, 8, 1), seed=0)
    with pytest.raises(ValueError):
        forward(net, np.zeros(4))
    with pytest.raises(ValueError):
        forward(net, np.zeros((3, 6)))


def test_backward_matches_full_finite_difference():
    # exhaustive check on a small net, every coordinate
    net = init_mlp((3, 6, 4, 2), seed=5)
    rng = np.random.default_rng(6)
    x = rng.uniform(-1, 1, size=(7, 3))
    target = rng.uniform(-1, 1, size=(7, 2))

    def loss_of(params):
        out, cache = forward(params, x)
        err = out - target
        grads = backward(params, cache, (2.0 / err.shape[0]) * err)
        return float(np.mean(np.sum(err * err, axis=1))), grads

    loss0, grads = loss_of(net)
    h = 1e-6
    for arr, g in zip(iter_arrays(net), iter_arrays(grads)):
        for idx in range(arr.size):
            orig = arr.flat[idx]
            arr.flat[idx] = orig + h
            lp, _ = loss_of(net)
            arr.flat[idx] = orig - h
            lm, _ = loss_of(net)
            arr.flat[idx] = orig
            fd = (lp - lm) / (2 * h)
            assert g.flat[idx] == pytest.approx(fd, abs=5e-7)


def test_backward_rejects_mismatched_cache():
    net_a = init_mlp((5, 8, 2), seed=0)
    net_b = init_mlp((4, 8, 2), seed=0)
    _, cache_b = forward(net_b, np.zeros(4))
    with pytest.raises(ValueError):
        backward(net_a, cache_b, np.zeros((1, 2)))
    _, cache_a = forward(net_a, np.zeros(5))
    with pytest.raises(ValueError):
        backward(net_a, cache_a, np.zeros((2, 2)))


def test_flatten_unflatten_roundtrip():
    net = init_mlp((5, 12, 7, 3), seed=8, log_std_dim=3)
    flat = flatten_params(net)
    assert flat.size == param_count(net)
    back = unflatten_params(net.sizes, 3, flat)
    for a, b in zip(iter_arrays(net), iter_arrays(back)):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        unflatten_params(net.sizes, 3, flat[:-1])


def test_copy_params_is_deep():
    net = init_mlp((3, 4, 1), seed=0, log_std_dim=1)
    dup = copy_params(net)
    dup.weights[0][0, 0] += 1.0
    dup.log_std[0] += 1.0
    assert net.weights[0][0, 0] != dup.weights[0][0, 0]
    assert net.log_std[0] != dup.log_std[0]


def adam_oracle(theta, grads, lr, steps):
    """Textbook Adam on a flat vector, bias-corrected."""
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    out = theta.copy()
    for t in range(1, steps + 1):
        g = grads[t - 1]
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        mh = m / (1 - 0.9 ** t)
        vh = v / (1 - 0.999 ** t)
        out = out - lr * mh / (np.sqrt(vh) + 1e-8)
    return out


def test_adam_matches_oracle():
    rng = np.random.default_rng(12)
    net = Mlp(sizes=(2, 2), weights=[rng.normal(size=(2, 2))], biases=[rng.normal(size=2)],
              log_std=rng.normal(size=2))
    theta0 = flatten_params(net)
    state = AdamState.for_params(net)
    grad_seq = [rng.normal(size=theta0.size) for _ in range(5)]
    for g in grad_seq:
        gnet = unflatten_params((2, 2), 2, g)
        adam_update(net, gnet, 0.01, state)
    np.testing.assert_allclose(flatten_params(net), adam_oracle(theta0, grad_seq, 0.01, 5),
                               rtol=0, atol=1e-14)
    assert state.t == 5


def test_sgd_mode_is_plain_descent():
    net = init_mlp((2, 3, 1), seed=0)
    before = flatten_params(net)
    grads = unflatten_params(net.sizes, 0, np.ones_like(before))
    state = AdamState.for_params(net)
    adam_update(net, grads, 0.05, state, sgd=True)
    np.testing.assert_allclose(flatten_params(net), before - 0.05, atol=1e-15)
    assert state.t == 0


def test_adam_rejects_nonfinite_gradients():
    net = init_mlp((2, 3, 1), seed=0)
    bad = unflatten_params(net.sizes, 0, np.full(param_count(net), np.nan))
    with pytest.raises(ValueError):
        adam_update(net, bad, 0.01, AdamState.for_params(net))
    assert params_finite(net)


def test_adam_state_copy_independent():
    net = init_mlp((2, 2, 1), seed=0)
    a = AdamState.for_params(net)
    b = a.copy()
    b.m[0][0, 0] = 5.0
    b.t = 9
    assert a.m[0][0, 0] == 0.0 and a.t == 0


def test_grad_check_passes_correct_gradient():
    net = init_mlp((4, 16, 8, 2), seed=3, log_std_dim=2)
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, size=(12, 4))

    def quad_loss(params):
        out, cache = forward(params, x)
        grads = backward(params, cache, 2.0 * out / out.shape[0])
        # add a smooth term through log_std so that block is exercised too
        grads.log_std = 2.0 * params.log_std
        loss = float(np.mean(np.sum(out * out, axis=1)) + np.sum(params.log_std ** 2))
        return loss, grads

    assert grad_check(net, quad_loss, n_probes=300, seed=0) < 1e-6


def test_grad_check_flags_wrong_gradient():
    net = init_mlp((3, 8, 1), seed=1)
    x = np.random.default_rng(2).uniform(-1, 1, size=(6, 3))

    def broken(params):
        out, cache = forward(params, x)
        grads = backward(params, cache, 2.0 * out / out.shape[0])
        grads.weights[0] = grads.weights[0] * 1.5
        return float(np.mean(np.sum(out * out, axis=1))), grads

    assert grad_check(net, broken, n_probes=400, seed=0) > 0.1


def test_grad_check_leaves_params_untouched():
    net = init_mlp((3, 5, 1), seed=7)
    before = flatten_params(net)
    x = np.ones((2, 3))

    def loss(params):
        out, cache = forward(params, x)
        return float(np.sum(out)), backward(params, cache, np.ones_like(out))

    grad_check(net, loss, n_probes=50, seed=1)
    np.testing.assert_array_equal(flatten_params(net), before)
