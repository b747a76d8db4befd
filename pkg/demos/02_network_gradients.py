"""The dense-network engine and its gradient checker.

Fits a small tanh network to a known function with hand-derived backprop
plus Adam, then shows the finite-difference checker both passing a correct
gradient and catching a deliberately broken one.
"""

import numpy as np

from scorpion_rl import AdamState, adam_update, forward, grad_check, init_mlp
from scorpion_rl.nets import backward


def target_fn(x):
    return np.stack([np.sin(2.0 * x[:, 0]) * x[:, 1], x[:, 2] ** 2], axis=1)


def fit_regression():
    print("== fit y = (sin(2a) b, c^2) with a (3, 32, 32, 2) network ==")
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(256, 3))
    y = target_fn(x)
    net = init_mlp((3, 32, 32, 2), seed=1)
    opt = AdamState.for_params(net)
    for step in range(1, 2001):
        out, cache = forward(net, x)
        err = out - y
        loss = float(np.mean(np.sum(err * err, axis=1)))
        grads = backward(net, cache, (2.0 / x.shape[0]) * err)
        adam_update(net, grads, 1e-2, opt)
        if step in (1, 10, 100, 500, 2000):
            print(f"  step {step:5d}  mse {loss:.6f}")
    x_test = rng.uniform(-1, 1, size=(512, 3))
    out, _ = forward(net, x_test)
    mse = float(np.mean(np.sum((out - target_fn(x_test)) ** 2, axis=1)))
    print(f"  held-out mse {mse:.6f}")
    print()
    return net, x


def check_gradients(net, x):
    print("== finite-difference gradient check ==")

    def loss_fn(params):
        out, cache = forward(params, x)
        grads = backward(params, cache, (2.0 / x.shape[0]) * out)
        return float(np.mean(np.sum(out * out, axis=1))), grads

    err = grad_check(net, loss_fn, n_probes=300, seed=0)
    print(f"  correct analytic gradient: max relative error {err:.2e}")

    def broken_fn(params):
        loss, grads = loss_fn(params)
        grads.weights[1] = grads.weights[1] * 1.3  # wrong on purpose
        return loss, grads

    err = grad_check(net, broken_fn, n_probes=300, seed=0)
    print(f"  gradient scaled by 1.3 on one layer: max relative error {err:.2e}")
    print("  anything near or above 1e-4 would fail the engine's tolerance")


if __name__ == "__main__":
    net, x = fit_regression()
    check_gradients(net, x)
