"""Dense-network engine written directly against numpy.

Implements exactly what PPO on a 5-input robot needs and nothing more:
fully connected layers with tanh hidden activations and identity output,
hand-derived reverse-mode gradients, Adam (with a plain-SGD fallback) and a
central finite-difference checker used to validate the backprop path. All
parameters are float64.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

LOG_STD_INIT = math.log(0.5)


@dataclass
class Mlp:
    """Parameters of one network; also reused as a gradient container.

    ``weights[k]`` has shape (fan_out, fan_in) and ``biases[k]`` shape
    (fan_out,). ``log_std`` holds per-dimension log standard deviations for
    a Gaussian head, or None for a plain function approximator.
    """

    sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    log_std: Optional[np.ndarray] = None


@dataclass
class FwdCache:
    """Layer inputs saved by forward() for the matching backward() call."""

    acts: List[np.ndarray]
    single: bool


def init_mlp(layer_sizes: Sequence[int], seed: int, log_std_dim: int = 0,
             log_std_init: float = LOG_STD_INIT) -> Mlp:
    """Build a network with uniform(-b, b) weights, b = sqrt(6/(fan_in+fan_out)).

    Biases start at zero. ``log_std_dim > 0`` attaches a learnable log-std
    vector initialized to ``log_std_init``.
    """
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"need at least two positive layer sizes, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    log_std = np.full(int(log_std_dim), float(log_std_init)) if log_std_dim else None
    return Mlp(sizes=sizes, weights=weights, biases=biases, log_std=log_std)


def forward(params: Mlp, x) -> Tuple[np.ndarray, FwdCache]:
    """Evaluate the network on one input (d,) or a batch (n, d).

    Returns the output (matching the input's batch-ness) and a cache for
    backward(). Hidden layers apply tanh, the last layer is linear.
    """
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != params.sizes[0]:
        raise ValueError(f"input shape {np.shape(x)} does not feed a {params.sizes[0]}-input net")
    acts = [a]
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w.T + b
        if k < last:
            a = np.tanh(a)
            acts.append(a)
    out = a[0] if single else a
    return out, FwdCache(acts=acts, single=single)


def backward(params: Mlp, cache: FwdCache, output_grad) -> Mlp:
    """Backpropagate d(loss)/d(output) through the cached forward pass.

    Returns parameter gradients in an Mlp of matching shapes (``log_std``
    gradient is zeros here; heads that use it add their own term). Rejects
    caches whose shapes do not match ``params``.
    """
    if not isinstance(cache, FwdCache) or len(cache.acts) != len(params.weights):
        raise ValueError("cache does not match this network")
    if cache.acts[0].shape[1] != params.sizes[0]:
        raise ValueError("cache was produced by a network with a different input size")
    g = np.asarray(output_grad, dtype=float)
    if cache.single:
        g = g[None, :]
    n = cache.acts[0].shape[0]
    if g.shape != (n, params.sizes[-1]):
        raise ValueError(f"output_grad shape {np.shape(output_grad)} does not match "
                         f"a batch of {n} outputs of size {params.sizes[-1]}")
    n_layers = len(params.weights)
    g_w: List[np.ndarray] = [None] * n_layers
    g_b: List[np.ndarray] = [None] * n_layers
    dz = g
    for k in range(n_layers - 1, -1, -1):
        g_w[k] = dz.T @ cache.acts[k]
        g_b[k] = dz.sum(axis=0)
        if k > 0:
            # cache.acts[k] is tanh(z_k), so tanh' = 1 - acts^2
            dz = (dz @ params.weights[k]) * (1.0 - cache.acts[k] ** 2)
    g_log_std = np.zeros_like(params.log_std) if params.log_std is not None else None
    return Mlp(sizes=params.sizes, weights=g_w, biases=g_b, log_std=g_log_std)


def iter_arrays(params: Mlp) -> List[np.ndarray]:
    """All parameter arrays in a fixed order: W0, b0, W1, b1, ..., log_std."""
    arrays = []
    for w, b in zip(params.weights, params.biases):
        arrays.append(w)
        arrays.append(b)
    if params.log_std is not None:
        arrays.append(params.log_std)
    return arrays


def copy_params(params: Mlp) -> Mlp:
    return Mlp(sizes=params.sizes,
               weights=[w.copy() for w in params.weights],
               biases=[b.copy() for b in params.biases],
               log_std=None if params.log_std is None else params.log_std.copy())


def params_finite(params: Mlp) -> bool:
    return all(np.isfinite(a).all() for a in iter_arrays(params))


def param_count(params: Mlp) -> int:
    return sum(a.size for a in iter_arrays(params))


def flatten_params(params: Mlp) -> np.ndarray:
    """Concatenate every array (iter_arrays order) into one float64 vector."""
    return np.concatenate([a.ravel() for a in iter_arrays(params)])


def unflatten_params(layer_sizes: Sequence[int], log_std_dim: int, flat: np.ndarray) -> Mlp:
    """Inverse of flatten_params() given the layer-size header."""
    sizes = tuple(int(s) for s in layer_sizes)
    flat = np.asarray(flat, dtype=float)
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        n = fan_out * fan_in
        weights.append(flat[pos:pos + n].reshape(fan_out, fan_in).copy())
        pos += n
        biases.append(flat[pos:pos + fan_out].copy())
        pos += fan_out
    log_std = None
    if log_std_dim:
        log_std = flat[pos:pos + log_std_dim].copy()
        pos += log_std_dim
    if pos != flat.size:
        raise ValueError(f"flat vector has {flat.size} values, layout needs {pos}")
    return Mlp(sizes=sizes, weights=weights, biases=biases, log_std=log_std)


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: Mlp) -> "AdamState":
        arrays = iter_arrays(params)
        return cls(m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays])

    def copy(self) -> "AdamState":
        return AdamState(m=[a.copy() for a in self.m],
                         v=[a.copy() for a in self.v], t=self.t)


def adam_update(params: Mlp, grads: Mlp, lr: float, state: AdamState,
                sgd: bool = False, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8) -> None:
    """One in-place descent step; ``sgd=True`` bypasses the moment estimates.

    Raises on non-finite gradients rather than corrupting the parameters.
    """
    p_arrays = iter_arrays(params)
    g_arrays = iter_arrays(grads)
    if len(p_arrays) != len(g_arrays):
        raise ValueError("gradient structure does not match parameters")
    for g in g_arrays:
        if not np.isfinite(g).all():
            raise ValueError("non-finite gradient")
    if sgd:
        for p, g in zip(p_arrays, g_arrays):
            p -= lr * g
        return
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def grad_check(params: Mlp, loss_fn: Callable[[Mlp], Tuple[float, Mlp]],
               n_probes: int = 200, h: float = 1e-5, seed: int = 0) -> float:
    """Compare analytic gradients against central finite differences.

    ``loss_fn(params) -> (loss, grads)`` must be deterministic. ``n_probes``
    coordinates are sampled uniformly over all parameters and perturbed by
    +-h in place. Returns the max of |fd - analytic| / max(|fd|, |analytic|,
    1e-4); the floor keeps finite-difference roundoff on near-zero
    coordinates from registering as disagreement.
    """
    _, grads = loss_fn(params)
    p_arrays = iter_arrays(params)
    g_arrays = iter_arrays(grads)
    sizes = np.array([a.size for a in p_arrays])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, offsets[-1], size=int(n_probes))
    max_rel = 0.0
    for flat_idx in picks:
        arr_i = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        off = int(flat_idx - offsets[arr_i])
        arr = p_arrays[arr_i]
        orig = arr.flat[off]
        arr.flat[off] = orig + h
        loss_plus, _ = loss_fn(params)
        arr.flat[off] = orig - h
        loss_minus, _ = loss_fn(params)
        arr.flat[off] = orig
        fd = (loss_plus - loss_minus) / (2.0 * h)
        an = g_arrays[arr_i].flat[off]
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-4)
        if rel > max_rel:
            max_rel = rel
    return max_rel
