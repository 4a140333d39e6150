"""Small feed-forward networks with hand-written backprop and Adam.

Parameters of a network live in one contiguous float64 vector; the per-layer
weight and bias arrays are views into it. That keeps optimizer updates,
Polyak averaging and copies to a single vectorized operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArchitectureError, NumericError, ShapeError

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("tanh", "identity")


def _layer_slices(layer_sizes):
    slices = []
    offset = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = slice(offset, offset + fan_in * fan_out)
        offset = w.stop
        b = slice(offset, offset + fan_out)
        offset = b.stop
        slices.append((w, b))
    return slices, offset


def n_params(layer_sizes: Sequence[int]) -> int:
    return _layer_slices(tuple(layer_sizes))[1]


class MlpNet:
    """Feed-forward network ``x -> act_out(... act_hidden(x @ W0 + b0) ...)``.

    Weights are stored ``(fan_in, fan_out)`` so a batch is a row matrix.
    """

    def __init__(self, layer_sizes, hidden_activation="relu", output_activation="identity", params=None):
        layer_sizes = tuple(int(n) for n in layer_sizes)
        if len(layer_sizes) < 2:
            raise InvalidArchitectureError(f"need at least two layer sizes, got {layer_sizes}")
        if any(n < 1 for n in layer_sizes):
            raise InvalidArchitectureError(f"layer sizes must be positive, got {layer_sizes}")
        if hidden_activation not in HIDDEN_ACTIVATIONS:
            raise InvalidArchitectureError(f"unknown hidden activation {hidden_activation!r}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise InvalidArchitectureError(f"unknown output activation {output_activation!r}")
        self.layer_sizes = layer_sizes
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self._slices, size = _layer_slices(layer_sizes)
        if params is None:
            params = np.zeros(size)
        params = np.ascontiguousarray(params, dtype=np.float64)
        if params.shape != (size,):
            raise ShapeError(f"expected {size} parameters, got shape {params.shape}")
        self.params = params
        self.weights, self.biases = self.unflatten(params)

    def unflatten(self, vector: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Per-layer ``(weights, biases)`` views into a parameter-shaped vector."""
        ws, bs = [], []
        for (w, b), fan_in, fan_out in zip(self._slices, self.layer_sizes[:-1], self.layer_sizes[1:]):
            ws.append(vector[w].reshape(fan_in, fan_out))
            bs.append(vector[b])
        return ws, bs

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def architecture(self) -> tuple:
        return (self.layer_sizes, self.hidden_activation, self.output_activation)

    def copy(self) -> MlpNet:
        return MlpNet(self.layer_sizes, self.hidden_activation, self.output_activation, self.params.copy())

    def load_params_from(self, other: MlpNet) -> None:
        if other.architecture() != self.architecture():
            raise ShapeError(f"architecture mismatch: {other.architecture()} vs {self.architecture()}")
        self.params[:] = other.params

    def __call__(self, x):
        return forward(self, x)

    def __eq__(self, other):
        if not isinstance(other, MlpNet):
            return NotImplemented
        return self.architecture() == other.architecture() and np.array_equal(self.params, other.params)

    __hash__ = None

    def __repr__(self):
        return (
            f"MlpNet(layer_sizes={self.layer_sizes}, hidden_activation={self.hidden_activation!r}, "
            f"output_activation={self.output_activation!r})"
        )


def mlp_init(layer_sizes, hidden_act="relu", output_act="identity", seed=0) -> MlpNet:
    """Build a network with weights and biases uniform in ``±1/sqrt(fan_in)``."""
    net = MlpNet(layer_sizes, hidden_act, output_act)
    rng = np.random.default_rng(seed)
    for w, b in zip(net.weights, net.biases):
        bound = 1.0 / np.sqrt(w.shape[0])
        w[...] = rng.uniform(-bound, bound, size=w.shape)
        b[...] = rng.uniform(-bound, bound, size=b.shape)
    return net


def _activate(z, tag):
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(h, tag):
    # derivative expressed through the activation output h
    if tag == "relu":
        return (h > 0.0).astype(np.float64)
    if tag == "tanh":
        return 1.0 - h * h
    return None


def _as_batch(net, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ShapeError(f"expected input of width {net.in_dim}, got shape {np.shape(x)}")
    return x, single


def forward_cached(net: MlpNet, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batch forward pass returning the output and every layer's activations."""
    h, _ = _as_batch(net, x)
    cache = [h]
    last = net.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = _activate(h @ w + b, net.output_activation if i == last else net.hidden_activation)
        cache.append(h)
    return h, cache


def forward(net: MlpNet, x) -> np.ndarray:
    """Evaluate the network on one input vector or a batch of row vectors."""
    x, single = _as_batch(net, x)
    out, _ = forward_cached(net, x)
    return out[0] if single else out


def backprop(net: MlpNet, x, upstream, cache=None) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``mean_i loss_i`` given ``upstream[i] = d loss_i / d output_i``.

    Returns ``(param_grad, input_grad)``. ``param_grad`` is laid out like
    ``net.params``; ``input_grad[i]`` is ``d loss_i / d x_i`` (not averaged).
    """
    x, _ = _as_batch(net, x)
    if cache is None:
        _, cache = forward_cached(net, x)
    upstream = np.asarray(upstream, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise ShapeError("empty batch")
    if upstream.shape != (n, net.out_dim):
        raise ShapeError(f"upstream gradient shape {upstream.shape} != {(n, net.out_dim)}")
    grad = np.empty_like(net.params)
    gws, gbs = net.unflatten(grad)
    delta = upstream
    out_grad = _activation_grad(cache[-1], net.output_activation)
    if out_grad is not None:
        delta = delta * out_grad
    for i in range(net.n_layers - 1, -1, -1):
        h_in = cache[i]
        gws[i][...] = h_in.T @ delta
        gws[i] /= n
        gbs[i][...] = delta.sum(axis=0) / n
        delta = delta @ net.weights[i].T
        if i > 0:
            delta *= _activation_grad(h_in, net.hidden_activation)
    return grad, delta


def input_gradient(net: MlpNet, x, upstream, cache=None) -> np.ndarray:
    """Per-sample ``d loss_i / d x_i`` without forming parameter gradients."""
    x, _ = _as_batch(net, x)
    if cache is None:
        _, cache = forward_cached(net, x)
    delta = np.asarray(upstream, dtype=np.float64)
    if delta.shape != (x.shape[0], net.out_dim):
        raise ShapeError(f"upstream gradient shape {delta.shape} != {(x.shape[0], net.out_dim)}")
    out_grad = _activation_grad(cache[-1], net.output_activation)
    if out_grad is not None:
        delta = delta * out_grad
    for i in range(net.n_layers - 1, -1, -1):
        delta = delta @ net.weights[i].T
        if i > 0:
            delta *= _activation_grad(cache[i], net.hidden_activation)
    return delta


def backward(net: MlpNet, batch_inputs, upstream_output_gradients, cache=None) -> np.ndarray:
    """Batch-mean parameter gradient, flat and aligned with ``net.params``."""
    return backprop(net, batch_inputs, upstream_output_gradients, cache)[0]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-4
    l2_coef: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0

    @classmethod
    def for_net(cls, net: MlpNet, lr=1e-4, l2_coef=0.0, **kwargs) -> AdamState:
        return cls(np.zeros_like(net.params), np.zeros_like(net.params), lr=lr, l2_coef=l2_coef, **kwargs)

    def copy(self) -> AdamState:
        return AdamState(self.m.copy(), self.v.copy(), self.lr, self.l2_coef, self.beta1, self.beta2, self.eps, self.step_count)


def adam_step(net: MlpNet, grads: np.ndarray, state: AdamState) -> tuple[MlpNet, AdamState]:
    """One bias-corrected Adam update with additive L2 term, in place."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != net.params.shape or state.m.shape != net.params.shape:
        raise ShapeError(f"gradient/moment shape mismatch for {net!r}")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient entries")
    if state.l2_coef:
        grads = grads + state.l2_coef * net.params
    state.step_count += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * (grads * grads)
    # bias corrections folded into scalars: m_hat / (sqrt(v_hat) + eps)
    bc1 = 1.0 - state.beta1**state.step_count
    bc2 = 1.0 - state.beta2**state.step_count
    denom = np.sqrt(state.v)
    denom *= 1.0 / np.sqrt(bc2)
    denom += state.eps
    update = state.m * (state.lr / bc1)
    update /= denom
    net.params -= update
    return net, state


Objective = Callable[[MlpNet], "tuple[float, np.ndarray]"]


def mse_objective(batch) -> Objective:
    """``mean_i ||f(x_i) - y_i||^2`` and its analytic parameter gradient."""
    x, y = (np.asarray(a, dtype=np.float64) for a in batch)

    def objective(net):
        out, cache = forward_cached(net, x)
        diff = out - y
        loss = float(np.mean(np.sum(diff * diff, axis=1)))
        return loss, backward(net, x, 2.0 * diff, cache)

    return objective


def relative_error(analytic: np.ndarray, numeric: np.ndarray, scale_floor=1e-3) -> np.ndarray:
    """Entrywise ``|a - n| / max(|a|, |n|, scale_floor * max|a|)`` with ``0/0 = 0``.

    The floor keeps entries that are orders of magnitude below the dominant
    gradient entry from being judged on finite-difference rounding noise.
    """
    num = np.abs(analytic - numeric)
    den = np.maximum(np.abs(analytic), np.abs(numeric))
    if analytic.size:
        den = np.maximum(den, scale_floor * np.abs(analytic).max())
    out = np.zeros_like(num)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out


def numerical_gradient(net: MlpNet, objective: Objective, epsilon=1e-6) -> np.ndarray:
    probe = net.copy()
    grad = np.empty_like(probe.params)
    for i in range(probe.params.size):
        orig = probe.params[i]
        probe.params[i] = orig + epsilon
        up = objective(probe)[0]
        probe.params[i] = orig - epsilon
        down = objective(probe)[0]
        probe.params[i] = orig
        grad[i] = (up - down) / (2.0 * epsilon)
    return grad


def grad_check(net: MlpNet, batch=None, epsilon=1e-6, objective: Objective | None = None, scale_floor=1e-3) -> float:
    """Worst entrywise relative error between backprop and central differences.

    ``objective(net) -> (loss, grad)`` defaults to the squared-error
    regression loss on ``batch = (inputs, targets)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if objective is None:
        if batch is None or len(batch[0]) == 0:
            raise ShapeError("grad_check needs a nonempty batch")
        objective = mse_objective(batch)
    analytic = objective(net)[1]
    numeric = numerical_gradient(net, objective, epsilon)
    err = relative_error(analytic, numeric, scale_floor)
    return float(err.max()) if err.size else 0.0


def save_net(net: MlpNet, path) -> Path:
    """Write a checkpoint (``.npz``) holding sizes, activation tags and layer arrays."""
    path = Path(path)
    arrays = {
        "layer_sizes": np.asarray(net.layer_sizes, dtype=np.int64),
        "activations": np.asarray([net.hidden_activation, net.output_activation]),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_net(path) -> MlpNet:
    with np.load(Path(path), allow_pickle=False) as data:
        hidden, output = (str(s) for s in data["activations"])
        net = MlpNet(data["layer_sizes"].tolist(), hidden, output)
        for i in range(net.n_layers):
            net.weights[i][...] = data[f"W{i}"]
            net.biases[i][...] = data[f"b{i}"]
    return net
