"""Mixture density network: condition vector in, mixture parameters out.

A small tanh feedforward network maps the standardized condition vector to
a 3m head (kernel logits, centers, log-scales).  The head enforces the
mixture constraints by construction: weights through a softmax (positive,
summing to one), scales through exp plus a floor.  Centers and scales are
de-standardized back to KI units through the dataset normalizer, so model
outputs are always valid :class:`~knocksim.mixture.MixtureParams`.

Training maximizes data log-likelihood with mini-batch adaptive-moment
gradient descent over exact analytic gradients; everything is driven by a
single replayable random stream, so a (dataset, config, seed) triple pins
the resulting model bitwise.

Canonical parameter flattening order (used by ``gradient`` and the model
file format): for each layer from input to output, the weight matrix in
row-major order, then the bias vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mixture
from .core import Dataset, Normalizer, OperatingPoint, fit_normalizer
from .rng import RandomStream

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class TrainingConfig:
    kernel_count: int
    hidden_sizes: tuple[int, ...] = (32, 32)
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    sigma_floor: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.kernel_count < 1:
            raise ValueError("kernel_count must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be >= 1")


@dataclass(frozen=True)
class LossHistory:
    """Per-epoch mean negative log-likelihood on the training set (KI units)."""

    train_nll: np.ndarray
    holdout_nll: np.ndarray | None = None

    def __len__(self) -> int:
        return self.train_nll.size


@dataclass(frozen=True)
class MdnModel:
    """Feedforward network plus mixture head plus normalization statistics."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    kernel_count: int
    sigma_floor: float
    normalizer: Normalizer

    def __post_init__(self):
        ws = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.array(b, dtype=np.float64) for b in self.biases)
        if len(ws) != len(bs) or not ws:
            raise ValueError("need matching weight/bias lists")
        for w, b in zip(ws, bs):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.size:
                raise ValueError("layer shape mismatch")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("non-finite layer parameters")
            w.flags.writeable = False
            b.flags.writeable = False
        if ws[-1].shape[0] != 3 * self.kernel_count:
            raise ValueError("output head must have width 3 * kernel_count")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights[:-1])

    def flat_parameters(self) -> np.ndarray:
        """All parameters in the canonical flattening order."""
        return np.concatenate(
            [np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)]
        )


# -- raw network math (standardized space) ----------------------------------

def _head_split(a: np.ndarray, m: int):
    return a[:, :m], a[:, m:2 * m], a[:, 2 * m:]


def _forward_std(weights, biases, z_u: np.ndarray, m: int, floor: float):
    """Hidden activations plus head quantities on standardized inputs."""
    acts = [z_u]
    h = z_u
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.tanh(h @ w.T + b)
        acts.append(h)
    a = h @ weights[-1].T + biases[-1]
    a_w, a_mu, a_sg = _head_split(a, m)
    shift = a_w - a_w.max(axis=1, keepdims=True)
    e = np.exp(shift)
    pi = e / e.sum(axis=1, keepdims=True)
    sig = np.exp(a_sg) + floor
    return acts, pi, a_mu, sig


def _mix_std(pi, mu, sig, z_y):
    """Responsibilities and per-sample log-likelihood in standardized space."""
    t = (z_y[:, None] - mu) / sig
    logcomp = np.log(pi) - np.log(sig) - _HALF_LOG_2PI - 0.5 * t * t
    top = logcomp.max(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(np.exp(logcomp - top).sum(axis=1))
    gamma = np.exp(logcomp - lse[:, None])
    return t, lse, gamma


def _loss_and_grads(weights, biases, z_u, z_y, m, floor):
    """Mean NLL (standardized space) and per-layer gradients."""
    n = z_y.size
    acts, pi, mu, sig = _forward_std(weights, biases, z_u, m, floor)
    t, lse, gamma = _mix_std(pi, mu, sig, z_y)
    loss = -float(lse.mean())

    g_aw = (pi - gamma) / n
    g_amu = gamma * (mu - z_y[:, None]) / (sig * sig) / n
    g_asg = gamma * ((1.0 - t * t) / sig) * (sig - floor) / n
    d_a = np.concatenate([g_aw, g_amu, g_asg], axis=1)

    grads_w = [None] * len(weights)
    grads_b = [None] * len(weights)
    grads_w[-1] = d_a.T @ acts[-1]
    grads_b[-1] = d_a.sum(axis=0)
    dh = d_a @ weights[-1]
    for l in range(len(weights) - 2, -1, -1):
        dpre = dh * (1.0 - acts[l + 1] * acts[l + 1])
        grads_w[l] = dpre.T @ acts[l]
        grads_b[l] = dpre.sum(axis=0)
        dh = dpre @ weights[l]
    return loss, grads_w, grads_b


# -- public operations -------------------------------------------------------

def forward_raw(model: MdnModel, u_matrix: np.ndarray):
    """Vectorized forward pass: (n, 3) conditions to raw-unit mixture arrays.

    Returns (weights, means, sigmas) each of shape (n, m).
    """
    u_matrix = np.asarray(u_matrix, dtype=np.float64)
    if u_matrix.ndim != 2 or u_matrix.shape[1] != model.input_dim:
        raise ValueError(f"expected (n, {model.input_dim}) condition matrix")
    if not np.all(np.isfinite(u_matrix)):
        raise ValueError("conditions must be finite")
    z_u = model.normalizer.norm_inputs(u_matrix)
    _, pi, mu, sig = _forward_std(
        model.weights, model.biases, z_u, model.kernel_count, model.sigma_floor
    )
    sy = model.normalizer.output_std
    return pi, mu * sy + model.normalizer.output_mean, sig * sy


def forward(model: MdnModel, u: OperatingPoint) -> mixture.MixtureParams:
    """Mixture parameters (KI units) at one operating point."""
    pi, mu, sig = forward_raw(model, u.as_array()[None, :])
    return mixture.MixtureParams(pi[0], mu[0], sig[0])


def nll(model: MdnModel, u_matrix, y) -> float:
    """Mean negative log-likelihood of (condition, KI) pairs, KI units."""
    u_matrix = np.asarray(u_matrix, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("empty batch")
    z_u = model.normalizer.norm_inputs(u_matrix)
    z_y = model.normalizer.norm_output(y)
    _, pi, mu, sig = _forward_std(
        model.weights, model.biases, z_u, model.kernel_count, model.sigma_floor
    )
    _, lse, _ = _mix_std(pi, mu, sig, z_y)
    return -float(lse.mean()) + math.log(model.normalizer.output_std)


def gradient(model: MdnModel, u_matrix, y) -> np.ndarray:
    """Exact gradient of ``nll`` for every parameter, canonically flattened."""
    u_matrix = np.asarray(u_matrix, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("empty batch")
    z_u = model.normalizer.norm_inputs(u_matrix)
    z_y = model.normalizer.norm_output(y)
    _, gw, gb = _loss_and_grads(
        model.weights, model.biases, z_u, z_y, model.kernel_count, model.sigma_floor
    )
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(gw, gb)])


def _init_layers(sizes, rng: RandomStream):
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases; one layer at
    a time in network order, weights drawn row-major from the stream."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        u = rng.uniform(fan_out * fan_in)
        weights.append(((2.0 * u - 1.0) * limit).reshape(fan_out, fan_in))
        biases.append(np.zeros(fan_out))
    return weights, biases


def train(
    data: Dataset, config: TrainingConfig, rng: RandomStream | None = None
) -> tuple[MdnModel, LossHistory]:
    """Fit an MDN to a dataset by maximum likelihood.

    Normalization statistics come from ``data`` alone.  Each epoch shuffles
    the pairs through the stream and walks consecutive mini-batches with
    adaptive-moment updates.  When ``rng`` is omitted it is derived from
    ``config.seed``; passing identical (data, config, rng) replays training
    bit for bit.  The returned history holds one raw-unit mean NLL per
    epoch (batch losses averaged at the parameters current within the
    epoch).
    """
    if rng is None:
        rng = RandomStream(config.seed, stream_id=0)
    norm = fit_normalizer(data)
    u_matrix, y = data.pairs()
    z_u = norm.norm_inputs(u_matrix)
    z_y = norm.norm_output(y)
    n = z_y.size
    m = config.kernel_count

    sizes = (3,) + config.hidden_sizes + (3 * m,)
    weights, biases = _init_layers(sizes, rng)

    shapes = [(w.shape, b.shape) for w, b in zip(weights, biases)]
    dim = sum(w.size + b.size for w, b in zip(weights, biases))
    adam_m = np.zeros(dim)
    adam_v = np.zeros(dim)
    log_sy = math.log(norm.output_std)

    def flatten(ws, bs):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(ws, bs)])

    def unflatten(vec):
        ws, bs, at = [], [], 0
        for wshape, bshape in shapes:
            k = wshape[0] * wshape[1]
            ws.append(vec[at:at + k].reshape(wshape))
            at += k
            bs.append(vec[at:at + bshape[0]])
            at += bshape[0]
        return ws, bs

    theta = flatten(weights, biases)
    history = np.empty(config.epochs)
    step = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        zu_ep, zy_ep = z_u[perm], z_y[perm]
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            stop = min(start + config.batch_size, n)
            ws, bs = unflatten(theta)
            loss, gw, gb = _loss_and_grads(
                ws, bs, zu_ep[start:stop], zy_ep[start:stop], m, config.sigma_floor
            )
            grad = flatten(gw, gb)
            step += 1
            adam_m = config.beta1 * adam_m + (1.0 - config.beta1) * grad
            adam_v = config.beta2 * adam_v + (1.0 - config.beta2) * grad * grad
            m_hat = adam_m / (1.0 - config.beta1 ** step)
            v_hat = adam_v / (1.0 - config.beta2 ** step)
            theta = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
            loss_sum += loss * (stop - start)
        history[epoch] = loss_sum / n + log_sy

    ws, bs = unflatten(theta)
    model = MdnModel(
        weights=tuple(w.copy() for w in ws),
        biases=tuple(b.copy() for b in bs),
        kernel_count=m,
        sigma_floor=config.sigma_floor,
        normalizer=norm,
    )
    return model, LossHistory(train_nll=history)


def predict_cdf(model: MdnModel, u: OperatingPoint, y_grid) -> np.ndarray:
    """Mixture CDF at an operating point, evaluated on a sorted grid."""
    grid = np.asarray(y_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    return mixture.cdf(forward(model, u), grid)
