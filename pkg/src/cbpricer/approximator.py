"""Small feedforward ReLU regressor trained with Adam, written directly in numpy.

One `Network` is fitted per time step of the backward recursion. All
parameters live in a single flat vector so the Adam update is a handful of
vectorised operations; the per-layer weight and bias arrays are views into it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    hidden_layers: int = 3
    hidden_width: int = 64
    learning_rate: float = 1e-3
    batch_size: int = 512
    epochs: int = 8
    init_seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    warm_start: bool = True
    # Shift the output bias after training so the mean residual is zero.
    recenter_bias: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("input_dim", "hidden_layers", "hidden_width", "batch_size", "epochs"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [1]


@dataclass
class FitReport:
    final_loss: float
    loss_curve: list[float] = field(default_factory=list)
    n_samples: int = 0
    n_updates: int = 0


class Network:
    """Fully connected ReLU network with a scalar linear output.

    The output is ``y_shift + y_scale * mlp(x)``; the affine head is fixed
    (not trained) and lets the hidden layers work on unit-scale targets.
    """

    def __init__(self, config: NetworkConfig, theta: np.ndarray | None = None):
        self.config = config
        sizes = config.layer_sizes
        self.shapes = [(n_out, n_in) for n_in, n_out in zip(sizes[:-1], sizes[1:])]
        n_params = sum(o * i + o for o, i in self.shapes)
        dtype = np.dtype(config.dtype)
        self.theta = np.zeros(n_params, dtype) if theta is None else np.array(theta, dtype=dtype)
        if self.theta.shape != (n_params,):
            raise ValueError(f"expected {n_params} parameters, got {self.theta.shape}")
        self.weights, self.biases = _views(self.theta, self.shapes)
        self.y_shift = 0.0
        self.y_scale = 1.0
        self.reset_optimizer()

    def reset_optimizer(self) -> None:
        self.adam_m = np.zeros_like(self.theta)
        self.adam_v = np.zeros_like(self.theta)
        self.adam_t = 0

    @property
    def n_params(self) -> int:
        return self.theta.size

    def copy(self) -> "Network":
        other = Network(self.config, self.theta)
        other.y_shift, other.y_scale = self.y_shift, self.y_scale
        return other

    def __call__(self, features: np.ndarray) -> np.ndarray | float:
        return forward(self, features)

    def save_csv(self, path: str | Path) -> None:
        """Write parameters layer-major (W then b per layer, row-major)."""
        shapes = ";".join(f"{o}x{i}" for o, i in self.shapes)
        header = f"shapes={shapes} y_shift={self.y_shift!r} y_scale={self.y_scale!r}"
        np.savetxt(path, self.theta, header=header, fmt="%.17g")

    @classmethod
    def load_csv(cls, path: str | Path, config: NetworkConfig) -> "Network":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().lstrip("# ").split()
        meta = dict(item.split("=", 1) for item in header)
        net = cls(config, np.loadtxt(path, ndmin=1))
        net.y_shift = float(meta["y_shift"])
        net.y_scale = float(meta["y_scale"])
        return net


def _views(theta: np.ndarray, shapes: list[tuple[int, int]]):
    weights, biases = [], []
    pos = 0
    for n_out, n_in in shapes:
        weights.append(theta[pos:pos + n_out * n_in].reshape(n_out, n_in))
        pos += n_out * n_in
        biases.append(theta[pos:pos + n_out])
        pos += n_out
    return weights, biases


def init(config: NetworkConfig, zero: bool = False) -> Network:
    """He-style uniform fan-in initialisation, U(-sqrt(6/fan_in), sqrt(6/fan_in)); biases zero."""
    net = Network(config)
    if zero:
        return net
    rng = np.random.default_rng(config.init_seed)
    for w in net.weights:
        limit = np.sqrt(6.0 / w.shape[1])
        w[...] = rng.uniform(-limit, limit, size=w.shape)  # drawn in float64, then cast
    return net


def _check_features(net: Network, x: np.ndarray) -> np.ndarray:
    if x.shape[-1] != net.config.input_dim:
        raise ValueError(f"expected {net.config.input_dim} features, got {x.shape[-1]}")
    return x


def forward(net: Network, features) -> np.ndarray | float:
    """Evaluate the network on one feature vector (returns float) or a batch (rows)."""
    x = np.asarray(features, dtype=net.theta.dtype)
    single = x.ndim == 1
    a = _check_features(net, np.atleast_2d(x))
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        a = a @ w.T + b
        if k < last:
            np.maximum(a, 0.0, out=a)
    out = net.y_shift + net.y_scale * a[:, 0].astype(float)
    return float(out[0]) if single else out


def loss_and_gradient(net: Network, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error on (x, y) and its exact gradient w.r.t. the flat parameters."""
    dtype = net.theta.dtype
    x = _check_features(net, np.asarray(x, dtype=dtype))
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    acts = [x]
    pre = []
    last = len(net.weights) - 1
    a = x
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = np.maximum(z, 0.0) if k < last else z
        acts.append(a)
    resid = net.y_shift + net.y_scale * a[:, 0].astype(float) - y
    loss = float(resid @ resid) / n

    grad = np.empty_like(net.theta)
    gw, gb = _views(grad, net.shapes)
    delta = ((2.0 * net.y_scale / n) * resid[:, None]).astype(dtype)
    for k in range(last, -1, -1):
        gw[k][...] = delta.T @ acts[k]
        gb[k][...] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ net.weights[k]) * (pre[k - 1] > 0.0)
    return loss, grad


def adam_step(net: Network, grad: np.ndarray) -> None:
    cfg = net.config
    net.adam_t += 1
    net.adam_m *= cfg.beta1
    net.adam_m += (1.0 - cfg.beta1) * grad
    net.adam_v *= cfg.beta2
    net.adam_v += (1.0 - cfg.beta2) * grad * grad
    m_hat = net.adam_m / (1.0 - cfg.beta1 ** net.adam_t)
    v_hat = net.adam_v / (1.0 - cfg.beta2 ** net.adam_t)
    net.theta -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def fit(net: Network, inputs: np.ndarray, targets: np.ndarray, config: NetworkConfig | None = None,
        shuffle_seed: int = 0) -> FitReport:
    """Minimise mean squared error with mini-batch Adam.

    Batches are reshuffled each epoch from ``shuffle_seed``; the last partial
    batch is kept. If there are fewer rows than ``batch_size`` the whole set is
    one batch.
    """
    cfg = config or net.config
    x = _check_features(net, np.asarray(inputs, dtype=net.theta.dtype))
    y = np.asarray(targets, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise ValueError("inputs and targets have different lengths")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets contain non-finite values")
    n = y.size
    rng = np.random.default_rng(shuffle_seed)
    curve = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grad = loss_and_gradient(net, x[idx], y[idx])
            adam_step(net, grad)
            total += loss * idx.size
        curve.append(total / n)
        if not np.isfinite(curve[-1]):
            raise FloatingPointError(f"training diverged (loss={curve[-1]})")

    pred = forward(net, x)
    if cfg.recenter_bias:
        shift = float(np.mean(y - pred))
        net.biases[-1][0] += shift / net.y_scale
        pred = pred + shift
    resid = pred - y
    final = float(resid @ resid) / n
    if not np.isfinite(final):
        raise FloatingPointError(f"training diverged (loss={final})")
    return FitReport(final_loss=final, loss_curve=curve, n_samples=n,
                     n_updates=cfg.epochs * -(-n // cfg.batch_size))
