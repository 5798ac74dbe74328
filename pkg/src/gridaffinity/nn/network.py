"""The conv/pool x3 -> dense x3 -> single-output regression network."""

from __future__ import annotations

import copy
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import MissingLabelError, ShapeError
from . import layers

CONV_INIT_STD = 0.001
CONV_BIAS_INIT = 0.1
DENSE_BIAS_INIT = 1.0

_DEBUG = os.environ.get("GRIDAFFINITY_DEBUG", "") not in ("", "0")


@dataclass
class NetworkConfig:
    conv_filters: tuple[int, ...] = (64, 128, 256)
    conv_kernel: int = 5
    pool_size: int = 2
    dense_sizes: tuple[int, ...] = (1000, 500, 200)
    dropout_keep: float = 0.5
    lambda_l2: float = 0.001
    learning_rate: float = 1e-5
    input_shape: tuple[int, int, int, int] = (21, 21, 21, 19)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    dtype: str = "float32"

    def __post_init__(self):
        self.conv_filters = tuple(int(v) for v in self.conv_filters)
        self.dense_sizes = tuple(int(v) for v in self.dense_sizes)
        self.input_shape = tuple(int(v) for v in self.input_shape)
        if len(self.input_shape) != 4 or min(self.input_shape) < 1:
            raise ValueError(f"input_shape must be 4 positive ints, got {self.input_shape}")
        if min(self.conv_filters + self.dense_sizes, default=1) < 1:
            raise ValueError("layer sizes must be positive")
        if self.conv_kernel < 1 or self.conv_kernel % 2 == 0:
            raise ValueError("conv_kernel must be a positive odd integer")
        if self.pool_size != 2:
            raise ValueError("only 2x2x2 pooling is implemented")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ValueError("dropout_keep must lie in (0, 1]")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(**d)

    def layer_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        """Output shape (per example) after every layer, in forward order."""
        d, h, w, _ = self.input_shape
        shapes = [("input", self.input_shape)]
        for i, f in enumerate(self.conv_filters, start=1):
            shapes.append((f"conv{i}", (d, h, w, f)))
            d, h, w = -(-d // 2), -(-h // 2), -(-w // 2)
            shapes.append((f"pool{i}", (d, h, w, f)))
        flat = d * h * w * (self.conv_filters[-1] if self.conv_filters else self.input_shape[3])
        shapes.append(("flatten", (flat,)))
        for i, n in enumerate(self.dense_sizes, start=1):
            shapes.append((f"fc{i}", (n,)))
        shapes.append(("output", (1,)))
        return shapes

    def flat_size(self) -> int:
        return dict(self.layer_shapes())["flatten"][0]

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        k = self.conv_kernel
        shapes = {}
        cin = self.input_shape[3]
        for i, f in enumerate(self.conv_filters, start=1):
            shapes[f"conv{i}.w"] = (k, k, k, cin, f)
            shapes[f"conv{i}.b"] = (f,)
            cin = f
        n_in = self.flat_size()
        for i, n in enumerate(self.dense_sizes, start=1):
            shapes[f"fc{i}.w"] = (n_in, n)
            shapes[f"fc{i}.b"] = (n,)
            n_in = n
        shapes["out.w"] = (n_in, 1)
        shapes["out.b"] = (1,)
        return shapes


@dataclass
class Network:
    config: NetworkConfig
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    charge_std: float | None = None

    def __post_init__(self):
        expected = self.config.param_shapes()
        if list(self.params) != list(expected):
            raise ShapeError(f"parameter names {list(self.params)} do not match config "
                             f"{list(expected)}")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ShapeError(f"layer {name}: shape {self.params[name].shape}, "
                                 f"config expects {shape}")
        if not self.adam_m:
            self.adam_m = {k: np.zeros_like(v) for k, v in self.params.items()}
            self.adam_v = {k: np.zeros_like(v) for k, v in self.params.items()}

    @property
    def n_conv(self) -> int:
        return len(self.config.conv_filters)

    @property
    def n_dense(self) -> int:
        return len(self.config.dense_sizes)

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    def n_parameters(self) -> int:
        return sum(v.size for v in self.params.values())


def is_weight(name: str) -> bool:
    return name.endswith(".w")


def init_network(config: NetworkConfig, rng: np.random.Generator) -> Network:
    dt = config.np_dtype
    params = {}
    for name, shape in config.param_shapes().items():
        if name.startswith("conv"):
            if is_weight(name):
                params[name] = layers.trunc_normal(shape, CONV_INIT_STD, rng, dtype=dt)
            else:
                params[name] = np.full(shape, CONV_BIAS_INIT, dtype=dt)
        elif is_weight(name):
            params[name] = layers.trunc_normal(shape, 1.0 / np.sqrt(shape[0]), rng, dtype=dt)
        else:
            params[name] = np.full(shape, DENSE_BIAS_INIT, dtype=dt)
    return Network(config, params)


def _grid_batch(net: Network, grids) -> np.ndarray:
    if isinstance(grids, (list, tuple)):
        grids = np.stack([getattr(g, "data", g) for g in grids])
    else:
        grids = getattr(grids, "data", grids)
    x = np.asarray(grids, dtype=net.config.np_dtype)
    if x.ndim == 4:
        x = x[None]
    if x.shape[1:] != net.config.input_shape:
        raise ShapeError(f"grid shape {x.shape[1:]} does not match network input "
                         f"{net.config.input_shape}")
    return x


def forward(net: Network, grids, training: bool = False, rng: np.random.Generator | None = None,
            trace: bool = False):
    """Predict affinities for a batch of grids.

    ``grids`` is a Grid, a list of Grids, or an array (D,H,W,C)/(B,D,H,W,C).
    Returns ``(predictions (B,), cache)``. ``cache`` holds everything
    :func:`backward` needs; with ``trace=True`` it also has a ``"trace"``
    dict of per-layer activations.
    """
    if training and net.config.dropout_keep < 1.0 and rng is None:
        raise ValueError("training-mode forward with dropout needs an rng")
    p = net.params
    x = _grid_batch(net, grids)
    cache = {"conv_in": [], "conv_out": [], "pool_arg": [], "dense_in": [], "dense_out": [],
             "masks": []}
    tr = {} if trace else None
    h = x
    for i in range(1, net.n_conv + 1):
        cache["conv_in"].append(h)
        a = layers.relu(layers.conv3d_forward(h, p[f"conv{i}.w"], p[f"conv{i}.b"]))
        cache["conv_out"].append(a)
        h, arg = layers.maxpool3d_forward(a)
        cache["pool_arg"].append(arg)
        if trace:
            tr[f"conv{i}"] = a
            tr[f"pool{i}"] = h
    cache["pool_shape"] = h.shape
    f = h.reshape(h.shape[0], -1)
    if trace:
        tr["flatten"] = f
    for i in range(1, net.n_dense + 1):
        cache["dense_in"].append(f)
        a = layers.relu(layers.dense_forward(f, p[f"fc{i}.w"], p[f"fc{i}.b"]))
        cache["dense_out"].append(a)
        f, mask = layers.dropout_forward(a, net.config.dropout_keep, rng, training)
        cache["masks"].append(mask)
        if trace:
            tr[f"fc{i}"] = f
    cache["dense_in"].append(f)
    out = layers.dense_forward(f, p["out.w"], p["out.b"])
    y = out[:, 0]
    if trace:
        tr["output"] = out
        cache["trace"] = tr
    if _DEBUG and not np.all(np.isfinite(y)):
        raise FloatingPointError("non-finite network output")
    return y, cache


def predict(net: Network, grids) -> np.ndarray:
    """Inference-mode predictions as float64."""
    y, _ = forward(net, grids, training=False)
    return y.astype(np.float64)


def backward(net: Network, cache, dy: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of sum(dy * y) w.r.t. every parameter, given a forward cache."""
    p = net.params
    dt = net.config.np_dtype
    grads: dict[str, np.ndarray] = {}
    g = np.asarray(dy, dtype=dt)[:, None]
    f = cache["dense_in"][-1]
    grads["out.w"] = f.T @ g
    grads["out.b"] = g.sum(axis=0)
    g = g @ p["out.w"].T
    for i in range(net.n_dense, 0, -1):
        mask = cache["masks"][i - 1]
        if mask is not None:
            g = g * mask
        g = g * (cache["dense_out"][i - 1] > 0)
        f = cache["dense_in"][i - 1]
        grads[f"fc{i}.w"] = f.T @ g
        grads[f"fc{i}.b"] = g.sum(axis=0)
        g = g @ p[f"fc{i}.w"].T
    g = g.reshape(cache["pool_shape"])
    for i in range(net.n_conv, 0, -1):
        a = cache["conv_out"][i - 1]
        g = layers.maxpool3d_backward(g, cache["pool_arg"][i - 1], a.shape)
        g = g * (a > 0)
        dx, dw, db = layers.conv3d_backward(cache["conv_in"][i - 1], p[f"conv{i}.w"], g,
                                            need_dx=i > 1)
        grads[f"conv{i}.w"] = dw
        grads[f"conv{i}.b"] = db
        g = dx
    return {name: grads[name] for name in p}


def l2_penalty(net: Network) -> float:
    lam = net.config.lambda_l2
    return lam * sum(float(np.sum(np.square(v, dtype=np.float64)))
                     for k, v in net.params.items() if is_weight(k))


def loss_and_gradients(net: Network, grids, labels, rng: np.random.Generator | None = None,
                       training: bool = True):
    """Mean squared error over the batch plus lambda * sum of squared weights.

    Dropout masks drawn in the forward pass are reused in the backward pass.
    Biases are not penalized.
    """
    if labels is None:
        raise MissingLabelError("training batch has no labels")
    t = np.asarray(labels, dtype=np.float64)
    if t.ndim == 0:
        t = t[None]
    if not np.all(np.isfinite(t)):
        raise MissingLabelError("training batch contains missing labels")
    y, cache = forward(net, grids, training=training, rng=rng)
    if len(t) != len(y):
        raise ShapeError(f"{len(y)} grids but {len(t)} labels")
    resid = y.astype(np.float64) - t
    loss = float(np.mean(resid ** 2)) + l2_penalty(net)
    grads = backward(net, cache, 2.0 * resid / len(t))
    lam2 = 2.0 * net.config.lambda_l2
    for name in grads:
        if is_weight(name):
            grads[name] = grads[name] + lam2 * net.params[name]
    return loss, grads


def adam_step(net: Network, grads: dict[str, np.ndarray]) -> Network:
    """One bias-corrected Adam update, in place; returns ``net``."""
    cfg = net.config
    b1, b2, eps, lr = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.learning_rate
    net.step += 1
    c1 = 1.0 - b1 ** net.step
    c2 = 1.0 - b2 ** net.step
    for name, param in net.params.items():
        g = grads[name]
        if g.shape != param.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {param.shape}")
        m = net.adam_m[name]
        v = net.adam_v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        param -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(param.dtype)
    return net
