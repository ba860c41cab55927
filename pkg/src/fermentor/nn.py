"""Small dense-network stack in numpy.

Each layer is ``affine -> [batch norm] -> activation``.  Training is plain
minibatch SGD on the mean squared error.  Networks are treated as values:
:func:`train` returns a new network and leaves its argument alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "sigmoid", "identity", "tanh01")
BN_EPS = 1e-5
BN_MOMENTUM = 0.1
MAGIC = "FERMENTOR-DENSENET 1"


class NetworkError(ValueError):
    pass


class TrainingError(RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "tanh"
    batch_norm: bool = False

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise NetworkError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise NetworkError(f"unknown activation {self.activation!r}")


def layer_specs(dims, hidden="tanh", output="tanh01", batch_norm=True) -> list[LayerSpec]:
    """Specs for a chain of widths, e.g. ``[4, 64, 128, 256, 128, 1]``.

    Hidden layers get ``hidden`` activation and (optionally) batch norm; the
    output layer gets ``output`` and no batch norm.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise NetworkError("need at least an input and an output width")
    specs = []
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        specs.append(LayerSpec(a, b, output if last else hidden, batch_norm and not last))
    return specs


def parse_arch(text: str, **kw) -> list[LayerSpec]:
    try:
        dims = [int(x) for x in text.replace(" ", "").split(",")]
    except ValueError:
        raise NetworkError(f"bad architecture string {text!r}") from None
    return layer_specs(dims, **kw)


@dataclass
class Layer:
    W: np.ndarray  # out x in
    b: np.ndarray
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None

    def arrays(self) -> dict[str, np.ndarray]:
        out = {"W": self.W, "b": self.b}
        if self.gamma is not None:
            out.update(gamma=self.gamma, beta=self.beta,
                       running_mean=self.running_mean, running_var=self.running_var)
        return out

    def copy(self) -> "Layer":
        return Layer(**{k: v.copy() for k, v in self.arrays().items()})


@dataclass
class DenseNet:
    specs: list[LayerSpec]
    layers: list[Layer]
    seed: int = 0

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim

    def n_params(self, include_bn: bool = False) -> int:
        n = sum(l.W.size + l.b.size for l in self.layers)
        if include_bn:
            n += sum(l.gamma.size + l.beta.size for l in self.layers if l.gamma is not None)
        return n

    def copy(self) -> "DenseNet":
        return DenseNet(list(self.specs), [l.copy() for l in self.layers], self.seed)

    def predict(self, X) -> np.ndarray:
        return forward(self, X, "infer")[0]


def init_net(specs, seed: int = 0) -> DenseNet:
    """Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases, unit BN scale."""
    specs = list(specs)
    if not specs:
        raise NetworkError("empty layer list")
    for a, b in zip(specs, specs[1:]):
        if a.out_dim != b.in_dim:
            raise NetworkError(f"layer widths do not chain: {a.out_dim} -> {b.in_dim}")
    rng = np.random.default_rng(seed)
    layers = []
    for s in specs:
        limit = math.sqrt(6.0 / (s.in_dim + s.out_dim))
        layer = Layer(rng.uniform(-limit, limit, (s.out_dim, s.in_dim)), np.zeros(s.out_dim))
        if s.batch_norm:
            layer.gamma = np.ones(s.out_dim)
            layer.beta = np.zeros(s.out_dim)
            layer.running_mean = np.zeros(s.out_dim)
            layer.running_var = np.ones(s.out_dim)
        layers.append(layer)
    return DenseNet(specs, layers, seed)


def _activate(name, y):
    if name == "tanh":
        return np.tanh(y)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * y))
    if name == "tanh01":
        return 0.5 * (np.tanh(y) + 1.0)
    return y


def _activation_grad(name, a):
    # derivative expressed through the activation output
    if name == "tanh":
        return 1.0 - a * a
    if name in ("sigmoid",):
        return a * (1.0 - a)
    if name == "tanh01":
        return 2.0 * a * (1.0 - a)
    return np.ones_like(a)


@dataclass
class ForwardCache:
    net: DenseNet
    mode: str
    steps: list[dict] = field(default_factory=list)


def forward(net: DenseNet, X, mode: str = "infer"):
    """Return ``(outputs, cache)``.

    In ``train`` mode batch norm uses batch statistics (biased variance) and
    the cache carries them for the running-average update; ``infer`` uses the
    running statistics.
    """
    if mode not in ("train", "infer"):
        raise NetworkError(f"unknown mode {mode!r}")
    x = np.asarray(X, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != net.in_dim:
        raise NetworkError(f"expected {net.in_dim} input columns, got {x.shape[1]}")
    n = x.shape[0]
    cache = ForwardCache(net, mode)
    for spec, layer in zip(net.specs, net.layers):
        step = {"x": x}
        z = x @ layer.W.T + layer.b
        if spec.batch_norm:
            if mode == "train":
                if n < 2:
                    raise NetworkError("batch norm in train mode needs at least 2 rows")
                mu = z.mean(axis=0)
                var = z.var(axis=0)
            else:
                mu, var = layer.running_mean, layer.running_var
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (z - mu) * inv_std
            step.update(mu=mu, var=var, inv_std=inv_std, xhat=xhat)
            y = layer.gamma * xhat + layer.beta
        else:
            y = z
        x = _activate(spec.activation, y)
        step["a"] = x
        cache.steps.append(step)
    return x, cache


@dataclass
class Gradients:
    layers: list[dict[str, np.ndarray]]
    inputs: np.ndarray


def backward(net: DenseNet, cache: ForwardCache, grad_out) -> Gradients:
    """Reverse-mode gradients of a scalar loss given d(loss)/d(outputs)."""
    if cache.net is not net or len(cache.steps) != len(net.layers):
        raise NetworkError("stale forward cache: it was computed for another network")
    g = np.asarray(grad_out, dtype=float)
    if g.shape != cache.steps[-1]["a"].shape:
        raise NetworkError(f"gradient shape {g.shape} does not match output shape")
    grads: list[dict] = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        spec, layer, step = net.specs[i], net.layers[i], cache.steps[i]
        g = g * _activation_grad(spec.activation, step["a"])
        gl = {}
        if spec.batch_norm:
            xhat = step["xhat"]
            gl["gamma"] = (g * xhat).sum(axis=0)
            gl["beta"] = g.sum(axis=0)
            gx = g * layer.gamma
            if cache.mode == "train":
                n = g.shape[0]
                g = step["inv_std"] / n * (
                    n * gx - gx.sum(axis=0) - xhat * (gx * xhat).sum(axis=0)
                )
            else:
                g = gx * step["inv_std"]
        gl["W"] = g.T @ step["x"]
        gl["b"] = g.sum(axis=0)
        grads[i] = gl
        g = g @ layer.W
    return Gradients(grads, g)


def mse(pred, target) -> float:
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(target, dtype=float).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    if p.size == 0:
        raise ValueError("mse of empty arrays")
    return float(np.mean((p - t) ** 2))


def mse_grad(pred, target) -> np.ndarray:
    return 2.0 * (pred - target) / pred.size


def sgd_step(net: DenseNet, grads: Gradients, lr: float) -> None:
    """In-place ``param -= lr * grad``; callers own ``net``."""
    for layer, g in zip(net.layers, grads.layers):
        layer.W -= lr * g["W"]
        layer.b -= lr * g["b"]
        if "gamma" in g:
            layer.gamma -= lr * g["gamma"]
            layer.beta -= lr * g["beta"]


def update_running_stats(net: DenseNet, cache: ForwardCache) -> None:
    for spec, layer, step in zip(net.specs, net.layers, cache.steps):
        if spec.batch_norm:
            n = step["x"].shape[0]
            unbiased = step["var"] * n / (n - 1)
            layer.running_mean = (1 - BN_MOMENTUM) * layer.running_mean + BN_MOMENTUM * step["mu"]
            layer.running_var = (1 - BN_MOMENTUM) * layer.running_var + BN_MOMENTUM * unbiased


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    loss_threshold: float = 1e-4
    max_epochs: int = 500
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not self.loss_threshold > 0:
            raise ValueError("loss_threshold must be positive")
        if self.max_epochs < 0 or self.batch_size < 1:
            raise ValueError("max_epochs must be >= 0 and batch_size >= 1")


def minibatches(n: int, batch_size: int, rng: np.random.Generator, min_rows: int = 1):
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    # a trailing batch too small for batch norm is folded into the previous one
    if len(batches) > 1 and len(batches[-1]) < min_rows:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def train(net: DenseNet, X, Y, cfg: TrainConfig, on_epoch=None):
    """Minibatch gradient descent on MSE.

    Runs until the epoch-mean loss drops to ``cfg.loss_threshold`` or
    ``cfg.max_epochs`` epochs have run.  Returns ``(trained copy, losses)``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] == 0:
        raise TrainingError("empty training set")
    if X.shape[0] != Y.shape[0]:
        raise TrainingError(f"{X.shape[0]} input rows but {Y.shape[0]} targets")
    uses_bn = any(s.batch_norm for s in net.specs)
    if uses_bn and X.shape[0] < 2:
        raise TrainingError("batch norm needs at least 2 training rows")
    net = net.copy()
    rng = np.random.default_rng(cfg.seed)
    trace: list[float] = []
    for epoch in range(cfg.max_epochs):
        total = 0.0
        for idx in minibatches(X.shape[0], cfg.batch_size, rng, 2 if uses_bn else 1):
            with np.errstate(over="ignore", invalid="ignore"):
                out, cache = forward(net, X[idx], "train")
                diff = out - Y[idx]
                loss = float(np.mean(diff ** 2))
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}", epoch)
            grads = backward(net, cache, 2.0 * diff / diff.size)
            sgd_step(net, grads, cfg.learning_rate)
            update_running_stats(net, cache)
            total += loss * len(idx)
        epoch_loss = total / X.shape[0]
        trace.append(epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)
        if epoch_loss <= cfg.loss_threshold:
            break
    for layer in net.layers:
        for name, arr in layer.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise TrainingError(f"non-finite parameter {name} after training", len(trace) - 1)
    return net, trace


# -- text serialization --------------------------------------------------------


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def dumps_net(net: DenseNet, meta: dict | None = None) -> str:
    """Plain-text model: magic line, header, then one array per line.

    Floats are written with ``repr`` so ``loads_net`` restores them
    bit-for-bit.  ``meta`` holds extra named float vectors (e.g. a scaler).
    """
    lines = [MAGIC, f"seed {net.seed}", f"layers {len(net.specs)}"]
    for s in net.specs:
        lines.append(f"layer {s.in_dim} {s.out_dim} {s.activation} {'bn' if s.batch_norm else 'nobn'}")
    for i, layer in enumerate(net.layers):
        for name, arr in layer.arrays().items():
            lines.append(f"param {i} {name} {' '.join(map(str, arr.shape))}")
            lines.append(_fmt(arr))
    for key, values in (meta or {}).items():
        lines.append(f"meta {key} {len(np.ravel(values))}")
        lines.append(_fmt(values))
    return "\n".join(lines) + "\n"


def loads_net(text: str) -> tuple[DenseNet, dict[str, np.ndarray]]:
    lines = text.splitlines()
    try:
        if not lines or lines[0].strip() != MAGIC:
            raise NetworkError("not a model file (bad magic line)")
        seed = int(lines[1].split()[1])
        n_layers = int(lines[2].split()[1])
        specs = []
        for line in lines[3:3 + n_layers]:
            tag, a, b, act, bn = line.split()
            if tag != "layer":
                raise NetworkError(f"expected a layer line, got {line!r}")
            specs.append(LayerSpec(int(a), int(b), act, bn == "bn"))
        arrays: list[dict] = [{} for _ in specs]
        meta: dict[str, np.ndarray] = {}
        i = 3 + n_layers
        while i < len(lines):
            head = lines[i].split()
            body = lines[i + 1].split() if i + 1 < len(lines) else []
            values = np.array([float(v) for v in body], dtype=float)
            if head[0] == "param":
                shape = tuple(int(d) for d in head[3:])
                arrays[int(head[1])][head[2]] = values.reshape(shape)
            elif head[0] == "meta":
                if values.size != int(head[2]):
                    raise NetworkError(f"meta {head[1]}: expected {head[2]} values")
                meta[head[1]] = values
            else:
                raise NetworkError(f"unexpected line {lines[i]!r}")
            i += 2
        layers = [Layer(**a) for a in arrays]
        for s, l in zip(specs, layers):
            if l.W.shape != (s.out_dim, s.in_dim):
                raise NetworkError("weight shape does not match layer header")
    except NetworkError:
        raise
    except (ValueError, IndexError, TypeError, KeyError) as exc:
        raise NetworkError(f"corrupt model file: {exc}") from None
    return DenseNet(specs, layers, seed), meta


def save_net(net: DenseNet, path, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_net(net, meta))


def load_net(path) -> tuple[DenseNet, dict[str, np.ndarray]]:
    with open(path, encoding="utf-8") as fh:
        return loads_net(fh.read())
