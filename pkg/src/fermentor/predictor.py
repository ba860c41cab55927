"""Alcohol-yield prediction: scaling, splitting, the FCNN model and two baselines.

The FCNN works on min-max scaled features and target.  The linear baseline
(MLR) is fitted on raw values.  ``predict_gan_nn`` is the nearest-neighbour
reading of "GAN prediction": average the alcohol of the k generated tuples
closest to the query in scaled feature space.
"""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .augment import GanConfig, augment
from .data import COLUMNS

DEFAULT_ARCH = "4,64,128,256,128,1"
BENCH_SIZES = (34, 429, 750, 1077)
RIDGE = 1e-8


class PredictorError(ValueError):
    pass


class RangeWarning(UserWarning):
    pass


# -- scaling and splitting --------------------------------------------------------


@dataclass(frozen=True)
class ScalerParams:
    lo: np.ndarray
    hi: np.ndarray

    def scale(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        lo, hi = self.lo[: X.shape[-1]], self.hi[: X.shape[-1]]
        Z = (X - lo) / (hi - lo)
        if Z.size and (Z.min() < -1e-12 or Z.max() > 1 + 1e-12):
            warnings.warn("values outside the fitted range map outside [0, 1]", RangeWarning, stacklevel=2)
        return Z

    def unscale(self, Z, columns=None) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        sl = slice(None) if columns is None else columns
        lo, hi = self.lo[sl], self.hi[sl]
        if columns is None:
            lo, hi = lo[: Z.shape[-1]], hi[: Z.shape[-1]]
        return Z * (hi - lo) + lo


def fit_scaler(X) -> ScalerParams:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise PredictorError("need at least 2 samples to fit a scaler")
    lo, hi = X.min(axis=0), X.max(axis=0)
    flat = np.flatnonzero(hi <= lo)
    if flat.size:
        names = ", ".join(COLUMNS[i] if i < len(COLUMNS) else str(i) for i in flat)
        raise PredictorError(f"constant column(s) cannot be scaled: {names}")
    return ScalerParams(lo, hi)


def split(X, seed: int = 0, ratio=(4, 3)):
    """Seeded shuffle, then the first ceil(n * a / (a + b)) rows train."""
    X = np.asarray(X, dtype=float)
    a, b = ratio
    n = len(X)
    if n < a + b:
        raise PredictorError(f"need at least {a + b} samples to split {a}:{b}, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    k = math.ceil(n * a / (a + b))
    return X[order[:k]], X[order[k:]]


# -- FCNN -------------------------------------------------------------------------


@dataclass(frozen=True)
class FcnnConfig:
    arch: str = DEFAULT_ARCH
    learning_rate: float = 0.05
    loss_threshold: float = 1e-4
    max_epochs: int = 150
    batch_size: int = 32
    seed: int = 0
    batch_norm: bool = True  # on hidden layers
    output: str = "tanh01"  # output activation; "identity" can extrapolate

    def __post_init__(self):
        if self.output not in nn.ACTIVATIONS:
            raise PredictorError(f"unknown output activation {self.output!r}")

    def train_config(self) -> nn.TrainConfig:
        return nn.TrainConfig(self.learning_rate, self.loss_threshold, self.max_epochs,
                              self.batch_size, self.seed)


@dataclass
class FcnnModel:
    net: nn.DenseNet
    scaler: ScalerParams
    trace: list = field(default_factory=list)

    def predict(self, X4) -> np.ndarray:
        X4 = _features(X4)
        z = self.net.predict(self.scaler.scale(X4))
        return self.scaler.unscale(z, columns=slice(4, 5))[:, 0]


def _features(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] < 4:
        raise PredictorError(f"expected 4 feature columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X[:, :4])):
        raise PredictorError("inputs must be finite")
    return X[:, :4]


def train_predictor(samples, cfg: FcnnConfig = FcnnConfig(), scaler: ScalerParams | None = None,
                    extra_scaled=None) -> FcnnModel:
    """Fit the FCNN on raw 5-column samples.

    ``scaler`` defaults to one fitted on ``samples``.  ``extra_scaled`` are
    additional rows already in scaled space (e.g. accepted GAN output).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or len(samples) == 0:
        raise PredictorError("empty training set")
    if samples.shape[1] != 5:
        raise PredictorError("training samples need all 5 columns")
    scaler = scaler or fit_scaler(samples)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RangeWarning)
        Z = scaler.scale(samples)
    if extra_scaled is not None and len(extra_scaled):
        Z = np.vstack([Z, np.asarray(extra_scaled, dtype=float)])
    specs = nn.parse_arch(cfg.arch, batch_norm=cfg.batch_norm, output=cfg.output)
    if specs[0].in_dim != 4 or specs[-1].out_dim != 1:
        raise PredictorError("architecture must map 4 inputs to 1 output")
    net = nn.init_net(specs, cfg.seed)
    net, trace = nn.train(net, Z[:, :4], Z[:, 4:5], cfg.train_config())
    return FcnnModel(net, scaler, trace)


def save_model(model: FcnnModel, path) -> None:
    nn.save_net(model.net, path, meta={"scaler_lo": model.scaler.lo, "scaler_hi": model.scaler.hi})


def load_model(path) -> FcnnModel:
    try:
        net, meta = nn.load_net(path)
    except OSError as exc:
        raise PredictorError(f"cannot read model {path}: {exc.strerror}") from None
    if "scaler_lo" not in meta or "scaler_hi" not in meta:
        raise PredictorError(f"{path}: model file has no scaler")
    return FcnnModel(net, ScalerParams(meta["scaler_lo"], meta["scaler_hi"]))


# -- baselines --------------------------------------------------------------------


@dataclass(frozen=True)
class MlrModel:
    beta: np.ndarray  # intercept first
    ridge: bool = False

    def predict(self, X4) -> np.ndarray:
        return self.beta[0] + _features(X4) @ self.beta[1:]


def fit_mlr(samples) -> MlrModel:
    """Ordinary least squares via the normal equations.

    A singular Gram matrix falls back to ridge with lambda = 1e-8.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 5:
        raise PredictorError("MLR needs 5-column samples")
    if len(samples) < 5:
        raise PredictorError(f"MLR needs at least 5 rows, got {len(samples)}")
    A = np.column_stack([np.ones(len(samples)), samples[:, :4]])
    y = samples[:, 4]
    G = A.T @ A
    if np.linalg.matrix_rank(A) == A.shape[1]:
        return MlrModel(np.linalg.solve(G, A.T @ y))
    try:
        beta = np.linalg.solve(G + RIDGE * np.eye(len(G)), A.T @ y)
    except np.linalg.LinAlgError:
        raise PredictorError("rank-deficient design even with ridge fallback") from None
    if not np.all(np.isfinite(beta)):
        raise PredictorError("rank-deficient design even with ridge fallback")
    return MlrModel(beta, ridge=True)


@dataclass(frozen=True)
class GanNeighbours:
    generated: np.ndarray  # scaled 5-tuples
    scaler: ScalerParams
    k: int = 5

    def predict(self, X4) -> np.ndarray:
        return predict_gan_nn(self.generated, self.scaler, X4, self.k)


def predict_gan_nn(generated, scaler: ScalerParams, X4, k: int = 5) -> np.ndarray:
    G = np.asarray(generated, dtype=float)
    if G.ndim != 2 or len(G) == 0:
        raise PredictorError("empty generated set")
    if k < 1:
        raise PredictorError("k must be >= 1")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RangeWarning)
        Q = scaler.scale(_features(X4))
    k = min(k, len(G))
    d = ((Q[:, None, :] - G[None, :, :4]) ** 2).sum(axis=2)
    # stable argsort: ties resolve to the earlier generated sample
    nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
    z = G[nearest, 4].mean(axis=1)
    return scaler.unscale(z[:, None], columns=slice(4, 5))[:, 0]


# -- comparison -------------------------------------------------------------------


METHODS = ("FCNN", "MLR", "GAN-prediction")
GAN_NOTE = ("GAN-prediction (interpretation): mean alcohol of the k nearest accepted GAN samples in "
            "scaled (C,H,S,A) space")


@dataclass
class CompareConfig:
    fcnn: FcnnConfig = field(default_factory=FcnnConfig)
    gan: GanConfig = field(default_factory=GanConfig)
    k: int = 5
    scaler: str = "train"  # or "all"
    fcnn_data: str = "augmented"  # or "real"
    sizes: tuple = BENCH_SIZES
    timing: bool = True

    def __post_init__(self):
        if self.scaler not in ("train", "all"):
            raise PredictorError("scaler must be 'train' or 'all'")
        if self.fcnn_data not in ("augmented", "real"):
            raise PredictorError("fcnn_data must be 'augmented' or 'real'")
        if list(self.sizes) != sorted(set(self.sizes)) or min(self.sizes) < 1:
            raise PredictorError("sizes must be strictly increasing positive integers")

    def to_dict(self):
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        d["gan"]["gen_hidden"] = list(self.gan.gen_hidden)
        d["gan"]["disc_hidden"] = list(self.gan.disc_hidden)
        return d


@dataclass
class ExperimentReport:
    mse: dict
    sizes: list
    timings: dict | None
    n_train: int
    n_test: int
    n_generated: int
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if any(v < 0 for v in self.mse.values()):
            raise PredictorError("MSE must be non-negative")
        if list(self.sizes) != sorted(set(self.sizes)):
            raise PredictorError("sizes must be strictly increasing")

    def growth(self) -> dict | None:
        """Per-method wall-time increase relative to the smallest size, in percent."""
        if self.timings is None:
            return None
        return {m: [100.0 * (t / ts[0] - 1.0) if ts[0] > 0 else 0.0 for t in ts]
                for m, ts in self.timings.items()}

    def to_dict(self) -> dict:
        return {
            "mse": dict(self.mse),
            "sizes": list(self.sizes),
            "timings": self.timings,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_generated": self.n_generated,
            "config": self.config,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(d["mse"], d["sizes"], d["timings"], d["n_train"], d["n_test"],
                   d["n_generated"], d.get("config", {}), d.get("notes", []))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"train rows {self.n_train}, test rows {self.n_test}, generated rows {self.n_generated}",
                 "", f"{'method':<16}{'test MSE':>14}"]
        for m in METHODS:
            lines.append(f"{m:<16}{self.mse[m]:>14.6f}")
        if self.timings is not None:
            lines += ["", "prediction wall time (ms) by dataset size"]
            lines.append(f"{'method':<16}" + "".join(f"{s:>10}" for s in self.sizes))
            for m in METHODS:
                lines.append(f"{m:<16}" + "".join(f"{1e3 * t:>10.3f}" for t in self.timings[m]))
        lines += [""] + [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"

    def plot_csv(self) -> str:
        rows = ["size," + ",".join(f"{m}_seconds,{m}_growth_pct" for m in METHODS)]
        growth = self.growth()
        for i, s in enumerate(self.sizes):
            cells = [str(s)]
            for m in METHODS:
                if self.timings is None:
                    cells += ["", ""]
                else:
                    cells += [repr(float(self.timings[m][i])), repr(float(growth[m][i]))]
            rows.append(",".join(cells))
        return "\n".join(rows) + "\n"


def tile_rows(X, size: int) -> np.ndarray:
    """``size`` rows taken cyclically from ``X`` (subsample or tile)."""
    X = np.asarray(X)
    return X[np.arange(size) % len(X)]


def time_predictions(models: dict, X4, sizes) -> dict:
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RangeWarning)
        for name, model in models.items():
            out[name] = []
            for s in sizes:
                Q = tile_rows(X4, s)
                t0 = time.perf_counter()
                model.predict(Q)
                out[name].append(time.perf_counter() - t0)
    return out


def fit_all(train, cfg: CompareConfig, scaler_rows=None):
    """Train the three methods; returns ``(models, generated set)``."""
    train = np.asarray(train, dtype=float)
    scaler = fit_scaler(train if scaler_rows is None else scaler_rows)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RangeWarning)
        real_scaled = scaler.scale(train)
    generated = augment(real_scaled, cfg.gan)
    extra = generated.samples if cfg.fcnn_data == "augmented" else None
    models = {
        "FCNN": train_predictor(train, cfg.fcnn, scaler, extra),
        "MLR": fit_mlr(train),
        "GAN-prediction": GanNeighbours(generated.samples, scaler, cfg.k),
    }
    return models, generated


def evaluate_all(models: dict, test, scaler: ScalerParams):
    """Test MSE per method plus report notes.

    Test rows outside the scaler's fitted range are expected with a
    train-only scaler, so they are counted in a note instead of warned about.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RangeWarning)
        mse = {m: nn.mse(models[m].predict(test), test[:, 4]) for m in METHODS}
        notes = [GAN_NOTE]
        outside = int(np.sum(np.any((test < scaler.lo) | (test > scaler.hi), axis=1)))
        if outside:
            notes.append(f"{outside} of {len(test)} test rows lie outside the scaler's fitted range")
    return mse, notes


def compare(train, test, cfg: CompareConfig = CompareConfig()) -> ExperimentReport:
    train = np.asarray(train, dtype=float)
    test = np.asarray(test, dtype=float)
    for name, arr in (("train", train), ("test", test)):
        if arr.ndim != 2 or arr.shape[1] != 5:
            raise PredictorError(f"{name} set must have all 5 columns")
    rows = np.vstack([train, test]) if cfg.scaler == "all" else None
    models, generated = fit_all(train, cfg, rows)
    mse, notes = evaluate_all(models, test, models["FCNN"].scaler)
    timings = time_predictions(models, test[:, :4], cfg.sizes) if cfg.timing else None
    if generated.warning:
        notes.append(generated.warning)
    return ExperimentReport(mse, list(cfg.sizes), timings, len(train), len(test),
                            len(generated), cfg.to_dict(), notes)
