"""GAN-based augmentation of small tabular sets, with an MSE acceptance filter.

All work happens in min-max normalized space: the generator ends in
``(tanh + 1) / 2`` so every coordinate lies in [0, 1], and the filter's
per-pair MSE (mean over the 5 coordinates) is compared against ``threshold``
there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nn import (
    DenseNet,
    backward,
    forward,
    init_net,
    layer_specs,
    minibatches,
    sgd_step,
)

DIM = 5
_EPS = 1e-12


class AugmentError(ValueError):
    pass


@dataclass(frozen=True)
class GanConfig:
    noise_dim: int = 5
    gen_hidden: tuple = (32, 32)
    disc_hidden: tuple = (32,)
    adversarial_epochs: int = 200
    rounds: int = 5
    threshold: float = 0.15
    target_count: int = 500
    seed: int = 0
    learning_rate: float = 0.05
    batch_size: int = 16
    jitter: float = 0.0
    # candidates drawn per round before giving up on that round, as a multiple of target_count
    sample_cap: int = 20

    def __post_init__(self):
        if self.noise_dim < 1:
            raise AugmentError("noise_dim must be positive")
        if self.adversarial_epochs < 0 or self.rounds < 1 or self.target_count < 1:
            raise AugmentError("adversarial_epochs >= 0, rounds >= 1 and target_count >= 1 required")
        if not 0 < self.threshold <= 1:
            raise AugmentError(f"threshold must lie in (0, 1], got {self.threshold}")
        if self.jitter < 0 or self.sample_cap < 1 or self.batch_size < 1:
            raise AugmentError("jitter >= 0, sample_cap >= 1 and batch_size >= 1 required")

    @property
    def gen_spec(self):
        return layer_specs([self.noise_dim, *self.gen_hidden, DIM], hidden="tanh", output="tanh01", batch_norm=False)

    @property
    def disc_spec(self):
        return layer_specs([DIM, *self.disc_hidden, 1], hidden="tanh", output="sigmoid", batch_norm=False)


@dataclass
class GeneratedSet:
    """Accepted samples (normalized) with where each came from."""

    samples: np.ndarray
    round_index: np.ndarray
    matched_real: np.ndarray
    mse: np.ndarray
    threshold: float
    round_stats: list = field(default_factory=list)
    warning: str | None = None

    def __len__(self):
        return len(self.samples)

    @property
    def acceptance_rate(self) -> float:
        drawn = sum(r["drawn"] for r in self.round_stats)
        return sum(r["kept"] for r in self.round_stats) / drawn if drawn else 0.0

    def head(self, n: int) -> "GeneratedSet":
        return GeneratedSet(self.samples[:n], self.round_index[:n], self.matched_real[:n],
                            self.mse[:n], self.threshold, self.round_stats, self.warning)


def _check(samples, what):
    a = np.asarray(samples, dtype=float)
    if a.ndim != 2 or a.shape[1] != DIM:
        raise AugmentError(f"{what} must be n x {DIM}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise AugmentError(f"{what} contains non-finite values")
    return a


def pair_mse(candidates, real) -> np.ndarray:
    """Matrix of per-pair MSEs, candidates x real."""
    c, r = np.asarray(candidates, float), np.asarray(real, float)
    return ((c[:, None, :] - r[None, :, :]) ** 2).mean(axis=2)


def mse_filter(candidates, real, threshold: float, round_index: int = 0) -> GeneratedSet:
    """Keep each candidate whose MSE to some real sample is <= threshold.

    Real samples are scanned in order and the first match is recorded.
    Candidate order is preserved.
    """
    c = _check(candidates, "candidates")
    r = _check(real, "real samples")
    if len(r) == 0:
        raise AugmentError("no real samples to compare against")
    if len(c) == 0:
        return GeneratedSet(c, np.zeros(0, int), np.zeros(0, int), np.zeros(0), threshold)
    m = pair_mse(c, r)
    ok = m <= threshold
    keep = ok.any(axis=1)
    first = ok.argmax(axis=1)[keep]
    return GeneratedSet(
        c[keep],
        np.full(len(first), round_index, dtype=int),
        first,
        m[keep, first],
        threshold,
    )


def _noise(rng, n, dim):
    return rng.uniform(-1.0, 1.0, (n, dim))


def _adversarial_epochs(gen: DenseNet, disc: DenseNet, real, epochs, cfg: GanConfig, rng, history):
    n_real = len(real)
    for _ in range(epochs):
        d_tot = g_tot = acc = 0.0
        batches = minibatches(n_real, cfg.batch_size, rng)
        for idx in batches:
            x = real[idx]
            n = len(idx)
            # discriminator: ascend log D(x) + log(1 - D(G(z)))
            fake, _ = forward(gen, _noise(rng, n, cfg.noise_dim), "train")
            both = np.vstack([x, fake])
            p, dcache = forward(disc, both, "train")
            p = np.clip(p, _EPS, 1 - _EPS)
            pr, pf = p[:n], p[n:]
            d_loss = -(np.log(pr).mean() + np.log(1 - pf).mean())
            grad = np.vstack([-1.0 / (n * pr), 1.0 / (n * (1 - pf))])
            sgd_step(disc, backward(disc, dcache, grad), cfg.learning_rate)
            # generator: non-saturating loss -log D(G(z))
            fake, gcache = forward(gen, _noise(rng, n, cfg.noise_dim), "train")
            q, qcache = forward(disc, fake, "train")
            q = np.clip(q, _EPS, 1 - _EPS)
            g_loss = -np.log(q).mean()
            dq = backward(disc, qcache, -1.0 / (n * q)).inputs
            sgd_step(gen, backward(gen, gcache, dq), cfg.learning_rate)
            if not (math.isfinite(d_loss) and math.isfinite(g_loss)):
                raise AugmentError(f"non-finite GAN loss at epoch {len(history)}")
            d_tot += d_loss * n
            g_tot += g_loss * n
            acc += (pr >= 0.5).sum() + (pf < 0.5).sum()
        history.append({
            "d_loss": d_tot / n_real,
            "g_loss": g_tot / n_real,
            "d_accuracy": acc / (2 * n_real),
        })


def _prepare(real, cfg, rng):
    real = _check(real, "real samples")
    if len(real) < 2:
        raise AugmentError("need at least 2 real samples")
    if cfg.jitter > 0:
        real = np.clip(real + rng.normal(0.0, cfg.jitter, real.shape), 0.0, 1.0)
    return real


def train_gan(real, cfg: GanConfig):
    """Train a fresh generator/discriminator pair; returns ``(gen, disc, history)``."""
    rng = np.random.default_rng([cfg.seed, 1])
    real = _prepare(real, cfg, rng)
    gen = init_net(cfg.gen_spec, cfg.seed)
    disc = init_net(cfg.disc_spec, cfg.seed + 1)
    history: list[dict] = []
    _adversarial_epochs(gen, disc, real, cfg.adversarial_epochs, cfg, rng, history)
    return gen, disc, history


def sample(gen: DenseNet, n: int, rng) -> np.ndarray:
    return gen.predict(_noise(rng, n, gen.in_dim))


def augment(real, cfg: GanConfig) -> GeneratedSet:
    """Grow a set of ``cfg.target_count`` accepted samples from normalized real data.

    Each round trains the GAN for ``adversarial_epochs`` more epochs, then
    draws candidate batches and filters them until the target is met or the
    round's sampling cap (``sample_cap * target_count`` candidates) is used
    up.  If all rounds end short of the target, the partial set carries a
    ``warning``.
    """
    rng = np.random.default_rng([cfg.seed, 1])
    real_train = _prepare(real, cfg, rng)
    real = _check(real, "real samples")
    gen = init_net(cfg.gen_spec, cfg.seed)
    disc = init_net(cfg.disc_spec, cfg.seed + 1)
    history: list[dict] = []
    parts: list[GeneratedSet] = []
    stats = []
    have = 0
    cap = cfg.sample_cap * cfg.target_count
    for r in range(cfg.rounds):
        _adversarial_epochs(gen, disc, real_train, cfg.adversarial_epochs, cfg, rng, history)
        drawn = kept = 0
        while have < cfg.target_count and drawn < cap:
            n = min(max(cfg.target_count - have, 64), cap - drawn)
            got = mse_filter(sample(gen, n, rng), real, cfg.threshold, r)
            drawn += n
            kept += len(got)
            have += len(got)
            parts.append(got)
        stats.append({
            "round": r,
            "drawn": drawn,
            "kept": kept,
            "acceptance_rate": kept / drawn if drawn else 0.0,
            "d_accuracy": history[-1]["d_accuracy"] if history else None,
        })
        if have >= cfg.target_count:
            break
    out = GeneratedSet(
        np.vstack([p.samples for p in parts]) if parts else np.zeros((0, DIM)),
        np.concatenate([p.round_index for p in parts]) if parts else np.zeros(0, int),
        np.concatenate([p.matched_real for p in parts]) if parts else np.zeros(0, int),
        np.concatenate([p.mse for p in parts]) if parts else np.zeros(0),
        cfg.threshold,
        stats,
    ).head(cfg.target_count)
    out.round_stats = stats
    if len(out) < cfg.target_count:
        out.warning = (f"only {len(out)} of {cfg.target_count} samples accepted after "
                       f"{cfg.rounds} rounds (cap {cap} candidates per round)")
    return out
