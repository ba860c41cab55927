"""Layered run configuration: defaults < config file < environment < flags.

The config file is plain ``key = value`` lines; ``#`` starts a comment.
Keys use dots for sections (``fcnn.learning_rate``).  Environment variables
are ``FERMENTOR_`` plus the key upper-cased with dots written as ``__``
(``FERMENTOR_GAN__THRESHOLD``); ``FERMENTOR_SEED`` sets the global seed.
"""
from __future__ import annotations

import os

from .augment import GanConfig
from .petri import DEFAULT_BUDGET
from .predictor import CompareConfig, FcnnConfig

DEFAULTS: dict[str, object] = {
    "seed": 0,
    "report": "text",
    "timing": True,
    "budget": DEFAULT_BUDGET,
    "fcnn.arch": FcnnConfig.arch,
    "fcnn.learning_rate": FcnnConfig.learning_rate,
    "fcnn.loss_threshold": FcnnConfig.loss_threshold,
    "fcnn.max_epochs": FcnnConfig.max_epochs,
    "fcnn.batch_size": FcnnConfig.batch_size,
    "fcnn.batch_norm": FcnnConfig.batch_norm,
    "fcnn.output": FcnnConfig.output,
    "gan.noise_dim": GanConfig.noise_dim,
    "gan.gen_hidden": ",".join(map(str, GanConfig.gen_hidden)),
    "gan.disc_hidden": ",".join(map(str, GanConfig.disc_hidden)),
    "gan.adversarial_epochs": GanConfig.adversarial_epochs,
    "gan.rounds": GanConfig.rounds,
    "gan.threshold": GanConfig.threshold,
    "gan.target_count": GanConfig.target_count,
    "gan.learning_rate": GanConfig.learning_rate,
    "gan.batch_size": GanConfig.batch_size,
    "gan.jitter": GanConfig.jitter,
    "gan.sample_cap": GanConfig.sample_cap,
    "predict.k": 5,
    "predict.scaler": "train",
    "predict.fcnn_data": "augmented",
}


class ConfigError(ValueError):
    pass


def _coerce(key, raw):
    default = DEFAULTS[key]
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {type(default).__name__}") from None
    return text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def from_environment(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for key in DEFAULTS:
        name = "FERMENTOR_" + key.upper().replace(".", "__")
        if name in environ:
            out[key] = _coerce(key, environ[name])
    return out


def merge(file_path=None, flags: dict | None = None, environ=None) -> dict:
    cfg = dict(DEFAULTS)
    if file_path is not None:
        try:
            with open(file_path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {file_path}: {exc.strerror}") from None
        cfg.update(parse_config_text(text, str(file_path)))
    cfg.update(from_environment(environ))
    cfg.update({k: _coerce(k, v) for k, v in (flags or {}).items() if v is not None})
    return cfg


def _widths(text):
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def fcnn_config(cfg: dict) -> FcnnConfig:
    return FcnnConfig(cfg["fcnn.arch"], cfg["fcnn.learning_rate"], cfg["fcnn.loss_threshold"],
                      cfg["fcnn.max_epochs"], cfg["fcnn.batch_size"], cfg["seed"],
                      cfg["fcnn.batch_norm"], cfg["fcnn.output"])


def gan_config(cfg: dict) -> GanConfig:
    return GanConfig(
        noise_dim=cfg["gan.noise_dim"],
        gen_hidden=_widths(cfg["gan.gen_hidden"]),
        disc_hidden=_widths(cfg["gan.disc_hidden"]),
        adversarial_epochs=cfg["gan.adversarial_epochs"],
        rounds=cfg["gan.rounds"],
        threshold=cfg["gan.threshold"],
        target_count=cfg["gan.target_count"],
        seed=cfg["seed"],
        learning_rate=cfg["gan.learning_rate"],
        batch_size=cfg["gan.batch_size"],
        jitter=cfg["gan.jitter"],
        sample_cap=cfg["gan.sample_cap"],
    )


def compare_config(cfg: dict, sizes=None) -> CompareConfig:
    kw = {} if sizes is None else {"sizes": tuple(sizes)}
    return CompareConfig(fcnn_config(cfg), gan_config(cfg), cfg["predict.k"], cfg["predict.scaler"],
                         cfg["predict.fcnn_data"], timing=cfg["timing"], **kw)
