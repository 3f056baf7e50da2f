"""Flat ``key = value`` run configuration.

One key per line, ``#`` starts a comment, unknown keys are an error. Every
random stream is derived from the single ``seed`` key with :func:`derive_seed`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .contrastive import TrainConfig
from .corpus import FilterConfig
from .errors import ConfigError
from .model import PAD_POLICIES, PAD_SIDES, POOLINGS, ModelConfig


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text: str) -> str:
        t = text.strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return t

    return parse


def _ratios(text: str) -> tuple:
    parts = tuple(float(x) for x in text.split(","))
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated ratios, got {text!r}")
    return parts


@dataclass(frozen=True)
class Key:
    parse: object
    default: object
    help: str


KEYS = {
    "seed": Key(int, 0, "master seed; every random stream derives from it"),
    # corpus
    "language": Key(_choice("python", "java", "go", "php", "javascript", "ruby"), "python", "source language"),
    "repo": Key(str, "", "repository name recorded in pair metadata"),
    "min_query_tokens": Key(int, 3, "reject queries with fewer whitespace tokens"),
    "min_code_lines": Key(int, 3, "reject code with fewer non-blank lines"),
    "max_code_chars": Key(int, 4096, "reject code longer than this"),
    "max_non_ascii_ratio": Key(float, 0.5, "reject queries with a larger non-ASCII share"),
    "ratios": Key(_ratios, (0.8, 0.1, 0.1), "train,valid,test split ratios"),
    # tokenizer
    "vocab_size": Key(int, 4096, "BPE vocabulary size"),
    # model
    "n_layers": Key(int, 2, "transformer blocks"),
    "n_heads": Key(int, 2, "attention heads"),
    "d_model": Key(int, 64, "hidden size"),
    "d_ff": Key(int, 256, "MLP inner size"),
    "max_len": Key(int, 64, "tokens per sequence, BOS and EOS included"),
    "pooling": Key(_choice(*POOLINGS), "mean", "mean or last"),
    "pad_side": Key(_choice(*PAD_SIDES), "right", "left or right"),
    "pad_policy": Key(_choice(*PAD_POLICIES), "masked", "masked or naive"),
    # training
    "temperature": Key(float, 0.05, "InfoNCE temperature"),
    "lr": Key(float, 3e-4, "AdamW learning rate (2e-5 at billion-parameter scale)"),
    "weight_decay": Key(float, 0.01, "decoupled weight decay"),
    "beta1": Key(float, 0.9, "AdamW beta1"),
    "beta2": Key(float, 0.999, "AdamW beta2"),
    "adam_eps": Key(float, 1e-8, "AdamW epsilon"),
    "batch_size": Key(int, 32, "pairs per batch"),
    "epochs": Key(int, 2, "passes over the training set"),
    "use_in_batch": Key(_bool, True, "use in-batch negatives"),
    "use_hard_negatives": Key(_bool, True, "use mined hard negatives"),
    "grad_clip_norm": Key(float, 1.0, "global gradient-norm clip (<= 0 disables)"),
    # mining
    "miner": Key(_choice("tfidf", "bootstrap"), "tfidf", "hard-negative miner for the pipeline"),
    "near_dup_threshold": Key(float, 0.98, "skip candidates scoring above this (<= 0 disables)"),
}


def parse_value(key: str, text: str):
    if key not in KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return KEYS[key].parse(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None


def defaults() -> dict:
    return {k: spec.default for k, spec in KEYS.items()}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = parse_value(key, value)
    return values


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the file, then ``overrides`` (already-parsed flag values win)."""
    cfg = defaults()
    if path:
        with open(path, encoding="utf-8") as f:
            cfg.update(parse_config_text(f.read(), str(path)))
    for key, value in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            cfg[key] = value
    return cfg


def format_config(cfg: dict) -> str:
    lines = []
    for k in KEYS:
        v = cfg[k]
        if isinstance(v, tuple):
            v = ",".join(repr(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def derive_seed(seed: int, purpose: str) -> int:
    """Independent 63-bit sub-seed for ``purpose``."""
    digest = hashlib.sha256(f"{seed}\x00{purpose}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


def model_config(cfg: dict, vocab_size: int) -> ModelConfig:
    try:
        return ModelConfig(
            vocab_size=vocab_size, n_layers=cfg["n_layers"], n_heads=cfg["n_heads"], d_model=cfg["d_model"],
            d_ff=cfg["d_ff"], max_len=cfg["max_len"], pooling=cfg["pooling"], pad_side=cfg["pad_side"],
            pad_policy=cfg["pad_policy"], seed=derive_seed(cfg["seed"], "init"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def train_config(cfg: dict) -> TrainConfig:
    try:
        return TrainConfig(
            temperature=cfg["temperature"], lr=cfg["lr"], weight_decay=cfg["weight_decay"], beta1=cfg["beta1"],
            beta2=cfg["beta2"], adam_eps=cfg["adam_eps"], batch_size=cfg["batch_size"], epochs=cfg["epochs"],
            use_in_batch=cfg["use_in_batch"], use_hard_negatives=cfg["use_hard_negatives"],
            seed=derive_seed(cfg["seed"], "shuffle"), grad_clip_norm=cfg["grad_clip_norm"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def filter_config(cfg: dict) -> FilterConfig:
    return FilterConfig(min_query_tokens=cfg["min_query_tokens"], min_code_lines=cfg["min_code_lines"],
                        max_code_chars=cfg["max_code_chars"], max_non_ascii_ratio=cfg["max_non_ascii_ratio"])
