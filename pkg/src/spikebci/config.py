"""Layered experiment configuration: defaults < config file < overrides.

Defaults mirror the hyperparameter tables the experiments were defined with;
a JSON config file may override any subset, and command-line key=value pairs
(dotted paths) override both. Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .bptt import BpttConfig
from .closedloop import ClosedLoopConfig
from .network import Architecture, LifParams
from .plasticity import PlasticityConfig
from .training import TrainConfig


class ConfigError(ValueError):
    """Bad configuration file or override."""


LIF_DEFAULTS = {"beta_h": 0.7, "beta_out": 0.5, "threshold": 1.0, "surrogate_slope": 25.0}


def offline_defaults() -> dict:
    return {
        "arch": "96-256-128-2",
        "recurrent": True,
        "lif": dict(LIF_DEFAULTS),
        "plasticity": {
            "eta_fast0": 3e-3,
            "eta_slow0": 1e-3,
            "eta_meta": 0.01,
            "window": 50,
            "mu": 0.9,
            "alpha_mix": 0.5,
            "tau_fast": 120.0,
            "tau_slow": 700.0,
            "tau_medium": 290.0,
            "dt_ms": 50.0,
            "online_mode": False,
            "weight_decay": 1e-5,
            "c_clip": 6.0,
            "lambda_rms": 0.99,
            "rms_mode": "full",
            "trace_mode": "dual",
            "update_mode": "dual",
            "meta_enabled": True,
            "delta_rule": False,
            "consolidation": "blend",
            "projection_mode": "pow2",
            "use_reward_lut": False,
        },
        "timestepwise": {
            "eta_fast0": 2e-3,
            "eta_slow0": 2e-4,
            "alpha_mix": 0.8,
            "online_mode": True,
            "window": 50,
        },
        "train": {
            "epochs": 20,
            "seq_len": 10,
            "stride": 5,
            "patience": 10,
            "eval_every": 500,
            "reset_every": 200,
        },
        "bptt": {
            "seq_len": 10,
            "batch_size": 32,
            "epochs": 50,
            "lr": 1e-3,
            "weight_decay": 1e-5,
            "patience": 10,
        },
        "bin_ms": 50.0,
    }


def closed_loop_defaults() -> dict:
    return {
        "arch": "96-256-128-2",
        "recurrent": True,
        "lif": dict(LIF_DEFAULTS),
        "plasticity": {
            "eta_fast0": 1e-3,
            "eta_slow0": 1e-2,
            "eta_meta": 0.1,
            "window": 10,
            "mu": 0.9,
            "alpha_mix": 0.5,
            "tau_fast": 120.0,
            "tau_slow": 700.0,
            "dt_ms": 10.0,
            "online_mode": True,
            "weight_decay": 1e-5,
            "c_clip": 6.0,
            "lambda_rms": 0.99,
            "rms_mode": "full",
            "trace_mode": "dual",
            "update_mode": "dual",
            "meta_enabled": True,
            "delta_rule": False,
            "consolidation": "blend",
            "projection_mode": "pow2",
            "use_reward_lut": False,
        },
        "bptt": {
            "seq_len": 50,
            "batch_size": 64,
            "epochs": 30,
            "lr": 1e-3,
            "weight_decay": 1e-5,
            "patience": 10,
        },
        "nopretrain": {"alpha_mix": 0.8, "bptt_seq_len": 5, "bptt_patience": 5},
        "pretrain_steps": 10_000,
        "online_pretrain_reaches": 100,
        "phase1_trials": 150,
        "phase2_trials": 50,
        "collect_reaches": 30,
        "eval_reaches": 70,
    }


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be a mapping")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _coerce(text: str, like):
    if isinstance(like, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if isinstance(like, int) and not isinstance(like, bool):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply dotted key=value strings, coercing to the default's type."""
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value: {item!r}")
        key, _, value = item.partition("=")
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config key: {key}")
            node = node[part]
        leaf = parts[-1]
        if leaf not in node:
            raise ConfigError(f"unknown config key: {key}")
        node[leaf] = _coerce(value, node[leaf])
    return cfg


def load_config(defaults: dict, path: str | None, overrides: list[str]) -> dict:
    cfg = defaults
    if path:
        try:
            file_cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        cfg = _merge(cfg, file_cfg)
    return apply_overrides(cfg, overrides)


def build_offline(cfg: dict, mode: str):
    """Resolve an offline config dict into the dataclass objects."""
    arch = Architecture.parse(cfg["arch"], recurrent=cfg["recurrent"])
    lif = LifParams(**cfg["lif"])
    pdict = dict(cfg["plasticity"])
    if mode == "timestepwise":
        pdict.update(cfg["timestepwise"])
    use_lut = pdict.pop("use_reward_lut")
    from .plasticity import RewardLut

    pcfg = PlasticityConfig(**pdict, reward_lut=RewardLut.default() if use_lut else None)
    tcfg = TrainConfig(**cfg["train"])
    bcfg = BpttConfig(**cfg["bptt"])
    return arch, lif, pcfg, tcfg, bcfg


def build_closed_loop(cfg: dict, protocol: str, disruption: str, intensity: float) -> ClosedLoopConfig:
    arch = Architecture.parse(cfg["arch"], recurrent=cfg["recurrent"])
    lif = LifParams(**cfg["lif"])
    pdict = dict(cfg["plasticity"])
    use_lut = pdict.pop("use_reward_lut")
    bdict = dict(cfg["bptt"])
    if protocol == "nopretrain":
        pdict["alpha_mix"] = cfg["nopretrain"]["alpha_mix"]
        bdict["seq_len"] = cfg["nopretrain"]["bptt_seq_len"]
        bdict["patience"] = cfg["nopretrain"]["bptt_patience"]
    from .plasticity import RewardLut

    pcfg = PlasticityConfig(**pdict, reward_lut=RewardLut.default() if use_lut else None)
    return ClosedLoopConfig(
        arch=arch,
        lif=lif,
        plasticity=pcfg,
        bptt=BpttConfig(**bdict),
        pretrain_steps=cfg["pretrain_steps"],
        online_pretrain_reaches=cfg["online_pretrain_reaches"],
        phase1_trials=cfg["phase1_trials"],
        phase2_trials=cfg["phase2_trials"],
        collect_reaches=cfg["collect_reaches"],
        eval_reaches=cfg["eval_reaches"],
        disruption=disruption,
        intensity=intensity,
    )
