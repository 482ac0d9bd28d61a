"""Offline training/evaluation orchestration for the online decoder.

Batched mode tiles the training stream into 10-step sequences with 50%
overlap, resets neuron state per sequence, and applies per-timestep updates
inside each; timestep-wise mode streams chronologically with persistent
state, resetting only at trial boundaries or every 200 steps. Validation
Pearson R is computed on a frozen chronological decode; early stopping keeps
the best weights. The ablation grid maps named variants onto config tweaks.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .bptt import decode_series
from .datasets import BinnedDataset
from .metrics import pearson_r
from .network import Architecture, LifParams, init_network
from .plasticity import OnlineLearner, PlasticityConfig


@dataclass
class TrainConfig:
    epochs: int = 20
    seq_len: int = 10
    stride: int = 5
    patience: int = 10
    eval_every: int = 500  # timestep-wise mode
    reset_every: int = 200  # timestep-wise mode, when no trial boundaries
    shuffle: bool = True


@dataclass
class RunResult:
    records: list[dict]
    r_x: float
    r_y: float
    seed: int
    config_hash: str

    @property
    def mean_r(self) -> float:
        return 0.5 * (self.r_x + self.r_y)


def config_hash(*cfgs) -> str:
    blob = json.dumps([_as_jsonable(c) for c in cfgs], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _as_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _as_jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _as_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_as_jsonable(v) for v in obj]
    return obj


def evaluate(learner: OnlineLearner, X: np.ndarray, Y: np.ndarray) -> tuple[float, float]:
    """Frozen chronological decode of a held-out stream."""
    preds = decode_series(learner.weights, learner.lif, X)
    return pearson_r(preds[:, 0], Y[:, 0]), pearson_r(preds[:, 1], Y[:, 1])


def sequence_starts(n: int, seq_len: int, stride: int) -> np.ndarray:
    """Overlapping tile starts 0, stride, 2*stride, ... covering every index."""
    if n < seq_len:
        return np.array([0]) if n > 0 else np.array([], dtype=int)
    starts = np.arange(0, n - seq_len + 1, stride)
    if starts[-1] + seq_len < n:  # cover the ragged tail
        starts = np.append(starts, n - seq_len)
    return starts


def train_offline(
    dataset: BinnedDataset,
    mode: str,
    seed: int,
    arch: Architecture | None = None,
    lif: LifParams | None = None,
    pcfg: PlasticityConfig | None = None,
    tcfg: TrainConfig | None = None,
    eval_samples: list[int] | None = None,
) -> RunResult:
    """Train the online decoder on a binned dataset in either mode.

    Deterministic given (dataset, seed, configs). Records one evaluation row
    at initialization, per epoch (batched) or per eval_every steps
    (timestep-wise), and at any extra sample counts requested.
    """
    if mode not in ("batched", "timestepwise"):
        raise ValueError("mode must be 'batched' or 'timestepwise'")
    lif = lif or LifParams()
    pcfg = pcfg or PlasticityConfig(dt_ms=dataset.bin_ms)
    tcfg = tcfg or TrainConfig()
    arch = arch or Architecture(dataset.n_channels, 256, 128, 2)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0FF1]))
    weights = init_network(arch, rng)
    learner = OnlineLearner(weights, arch, lif, pcfg)
    train, val, _ = dataset.split()
    X, Y = train.X.astype(float), train.Y
    chash = config_hash(arch, lif, pcfg, tcfg, {"mode": mode, "seed": seed})

    records: list[dict] = []
    best = (-np.inf, weights.copy(), np.nan, np.nan)
    stale = 0
    samples_seen = 0
    eval_points = sorted(eval_samples or [])
    next_eval = eval_points.pop(0) if eval_points else None

    def do_eval(epoch: int) -> float:
        nonlocal best, stale
        r_x, r_y = evaluate(learner, val.X.astype(float), val.Y)
        records.append({"epoch": epoch, "samples": samples_seen, "r_x": r_x, "r_y": r_y})
        mean_r = 0.5 * (r_x + r_y)
        if mean_r > best[0]:
            best = (mean_r, learner.weights.copy(), r_x, r_y)
            stale = 0
        else:
            stale += 1
        return mean_r

    do_eval(epoch=0)
    if mode == "batched":
        starts = sequence_starts(len(X), tcfg.seq_len, tcfg.stride)
        for epoch in range(1, tcfg.epochs + 1):
            order = rng.permutation(len(starts)) if tcfg.shuffle else np.arange(len(starts))
            for si in order:
                s = starts[si]
                learner.reset_neuron_state()
                for t in range(s, min(s + tcfg.seq_len, len(X))):
                    learner.step(X[t], Y[t])
                    samples_seen += 1
                    while next_eval is not None and samples_seen >= next_eval:
                        do_eval(epoch)
                        next_eval = eval_points.pop(0) if eval_points else None
            do_eval(epoch)
            if tcfg.patience and stale > tcfg.patience:
                break
    else:
        boundaries = set(dataset.trial_boundaries)
        for epoch in range(1, tcfg.epochs + 1):
            learner.reset_neuron_state()
            since_reset = 0
            for t in range(len(X)):
                if t in boundaries or (not boundaries and since_reset >= tcfg.reset_every):
                    learner.reset_neuron_state()
                    since_reset = 0
                learner.step(X[t], Y[t])
                since_reset += 1
                samples_seen += 1
                if samples_seen % tcfg.eval_every == 0:
                    do_eval(epoch)
                while next_eval is not None and samples_seen >= next_eval:
                    do_eval(epoch)
                    next_eval = eval_points.pop(0) if eval_points else None
                if tcfg.patience and stale > tcfg.patience:
                    break
            if tcfg.patience and stale > tcfg.patience:
                break
            do_eval(epoch)

    _, best_weights, r_x, r_y = best
    learner.weights = best_weights
    return RunResult(records=records, r_x=float(r_x), r_y=float(r_y), seed=seed,
                     config_hash=chash)


ABLATION_VARIANTS: dict[str, dict] = {
    "full": {},
    "dual": {},
    "delta": {"delta_rule": True},
    "feedforward": {},  # handled via the architecture flag
    "rms_full": {"rms_mode": "full"},
    "rms_partial": {"rms_mode": "partial"},
    "rms_none": {"rms_mode": "none"},
    "trace_fast": {"trace_mode": "fast"},
    "trace_slow": {"trace_mode": "slow"},
    "trace_medium": {"trace_mode": "medium"},
    "trace_dual": {"trace_mode": "dual"},
    "fast_only": {"update_mode": "fast"},
    "slow_only": {"update_mode": "slow"},
    "frozen": {"update_mode": "frozen"},
    "meta_on": {"meta_enabled": True},
    "meta_off": {"meta_enabled": False},
}


def run_ablation(
    variants: list[str],
    dataset: BinnedDataset,
    seeds: list[int],
    arch: Architecture | None = None,
    lif: LifParams | None = None,
    pcfg: PlasticityConfig | None = None,
    tcfg: TrainConfig | None = None,
    mode: str = "batched",
) -> list[dict]:
    """One batched training run per (variant, seed); returns result rows."""
    if not variants:
        raise ValueError("variant list is empty")
    unknown = [v for v in variants if v not in ABLATION_VARIANTS]
    if unknown:
        raise ValueError(f"unknown ablation variants: {unknown}")
    base_pcfg = pcfg or PlasticityConfig(dt_ms=dataset.bin_ms)
    base_arch = arch or Architecture(dataset.n_channels, 256, 128, 2)
    rows = []
    for variant in variants:
        v_arch = dataclasses.replace(base_arch, recurrent=variant != "feedforward")
        v_pcfg = dataclasses.replace(base_pcfg, **ABLATION_VARIANTS[variant])
        for seed in seeds:
            result = train_offline(dataset, mode, seed, v_arch, lif, v_pcfg, tcfg)
            rows.append({"variant": variant, "seed": seed,
                         "r_x": result.r_x, "r_y": result.r_y})
    return rows
