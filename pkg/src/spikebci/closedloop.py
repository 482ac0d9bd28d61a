"""Center-out reach environment, decoder adapters, and the two protocols.

Each trial: a proportional controller defines the ideal velocity toward the
target, the synthetic population turns it into spikes, the decoder maps
spikes to a velocity that moves the cursor, and adaptive decoders receive
(spikes, ideal velocity) as the online teaching signal. A trial ends on
target acquisition or after 300 steps (3 s, scored as 3.0).

The disruption protocol pretrains the comparison decoders on a 10,000-step
closed-loop dataset driven by a fixed random recurrent policy and the online
decoder through 100 reaches, evaluates 150 trials, perturbs the population,
and evaluates 50 more with only the online decoder still learning. The
no-pretrain protocol starts every decoder from random parameters, gives each
30 interaction reaches (the online decoder learning, the others logging),
calibrates the offline decoders on their own logs, and evaluates 70 reaches.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bptt import BpttConfig, BpttResult, bptt_train, decode_series
from .kalman import KalmanModel, kf_fit, kf_step, random_model
from .network import Architecture, LifParams, Weights, forward, init_network, reset_state
from .plasticity import OnlineLearner, PlasticityConfig
from .population import SyntheticPopulation, apply_disruption, firing_rates, sample_spikes

DISRUPTION_KINDS = ("remap", "drift", "dropout")


@dataclass
class ReachTask:
    width: float = 800.0
    height: float = 600.0
    center: tuple[float, float] = (400.0, 300.0)
    radius: float = 50.0
    move_scale: float = 5.0
    max_steps: int = 300
    min_target_dist: float = 150.0  # 3R

    def sample_target(self, rng: np.random.Generator) -> np.ndarray:
        center = np.asarray(self.center)
        while True:
            target = rng.uniform([0.0, 0.0], [self.width, self.height])
            if np.linalg.norm(target - center) > self.min_target_dist:
                return target


@dataclass
class TrialResult:
    steps: int
    success: bool
    time_s: float
    trajectory: np.ndarray | None = None


def desired_velocity(target: np.ndarray, cursor: np.ndarray) -> np.ndarray:
    """Proportional controller: unit direction scaled by min(1, dist/200)."""
    diff = target - cursor
    dist = np.linalg.norm(diff)
    if dist == 0.0:
        return np.zeros(2)
    return diff / dist * min(1.0, dist / 200.0)


def run_reach_trial(
    decoder,
    pop: SyntheticPopulation,
    task: ReachTask,
    rng: np.random.Generator,
    target: np.ndarray | None = None,
    learn: bool = True,
    record_trajectory: bool = False,
) -> TrialResult:
    """One reach from the screen center; deterministic given rng and decoder."""
    cursor = np.asarray(task.center, dtype=float).copy()
    if target is None:
        target = task.sample_target(rng)
    if hasattr(decoder, "begin_trial"):
        decoder.begin_trial()
    trajectory = [cursor.copy()] if record_trajectory else None
    can_learn = learn and hasattr(decoder, "learn")
    for step in range(1, task.max_steps + 1):
        v_ideal = desired_velocity(target, cursor)
        if hasattr(decoder, "observe_env"):
            decoder.observe_env(cursor, target)
        rates = firing_rates(pop, v_ideal)
        spikes = sample_spikes(pop, rates, rng)
        v_dec = np.asarray(decoder.step(spikes), dtype=float)
        if can_learn:
            decoder.learn(spikes, v_ideal)
        cursor += task.move_scale * v_dec
        cursor[0] = min(max(cursor[0], 0.0), task.width)
        cursor[1] = min(max(cursor[1], 0.0), task.height)
        if record_trajectory:
            trajectory.append(cursor.copy())
        if np.linalg.norm(target - cursor) < task.radius:
            return TrialResult(step, True, step * pop.dt,
                               np.array(trajectory) if record_trajectory else None)
    return TrialResult(task.max_steps, False, task.max_steps * pop.dt,
                       np.array(trajectory) if record_trajectory else None)


class OnlineSnnDecoder:
    """Online-adaptive SNN: step() decodes, learn() applies the cached update."""

    name = "online_snn"

    def __init__(self, learner: OnlineLearner):
        self.learner = learner

    def begin_trial(self) -> None:
        self.learner.reset_neuron_state()

    def step(self, spikes: np.ndarray) -> np.ndarray:
        return self.learner.predict(spikes)

    def learn(self, spikes: np.ndarray, ideal_v: np.ndarray) -> None:
        self.learner.learn_from_cache(ideal_v)


class SnnDecoder:
    """Fixed-weight SNN decoder (BPTT-trained or random)."""

    def __init__(self, weights: Weights, arch: Architecture, lif: LifParams | None = None,
                 name: str = "bptt_snn"):
        self.weights = weights
        self.arch = arch
        self.lif = lif or LifParams()
        self.name = name
        self.state = reset_state(arch)

    def begin_trial(self) -> None:
        self.state = reset_state(self.arch)

    def step(self, spikes: np.ndarray) -> np.ndarray:
        y, _, self.state = forward(self.weights, self.state, spikes, self.lif)
        return y


class KalmanDecoder:
    """Kalman filter adapter; resets its state estimate each trial."""

    name = "kalman"

    def __init__(self, model: KalmanModel):
        self.model = model

    def begin_trial(self) -> None:
        self.model.reset()

    def step(self, spikes: np.ndarray) -> np.ndarray:
        return kf_step(self.model, spikes)


class RecordingDecoder:
    """Delegates decoding, logs the (spikes, ideal velocity) teaching pairs."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name
        self.spikes: list[np.ndarray] = []
        self.ideals: list[np.ndarray] = []

    def begin_trial(self) -> None:
        if hasattr(self.inner, "begin_trial"):
            self.inner.begin_trial()

    def step(self, spikes: np.ndarray) -> np.ndarray:
        return self.inner.step(spikes)

    def learn(self, spikes: np.ndarray, ideal_v: np.ndarray) -> None:
        self.spikes.append(np.asarray(spikes, dtype=float))
        self.ideals.append(np.asarray(ideal_v, dtype=float))

    def dataset(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.spikes), np.array(self.ideals)


class _RandomDriver:
    """Fixed random recurrent-linear policy standing in for an untrained
    sequence model during pretraining-data collection."""

    def __init__(self, n_in: int, rng: np.random.Generator, n_hidden: int = 32):
        self.w_spike = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_hidden, n_in))
        self.w_rec = rng.normal(0.0, 0.9 / np.sqrt(n_hidden), size=(n_hidden, n_hidden))
        self.w_out = rng.normal(0.0, 1.0 / np.sqrt(n_hidden), size=(2, n_hidden))
        self.h = np.zeros(n_hidden)

    def step(self, spikes: np.ndarray) -> np.ndarray:
        self.h = np.tanh(self.w_rec @ self.h + self.w_spike @ spikes)
        return np.tanh(self.w_out @ self.h)


def collect_pretraining_dataset(
    pop: SyntheticPopulation,
    task: ReachTask,
    n_steps: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-loop (spikes, ideal velocity) pairs under the random driver.

    The driver's output moves the cursor, so trajectories deviate from the
    straight ideal path; labels are the per-step ideal velocities and spikes
    are generated from them.
    """
    driver = _RandomDriver(pop.n, rng)
    cursor = np.asarray(task.center, dtype=float).copy()
    target = task.sample_target(rng)
    steps_in_trial = 0
    X = np.empty((n_steps, pop.n))
    V = np.empty((n_steps, 2))
    for t in range(n_steps):
        v_ideal = desired_velocity(target, cursor)
        rates = firing_rates(pop, v_ideal)
        spikes = sample_spikes(pop, rates, rng)
        X[t] = spikes
        V[t] = v_ideal
        v_drive = driver.step(spikes)
        cursor += task.move_scale * v_drive
        cursor[0] = min(max(cursor[0], 0.0), task.width)
        cursor[1] = min(max(cursor[1], 0.0), task.height)
        steps_in_trial += 1
        if np.linalg.norm(target - cursor) < task.radius or steps_in_trial >= task.max_steps:
            cursor = np.asarray(task.center, dtype=float).copy()
            target = task.sample_target(rng)
            steps_in_trial = 0
    return X, V


@dataclass
class ClosedLoopConfig:
    """Everything one closed-loop run needs; defaults follow the adaptation
    protocol settings."""

    arch: Architecture = field(default_factory=lambda: Architecture(96, 256, 128, 2))
    lif: LifParams = field(default_factory=LifParams)
    plasticity: PlasticityConfig = field(
        default_factory=lambda: PlasticityConfig(
            eta_fast0=1e-3,
            eta_slow0=1e-2,
            eta_meta=0.1,
            window=10,
            alpha_mix=0.5,
            dt_ms=10.0,
            online_mode=True,
        )
    )
    bptt: BpttConfig = field(
        default_factory=lambda: BpttConfig(seq_len=50, batch_size=64, epochs=30, lr=1e-3,
                                           patience=10)
    )
    pretrain_steps: int = 10_000
    online_pretrain_reaches: int = 100
    phase1_trials: int = 150
    phase2_trials: int = 50
    collect_reaches: int = 30
    eval_reaches: int = 70
    disruption: str = "remap"
    intensity: float = 0.9

    def __post_init__(self):
        if self.disruption not in DISRUPTION_KINDS:
            raise ValueError(f"disruption must be one of {DISRUPTION_KINDS}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("intensity must be in [0, 1]")


def _trial_rows(results: list[TrialResult], seed: int, decoder: str, phase: int,
                start: int = 1) -> list[dict]:
    rows = []
    for i, res in enumerate(results):
        rows.append(
            {
                "seed": seed,
                "decoder": decoder,
                "phase": phase,
                "trial": start + i,
                "steps": res.steps,
                "time_s": res.time_s,
                "success": int(res.success),
            }
        )
    return rows


def _run_block(decoder, pop, task, rng, n_trials, learn=True) -> list[TrialResult]:
    return [run_reach_trial(decoder, pop, task, rng, learn=learn) for _ in range(n_trials)]


def pretrain_decoders(cfg: ClosedLoopConfig, seed: int, task: ReachTask):
    """Phase-1 setup shared by every disruption kind for a given seed.

    Returns (population, online learner, kalman model, bptt weights). The
    comparison decoders are fit on the 10,000-step closed-loop dataset; the
    online decoder learns through 100 reach attempts.
    """
    ss = np.random.SeedSequence([seed, 0xC105ED])
    r_pop, r_collect, r_net, r_bptt, r_online = [np.random.default_rng(s) for s in ss.spawn(5)]
    pop = SyntheticPopulation.create(r_pop)

    X, V = collect_pretraining_dataset(pop.copy(), task, cfg.pretrain_steps, r_collect)
    kf_model = kf_fit(X, V)
    split = int(0.9 * len(X))
    bptt_res = bptt_train(
        cfg.arch, (X[:split], V[:split]), cfg.bptt, r_bptt, lif=cfg.lif,
        val=(X[split:], V[split:]),
    )

    learner = OnlineLearner(init_network(cfg.arch, r_net), cfg.arch, cfg.lif, cfg.plasticity)
    online = OnlineSnnDecoder(learner)
    for _ in range(cfg.online_pretrain_reaches):
        run_reach_trial(online, pop, task, r_online)
    return pop, online, kf_model, bptt_res.weights


def run_disruption_protocol(cfg: ClosedLoopConfig, seed: int,
                            pretrained=None, task: ReachTask | None = None) -> list[dict]:
    """150 pre-disruption and 50 post-disruption trials per decoder.

    Each decoder runs its own trials on a copy of the same population; the
    disruption draw is shared so conditions match, but spike streams differ.
    Only the online decoder keeps learning after the disruption. A
    pretrained tuple from pretrain_decoders() may be passed to share the
    phase-1 work across disruption kinds.
    """
    task = task or ReachTask()
    if pretrained is None:
        pretrained = pretrain_decoders(cfg, seed, task)
    pop0, online, kf_model, bptt_weights = pretrained
    decoders = [
        online,
        KalmanDecoder(kf_model),
        SnnDecoder(bptt_weights, cfg.arch, cfg.lif, name="bptt_snn"),
    ]
    rows: list[dict] = []
    disrupt_ss = np.random.SeedSequence([seed, 0xD15F])
    for i, decoder in enumerate(decoders):
        pop = pop0.copy()
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE7A1, i]))
        phase1 = _run_block(decoder, pop, task, rng, cfg.phase1_trials)
        rows += _trial_rows(phase1, seed, decoder.name, phase=1)
        apply_disruption(pop, cfg.disruption, cfg.intensity, np.random.default_rng(disrupt_ss))
        learn = isinstance(decoder, OnlineSnnDecoder)
        phase2 = _run_block(decoder, pop, task, rng, cfg.phase2_trials, learn=learn)
        rows += _trial_rows(phase2, seed, decoder.name, phase=2, start=cfg.phase1_trials + 1)
    return rows


def run_nopretrain_protocol(cfg: ClosedLoopConfig, seed: int,
                            task: ReachTask | None = None) -> list[dict]:
    """30 interaction reaches from random weights, offline calibration on the
    collected logs, then 70 evaluation reaches per decoder."""
    task = task or ReachTask()
    ss = np.random.SeedSequence([seed, 0x0F7E])
    r_pop, r_net, r_kf, r_bptt_net = [np.random.default_rng(s) for s in ss.spawn(4)]
    pop = SyntheticPopulation.create(r_pop)

    learner = OnlineLearner(init_network(cfg.arch, r_net), cfg.arch, cfg.lif, cfg.plasticity)
    online = OnlineSnnDecoder(learner)
    kf_random = RecordingDecoder(KalmanDecoder(random_model(pop.n, r_kf)))
    bptt_init = init_network(cfg.arch, r_bptt_net)
    bptt_random = RecordingDecoder(SnnDecoder(bptt_init.copy(), cfg.arch, cfg.lif, name="bptt_snn"))

    rows: list[dict] = []
    phase1 = {}
    for i, decoder in enumerate([online, kf_random, bptt_random]):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBEEF, i]))
        results = _run_block(decoder, pop, task, rng, cfg.collect_reaches)
        rows += _trial_rows(results, seed, decoder.name, phase=1)
        phase1[decoder.name] = results

    kf_model = kf_fit(*kf_random.dataset())
    bx, by = bptt_random.dataset()
    split = max(cfg.bptt.seq_len, int(0.9 * len(bx)))
    val = (bx[split:], by[split:]) if len(bx) - split >= 50 else None
    bptt_res = bptt_train(
        cfg.arch, (bx[:split], by[:split]), cfg.bptt, np.random.default_rng(ss.spawn(1)[0]),
        lif=cfg.lif, val=val, weights=bptt_init,
    )

    eval_decoders = [
        online,
        KalmanDecoder(kf_model),
        SnnDecoder(bptt_res.weights, cfg.arch, cfg.lif, name="bptt_snn"),
    ]
    for i, decoder in enumerate(eval_decoders):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xFACE, i]))
        results = _run_block(decoder, pop, task, rng, cfg.eval_reaches)
        rows += _trial_rows(results, seed, decoder.name, phase=2, start=cfg.collect_reaches + 1)
    return rows
