"""Online three-factor learning rule with dual-timescale eligibility traces.

Per timestep: layer-local error drives are formed by pushing the RMS
normalized output error back through the current feedforward weights (no
temporal unrolling), gated by each neuron's surrogate sensitivity, and
multiplied by normalized presynaptic activity. The resulting increments feed
fast and slow exponential traces whose mixture is applied immediately at the
fast rate and accumulated into a momentum buffer that is consolidated into
the weights every K steps at the slow rate, RMS normalized and lightly
decayed. A sign-of-improvement meta controller scales both rates within clip
bounds, and an optional 16-bucket error lookup table modulates the fast rate.
All learning state is three trace matrices per weight matrix plus a handful
of scalars: memory does not grow with the number of steps processed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .homeostasis import InvSqrtLut, RmsEma, normalize, project_rows, rms_update
from .network import (
    Architecture,
    LifParams,
    NeuronState,
    StepRecord,
    Weights,
    forward,
    reset_state,
)

RMS_MODES = ("full", "partial", "none")
TRACE_MODES = ("dual", "fast", "slow", "medium")
UPDATE_MODES = ("dual", "fast", "slow", "frozen")


class WindowBoundaryError(RuntimeError):
    """Raised when consolidation is requested off a window boundary."""


@dataclass
class RewardLut:
    """16 multiplicative fast-rate gains bucketed by output-error magnitude."""

    gains: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        self.edges = np.asarray(self.edges, dtype=float)
        if self.gains.shape != (16,):
            raise ValueError("reward LUT needs exactly 16 gains")
        if self.edges.shape != (15,):
            raise ValueError("reward LUT needs 15 interior bucket edges")
        if np.any(self.gains <= 0):
            raise ValueError("gains must be positive")
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("edges must be strictly increasing")

    @classmethod
    def default(cls) -> "RewardLut":
        # Equal-width buckets over normalized error magnitude [0, 2]; gains
        # run 0.5 -> 2.0, snapped to multiples of 1/16 so they stay
        # integer-friendly on fixed-point hardware.
        edges = np.linspace(0.125, 1.875, 15)
        gains = np.round(np.linspace(0.5, 2.0, 16) * 16.0) / 16.0
        return cls(gains=gains, edges=edges)


def reward_lut_gain(lut: RewardLut, error_magnitude: float) -> float:
    """Gain of the bucket containing the error magnitude; saturates at the ends."""
    if error_magnitude < 0:
        raise ValueError("error magnitude must be nonnegative")
    idx = int(np.searchsorted(lut.edges, error_magnitude, side="right"))
    return float(lut.gains[idx])


@dataclass
class PlasticityConfig:
    """Hyperparameters of the online rule. Times are in milliseconds."""

    eta_fast0: float = 3e-3
    eta_slow0: float = 1e-3
    eta_meta: float = 0.01
    window: int = 50
    mu: float = 0.9
    alpha_mix: float = 0.5
    tau_fast: float = 120.0
    tau_slow: float = 700.0
    tau_medium: float = 290.0
    dt_ms: float = 50.0
    online_mode: bool = False
    weight_decay: float = 1e-5
    p_bounds: tuple[float, float] = (0.1, 10.0)
    s_bounds: tuple[float, float] = (0.1, 10.0)
    c_clip: float = 6.0
    lambda_rms: float = 0.99
    epsilon: float = 1e-8
    rms_mode: str = "full"
    trace_mode: str = "dual"
    update_mode: str = "dual"
    meta_enabled: bool = True
    delta_rule: bool = False
    consolidation: str = "blend"
    strict_window_mean: bool = False
    projection_mode: str = "pow2"
    use_lut_normalizer: bool = True
    reward_lut: RewardLut | None = None

    def __post_init__(self):
        if min(self.eta_fast0, self.eta_slow0, self.eta_meta) < 0:
            raise ValueError("learning rates must be nonnegative")
        if not 0.0 < self.mu < 1.0:
            raise ValueError("momentum must be in (0, 1)")
        if not 0.0 <= self.alpha_mix <= 1.0:
            raise ValueError("trace mixing coefficient must be in [0, 1]")
        if self.window < 1:
            raise ValueError("consolidation window must be >= 1")
        for bounds in (self.p_bounds, self.s_bounds):
            if bounds[0] >= bounds[1]:
                raise ValueError("multiplier bounds must satisfy min < max")
        if self.rms_mode not in RMS_MODES:
            raise ValueError(f"rms_mode must be one of {RMS_MODES}")
        if self.trace_mode not in TRACE_MODES:
            raise ValueError(f"trace_mode must be one of {TRACE_MODES}")
        if self.update_mode not in UPDATE_MODES:
            raise ValueError(f"update_mode must be one of {UPDATE_MODES}")
        if self.consolidation not in ("blend", "additive"):
            raise ValueError("consolidation must be 'blend' or 'additive'")


def decay_coefficients(cfg: PlasticityConfig) -> tuple[float, float]:
    """Per-step trace decays exp(-dt/tau); online mode halves tau_fast and
    scales tau_slow by 0.8 for faster adaptation."""
    if cfg.dt_ms <= 0:
        raise ValueError("dt must be positive")
    tau_f = cfg.tau_fast * 0.5 if cfg.online_mode else cfg.tau_fast
    tau_s = cfg.tau_slow * 0.8 if cfg.online_mode else cfg.tau_slow
    return float(np.exp(-cfg.dt_ms / tau_f)), float(np.exp(-cfg.dt_ms / tau_s))


@dataclass
class TraceSet:
    """Fast/slow eligibility and momentum matrices mirroring the weights."""

    e_fast: dict[str, np.ndarray]
    e_slow: dict[str, np.ndarray]
    g: dict[str, np.ndarray]
    steps_in_window: int = 0
    g_window_sum: dict[str, np.ndarray] | None = None

    @classmethod
    def zeros(cls, weights: Weights, strict_window_mean: bool = False) -> "TraceSet":
        def z():
            return {k: np.zeros_like(v) for k, v in weights.matrices().items()}

        return cls(e_fast=z(), e_slow=z(), g=z(),
                   g_window_sum=z() if strict_window_mean else None)

    def reset_window(self) -> None:
        self.steps_in_window = 0
        if self.g_window_sum is not None:
            for v in self.g_window_sum.values():
                v.fill(0.0)

    def bytes(self) -> int:
        total = 0
        for group in (self.e_fast, self.e_slow, self.g):
            total += sum(v.nbytes for v in group.values())
        return total


@dataclass
class MetaState:
    """Learning-rate multipliers and window loss statistics."""

    p: float = 1.0
    s: float = 1.0
    window_loss_acc: float = 0.0
    prev_window_loss: float | None = None


def compute_error_drives(
    weights: Weights,
    y_true: np.ndarray,
    y_hat: np.ndarray,
    rms_states: dict[str, RmsEma],
    lut: InvSqrtLut | None = None,
    rms_mode: str = "full",
):
    """Spatial error propagation through the current feedforward weights.

    Returns (e_out_norm, e2, e1): the RMS-normalized output error, then its
    pushback through w_out^T and w_h^T. Uses only current-step quantities;
    with rms_mode "none" the raw error is propagated unnormalized.
    """
    e = np.asarray(y_true, dtype=float) - np.asarray(y_hat, dtype=float)
    if rms_mode == "none":
        e_out = e
    else:
        rms_update(rms_states["err"], e)
        e_out = normalize(e, rms_states["err"], lut)
    e2 = weights.w_out.T @ e_out
    e1 = weights.w_h.T @ e2
    return e_out, e2, e1


def hebbian_increment(
    e_layer: np.ndarray,
    d_layer: np.ndarray | None,
    pre_activity: np.ndarray,
) -> np.ndarray:
    """Outer product of the gated postsynaptic error with presynaptic activity.

    d_layer None means a sensitivity of one everywhere (linear readout or
    delta-rule ablation).
    """
    post = e_layer if d_layer is None else e_layer * d_layer
    if post.shape != e_layer.shape:
        raise ValueError("error and sensitivity vectors must have equal length")
    return np.outer(post, pre_activity)


def update_traces(
    traces: TraceSet,
    deltas: dict[str, np.ndarray],
    lambdas: tuple[float, float],
    alpha_mix: float,
) -> dict[str, np.ndarray]:
    """Decay-and-accumulate both traces; return their convex mixture."""
    lam_f, lam_s = lambdas
    combined = {}
    for name, dw in deltas.items():
        ef = traces.e_fast[name]
        es = traces.e_slow[name]
        ef *= lam_f
        ef += dw
        es *= lam_s
        es += dw
        combined[name] = alpha_mix * ef + (1.0 - alpha_mix) * es
    return combined


def apply_fast_update(weights: Weights, e_comb: dict[str, np.ndarray], eta_fast_eff: float) -> None:
    """W += eta * E_comb for every weight matrix (row projection is the caller's)."""
    mats = weights.matrices()
    for name, e in e_comb.items():
        mats[name] += eta_fast_eff * e


def accumulate_momentum(traces: TraceSet, e_comb: dict[str, np.ndarray], mu: float) -> None:
    """G <- mu*G + (1-mu)*E_comb, plus the strict-mean running sum if kept."""
    for name, e in e_comb.items():
        g = traces.g[name]
        g *= mu
        g += (1.0 - mu) * e
        if traces.g_window_sum is not None:
            traces.g_window_sum[name] += g


def rms_normalized(x: np.ndarray, epsilon: float = 1e-8) -> np.ndarray:
    """R(X) = X / (sqrt(mean(X^2)) + eps)."""
    return x / (np.sqrt(np.mean(np.square(x))) + epsilon)


def consolidate(weights: Weights, traces: TraceSet, cfg: PlasticityConfig, meta: MetaState) -> None:
    """Fold the window-averaged momentum into the weights at the slow rate.

    Must be called exactly at a window boundary. The window average of G is
    its boundary value (G is already an EMA); strict_window_mean instead
    divides an explicit running sum by K. Blend mode follows
    W <- (1-a)W + a*R(G_bar); additive mode W <- W + a*R(G_bar). Both then
    apply the consolidation weight decay and reset the window counters.
    """
    if traces.steps_in_window != cfg.window:
        raise WindowBoundaryError(
            f"consolidate called at step {traces.steps_in_window} of a {cfg.window}-step window"
        )
    alpha = meta.s * cfg.eta_slow0
    mats = weights.matrices()
    for name, w in mats.items():
        if traces.g_window_sum is not None:
            g_bar = traces.g_window_sum[name] / cfg.window
        else:
            g_bar = traces.g[name]
        update = alpha * rms_normalized(g_bar, cfg.epsilon)
        if cfg.consolidation == "blend":
            w *= 1.0 - alpha
        w += update
        w *= 1.0 - cfg.weight_decay
    traces.reset_window()


def meta_step(meta: MetaState, window_mean_loss: float, cfg: PlasticityConfig) -> tuple[float, float]:
    """Scale both multipliers by the sign of window-to-window improvement."""
    if meta.prev_window_loss is None:
        z = 0.0
    else:
        z = float(np.sign(meta.prev_window_loss - window_mean_loss))
    factor = 1.0 + cfg.eta_meta * z
    meta.p = float(np.clip(meta.p * factor, *cfg.p_bounds))
    meta.s = float(np.clip(meta.s * factor, *cfg.s_bounds))
    meta.prev_window_loss = window_mean_loss
    return meta.p, meta.s


_SIGNAL_NAMES = ("x", "s1", "s2", "s1_prev", "err", "e2", "e1")


class OnlineLearner:
    """Binds a network to the full per-timestep learning rule.

    Single-threaded per instance: forward and learning mutate shared state.
    predict() runs one forward step and caches the record; learn_from_cache()
    applies the plasticity for that step given the target. step() does both,
    which is the per-timestep online update.
    """

    def __init__(
        self,
        weights: Weights,
        arch: Architecture,
        lif: LifParams | None = None,
        cfg: PlasticityConfig | None = None,
    ):
        self.weights = weights
        self.arch = arch
        self.lif = lif or LifParams()
        self.cfg = cfg or PlasticityConfig()
        self.state = reset_state(arch)
        self.traces = TraceSet.zeros(weights, self.cfg.strict_window_mean)
        self.meta = MetaState()
        self.norm_lut = InvSqrtLut() if self.cfg.use_lut_normalizer else None
        self.rms = {
            name: RmsEma(self.cfg.lambda_rms, self.cfg.epsilon) for name in _SIGNAL_NAMES
        }
        self.lambdas = self._trace_lambdas()
        self._cache: tuple[StepRecord, np.ndarray] | None = None

    def _trace_lambdas(self) -> tuple[float, float]:
        lam_f, lam_s = decay_coefficients(self.cfg)
        if self.cfg.trace_mode == "medium":
            lam_f = float(np.exp(-self.cfg.dt_ms / self.cfg.tau_medium))
        return lam_f, lam_s

    @property
    def _mix(self) -> float:
        mode = self.cfg.trace_mode
        if mode == "dual":
            return self.cfg.alpha_mix
        if mode == "slow":
            return 0.0
        return 1.0  # fast and medium both live in the fast slot

    def reset_neuron_state(self) -> None:
        self.state = reset_state(self.arch)
        self._cache = None

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forward one step on raw counts; caches the record for learning."""
        prev_s1 = self.state.s1_prev
        y_hat, record, self.state = forward(self.weights, self.state, x, self.lif)
        self._cache = (record, prev_s1)
        return y_hat

    def _normalized(self, name: str, signal: np.ndarray) -> np.ndarray:
        if self.cfg.rms_mode != "full":
            return signal
        rms_update(self.rms[name], signal)
        return normalize(signal, self.rms[name], self.norm_lut)

    def learn_from_cache(self, y_true: np.ndarray) -> float:
        """Apply the full per-timestep update using the cached forward step."""
        if self._cache is None:
            raise RuntimeError("predict() must run before learning")
        record, prev_s1 = self._cache
        self._cache = None
        cfg = self.cfg
        e_raw = np.asarray(y_true, dtype=float) - record.y_hat
        loss = float(np.dot(e_raw, e_raw))

        if cfg.update_mode == "frozen":
            return loss

        e_out, e2, e1 = compute_error_drives(
            self.weights, y_true, record.y_hat, self.rms, self.norm_lut, cfg.rms_mode
        )
        e2 = self._normalized("e2", e2)
        e1 = self._normalized("e1", e1)

        x_n = self._normalized("x", record.x)
        s1_n = self._normalized("s1", record.s1)
        s2_n = self._normalized("s2", record.s2)
        d1 = None if cfg.delta_rule else record.d1
        d2 = None if cfg.delta_rule else record.d2

        deltas = {
            "w_out": hebbian_increment(e_out, None, s2_n),
            "w_h": hebbian_increment(e2, d2, s1_n),
            "w_in": hebbian_increment(e1, d1, x_n),
        }
        if self.weights.w_rec is not None:
            s1p_n = self._normalized("s1_prev", prev_s1)
            deltas["w_rec"] = hebbian_increment(e1, d1, s1p_n)

        e_comb = update_traces(self.traces, deltas, self.lambdas, self._mix)

        if cfg.update_mode in ("dual", "fast"):
            eta = self.meta.p * cfg.eta_fast0
            if cfg.reward_lut is not None:
                eta *= reward_lut_gain(cfg.reward_lut, float(np.linalg.norm(e_out)))
            apply_fast_update(self.weights, e_comb, eta)

        accumulate_momentum(self.traces, e_comb, cfg.mu)

        for mat in self.weights.matrices().values():
            project_rows(mat, cfg.c_clip, cfg.projection_mode)

        self.traces.steps_in_window += 1
        self.meta.window_loss_acc += loss
        if self.traces.steps_in_window >= cfg.window:
            mean_loss = self.meta.window_loss_acc / cfg.window
            if cfg.update_mode in ("dual", "slow"):
                consolidate(self.weights, self.traces, cfg, self.meta)
            else:
                self.traces.reset_window()
            if cfg.meta_enabled:
                meta_step(self.meta, mean_loss, cfg)
            self.meta.window_loss_acc = 0.0
        return loss

    def step(self, x: np.ndarray, y_true: np.ndarray) -> tuple[np.ndarray, float]:
        """One full online update: forward, learn, return (y_hat, loss)."""
        y_hat = self.predict(x)
        loss = self.learn_from_cache(y_true)
        return y_hat, loss

    def aux_bytes(self) -> int:
        """Bytes of learning state beyond the weights; constant over steps."""
        total = self.traces.bytes()
        total += sum(s.bytes() for s in self.rms.values())
        total += 4 * 8  # meta scalars
        total += self.state.bytes()
        if self._cache is not None:
            record, prev = self._cache
            total += prev.nbytes + sum(
                getattr(record, f).nbytes for f in ("x", "s1", "s2", "d1", "d2", "y_hat")
            )
        return total
