"""Reference BPTT trainer: unrolled LIF forward, manual reverse pass, Adam.

Used for convergence and memory comparisons against the online rule. The
reverse pass substitutes the fast-sigmoid surrogate for the spike derivative
and treats the reset subtraction as a constant (detached). With
smoothed=True both passes switch to the continuous fast-sigmoid relaxation,
including the reset path, making the network exactly differentiable; that
mode is what the finite-difference gradient check exercises. Peak auxiliary
memory (stored activations + gradients + optimizer state) is tracked per
batch and grows linearly with sequence length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import pearson_r
from .network import Architecture, LifParams, Weights, init_network

_GRAD_KEYS = ("w_in", "w_rec", "w_h", "w_out")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr: float = 1e-3

    @classmethod
    def for_weights(cls, weights: Weights, lr: float = 1e-3) -> "AdamState":
        mats = weights.matrices()
        return cls(
            m={k: np.zeros_like(w) for k, w in mats.items()},
            v={k: np.zeros_like(w) for k, w in mats.items()},
            lr=lr,
        )

    def bytes(self) -> int:
        return sum(a.nbytes for a in self.m.values()) + sum(a.nbytes for a in self.v.values())


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """Standard bias-corrected Adam update, in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for key, g in grads.items():
        state.m[key] = b1 * state.m[key] + (1.0 - b1) * g
        state.v[key] = b2 * state.v[key] + (1.0 - b2) * np.square(g)
        m_hat = state.m[key] / (1.0 - b1**state.t)
        v_hat = state.v[key] / (1.0 - b2**state.t)
        params[key] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class BpttConfig:
    seq_len: int = 10
    batch_size: int = 32
    epochs: int = 50
    lr: float = 1e-3
    weight_decay: float = 1e-5
    patience: int = 10

    def __post_init__(self):
        if self.seq_len < 1:
            raise ValueError("sequence length must be >= 1")


def _surrogate(u: np.ndarray, lif: LifParams) -> np.ndarray:
    return 1.0 / np.square(1.0 + lif.surrogate_slope * np.abs(u - lif.threshold))


def _spike(u: np.ndarray, lif: LifParams, smoothed: bool) -> np.ndarray:
    if smoothed:
        v = u - lif.threshold
        return v / (1.0 + lif.surrogate_slope * np.abs(v))
    return (u >= lif.threshold).astype(float)


def unrolled_loss_and_grads(
    weights: Weights,
    lif: LifParams,
    xs: np.ndarray,
    ys: np.ndarray,
    smoothed: bool = False,
):
    """Forward-unroll a (B, T, n_in) batch from zero state, reverse through it.

    Returns (loss, grads, stored_bytes) with loss the mean over batch and
    time of the summed squared output error, grads keyed like the weight
    matrices, and stored_bytes the size of the retained per-step activations.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim == 2:
        xs = xs[None]
        ys = ys[None]
    B, T, _ = xs.shape
    w_in, w_rec, w_h, w_out = weights.w_in, weights.w_rec, weights.w_h, weights.w_out
    n_h1, n_h2 = w_in.shape[0], w_h.shape[0]
    n_out = w_out.shape[0]

    u1 = np.zeros((B, n_h1))
    u2 = np.zeros((B, n_h2))
    uo = np.zeros((B, n_out))
    s1_prev = np.zeros((B, n_h1))
    S1, S2, D1, D2, YH = [], [], [], [], []
    for t in range(T):
        i1 = xs[:, t] @ w_in.T
        if w_rec is not None:
            i1 = i1 + s1_prev @ w_rec.T
        u1 = lif.beta_h * u1 + i1
        d1 = _surrogate(u1, lif)
        s1 = _spike(u1, lif, smoothed)
        u1 = u1 - s1
        u2 = lif.beta_h * u2 + s1 @ w_h.T
        d2 = _surrogate(u2, lif)
        s2 = _spike(u2, lif, smoothed)
        u2 = u2 - s2
        uo = lif.beta_out * uo + s2 @ w_out.T
        S1.append(s1)
        S2.append(s2)
        D1.append(d1)
        D2.append(d2)
        YH.append(uo.copy())
        s1_prev = s1

    err = np.stack(YH, axis=1) - ys
    loss = float(np.mean(np.sum(np.square(err), axis=2)))
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite BPTT loss at T={T}, B={B}")
    stored_bytes = xs.nbytes + sum(
        a.nbytes for seq in (S1, S2, D1, D2, YH) for a in seq
    )

    grads = {k: np.zeros_like(w) for k, w in weights.matrices().items()}
    duo = np.zeros((B, n_out))
    du1_next = np.zeros((B, n_h1))
    du2_next = np.zeros((B, n_h2))
    scale = 2.0 / (B * T)
    for t in range(T - 1, -1, -1):
        duo = scale * err[:, t] + lif.beta_out * duo
        grads["w_out"] += duo.T @ S2[t]
        ds2 = duo @ w_out
        if smoothed:
            ds2 = ds2 - lif.beta_h * du2_next
        du2 = ds2 * D2[t] + lif.beta_h * du2_next
        grads["w_h"] += du2.T @ S1[t]
        ds1 = du2 @ w_h
        if w_rec is not None:
            ds1 = ds1 + du1_next @ w_rec
        if smoothed:
            ds1 = ds1 - lif.beta_h * du1_next
        du1 = ds1 * D1[t] + lif.beta_h * du1_next
        grads["w_in"] += du1.T @ xs[:, t]
        if w_rec is not None:
            s1p = S1[t - 1] if t > 0 else np.zeros((B, n_h1))
            grads["w_rec"] += du1.T @ s1p
        du1_next, du2_next = du1, du2
    return loss, grads, stored_bytes


def decode_series(weights: Weights, lif: LifParams, xs: np.ndarray) -> np.ndarray:
    """Frozen chronological decode of a (T, n_in) series from zero state."""
    preds = np.empty((len(xs), weights.w_out.shape[0]))
    u1 = np.zeros(weights.w_in.shape[0])
    u2 = np.zeros(weights.w_h.shape[0])
    uo = np.zeros(weights.w_out.shape[0])
    s1_prev = np.zeros(weights.w_in.shape[0])
    for t, x in enumerate(xs):
        i1 = weights.w_in @ x
        if weights.w_rec is not None:
            i1 = i1 + weights.w_rec @ s1_prev
        u1 = lif.beta_h * u1 + i1
        s1 = (u1 >= lif.threshold).astype(float)
        u1 = u1 - s1
        u2 = lif.beta_h * u2 + weights.w_h @ s1
        s2 = (u2 >= lif.threshold).astype(float)
        u2 = u2 - s2
        uo = lif.beta_out * uo + weights.w_out @ s2
        preds[t] = uo
        s1_prev = s1
    return preds


@dataclass
class BpttResult:
    weights: Weights
    history: list[dict]
    peak_aux_bytes: int
    best_r: float


def bptt_train(
    arch: Architecture,
    dataset: tuple[np.ndarray, np.ndarray],
    cfg: BpttConfig,
    seed,
    lif: LifParams | None = None,
    val: tuple[np.ndarray, np.ndarray] | None = None,
    weights: Weights | None = None,
    eval_samples: list[int] | None = None,
) -> BpttResult:
    """Train on non-overlapping sequences with Adam and early stopping.

    Validation Pearson R (mean of the two axes) is recorded once per epoch
    and at any extra sample counts requested in eval_samples; the best
    weights are kept. Weight decay is added to the gradients, PyTorch-style.
    """
    lif = lif or LifParams()
    rng = np.random.default_rng(seed)
    if weights is None:
        weights = init_network(arch, rng)
    X, Y = dataset
    n_seq = len(X) // cfg.seq_len
    if n_seq == 0:
        raise ValueError("dataset shorter than one sequence")
    xs = X[: n_seq * cfg.seq_len].reshape(n_seq, cfg.seq_len, -1).astype(float)
    ys = Y[: n_seq * cfg.seq_len].reshape(n_seq, cfg.seq_len, -1).astype(float)

    adam = AdamState.for_weights(weights, lr=cfg.lr)
    mats = weights.matrices()
    history: list[dict] = []
    peak = 0
    best_r = -np.inf
    best = weights.copy()
    stale = 0
    samples_seen = 0
    eval_points = sorted(eval_samples or [])
    next_eval = eval_points.pop(0) if eval_points else None

    def evaluate(epoch: int, train_loss: float) -> float:
        nonlocal best_r, best, stale
        if val is None:
            history.append({"epoch": epoch, "samples": samples_seen,
                            "r_x": np.nan, "r_y": np.nan, "train_loss": train_loss})
            return np.nan
        preds = decode_series(weights, lif, val[0])
        r_x = pearson_r(preds[:, 0], val[1][:, 0])
        r_y = pearson_r(preds[:, 1], val[1][:, 1])
        history.append({"epoch": epoch, "samples": samples_seen,
                        "r_x": r_x, "r_y": r_y, "train_loss": train_loss})
        mean_r = 0.5 * (r_x + r_y)
        if mean_r > best_r:
            best_r = mean_r
            best = weights.copy()
            stale = 0
        else:
            stale += 1
        return mean_r

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_seq)
        losses = []
        for start in range(0, n_seq, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads, stored = unrolled_loss_and_grads(weights, lif, xs[idx], ys[idx])
            for key, w in mats.items():
                grads[key] += cfg.weight_decay * w
            grad_bytes = sum(g.nbytes for g in grads.values())
            peak = max(peak, stored + grad_bytes + adam.bytes())
            adam_step(mats, grads, adam)
            losses.append(loss)
            samples_seen += idx.size * cfg.seq_len
            while next_eval is not None and samples_seen >= next_eval:
                evaluate(epoch, loss)
                next_eval = eval_points.pop(0) if eval_points else None
        evaluate(epoch, float(np.mean(losses)))
        if cfg.patience and stale > cfg.patience:
            break
    if val is not None:
        weights = best
    return BpttResult(weights=weights, history=history, peak_aux_bytes=peak, best_r=best_r)
