"""Three-layer recurrent LIF network for velocity decoding.

Membrane update per step: u' = beta * u + I, spike where u' >= threshold,
soft reset by subtraction (u_next = u' - s). The first hidden layer receives
recurrent input from its own previous-step spikes. The output layer is
non-spiking: its membrane potentials are the 2D velocity estimate. The
forward pass keeps only the current step's intermediates, so state size is
independent of how long the network has been run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Architecture:
    """Layer sizes; recurrent enables first-hidden-layer feedback."""

    n_in: int
    n_h1: int
    n_h2: int
    n_out: int = 2
    recurrent: bool = True

    def __post_init__(self):
        for name in ("n_in", "n_h1", "n_h2", "n_out"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @classmethod
    def parse(cls, text: str, recurrent: bool = True) -> "Architecture":
        """Parse an 'in-h1-h2-out' string such as '96-256-128-2'."""
        parts = text.split("-")
        if len(parts) != 4:
            raise ValueError(f"architecture must have 4 sizes, got {text!r}")
        try:
            sizes = [int(p) for p in parts]
        except ValueError as exc:
            raise ValueError(f"bad architecture string {text!r}") from exc
        return cls(*sizes, recurrent=recurrent)


@dataclass
class LifParams:
    """LIF decay/threshold constants and the fast-sigmoid surrogate slope."""

    beta_h: float = 0.7
    beta_out: float = 0.5
    threshold: float = 1.0
    surrogate_slope: float = 25.0

    def __post_init__(self):
        if not 0.0 < self.beta_h < 1.0 or not 0.0 < self.beta_out < 1.0:
            raise ValueError("decay factors must be in (0, 1)")
        if self.threshold <= 0 or self.surrogate_slope <= 0:
            raise ValueError("threshold and surrogate slope must be positive")


@dataclass
class Weights:
    """The four trainable matrices, rows indexed by postsynaptic neuron."""

    w_in: np.ndarray
    w_rec: np.ndarray | None
    w_h: np.ndarray
    w_out: np.ndarray

    def matrices(self) -> dict[str, np.ndarray]:
        out = {"w_in": self.w_in, "w_h": self.w_h, "w_out": self.w_out}
        if self.w_rec is not None:
            out["w_rec"] = self.w_rec
        return out

    def copy(self) -> "Weights":
        return Weights(
            self.w_in.copy(),
            None if self.w_rec is None else self.w_rec.copy(),
            self.w_h.copy(),
            self.w_out.copy(),
        )


@dataclass
class NeuronState:
    """Membrane potentials plus previous-step spikes of the first layer."""

    u1: np.ndarray
    u2: np.ndarray
    u_out: np.ndarray
    s1_prev: np.ndarray

    def bytes(self) -> int:
        return self.u1.nbytes + self.u2.nbytes + self.u_out.nbytes + self.s1_prev.nbytes


@dataclass
class StepRecord:
    """Everything the learning rule needs from one forward step."""

    x: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    y_hat: np.ndarray


def _xavier(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_out, n_in))


def init_network(arch: Architecture, seed) -> Weights:
    """Xavier-Glorot uniform initialization, deterministic given the seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    w_in = _xavier(rng, arch.n_h1, arch.n_in)
    w_rec = _xavier(rng, arch.n_h1, arch.n_h1) if arch.recurrent else None
    w_h = _xavier(rng, arch.n_h2, arch.n_h1)
    w_out = _xavier(rng, arch.n_out, arch.n_h2)
    return Weights(w_in, w_rec, w_h, w_out)


def reset_state(arch: Architecture) -> NeuronState:
    """All-zero membranes and previous spikes."""
    return NeuronState(
        u1=np.zeros(arch.n_h1),
        u2=np.zeros(arch.n_h2),
        u_out=np.zeros(arch.n_out),
        s1_prev=np.zeros(arch.n_h1),
    )


def surrogate_grad(u: np.ndarray, params: LifParams) -> np.ndarray:
    """Fast-sigmoid sensitivity 1 / (1 + k|u - threshold|)^2, in (0, 1]."""
    return 1.0 / np.square(1.0 + params.surrogate_slope * np.abs(u - params.threshold))


def _smoothed_activation(u: np.ndarray, params: LifParams) -> np.ndarray:
    # Continuous stand-in for the spike: v/(1+k|v|), whose exact derivative
    # is the fast-sigmoid surrogate. Used by the gradient checker.
    v = u - params.threshold
    return v / (1.0 + params.surrogate_slope * np.abs(v))


def lif_step(
    u: np.ndarray,
    current: np.ndarray,
    params: LifParams,
    spiking: bool,
    beta: float | None = None,
    smoothed: bool = False,
):
    """One membrane update: u' = beta*u + I.

    Spiking layers emit s = 1 where u' >= threshold and reset by subtraction;
    non-spiking layers (the output) keep u' as both state and value. Returns
    (u_next, spikes, sensitivities); spikes and sensitivities are None for a
    non-spiking layer. With smoothed=True the spike is replaced by its
    continuous fast-sigmoid relaxation (the differentiable twin).
    """
    u = np.asarray(u, dtype=float)
    current = np.asarray(current, dtype=float)
    if u.shape != current.shape:
        raise ValueError(f"shape mismatch: u {u.shape} vs I {current.shape}")
    if beta is None:
        beta = params.beta_h if spiking else params.beta_out
    u_new = beta * u + current
    if not spiking:
        return u_new, None, None
    d = surrogate_grad(u_new, params)
    if smoothed:
        s = _smoothed_activation(u_new, params)
    else:
        s = (u_new >= params.threshold).astype(float)
    return u_new - s, s, d


def forward(
    weights: Weights,
    state: NeuronState,
    x: np.ndarray,
    params: LifParams,
    smoothed: bool = False,
):
    """One step through the network on raw (unnormalized) spike counts.

    Returns (y_hat, StepRecord, new_state). Only this step's intermediates
    are recorded; no history accumulates across calls.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (weights.w_in.shape[1],):
        raise ValueError(f"input has shape {x.shape}, expected ({weights.w_in.shape[1]},)")
    i1 = weights.w_in @ x
    if weights.w_rec is not None:
        i1 = i1 + weights.w_rec @ state.s1_prev
    u1, s1, d1 = lif_step(state.u1, i1, params, spiking=True, smoothed=smoothed)
    u2, s2, d2 = lif_step(state.u2, weights.w_h @ s1, params, spiking=True, smoothed=smoothed)
    u_out, _, _ = lif_step(state.u_out, weights.w_out @ s2, params, spiking=False)
    record = StepRecord(x=x, s1=s1, s2=s2, d1=d1, d2=d2, y_hat=u_out.copy())
    new_state = NeuronState(u1=u1, u2=u2, u_out=u_out, s1_prev=s1.copy())
    return u_out, record, new_state
