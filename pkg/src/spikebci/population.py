"""Synthetic cosine-tuned neural population and its disruption injectors.

96 units with unit-norm preferred directions balanced across the four
quadrants. Rates follow a rectified cosine tuning of the half-scaled
velocity direction; spikes are Bernoulli draws of the noisy rate-per-bin
probability, post-filtered by a dropout mask. Remap, drift, and dropout
reproduce the three simulated non-stationarities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SyntheticPopulation:
    directions: np.ndarray  # (n, 2), unit rows
    r_min: float = 5.0
    r_max: float = 100.0
    sigma: float = 0.02
    dt: float = 0.01
    dropout_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.dropout_mask is None:
            self.dropout_mask = np.ones(len(self.directions))

    @property
    def n(self) -> int:
        return len(self.directions)

    @classmethod
    def create(cls, rng: np.random.Generator, n: int = 96, **kwargs) -> "SyntheticPopulation":
        """Preferred directions at uniform random angles, n/4 per quadrant."""
        if n % 4:
            raise ValueError("population size must be divisible by 4")
        per = n // 4
        angles = np.concatenate(
            [rng.uniform(q * np.pi / 2, (q + 1) * np.pi / 2, size=per) for q in range(4)]
        )
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        return cls(directions=directions, **kwargs)

    def copy(self) -> "SyntheticPopulation":
        return SyntheticPopulation(
            directions=self.directions.copy(),
            r_min=self.r_min,
            r_max=self.r_max,
            sigma=self.sigma,
            dt=self.dt,
            dropout_mask=self.dropout_mask.copy(),
        )


def firing_rates(pop: SyntheticPopulation, v: np.ndarray) -> np.ndarray:
    """Rectified cosine tuning of the half-unit velocity direction.

    v_hat = v / (2||v||), zero when v is zero, so tuning depends on direction
    only; r = r_min + (r_max - r_min) * max(0, (d.v_hat + 0.5)/1.5). No extra
    clamp is applied when drift pushes r_max below r_min.
    """
    v = np.asarray(v, dtype=float)
    speed = np.linalg.norm(v)
    v_hat = v / (2.0 * speed) if speed > 0 else np.zeros(2)
    drive = np.maximum(0.0, (pop.directions @ v_hat + 0.5) / 1.5)
    return pop.r_min + (pop.r_max - pop.r_min) * drive


def sample_spikes(pop: SyntheticPopulation, rates: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli spikes of clamp(rate*dt + noise, 0, 1), masked afterwards.

    Noise and uniform draws are taken for every neuron regardless of the
    mask, so masking is a pure post-filter on the random stream.
    """
    p = np.clip(rates * pop.dt + rng.normal(0.0, pop.sigma, size=pop.n), 0.0, 1.0)
    spikes = (rng.random(pop.n) < p).astype(float)
    return spikes * pop.dropout_mask


def floyd_sample(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Floyd's algorithm: k distinct indices out of range(n)."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    chosen: set[int] = set()
    for j in range(n - k, n):
        t = int(rng.integers(0, j + 1))
        chosen.add(t if t not in chosen else j)
    return np.sort(np.fromiter(chosen, dtype=int, count=k))


def apply_remap(pop: SyntheticPopulation, lam: float, rng: np.random.Generator) -> np.ndarray:
    """Reassign preferred directions of a min(0.95, 1.9*lam) fraction of units.

    New angles are Uniform(0, 2pi) plus a fair-coin half-turn; directions
    stay unit norm. Returns the remapped indices.
    """
    _check_intensity(lam)
    count = int(np.floor(min(0.95, 1.9 * lam) * pop.n))
    idx = floyd_sample(rng, pop.n, count)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=count) + rng.integers(0, 2, size=count) * np.pi
    pop.directions[idx, 0] = np.cos(theta)
    pop.directions[idx, 1] = np.sin(theta)
    return idx


def apply_drift(pop: SyntheticPopulation, lam: float) -> None:
    """Degrade rate parameters: r_max shrinks (clamped at 0), r_min and the
    noise grow, noise capped at 0.4."""
    _check_intensity(lam)
    pop.r_max = max(0.0, pop.r_max * (1.0 - 1.6 * lam))
    pop.r_min = pop.r_min * (1.0 + 6.0 * lam)
    pop.sigma = min(0.4, pop.sigma * (1.0 + 4.0 * lam))


def apply_dropout(pop: SyntheticPopulation, lam: float, rng: np.random.Generator) -> np.ndarray:
    """Silence a min(0.9, 1.8*lam) fraction of units via the binary mask.

    Returns the silenced indices.
    """
    _check_intensity(lam)
    count = int(np.floor(min(0.9, 1.8 * lam) * pop.n))
    idx = floyd_sample(rng, pop.n, count)
    pop.dropout_mask[idx] = 0.0
    return idx


def apply_disruption(pop: SyntheticPopulation, kind: str, lam: float, rng: np.random.Generator) -> None:
    if kind == "remap":
        apply_remap(pop, lam, rng)
    elif kind == "drift":
        apply_drift(pop, lam)
    elif kind == "dropout":
        apply_dropout(pop, lam, rng)
    else:
        raise ValueError(f"unknown disruption kind: {kind!r}")


def _check_intensity(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise ValueError("disruption intensity must be in [0, 1]")
