"""Binned spike-count dataset: container, file IO, synthetic generation.

Files come in pairs: a JSON header sidecar (n_channels, bin_ms, n_bins,
trial_boundaries) next to a CSV body with rows `t, c0..c{N-1}, vx, vy`.
Counts are nonnegative integers; velocities are written with full precision
so a save/load round trip is exact.

The synthetic offline dataset stands in for real recordings: a smoothed
random-walk velocity target drives the cosine-tuned population, counts are
summed Bernoulli draws over 10 ms substeps of each bin, and the velocities
are z-scored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .population import SyntheticPopulation, firing_rates


class DatasetFormatError(ValueError):
    """Malformed dataset file (bad header, negative count, NaN, width mismatch)."""


@dataclass
class BinnedDataset:
    X: np.ndarray  # (T, N) nonnegative integer counts
    Y: np.ndarray  # (T, 2) target velocities, z-scored
    bin_ms: float = 50.0
    trial_boundaries: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.ndim != 2 or self.Y.ndim != 2 or len(self.X) != len(self.Y):
            raise DatasetFormatError("X must be T x N and Y must be T x 2")
        if np.any(self.X < 0):
            raise DatasetFormatError("spike counts must be nonnegative")
        if not np.all(np.isfinite(self.Y)):
            raise DatasetFormatError("velocities must be finite")
        if list(self.trial_boundaries) != sorted(set(self.trial_boundaries)):
            raise DatasetFormatError("trial boundaries must be strictly increasing")

    @property
    def n_channels(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return len(self.X)

    def split(self, train: float = 0.7, val: float = 0.15):
        """Chronological train/validation/test split."""
        t = len(self)
        i = int(train * t)
        j = int((train + val) * t)
        return (
            BinnedDataset(self.X[:i], self.Y[:i], self.bin_ms),
            BinnedDataset(self.X[i:j], self.Y[i:j], self.bin_ms),
            BinnedDataset(self.X[j:], self.Y[j:], self.bin_ms),
        )


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def save_dataset(ds: BinnedDataset, path) -> None:
    """Write the CSV body and its JSON header sidecar."""
    path = Path(path)
    header = {
        "n_channels": int(ds.n_channels),
        "bin_ms": float(ds.bin_ms),
        "n_bins": len(ds),
        "trial_boundaries": [int(b) for b in ds.trial_boundaries],
    }
    _sidecar(path).write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
    cols = ["t"] + [f"c{i}" for i in range(ds.n_channels)] + ["vx", "vy"]
    lines = [",".join(cols)]
    for t in range(len(ds)):
        counts = ",".join(str(int(c)) for c in ds.X[t])
        vx, vy = (float(v) for v in ds.Y[t])
        lines.append(f"{t},{counts},{vx!r},{vy!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_dataset(path) -> BinnedDataset:
    """Read a dataset pair back; validates shape, counts, and finiteness."""
    path = Path(path)
    try:
        header = json.loads(_sidecar(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetFormatError(f"cannot read header sidecar: {exc}") from exc
    for key in ("n_channels", "bin_ms", "n_bins"):
        if key not in header:
            raise DatasetFormatError(f"header missing {key!r}")
    n = int(header["n_channels"])
    lines = path.read_text(encoding="utf-8").strip().split("\n")
    if len(lines) - 1 != int(header["n_bins"]):
        raise DatasetFormatError("row count does not match header n_bins")
    X = np.empty((len(lines) - 1, n), dtype=np.int64)
    Y = np.empty((len(lines) - 1, 2))
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != n + 3:
            raise DatasetFormatError(f"row {i} has {len(parts)} fields, expected {n + 3}")
        counts = [int(p) for p in parts[1 : n + 1]]
        if any(c < 0 for c in counts):
            raise DatasetFormatError(f"negative spike count in row {i}")
        X[i] = counts
        Y[i] = [float(parts[-2]), float(parts[-1])]
    if not np.all(np.isfinite(Y)):
        raise DatasetFormatError("NaN or infinite velocity in file")
    return BinnedDataset(X, Y, float(header["bin_ms"]),
                         list(header.get("trial_boundaries", [])))


def smoothed_random_walk(n: int, rng: np.random.Generator, momentum: float = 0.98,
                         noise: float = 0.12) -> np.ndarray:
    """AR(1) 2D velocity path used as the synthetic decoding target."""
    v = np.zeros(2)
    out = np.empty((n, 2))
    for t in range(n):
        v = momentum * v + noise * rng.normal(size=2)
        out[t] = v
    return out


def zscore(a: np.ndarray) -> np.ndarray:
    return (a - a.mean(axis=0)) / a.std(axis=0)


def make_synthetic_offline_dataset(
    n_bins: int,
    seed,
    n_channels: int = 96,
    bin_ms: float = 50.0,
) -> BinnedDataset:
    """Cosine-population counts for a smoothed random-walk velocity target.

    Each bin's count per channel is the sum of Bernoulli spike draws over
    10 ms substeps at that bin's rate, mirroring closed-loop generation.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    rng = np.random.default_rng(seed)
    pop = SyntheticPopulation.create(rng, n=n_channels)
    velocities = smoothed_random_walk(n_bins, rng)
    substeps = max(1, int(round(bin_ms / 10.0)))
    X = np.empty((n_bins, n_channels), dtype=np.int64)
    for t in range(n_bins):
        rates = firing_rates(pop, velocities[t])
        p = np.clip(
            rates[None, :] * pop.dt + rng.normal(0.0, pop.sigma, size=(substeps, n_channels)),
            0.0,
            1.0,
        )
        X[t] = (rng.random((substeps, n_channels)) < p).sum(axis=0)
    return BinnedDataset(X, zscore(velocities), bin_ms)
