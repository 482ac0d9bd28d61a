"""Evaluation metrics: Pearson correlation and reach-time summaries."""

from __future__ import annotations

import numpy as np


class ZeroVarianceError(ValueError):
    """Correlation is undefined when either series is constant."""


def pearson_r(pred, true) -> float:
    """Pearson correlation coefficient between two series."""
    pred = np.asarray(pred, dtype=float)
    true = np.asarray(true, dtype=float)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError("series must be 1-D and equally long")
    if len(pred) < 2:
        raise ValueError("need at least two points")
    dp = pred - pred.mean()
    dt = true - true.mean()
    denom = np.sqrt(np.sum(dp * dp)) * np.sqrt(np.sum(dt * dt))
    if denom == 0.0:
        raise ZeroVarianceError("a series has zero variance")
    return float(np.clip(np.sum(dp * dt) / denom, -1.0, 1.0))


def rolling_mean(values, window: int = 15) -> np.ndarray:
    """Trailing mean whose window shrinks at the head of the series."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    csum = np.cumsum(values)
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        total = csum[i] - (csum[lo - 1] if lo > 0 else 0.0)
        out[i] = total / (i - lo + 1)
    return out


def time_to_target_stats(times_per_run: list, window: int = 15):
    """Smoothed learning curves plus across-run mean and SEM per trial index.

    times_per_run holds one reach-time series per run (seed). Returns a dict
    with the per-run rolling means, their across-run mean, and the standard
    error of that mean (0.0 when only one run is given).
    """
    if not times_per_run:
        raise ValueError("need at least one run")
    curves = [rolling_mean(t, window) for t in times_per_run]
    lengths = {len(c) for c in curves}
    if len(lengths) != 1:
        raise ValueError("runs must have equal numbers of trials")
    stacked = np.stack(curves)
    mean = stacked.mean(axis=0)
    n = stacked.shape[0]
    if n > 1:
        sem = stacked.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        sem = np.zeros_like(mean)
    return {"rolling": stacked, "mean": mean, "sem": sem, "n_runs": n}
