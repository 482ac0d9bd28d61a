"""Hardware-style signal and weight stabilizers.

Two mechanisms keep online learning bounded: RMS normalization of error and
spike signals through an exponential moving average of their mean square
(looked up through a small inverse-square-root table, as a fixed-point chip
would do it), and per-neuron clipping of incoming weight rows to a maximum
L2 norm, either exactly or by power-of-two division.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LUT_SIZE = 256
LUT_X_MIN = 0.25
LUT_X_MAX = 8.0


class InvSqrtLut:
    """Precomputed 1/sqrt(x) over [0.25, 8.0], 256 linearly spaced entries.

    Queries are clamped to the table domain. ``mode="interp"`` (default)
    linearly interpolates between the two neighbouring entries and keeps the
    worst-case relative error below 1%; ``mode="nearest"`` returns the single
    closest entry (one memory read, ~3% worst case near the low end).
    """

    def __init__(self, mode: str = "interp"):
        if mode not in ("interp", "nearest"):
            raise ValueError(f"unknown LUT mode: {mode!r}")
        self.mode = mode
        self.xs = np.linspace(LUT_X_MIN, LUT_X_MAX, LUT_SIZE)
        self.values = 1.0 / np.sqrt(self.xs)
        self._step = (LUT_X_MAX - LUT_X_MIN) / (LUT_SIZE - 1)

    def __call__(self, x: float) -> float:
        return lut_inv_sqrt(self, x)


def lut_inv_sqrt(lut: InvSqrtLut, x: float) -> float:
    """Approximate 1/sqrt(x) from the table; x is clamped to [0.25, 8.0]."""
    x = min(max(float(x), LUT_X_MIN), LUT_X_MAX)
    pos = (x - LUT_X_MIN) / lut._step
    if lut.mode == "nearest":
        return float(lut.values[int(round(pos))])
    lo = int(pos)
    if lo >= LUT_SIZE - 1:
        return float(lut.values[-1])
    frac = pos - lo
    return float((1.0 - frac) * lut.values[lo] + frac * lut.values[lo + 1])


@dataclass
class RmsEma:
    """Scalar EMA of a signal vector's mean squared value.

    One instance per normalized signal (input counts, each spike vector,
    output error, each propagated error). ``mean_square`` starts at 1.0 so a
    cold normalizer has unit gain.
    """

    lambda_rms: float = 0.99
    epsilon: float = 1e-8
    mean_square: float = 1.0

    def bytes(self) -> int:
        return 3 * 8


def rms_update(state: RmsEma, signal: np.ndarray) -> None:
    """mean_square <- lambda * mean_square + (1 - lambda) * mean(signal**2)."""
    ms = float(np.mean(np.square(signal)))
    state.mean_square = state.lambda_rms * state.mean_square + (1.0 - state.lambda_rms) * ms


def normalize(signal: np.ndarray, state: RmsEma, lut: InvSqrtLut | None = None) -> np.ndarray:
    """Scale the signal by ~1/RMS using the current EMA state.

    Call rms_update() for this step first. With a LUT the gain is the table
    lookup of (mean_square + eps); without one (float-exact test mode) it is
    1/sqrt(mean_square + eps).
    """
    arg = state.mean_square + state.epsilon
    if lut is None:
        gain = 1.0 / np.sqrt(arg)
    else:
        gain = lut_inv_sqrt(lut, arg)
    return signal * gain


def project_rows(matrix: np.ndarray, c: float, mode: str = "exact") -> None:
    """Clip each row's L2 norm to at most c, in place.

    exact: rows above c are rescaled to norm exactly c. pow2: rows above c
    are divided by the smallest power of two that brings the norm to <= c,
    so every surviving entry is the original times 2**-k (bit shifts on
    integer hardware).
    """
    if c <= 0:
        raise ValueError("row-norm bound c must be positive")
    norms = np.linalg.norm(matrix, axis=1)
    over = norms > c
    if not np.any(over):
        return
    if mode == "exact":
        matrix[over] *= (c / norms[over])[:, None]
    elif mode == "pow2":
        # smallest k >= 0 with norm / 2**k <= c
        k = np.ceil(np.log2(norms[over] / c))
        k = np.maximum(k, 0.0)
        matrix[over] *= np.exp2(-k)[:, None]
    else:
        raise ValueError(f"unknown projection mode: {mode!r}")
