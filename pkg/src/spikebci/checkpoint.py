"""Versioned binary checkpoints: weights + traces + meta + RMS state.

Layout (all little-endian): 8-byte magic, u32 version, u32 x5 architecture
(n_in, n_h1, n_h2, n_out, recurrent flag), then float64 payloads in a fixed
order. Matrices are stored row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .network import Architecture, LifParams, Weights
from .plasticity import MetaState, OnlineLearner, PlasticityConfig, TraceSet, _SIGNAL_NAMES

MAGIC = b"SPIKEBCI"
VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or mismatched checkpoint file."""


def _matrix_order(arch: Architecture) -> list[str]:
    order = ["w_in", "w_rec", "w_h", "w_out"]
    if not arch.recurrent:
        order.remove("w_rec")
    return order


def save_checkpoint(learner: OnlineLearner, path) -> None:
    arch = learner.arch
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack(
            "<5I", arch.n_in, arch.n_h1, arch.n_h2, arch.n_out, int(arch.recurrent)
        ),
    ]
    mats = learner.weights.matrices()
    for group in (mats, learner.traces.e_fast, learner.traces.e_slow, learner.traces.g):
        for name in _matrix_order(arch):
            parts.append(np.ascontiguousarray(group[name], dtype="<f8").tobytes())
    meta = learner.meta
    prev = np.nan if meta.prev_window_loss is None else meta.prev_window_loss
    parts.append(struct.pack("<4d", meta.p, meta.s, meta.window_loss_acc, prev))
    parts.append(struct.pack("<I", learner.traces.steps_in_window))
    parts.append(
        struct.pack(f"<{len(_SIGNAL_NAMES)}d", *(learner.rms[n].mean_square for n in _SIGNAL_NAMES))
    )
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path, lif: LifParams | None = None,
                    cfg: PlasticityConfig | None = None) -> OnlineLearner:
    """Rebuild a learner from a checkpoint; LIF and plasticity hyperparameters
    are not stored and come from the caller (or defaults)."""
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise CheckpointError("bad magic header")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    n_in, n_h1, n_h2, n_out, rec = struct.unpack_from("<5I", blob, 12)
    arch = Architecture(n_in, n_h1, n_h2, n_out, recurrent=bool(rec))
    shapes = {
        "w_in": (n_h1, n_in),
        "w_rec": (n_h1, n_h1),
        "w_h": (n_h2, n_h1),
        "w_out": (n_out, n_h2),
    }
    offset = 32

    def read_group() -> dict[str, np.ndarray]:
        nonlocal offset
        group = {}
        for name in _matrix_order(arch):
            shape = shapes[name]
            count = shape[0] * shape[1]
            arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
            offset += count * 8
            group[name] = arr.reshape(shape).astype(float)
        return group

    mats = read_group()
    weights = Weights(
        w_in=mats["w_in"],
        w_rec=mats.get("w_rec"),
        w_h=mats["w_h"],
        w_out=mats["w_out"],
    )
    learner = OnlineLearner(weights, arch, lif, cfg)
    learner.traces = TraceSet(e_fast=read_group(), e_slow=read_group(), g=read_group())
    p, s, acc, prev = struct.unpack_from("<4d", blob, offset)
    offset += 32
    (steps,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    learner.meta = MetaState(p=p, s=s, window_loss_acc=acc,
                             prev_window_loss=None if np.isnan(prev) else prev)
    learner.traces.steps_in_window = steps
    values = struct.unpack_from(f"<{len(_SIGNAL_NAMES)}d", blob, offset)
    for name, val in zip(_SIGNAL_NAMES, values):
        learner.rms[name].mean_square = val
    return learner
