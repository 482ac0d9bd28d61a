"""Analytic memory-footprint model plus live-byte instrumentation.

The analytic model counts 4-byte parameters of the bias-free network. Online
training needs the parameters plus two eligibility trace sets (3x parameters,
constant in sequence length); BPTT needs parameters, gradients, and two Adam
buffers (4x) plus per-step activation storage that grows linearly with the
sequence. Instrumented measurements count bytes of live arrays actually
allocated by each trainer, not process RSS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bptt import AdamState, BpttConfig, unrolled_loss_and_grads
from .network import Architecture, LifParams, init_network
from .plasticity import OnlineLearner, PlasticityConfig

MB = 1024.0 * 1024.0
BYTES_PER_VALUE = 4  # single-precision accounting


@dataclass
class MemoryReport:
    arch: Architecture
    timesteps: int
    param_count: int
    static_bytes_online: int
    static_bytes_bptt: int
    dynamic_bytes_bptt: int

    @property
    def total_bytes_online(self) -> int:
        return self.static_bytes_online

    @property
    def total_bytes_bptt(self) -> int:
        return self.static_bytes_bptt + self.dynamic_bytes_bptt

    def as_dict(self) -> dict:
        return {
            "arch": f"{self.arch.n_in}-{self.arch.n_h1}-{self.arch.n_h2}-{self.arch.n_out}",
            "timesteps": self.timesteps,
            "param_count": self.param_count,
            "online_static_mb": self.static_bytes_online / MB,
            "bptt_static_mb": self.static_bytes_bptt / MB,
            "bptt_dynamic_mb": self.dynamic_bytes_bptt / MB,
            "online_total_mb": self.total_bytes_online / MB,
            "bptt_total_mb": self.total_bytes_bptt / MB,
        }


def param_count(arch: Architecture) -> int:
    """Bias-free parameter count, recurrent matrix included."""
    count = arch.n_in * arch.n_h1 + arch.n_h1 * arch.n_h2 + arch.n_h2 * arch.n_out
    if arch.recurrent:
        count += arch.n_h1 * arch.n_h1
    return count


def activation_floats_per_step(arch: Architecture) -> int:
    """Per-step unroll storage: input copy plus membrane, spike, and
    sensitivity vectors for the hidden layers and the output membrane."""
    return arch.n_in + 3 * arch.n_h1 + 3 * arch.n_h2 + arch.n_out


def memory_model(arch: Architecture, timesteps: int) -> MemoryReport:
    """Static and dynamic footprints at 4 bytes per value.

    Online static is 3x the parameters (weights + fast and slow traces) and
    does not depend on timesteps; BPTT static is 4x (weights, gradients, two
    Adam buffers) and its dynamic part is the per-step activation footprint
    times the sequence length.
    """
    if timesteps < 1:
        raise ValueError("timesteps must be >= 1")
    params = param_count(arch)
    return MemoryReport(
        arch=arch,
        timesteps=timesteps,
        param_count=params,
        static_bytes_online=3 * params * BYTES_PER_VALUE,
        static_bytes_bptt=4 * params * BYTES_PER_VALUE,
        dynamic_bytes_bptt=timesteps * activation_floats_per_step(arch) * BYTES_PER_VALUE,
    )


def measure_online_aux_bytes(arch: Architecture, timesteps: int, seed: int = 0) -> int:
    """Peak auxiliary bytes of the online learner over a run of timesteps."""
    rng = np.random.default_rng(seed)
    weights = init_network(arch, rng)
    learner = OnlineLearner(weights, arch, LifParams(),
                            PlasticityConfig(dt_ms=10.0, window=10))
    peak = learner.aux_bytes()
    for _ in range(timesteps):
        x = rng.poisson(1.0, size=arch.n_in).astype(float)
        y = rng.normal(0.0, 1.0, size=arch.n_out)
        learner.step(x, y)
        peak = max(peak, learner.aux_bytes())
    return peak


def measure_bptt_aux_bytes(arch: Architecture, timesteps: int, seed: int = 0) -> int:
    """Peak auxiliary bytes of one BPTT pass over a timesteps-long sequence:
    retained activations + gradients + Adam buffers."""
    rng = np.random.default_rng(seed)
    weights = init_network(arch, rng)
    xs = rng.poisson(1.0, size=(1, timesteps, arch.n_in)).astype(float)
    ys = rng.normal(0.0, 1.0, size=(1, timesteps, arch.n_out))
    adam = AdamState.for_weights(weights)
    _, grads, stored = unrolled_loss_and_grads(weights, LifParams(), xs, ys)
    grad_bytes = sum(g.nbytes for g in grads.values())
    return stored + grad_bytes + adam.bytes()
