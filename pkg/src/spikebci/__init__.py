"""Online-adaptive spiking neural network decoder and its evaluation bench."""

from .network import Architecture, LifParams, NeuronState, StepRecord, Weights
from .network import forward, init_network, lif_step, reset_state, surrogate_grad
from .homeostasis import InvSqrtLut, RmsEma, lut_inv_sqrt, normalize, project_rows, rms_update
from .plasticity import (
    MetaState,
    OnlineLearner,
    PlasticityConfig,
    RewardLut,
    TraceSet,
    accumulate_momentum,
    apply_fast_update,
    compute_error_drives,
    consolidate,
    decay_coefficients,
    hebbian_increment,
    meta_step,
    reward_lut_gain,
    update_traces,
)
from .kalman import KalmanModel, kf_fit, kf_step
from .bptt import AdamState, BpttConfig, adam_step, bptt_train, unrolled_loss_and_grads
from .population import (
    SyntheticPopulation,
    apply_dropout,
    apply_drift,
    apply_remap,
    firing_rates,
    sample_spikes,
)
from .closedloop import (
    ClosedLoopConfig,
    KalmanDecoder,
    OnlineSnnDecoder,
    ReachTask,
    SnnDecoder,
    TrialResult,
    collect_pretraining_dataset,
    desired_velocity,
    run_disruption_protocol,
    run_nopretrain_protocol,
    run_reach_trial,
)
from .metrics import pearson_r, rolling_mean, time_to_target_stats
from .memory import MemoryReport, memory_model
from .datasets import BinnedDataset, load_dataset, make_synthetic_offline_dataset, save_dataset
from .training import RunResult, TrainConfig, run_ablation, train_offline
from .checkpoint import load_checkpoint, save_checkpoint

__version__ = "0.1.0"
