"""Hebbian learning rules benchmarked on one-layer associative memories.

Six local learning rules (Willshaw, Hebb, Hopfield, covariance,
presynaptic covariance, and the Bayesian confidence propagation rule) are
trained one-shot on sparse binary patterns in modular or non-modular
winner-take-all networks. The package measures pattern storage capacity
and prototype-extraction capacity with a stochastic bisection search and
fits the bits-per-weight scaling law to the results.
"""

from .analysis import (
    BitsPerWeight,
    CapacityPoint,
    capacity_model,
    fit_bits_per_weight,
    pattern_information,
)
from .evaluation import (
    BisectionNonConvergence,
    BisectionParams,
    CapacityEstimate,
    TrialSpec,
    bisect_p90,
    capacity_estimate,
    recall_fraction,
    simulate_point,
)
from .experiments import (
    PrototypeSpec,
    SweepSpec,
    prototype_capacity,
    prototype_trial,
    silent_sweep,
    storage_scaling,
    weight_trajectories,
)
from .network import NetworkConfig, RecallResult, activate_kwta, activate_modular, field, recall
from .patterns import (
    Architecture,
    Layout,
    Pattern,
    PatternKind,
    PatternSpec,
    distort,
    generate_correlated,
    generate_hrand,
    generate_nrand,
    generate_silent,
    kofn_layout,
    modular_layout,
    pattern_distance,
    silent_counts,
)
from .plasticity import (
    Rule,
    SynapticState,
    WeightState,
    compute_weights,
    epsilon_for,
    p_estimates,
    train_pattern,
)
from .rng import RngStream, stream_for

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "BisectionNonConvergence",
    "BisectionParams",
    "BitsPerWeight",
    "CapacityEstimate",
    "CapacityPoint",
    "Layout",
    "NetworkConfig",
    "Pattern",
    "PatternKind",
    "PatternSpec",
    "PrototypeSpec",
    "RecallResult",
    "RngStream",
    "Rule",
    "SweepSpec",
    "SynapticState",
    "TrialSpec",
    "WeightState",
    "activate_kwta",
    "activate_modular",
    "bisect_p90",
    "capacity_estimate",
    "capacity_model",
    "compute_weights",
    "distort",
    "epsilon_for",
    "field",
    "fit_bits_per_weight",
    "generate_correlated",
    "generate_hrand",
    "generate_nrand",
    "generate_silent",
    "kofn_layout",
    "modular_layout",
    "p_estimates",
    "pattern_distance",
    "pattern_information",
    "prototype_capacity",
    "prototype_trial",
    "recall",
    "recall_fraction",
    "silent_counts",
    "silent_sweep",
    "simulate_point",
    "storage_scaling",
    "stream_for",
    "train_pattern",
    "weight_trajectories",
]
