"""Contextual-bandit LLM routing with preference-learned priors and an online budget policy."""

__version__ = "0.1.0"

from .bandit import DegenerateEstimateError, PilotRouter, init_pilot
from .baselines import EpochGreedy, ExploreOnly, FixedArm, LinUCBRouter, RandomPolicy, linucb_init, make_policy
from .cost_policy import (
    CostPolicyConfig,
    InsufficientBudget,
    OnlineCostPolicy,
    eligibility_threshold,
    estimate_bounds,
)
from .data import (
    ArmId,
    Dataset,
    DatasetError,
    PreferenceRecord,
    RoutingRecord,
    load_preferences,
    load_routing_dataset,
    split_buckets,
)
from .oful import bound_value, run_oful, run_pi_oful
from .pretrain import ArmEmbeddings, PreferenceEmbedder, Projection, train_arm_embeddings, train_projection
from .replay import (
    ReplayReport,
    distribution_shift_replay,
    learning_size_curve,
    run_deployment,
    run_learning,
    sweep_budget,
    tune_hyperparams,
)
from .report import emit_report

__all__ = [
    "ArmEmbeddings",
    "ArmId",
    "CostPolicyConfig",
    "Dataset",
    "DatasetError",
    "DegenerateEstimateError",
    "EpochGreedy",
    "ExploreOnly",
    "FixedArm",
    "InsufficientBudget",
    "LinUCBRouter",
    "OnlineCostPolicy",
    "PilotRouter",
    "PreferenceEmbedder",
    "PreferenceRecord",
    "Projection",
    "RandomPolicy",
    "ReplayReport",
    "RoutingRecord",
    "bound_value",
    "distribution_shift_replay",
    "eligibility_threshold",
    "emit_report",
    "estimate_bounds",
    "init_pilot",
    "learning_size_curve",
    "linucb_init",
    "load_preferences",
    "load_routing_dataset",
    "make_policy",
    "run_deployment",
    "run_learning",
    "run_oful",
    "run_pi_oful",
    "split_buckets",
    "sweep_budget",
    "train_arm_embeddings",
    "train_projection",
    "tune_hyperparams",
]
