"""Contextual-bandit training, off-policy evaluation, and live advice for map vetoes."""

from .domain import (
    ActionKind,
    DecisionRecord,
    GameResult,
    MapId,
    MatchRecord,
    VetoState,
    apply_decision,
    decider,
    new_veto,
)
from .features import ContextVector, TeamRecord, build_context, feature_map, smoothed_win_rate
from .policy import (
    ActionDistribution,
    BehaviorPolicy,
    PolicyParameters,
    action_probabilities,
    derived_ban_probabilities,
    fit_behavior_policy,
    log_policy_gradient,
    sample_action,
)
from .rewards import RewardKind, assign_rewards, ban_reward, pick_reward_mor, pick_reward_zero_one
from .training import BanditVariant, TrainedPolicy, TrainingConfig, grid_search, sgd_step, train
from .ope import evaluation_grid, dm_value, fit_reward_model, on_policy_value, sn_iw_value

__all__ = [
    "ActionDistribution",
    "ActionKind",
    "BanditVariant",
    "BehaviorPolicy",
    "ContextVector",
    "DecisionRecord",
    "GameResult",
    "MapId",
    "MatchRecord",
    "PolicyParameters",
    "RewardKind",
    "TeamRecord",
    "TrainedPolicy",
    "TrainingConfig",
    "VetoState",
    "action_probabilities",
    "apply_decision",
    "assign_rewards",
    "ban_reward",
    "build_context",
    "decider",
    "derived_ban_probabilities",
    "dm_value",
    "evaluation_grid",
    "feature_map",
    "fit_behavior_policy",
    "fit_reward_model",
    "grid_search",
    "log_policy_gradient",
    "new_veto",
    "on_policy_value",
    "pick_reward_mor",
    "pick_reward_zero_one",
    "sample_action",
    "sgd_step",
    "smoothed_win_rate",
    "sn_iw_value",
    "train",
]
