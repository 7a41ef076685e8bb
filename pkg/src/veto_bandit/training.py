"""Policy-gradient training of the three bandit variants.

The split bandit keeps two independent parameter vectors, updating the pick
half online (one step per pick record) and the ban half once per match over
its four ban records. The combined bandit shares a single parameter vector,
pushing ban gradients through the derived ban policy. The episodic bandit
carries a double-width vector and applies one accumulated update per match
over all six records. Parameters start at zero, so the initial policy is
exactly uniform over available maps.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .domain import ActionKind, DecisionRecord, DomainError
from .features import ContextVector
from .policy import (
    ActionDistribution,
    BAN_BLOCK_OFFSET,
    N_ARMS,
    ParamVariant,
    PolicyParameters,
    action_probabilities,
    derived_ban_probabilities,
    log_ban_policy_gradient,
    log_policy_gradient,
)
from .rewards import RewardKind

MODEL_FORMAT_VERSION = 1

FEATURE_LAYOUT = {
    "context_dim": 23,
    "n_arms": N_ARMS,
    "context": "availability[0:7], decider_match_wr[7], decider_map_wr[8:15], "
    "opponent_match_wr[15], opponent_map_wr[16:23]",
    "feature_map": "block one-hot: context copied into the acting arm's 23-wide block",
}


class TrainingError(DomainError):
    """Training-time failures (bad config, unordered data, blown-up gradients)."""


class BanditVariant(Enum):
    SPLIT = "split"
    COMBO = "combo"
    EPISODIC = "episodic"

    @property
    def label(self) -> str:
        return {"split": "SplitBandit", "combo": "ComboBandit", "episodic": "EpisodicBandit"}[
            self.value
        ]


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float
    epochs: int
    reward_kind: RewardKind
    variant: BanditVariant
    seed: int = 0
    checkpoint_every: int = 100
    checkpoint_unit: str = "decisions"  # or "matches"
    masked: bool = True

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise TrainingError(f"learning rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise TrainingError(f"epochs must be >= 1, got {self.epochs}")
        if self.checkpoint_every < 1:
            raise TrainingError("checkpoint_every must be >= 1")
        if self.checkpoint_unit not in ("decisions", "matches"):
            raise TrainingError(f"unknown checkpoint unit {self.checkpoint_unit!r}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "reward_kind": self.reward_kind.value,
            "variant": self.variant.value,
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
            "checkpoint_unit": self.checkpoint_unit,
            "masked": self.masked,
        }

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        ).hexdigest()[:16]


@dataclass(frozen=True)
class Checkpoint:
    decision_index: int
    pick_value: float
    ban_value: float


@dataclass(frozen=True)
class TrainedPolicy:
    """A trained variant: its parameters, provenance, and checkpoint series."""

    variant: BanditVariant
    pick_params: PolicyParameters
    ban_params: Optional[PolicyParameters]
    config: TrainingConfig
    checkpoints: tuple[Checkpoint, ...] = ()
    update_counts: Mapping[str, int] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return self.variant.label

    def pick_distribution(self, context: ContextVector, masked: bool = True, **_) -> ActionDistribution:
        return action_probabilities(self.pick_params, context, masked=masked, block_offset=0)

    def ban_distribution(self, context: ContextVector, masked: bool = True, **_) -> ActionDistribution:
        if self.variant is BanditVariant.SPLIT:
            return action_probabilities(self.ban_params, context, masked=masked, block_offset=0)
        if self.variant is BanditVariant.EPISODIC:
            return action_probabilities(
                self.pick_params, context, masked=masked, block_offset=BAN_BLOCK_OFFSET
            )
        pick = action_probabilities(self.pick_params, context, masked=masked, block_offset=0)
        return derived_ban_probabilities(pick, context.available_maps())

    def distribution(self, record: DecisionRecord) -> np.ndarray:
        if record.kind is ActionKind.PICK:
            return self.pick_distribution(record.context).probs
        return self.ban_distribution(record.context).probs

    # Vectorized scoring used by the estimators; one row per record.
    def probability_matrix(self, contexts: np.ndarray, masks: np.ndarray, kind: ActionKind) -> np.ndarray:
        from .policy import _masked_softmax_matrix  # shared kernel

        def softmax_for(params: PolicyParameters, offset: int) -> np.ndarray:
            block = params.block_matrix()[offset : offset + N_ARMS]
            return _masked_softmax_matrix(contexts @ block.T, masks)

        if kind is ActionKind.PICK:
            return softmax_for(self.pick_params, 0)
        if self.variant is BanditVariant.SPLIT:
            return softmax_for(self.ban_params, 0)
        if self.variant is BanditVariant.EPISODIC:
            return softmax_for(self.pick_params, BAN_BLOCK_OFFSET)
        picks = softmax_for(self.pick_params, 0)
        complements = np.where(masks, 1.0 - picks, 0.0)
        return complements / complements.sum(axis=1, keepdims=True)

    def to_payload(self) -> dict:
        payload = {
            "format_version": MODEL_FORMAT_VERSION,
            "variant": self.variant.value,
            "d": int(self.pick_params.theta.size),
            "theta": self.pick_params.theta.tolist(),
            "feature_layout": FEATURE_LAYOUT,
            "config": self.config.to_dict(),
            "config_hash": self.config.hash(),
            "update_counts": dict(self.update_counts),
            "checkpoints": [
                [c.decision_index, c.pick_value, c.ban_value] for c in self.checkpoints
            ],
        }
        if self.ban_params is not None:
            payload["ban_theta"] = self.ban_params.theta.tolist()
        return payload

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_payload(), handle, sort_keys=True)
            handle.write("\n")

    @classmethod
    def from_payload(cls, payload: dict) -> "TrainedPolicy":
        if payload.get("format_version") != MODEL_FORMAT_VERSION:
            raise TrainingError(f"unsupported model format {payload.get('format_version')!r}")
        config_raw = payload["config"]
        config = TrainingConfig(
            learning_rate=config_raw["learning_rate"],
            epochs=config_raw["epochs"],
            reward_kind=RewardKind(config_raw["reward_kind"]),
            variant=BanditVariant(config_raw["variant"]),
            seed=config_raw.get("seed", 0),
            checkpoint_every=config_raw.get("checkpoint_every", 100),
            checkpoint_unit=config_raw.get("checkpoint_unit", "decisions"),
            masked=config_raw.get("masked", True),
        )
        variant = BanditVariant(payload["variant"])
        pick_variant = (
            ParamVariant.EPISODIC if variant is BanditVariant.EPISODIC else ParamVariant.COMBO
        )
        if variant is BanditVariant.SPLIT:
            pick_variant = ParamVariant.SPLIT_PICK
        pick_params = PolicyParameters(np.array(payload["theta"]), pick_variant)
        ban_params = None
        if "ban_theta" in payload:
            ban_params = PolicyParameters(np.array(payload["ban_theta"]), ParamVariant.SPLIT_BAN)
        checkpoints = tuple(
            Checkpoint(decision_index=int(c[0]), pick_value=float(c[1]), ban_value=float(c[2]))
            for c in payload.get("checkpoints", [])
        )
        return cls(
            variant=variant,
            pick_params=pick_params,
            ban_params=ban_params,
            config=config,
            checkpoints=checkpoints,
            update_counts=payload.get("update_counts", {}),
        )

    @classmethod
    def load(cls, path) -> "TrainedPolicy":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_payload(json.load(handle))


def checkpoints_to_csv(policy: TrainedPolicy, stream) -> None:
    stream.write("decision_index,pick_value,ban_value\n")
    for checkpoint in policy.checkpoints:
        stream.write(
            f"{checkpoint.decision_index},{checkpoint.pick_value!r},{checkpoint.ban_value!r}\n"
        )


# ---------------------------------------------------------------------------
# Core updates
# ---------------------------------------------------------------------------


def sgd_step(theta: np.ndarray, gradient: np.ndarray, reward: float, eta: float) -> np.ndarray:
    """theta + eta * R * grad(log pi), the vanilla policy-gradient step."""
    theta = np.asarray(theta, dtype=np.float64)
    gradient = np.asarray(gradient, dtype=np.float64)
    if theta.shape != gradient.shape:
        raise TrainingError(f"shape mismatch: theta {theta.shape} vs gradient {gradient.shape}")
    if not np.all(np.isfinite(gradient)) or not math.isfinite(reward) or not math.isfinite(eta):
        raise TrainingError(
            f"non-finite update: |grad|_max={np.abs(gradient).max()!r} reward={reward!r} eta={eta!r}"
        )
    return theta + eta * reward * gradient


def _group_by_match(dataset: Sequence[DecisionRecord]) -> list[list[DecisionRecord]]:
    """Group consecutive records by match and validate the per-match pattern."""
    groups: list[list[DecisionRecord]] = []
    seen: set[str] = set()
    current: list[DecisionRecord] = []
    for record in dataset:
        if record.reward is None:
            raise TrainingError(f"record in match {record.match_id} has no reward")
        if record.context is None:
            raise TrainingError(f"record in match {record.match_id} has no context")
        if current and record.match_id != current[0].match_id:
            groups.append(current)
            current = []
        if not current and record.match_id in seen:
            raise TrainingError(f"records of match {record.match_id} are not contiguous")
        seen.add(record.match_id)
        current.append(record)
    if current:
        groups.append(current)
    expected_kinds = [
        ActionKind.BAN,
        ActionKind.BAN,
        ActionKind.PICK,
        ActionKind.PICK,
        ActionKind.BAN,
        ActionKind.BAN,
    ]
    for group in groups:
        kinds = [r.kind for r in group]
        if kinds != expected_kinds:
            raise TrainingError(
                f"match {group[0].match_id}: records out of veto order "
                f"({[k.value for k in kinds]})"
            )
    return groups


CheckpointFn = Callable[[TrainedPolicy], tuple[float, float]]


def train(
    dataset: Sequence[DecisionRecord],
    config: TrainingConfig,
    checkpoint_fn: Optional[CheckpointFn] = None,
) -> TrainedPolicy:
    """Train one variant over the chronological dataset for ``config.epochs``."""
    groups = _group_by_match(dataset)
    masked = config.masked
    eta = config.learning_rate

    if config.variant is BanditVariant.SPLIT:
        pick_theta = PolicyParameters.zeros(ParamVariant.SPLIT_PICK).theta.copy()
        ban_theta = PolicyParameters.zeros(ParamVariant.SPLIT_BAN).theta.copy()
    elif config.variant is BanditVariant.COMBO:
        pick_theta = PolicyParameters.zeros(ParamVariant.COMBO).theta.copy()
        ban_theta = None
    else:
        pick_theta = PolicyParameters.zeros(ParamVariant.EPISODIC).theta.copy()
        ban_theta = None

    def snapshot(checkpoints: tuple[Checkpoint, ...], counts: dict) -> TrainedPolicy:
        if config.variant is BanditVariant.SPLIT:
            return TrainedPolicy(
                variant=config.variant,
                pick_params=PolicyParameters(pick_theta, ParamVariant.SPLIT_PICK),
                ban_params=PolicyParameters(ban_theta, ParamVariant.SPLIT_BAN),
                config=config,
                checkpoints=checkpoints,
                update_counts=counts,
            )
        variant_tag = (
            ParamVariant.EPISODIC if config.variant is BanditVariant.EPISODIC else ParamVariant.COMBO
        )
        return TrainedPolicy(
            variant=config.variant,
            pick_params=PolicyParameters(pick_theta, variant_tag),
            ban_params=None,
            config=config,
            checkpoints=checkpoints,
            update_counts=counts,
        )

    checkpoints: list[Checkpoint] = []
    counts = {"pick_updates": 0, "ban_updates": 0, "records_seen": 0, "matches_seen": 0}
    decision_index = 0

    def maybe_checkpoint(after_match: bool) -> None:
        if checkpoint_fn is None:
            return
        if config.checkpoint_unit == "decisions" and not after_match:
            if decision_index % config.checkpoint_every == 0:
                pick_value, ban_value = checkpoint_fn(snapshot(tuple(checkpoints), dict(counts)))
                checkpoints.append(Checkpoint(decision_index, pick_value, ban_value))
        elif config.checkpoint_unit == "matches" and after_match:
            if counts["matches_seen"] % config.checkpoint_every == 0:
                pick_value, ban_value = checkpoint_fn(snapshot(tuple(checkpoints), dict(counts)))
                checkpoints.append(Checkpoint(decision_index, pick_value, ban_value))

    for _ in range(config.epochs):
        for group in groups:
            pending = np.zeros_like(pick_theta) if config.variant is not BanditVariant.SPLIT else None
            pending_ban = np.zeros_like(ban_theta) if config.variant is BanditVariant.SPLIT else None
            for record in group:
                context, action, reward = record.context, record.action, record.reward
                if config.variant is BanditVariant.SPLIT:
                    if record.kind is ActionKind.PICK:
                        params = PolicyParameters(pick_theta, ParamVariant.SPLIT_PICK)
                        grad = log_policy_gradient(params, context, action, masked=masked)
                        pick_theta = sgd_step(pick_theta, grad, reward, eta)
                        counts["pick_updates"] += 1
                    else:
                        params = PolicyParameters(ban_theta, ParamVariant.SPLIT_BAN)
                        grad = log_policy_gradient(params, context, action, masked=masked)
                        pending_ban = pending_ban + eta * reward * grad
                elif config.variant is BanditVariant.COMBO:
                    params = PolicyParameters(pick_theta, ParamVariant.COMBO)
                    if record.kind is ActionKind.PICK:
                        grad = log_policy_gradient(params, context, action, masked=masked)
                        pick_theta = sgd_step(pick_theta, grad, reward, eta)
                        counts["pick_updates"] += 1
                    else:
                        grad = log_ban_policy_gradient(params, context, action, masked=masked)
                        pending = pending + eta * reward * grad
                else:  # EPISODIC: accumulate everything, apply once per match
                    params = PolicyParameters(pick_theta, ParamVariant.EPISODIC)
                    offset = 0 if record.kind is ActionKind.PICK else BAN_BLOCK_OFFSET
                    grad = log_policy_gradient(
                        params, context, action, masked=masked, block_offset=offset
                    )
                    pending = pending + eta * reward * grad
                counts["records_seen"] += 1
                decision_index += 1
                maybe_checkpoint(after_match=False)
            # Episode boundary: flush accumulated ban/episodic updates.
            if config.variant is BanditVariant.SPLIT:
                if not np.all(np.isfinite(pending_ban)):
                    raise TrainingError("non-finite accumulated ban update")
                ban_theta = ban_theta + pending_ban
                counts["ban_updates"] += 1
            else:
                if not np.all(np.isfinite(pending)):
                    raise TrainingError("non-finite accumulated episodic update")
                pick_theta = pick_theta + pending
                counts["ban_updates"] += 1
            counts["matches_seen"] += 1
            maybe_checkpoint(after_match=True)

    return snapshot(tuple(checkpoints), counts)


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------

DEFAULT_GRID: Mapping[str, Sequence] = {
    "learning_rate": (0.001, 0.01, 0.1, 0.5),
    "epochs": (1, 2, 3),
}

MIN_VALIDATION_DECISIONS = 50


def grid_search(
    train_set: Sequence[DecisionRecord],
    validation_fraction: float,
    grid: Mapping[str, Sequence],
    base_config: TrainingConfig,
) -> tuple[TrainingConfig, TrainedPolicy]:
    """Pick the grid point with the best SN-IW pick value on a held-out slice.

    The validation slice is the chronological tail of ``train_set`` (whole
    matches). Ties break deterministically toward the smaller learning rate,
    then fewer epochs.
    """
    from .ope import sn_iw_value

    if not grid or any(len(v) == 0 for v in grid.values()):
        raise TrainingError("grid must be non-empty")
    unknown = set(grid) - {"learning_rate", "epochs"}
    if unknown:
        raise TrainingError(f"unsupported grid dimensions: {sorted(unknown)}")

    groups = _group_by_match(train_set)
    n_validation_matches = math.ceil(validation_fraction * len(groups))
    if n_validation_matches < 1:
        raise TrainingError("validation fraction leaves no validation matches")
    fit_groups = groups[:-n_validation_matches]
    validation = [r for g in groups[-n_validation_matches:] for r in g]
    validation_picks = [r for r in validation if r.kind is ActionKind.PICK]
    if len(validation) < MIN_VALIDATION_DECISIONS:
        raise TrainingError(
            f"validation slice has {len(validation)} decisions; "
            f"need >= {MIN_VALIDATION_DECISIONS} for a stable estimate"
        )
    if any(r.behavior_propensity is None for r in validation_picks):
        raise TrainingError("validation records need behavior propensities")
    fit_records = [r for g in fit_groups for r in g]

    keys = sorted(grid)
    results = []
    for combo in product(*(grid[k] for k in keys)):
        overrides = dict(zip(keys, combo))
        candidate = TrainingConfig(
            learning_rate=overrides.get("learning_rate", base_config.learning_rate),
            epochs=overrides.get("epochs", base_config.epochs),
            reward_kind=base_config.reward_kind,
            variant=base_config.variant,
            seed=base_config.seed,
            checkpoint_every=base_config.checkpoint_every,
            checkpoint_unit=base_config.checkpoint_unit,
            masked=base_config.masked,
        )
        policy = train(fit_records, candidate)
        score = sn_iw_value(policy, validation_picks).value
        results.append((score, candidate, policy))
    results.sort(key=lambda item: (-item[0], item[1].learning_rate, item[1].epochs))
    _, best_config, best_policy = results[0]
    return best_config, best_policy
