"""Softmax linear policies over the seven-map arm set.

Scores are per-arm dot products of a weight block with the context (the block
feature map keeps everything else zero), turned into probabilities with an
overflow-safe softmax. Availability masking restricts the softmax to legal
maps. The ban policy of the combined bandit is derived from the pick policy:
pi_B(a) = (1 - pi_P(a)) / sum_available (1 - pi_P).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .domain import ActionKind, DecisionRecord, DomainError, MAP_POOL_SIZE, MapId
from .features import CONTEXT_DIM, ContextVector

logger = logging.getLogger(__name__)

N_ARMS = MAP_POOL_SIZE
SINGLE_WIDTH = N_ARMS * CONTEXT_DIM  # 161
EPISODIC_WIDTH = 2 * SINGLE_WIDTH  # 322
BAN_BLOCK_OFFSET = N_ARMS  # episodic layout: pick blocks 0..6, ban blocks 7..13

DEFAULT_PROPENSITY_FLOOR = 0.01


class PolicyError(DomainError):
    """Invalid policy inputs (degenerate masks, shape mismatches, ...)."""


class ParamVariant(Enum):
    SPLIT_PICK = "split-pick"
    SPLIT_BAN = "split-ban"
    COMBO = "combo"
    EPISODIC = "episodic"

    @property
    def width(self) -> int:
        return EPISODIC_WIDTH if self is ParamVariant.EPISODIC else SINGLE_WIDTH


@dataclass(frozen=True)
class PolicyParameters:
    """A weight vector theta over feature blocks, tagged with its variant."""

    theta: np.ndarray
    variant: ParamVariant

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.shape != (self.variant.width,):
            raise PolicyError(
                f"{self.variant.value} parameters need width {self.variant.width}, "
                f"got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise PolicyError("policy parameters must be finite")
        theta = theta.copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, variant: ParamVariant) -> "PolicyParameters":
        return cls(np.zeros(variant.width), variant)

    @property
    def blocks(self) -> int:
        return self.theta.size // CONTEXT_DIM

    def block_matrix(self) -> np.ndarray:
        return self.theta.reshape(self.blocks, CONTEXT_DIM)


@dataclass(frozen=True)
class ActionDistribution:
    """Probabilities over the seven arms plus the availability mask used."""

    probs: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=np.float64)
        if probs.shape != (N_ARMS,) or mask.shape != (N_ARMS,):
            raise PolicyError("distribution and mask must cover the seven arms")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise PolicyError(f"probabilities sum to {probs.sum()!r}, not 1")
        if np.any(probs[mask == 0.0] != 0.0):
            raise PolicyError("masked-out arms must have exactly zero probability")
        if np.any(probs < 0.0):
            raise PolicyError("probabilities must be non-negative")
        probs = probs.copy()
        probs.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "mask", mask)


def _masked_softmax(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax restricted to mask == 1, exact zeros elsewhere."""
    active = mask > 0.0
    if not active.any():
        raise PolicyError("all arms are masked out")
    shifted = scores[active] - scores[active].max()
    exp = np.exp(shifted)
    probs = np.zeros_like(scores)
    probs[active] = exp / exp.sum()
    return probs


def arm_scores(params: PolicyParameters, context: ContextVector, block_offset: int = 0) -> np.ndarray:
    """theta . phi(x, a) for every arm, via the block structure."""
    if block_offset not in (0, BAN_BLOCK_OFFSET):
        raise PolicyError(f"block_offset must be 0 or {BAN_BLOCK_OFFSET}, got {block_offset}")
    if block_offset + N_ARMS > params.blocks:
        raise PolicyError(
            f"block_offset {block_offset} does not fit {params.variant.value} parameters"
        )
    return params.block_matrix()[block_offset : block_offset + N_ARMS] @ context.values


def action_probabilities(
    params: PolicyParameters,
    context: ContextVector,
    masked: bool = True,
    block_offset: int = 0,
) -> ActionDistribution:
    """Softmax of the per-arm scores, optionally restricted to available maps."""
    scores = arm_scores(params, context, block_offset)
    mask = context.availability if masked else np.ones(N_ARMS)
    return ActionDistribution(probs=_masked_softmax(scores, mask), mask=mask)


def log_policy_gradient(
    params: PolicyParameters,
    context: ContextVector,
    action: MapId,
    masked: bool = True,
    block_offset: int = 0,
) -> np.ndarray:
    """grad_theta log pi(a|x) = phi(x, a) - sum_i pi(i|x) phi(x, i)."""
    dist = action_probabilities(params, context, masked=masked, block_offset=block_offset)
    if masked and dist.mask[action] == 0.0:
        raise PolicyError(f"action {action.name} is not available under the mask")
    coeffs = -dist.probs.copy()
    coeffs[action] += 1.0
    return _block_gradient(params.blocks, block_offset, coeffs, context.values)


def _block_gradient(blocks: int, block_offset: int, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Expand per-arm coefficients into the flat block-structured gradient."""
    grad = np.zeros((blocks, CONTEXT_DIM))
    grad[block_offset : block_offset + N_ARMS] = np.outer(coeffs, x)
    return grad.ravel()


def derived_ban_probabilities(
    pick_dist: ActionDistribution, available: Iterable[MapId]
) -> ActionDistribution:
    """Ban policy derived from a pick policy: normalize (1 - pi_P) over available maps."""
    available = frozenset(available)
    if len(available) < 2:
        raise PolicyError("the derived ban policy needs at least two available maps")
    mask = np.zeros(N_ARMS)
    for map_id in available:
        mask[MapId(map_id)] = 1.0
    complements = np.where(mask > 0.0, 1.0 - pick_dist.probs, 0.0)
    denom = complements.sum()
    if denom <= 0.0:
        raise PolicyError("derived ban policy has zero normalizer")
    return ActionDistribution(probs=complements / denom, mask=mask)


def log_ban_policy_gradient(
    params: PolicyParameters,
    context: ContextVector,
    action: MapId,
    masked: bool = True,
    block_offset: int = 0,
) -> np.ndarray:
    """Exact gradient of log pi_B(a|x) for the ban policy derived from the picks.

    With pi_P a softmax over support S (the mask, or all arms when unmasked)
    and A the available maps, log pi_B(a) = log(1 - pi_P(a)) - log D with
    D = sum_A (1 - pi_P). Chain rule through the softmax gives per-arm
    coefficients on the block gradient; when S == A the D term vanishes.
    """
    dist = action_probabilities(params, context, masked=masked, block_offset=block_offset)
    avail = context.availability
    if avail[action] == 0.0:
        raise PolicyError(f"cannot ban unavailable map {action.name}")
    if avail.sum() < 2:
        raise PolicyError("the derived ban policy needs at least two available maps")
    probs = dist.probs
    p_a = probs[action]
    if 1.0 - p_a <= 0.0:
        raise PolicyError(f"derived ban probability of {action.name} is zero; log-gradient undefined")
    avail_prob_mass = float(probs[avail > 0.0].sum())
    denom = avail.sum() - avail_prob_mass
    # d pi_P(i) has block coefficients pi_i * (e_i - pi); assemble the two terms.
    coeffs = -(p_a / (1.0 - p_a)) * (-probs)
    coeffs[action] += -(p_a / (1.0 - p_a))
    coeffs += (probs * avail - avail_prob_mass * probs) / denom
    return _block_gradient(params.blocks, block_offset, coeffs, context.values)


def sample_action(dist: ActionDistribution, rng: np.random.Generator) -> MapId:
    """Inverse-CDF sample; deterministic given the generator state."""
    cumulative = np.cumsum(dist.probs)
    draw = rng.random()
    index = int(np.searchsorted(cumulative, draw, side="right"))
    if index >= N_ARMS:  # guard against cumulative < 1 by rounding
        index = int(np.flatnonzero(dist.probs > 0.0)[-1])
    return MapId(index)


# ---------------------------------------------------------------------------
# Behavior-policy estimation (propensities for importance weighting)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BehaviorFitConfig:
    learning_rate: float = 2.0
    max_iters: int = 500
    grad_tol: float = 5e-4

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise PolicyError("behavior fit learning rate must be positive")
        if self.max_iters < 1:
            raise PolicyError("behavior fit needs at least one iteration")


@dataclass(frozen=True)
class BehaviorPolicy:
    """Behavior-cloned pick and ban policies, fit separately."""

    pick: PolicyParameters
    ban: PolicyParameters

    def pick_distribution(self, context: ContextVector, masked: bool = True, **_) -> ActionDistribution:
        return action_probabilities(self.pick, context, masked=masked)

    def ban_distribution(self, context: ContextVector, masked: bool = True, **_) -> ActionDistribution:
        return action_probabilities(self.ban, context, masked=masked)

    def distribution(self, record: DecisionRecord) -> np.ndarray:
        if record.kind is ActionKind.PICK:
            return self.pick_distribution(record.context).probs
        return self.ban_distribution(record.context).probs


def _records_to_arrays(records: Sequence[DecisionRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    contexts = np.stack([r.context.values for r in records])
    masks = contexts[:, :N_ARMS] > 0.0
    actions = np.array([int(r.action) for r in records])
    return contexts, masks, actions


def _masked_softmax_matrix(scores: np.ndarray, masks: np.ndarray) -> np.ndarray:
    scores = np.where(masks, scores, -np.inf)
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _fit_masked_softmax(
    contexts: np.ndarray, masks: np.ndarray, actions: np.ndarray, config: BehaviorFitConfig
) -> np.ndarray:
    """Maximum-likelihood fit by gradient ascent.

    Steps use the Barzilai-Borwein length (a gradient-only curvature estimate
    that accelerates ill-conditioned convex problems) guarded by an Armijo
    backtracking check, so every accepted step increases the log-likelihood.
    """
    n = contexts.shape[0]
    rows = np.arange(n)
    onehot = np.zeros((n, N_ARMS))
    onehot[rows, actions] = 1.0

    def objective(theta_mat: np.ndarray) -> tuple[float, np.ndarray]:
        scores = np.where(masks, contexts @ theta_mat.T, -np.inf)
        shifted = scores - scores.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        denom = exp.sum(axis=1, keepdims=True)
        loglik = float((shifted[rows, actions] - np.log(denom[:, 0])).mean())
        probs = exp / denom
        grad = (onehot - probs).T @ contexts / n
        return loglik, grad

    theta = np.zeros((N_ARMS, CONTEXT_DIM))
    loglik, grad = objective(theta)
    prev_theta: Optional[np.ndarray] = None
    prev_grad: Optional[np.ndarray] = None
    for _ in range(config.max_iters):
        grad_norm_sq = float((grad**2).sum())
        if np.sqrt(grad_norm_sq) < config.grad_tol:
            return theta.ravel()
        step = config.learning_rate
        if prev_theta is not None:
            delta_theta = theta - prev_theta
            delta_grad = grad - prev_grad
            curvature = float((delta_theta * delta_grad).sum())
            if curvature < 0.0:  # ascent: gradient shrinks along the step
                step = float((delta_theta**2).sum() / -curvature)
        accepted = False
        while step > 1e-12:
            candidate = theta + step * grad
            cand_loglik, cand_grad = objective(candidate)
            if cand_loglik >= loglik + 1e-4 * step * grad_norm_sq:
                prev_theta, prev_grad = theta, grad
                theta, loglik, grad = candidate, cand_loglik, cand_grad
                accepted = True
                break
            step /= 2.0
        if not accepted:
            return theta.ravel()
    logger.warning(
        "behavior fit did not converge after %d iterations (|grad| = %.2e); using best iterate",
        config.max_iters,
        float(np.abs(grad).max()),
    )
    return theta.ravel()


def fit_behavior_policy(
    decisions: Sequence[DecisionRecord], config: Optional[BehaviorFitConfig] = None
) -> BehaviorPolicy:
    """Behavior-clone the logging policy: separate masked-softmax MLE fits for picks and bans."""
    config = config or BehaviorFitConfig()
    picks = [r for r in decisions if r.kind is ActionKind.PICK]
    bans = [r for r in decisions if r.kind is ActionKind.BAN]
    if not picks or not bans:
        raise PolicyError("behavior fitting needs at least one pick and one ban record")
    thetas = {}
    for variant, subset in (
        (ParamVariant.SPLIT_PICK, picks),
        (ParamVariant.SPLIT_BAN, bans),
    ):
        contexts, masks, actions = _records_to_arrays(subset)
        thetas[variant] = PolicyParameters(
            _fit_masked_softmax(contexts, masks, actions, config), variant
        )
    return BehaviorPolicy(pick=thetas[ParamVariant.SPLIT_PICK], ban=thetas[ParamVariant.SPLIT_BAN])


def attach_propensities(
    decisions: Sequence[DecisionRecord],
    behavior: BehaviorPolicy,
    floor: float = DEFAULT_PROPENSITY_FLOOR,
) -> list[DecisionRecord]:
    """Attach fitted propensities, floored away from zero for weight stability."""
    out = []
    for record in decisions:
        probs = behavior.distribution(record)
        propensity = max(float(probs[record.action]), floor)
        out.append(replace(record, behavior_propensity=min(propensity, 1.0)))
    return out
