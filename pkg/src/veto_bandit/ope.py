"""Off-policy evaluation: on-policy mean, SN-IW, and the direct method.

The self-normalized importance-weighted estimator reweights logged rewards by
pi(a|x) / mu(a|x) and normalizes by the weight sum, so its output is always a
convex combination of observed rewards. The direct method fits one
importance-weighted ridge regression per arm and averages model predictions
under the target policy. The evaluation grid reproduces the four-setting,
two-estimator table layout with uniform and logging baselines.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import ActionKind, DecisionRecord, DomainError
from .features import CONTEXT_DIM
from .policy import N_ARMS
from .rewards import RewardKind
from .training import BanditVariant, TrainedPolicy

logger = logging.getLogger(__name__)

DEFAULT_RIDGE_LAMBDA = 1.0


class EstimatorError(DomainError):
    """Estimator preconditions violated (no support, missing propensities, ...)."""


class ValueMethod(Enum):
    ON_POLICY = "on-policy"
    SNIW = "sn-iw"
    DM = "dm"


@dataclass(frozen=True)
class EvaluationSetting:
    kind: ActionKind
    reward_kind: RewardKind

    @property
    def label(self) -> str:
        kind = "Picks" if self.kind is ActionKind.PICK else "Bans"
        reward = "0/1" if self.reward_kind is RewardKind.ZERO_ONE else "MoR"
        return f"{kind} ({reward})"


SETTINGS: tuple[EvaluationSetting, ...] = (
    EvaluationSetting(ActionKind.PICK, RewardKind.ZERO_ONE),
    EvaluationSetting(ActionKind.PICK, RewardKind.MARGIN_OF_ROUNDS),
    EvaluationSetting(ActionKind.BAN, RewardKind.ZERO_ONE),
    EvaluationSetting(ActionKind.BAN, RewardKind.MARGIN_OF_ROUNDS),
)


@dataclass(frozen=True)
class ValueEstimate:
    method: ValueMethod
    value: float
    n: int
    setting: Optional[EvaluationSetting] = None
    effective_sample_size: Optional[float] = None


class UniformPolicy:
    """Uniform over available maps; the zero-parameter baseline."""

    label = "Uniform policy"

    def distribution(self, record: DecisionRecord) -> np.ndarray:
        mask = record.context.availability
        return mask / mask.sum()

    def probability_matrix(
        self, contexts: np.ndarray, masks: np.ndarray, kind: ActionKind
    ) -> np.ndarray:
        weights = masks.astype(np.float64)
        return weights / weights.sum(axis=1, keepdims=True)

    def _uniform(self, context) -> "ActionDistribution":
        from .policy import ActionDistribution

        mask = context.availability
        return ActionDistribution(probs=mask / mask.sum(), mask=mask)

    def pick_distribution(self, context, **_):
        return self._uniform(context)

    def ban_distribution(self, context, **_):
        return self._uniform(context)


def _record_arrays(records: Sequence[DecisionRecord]):
    contexts = np.stack([r.context.values for r in records])
    masks = contexts[:, :N_ARMS] > 0.0
    actions = np.array([int(r.action) for r in records])
    rewards = np.array([r.reward for r in records], dtype=np.float64)
    return contexts, masks, actions, rewards


def _propensities(records: Sequence[DecisionRecord]) -> np.ndarray:
    values = []
    for record in records:
        if record.behavior_propensity is None or record.behavior_propensity <= 0.0:
            raise EstimatorError(
                f"record in match {record.match_id} lacks a positive behavior propensity"
            )
        values.append(record.behavior_propensity)
    return np.array(values, dtype=np.float64)


def _policy_matrix(policy, records: Sequence[DecisionRecord], contexts, masks) -> np.ndarray:
    """pi(a|x) for every record/arm; vectorized when the policy supports it."""
    kinds = {r.kind for r in records}
    if len(kinds) == 1 and hasattr(policy, "probability_matrix"):
        return policy.probability_matrix(contexts, masks, next(iter(kinds)))
    return np.stack([policy.distribution(r) for r in records])


def on_policy_value(
    decisions: Sequence[DecisionRecord], setting: Optional[EvaluationSetting] = None
) -> ValueEstimate:
    """The plain mean of logged rewards (the logging policy's value)."""
    if not decisions:
        raise EstimatorError("cannot average an empty set of decisions")
    if any(r.reward is None for r in decisions):
        raise EstimatorError("decisions must carry rewards")
    rewards = np.array([r.reward for r in decisions], dtype=np.float64)
    return ValueEstimate(
        method=ValueMethod.ON_POLICY, value=float(rewards.mean()), n=len(decisions), setting=setting
    )


def sn_iw_value(
    policy,
    decisions: Sequence[DecisionRecord],
    setting: Optional[EvaluationSetting] = None,
    weight_cap: Optional[float] = None,
) -> ValueEstimate:
    """Self-normalized importance weighting: sum(w r) / sum(w).

    ``weight_cap`` optionally clips weights for diagnostics; the default is
    the unmodified estimator.
    """
    if not decisions:
        raise EstimatorError("cannot evaluate on an empty set of decisions")
    contexts, masks, actions, rewards = _record_arrays(decisions)
    mu = _propensities(decisions)
    pi = _policy_matrix(policy, decisions, contexts, masks)
    weights = pi[np.arange(len(decisions)), actions] / mu
    if weight_cap is not None:
        weights = np.minimum(weights, weight_cap)
    weight_sum = float(weights.sum())
    if weight_sum <= 0.0:
        raise EstimatorError("target policy puts no weight on any logged action")
    value = float((weights * rewards).sum() / weight_sum)
    ess = float(weight_sum**2 / (weights**2).sum())
    return ValueEstimate(
        method=ValueMethod.SNIW,
        value=value,
        n=len(decisions),
        setting=setting,
        effective_sample_size=ess,
    )


# ---------------------------------------------------------------------------
# Direct method
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RewardModel:
    """Per-arm ridge regressions over the context, intercept unpenalized."""

    coefficients: np.ndarray  # (7, 23)
    intercepts: np.ndarray  # (7,)
    ridge_lambda: float
    fallback_arms: frozenset[int]

    def predict(self, context_values: np.ndarray, arm: int) -> float:
        return float(self.intercepts[arm] + context_values @ self.coefficients[arm])

    def predict_matrix(self, contexts: np.ndarray) -> np.ndarray:
        """Predicted reward for every (record, arm) pair."""
        return contexts @ self.coefficients.T + self.intercepts


def fit_reward_model(
    decisions: Sequence[DecisionRecord],
    target_policy,
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
) -> RewardModel:
    """Importance-weighted ridge per arm, weighting records toward the target.

    For arm a the fit uses the records where a was logged, with sample weights
    pi(a|x) / mu(a|x). Arms with no logged records fall back to predicting the
    global mean reward, with a warning.
    """
    if not decisions:
        raise EstimatorError("cannot fit a reward model on no decisions")
    if ridge_lambda < 0.0:
        raise EstimatorError(f"ridge penalty must be non-negative, got {ridge_lambda}")
    contexts, masks, actions, rewards = _record_arrays(decisions)
    mu = _propensities(decisions)
    pi = _policy_matrix(target_policy, decisions, contexts, masks)
    global_mean = float(rewards.mean())
    coefficients = np.zeros((N_ARMS, CONTEXT_DIM))
    intercepts = np.zeros(N_ARMS)
    fallback: set[int] = set()
    for arm in range(N_ARMS):
        rows = actions == arm
        if not rows.any():
            fallback.add(arm)
            intercepts[arm] = global_mean
            logger.warning(
                "no logged records for arm %d; falling back to the global mean reward", arm
            )
            continue
        X = contexts[rows]
        y = rewards[rows]
        w = pi[rows, arm] / mu[rows]
        design = np.hstack([np.ones((X.shape[0], 1)), X])
        if ridge_lambda == 0.0:
            # The acting arm's availability flag is identically 1, so the
            # unpenalized design is rank-deficient; take the minimum-norm fit.
            root = np.sqrt(w)
            beta, *_ = np.linalg.lstsq(design * root[:, None], y * root, rcond=None)
        else:
            weighted = design * w[:, None]
            normal = design.T @ weighted
            penalty = np.eye(CONTEXT_DIM + 1) * ridge_lambda
            penalty[0, 0] = 0.0  # intercept unpenalized
            beta = np.linalg.solve(normal + penalty, weighted.T @ y)
        intercepts[arm] = beta[0]
        coefficients[arm] = beta[1:]
    return RewardModel(
        coefficients=coefficients,
        intercepts=intercepts,
        ridge_lambda=ridge_lambda,
        fallback_arms=frozenset(fallback),
    )


def dm_value(
    policy,
    decisions: Sequence[DecisionRecord],
    reward_model,
    setting: Optional[EvaluationSetting] = None,
) -> ValueEstimate:
    """Direct method: average the model's reward predictions under the policy."""
    if not decisions:
        raise EstimatorError("cannot evaluate on an empty set of decisions")
    contexts, masks, _, _ = _record_arrays(decisions)
    pi = _policy_matrix(policy, decisions, contexts, masks)
    if hasattr(reward_model, "predict_matrix"):
        predictions = reward_model.predict_matrix(contexts)
        value = float((pi * predictions).sum(axis=1).mean())
    else:
        total = 0.0
        for row, record in zip(pi, decisions):
            total += sum(
                row[arm] * reward_model.predict(record.context.values, arm)
                for arm in range(N_ARMS)
                if row[arm] != 0.0
            )
        value = total / len(decisions)
    return ValueEstimate(method=ValueMethod.DM, value=value, n=len(decisions), setting=setting)


def make_sniw_checkpoint_fn(test_records: Sequence[DecisionRecord]):
    """A fast (pick value, ban value) evaluator for training checkpoints.

    Arrays are precomputed once; each call scores the snapshot's pick and ban
    distributions over the test set with the self-normalized estimator.
    """
    picks = [r for r in test_records if r.kind is ActionKind.PICK]
    bans = [r for r in test_records if r.kind is ActionKind.BAN]
    if not picks or not bans:
        raise EstimatorError("checkpoint evaluation needs both pick and ban test records")
    prepared = {}
    for kind, subset in ((ActionKind.PICK, picks), (ActionKind.BAN, bans)):
        contexts, masks, actions, rewards = _record_arrays(subset)
        prepared[kind] = (contexts, masks, actions, rewards, _propensities(subset))

    def evaluate(policy: TrainedPolicy) -> tuple[float, float]:
        values = {}
        for kind, (contexts, masks, actions, rewards, mu) in prepared.items():
            pi = policy.probability_matrix(contexts, masks, kind)
            weights = pi[np.arange(len(actions)), actions] / mu
            values[kind] = float((weights * rewards).sum() / weights.sum())
        return values[ActionKind.PICK], values[ActionKind.BAN]

    return evaluate


# ---------------------------------------------------------------------------
# The evaluation grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridCell:
    sn_iw: ValueEstimate
    dm: ValueEstimate


@dataclass(frozen=True)
class GridRow:
    label: str
    cells: Mapping[EvaluationSetting, GridCell]


@dataclass(frozen=True)
class EvaluationGrid:
    rows: tuple[GridRow, ...]
    settings: tuple[EvaluationSetting, ...] = SETTINGS

    def row(self, label: str) -> GridRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def to_text(self) -> str:
        width = max(len(r.label) for r in self.rows) + 2
        col_width = 16
        header = " " * width + "".join(s.label.ljust(col_width) for s in self.settings)
        lines = [header]
        for row in self.rows:
            cells = []
            for setting in self.settings:
                cell = row.cells[setting]
                cells.append(f"{cell.sn_iw.value:.3f}/{cell.dm.value:.3f}".ljust(col_width))
            lines.append(row.label.ljust(width) + "".join(cells))
        return "\n".join(lines) + "\n"

    def to_csv(self, stream) -> None:
        stream.write("policy,setting,estimator,value,effective_sample_size,n\n")
        for row in self.rows:
            for setting in self.settings:
                cell = row.cells[setting]
                for estimate in (cell.sn_iw, cell.dm):
                    ess = "" if estimate.effective_sample_size is None else repr(
                        estimate.effective_sample_size
                    )
                    stream.write(
                        f"{row.label},{setting.label},{estimate.method.value},"
                        f"{estimate.value!r},{ess},{estimate.n}\n"
                    )

    def to_csv_text(self) -> str:
        buffer = io.StringIO()
        self.to_csv(buffer)
        return buffer.getvalue()


def _records_for(
    test_sets: Mapping[RewardKind, Sequence[DecisionRecord]], setting: EvaluationSetting
) -> list[DecisionRecord]:
    records = [r for r in test_sets[setting.reward_kind] if r.kind is setting.kind]
    if not records:
        raise EstimatorError(f"no test records for {setting.label}")
    return records


def evaluation_grid(
    models: Sequence[TrainedPolicy],
    test_sets: Mapping[RewardKind, Sequence[DecisionRecord]],
    ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
) -> EvaluationGrid:
    """The four-setting, two-estimator table over baselines and trained models.

    ``test_sets`` maps each reward kind to the same decisions rewarded under
    that kind; behavior propensities must already be attached (fitted from
    the training split only). Each model row uses the instance trained with
    the column's reward kind.
    """
    by_key: dict[tuple[BanditVariant, RewardKind], TrainedPolicy] = {}
    for model in models:
        by_key[(model.variant, model.config.reward_kind)] = model
    variants = []
    for model in models:
        if model.variant not in variants:
            variants.append(model.variant)

    rows: list[GridRow] = []
    uniform = UniformPolicy()
    uniform_cells = {}
    logging_cells = {}
    for setting in SETTINGS:
        records = _records_for(test_sets, setting)
        model_fit = fit_reward_model(records, uniform, ridge_lambda)
        uniform_cells[setting] = GridCell(
            sn_iw=sn_iw_value(uniform, records, setting),
            dm=dm_value(uniform, records, model_fit, setting),
        )
        logged = on_policy_value(records, setting)
        logging_cells[setting] = GridCell(sn_iw=logged, dm=logged)
    rows.append(GridRow(label="Uniform policy", cells=uniform_cells))
    rows.append(GridRow(label="Logging policy", cells=logging_cells))

    for variant in variants:
        cells = {}
        for setting in SETTINGS:
            key = (variant, setting.reward_kind)
            if key not in by_key:
                raise EstimatorError(
                    f"missing {variant.label} trained with {setting.reward_kind.value} rewards"
                )
            model = by_key[key]
            records = _records_for(test_sets, setting)
            reward_model = fit_reward_model(records, model, ridge_lambda)
            cells[setting] = GridCell(
                sn_iw=sn_iw_value(model, records, setting),
                dm=dm_value(model, records, reward_model, setting),
            )
        rows.append(GridRow(label=variant.label, cells=cells))
    return EvaluationGrid(rows=tuple(rows))
