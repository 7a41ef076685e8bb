"""Synthetic match ecosystem with known latent strengths.

Teams carry a latent per-map strength; map outcomes are Bradley-Terry in the
strength difference and round margins shrink as the gap grows, so the margin
reward carries the same signal more smoothly. Behavior policies are win-rate
greedy softmaxes over the context's own-map win-rate entries (so the logging
policy lies inside the linear-softmax class and its propensities are exact),
optionally overridden by a permaban on a team's first ban.

Ground-truth policy values are Monte-Carlo: each rollout replaces exactly one
logged-style decision with the evaluated policy and plays everything else out
with the behavior policies, matching what the off-policy estimators estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from typing import Mapping, Optional

import numpy as np

from .domain import (
    ActionKind,
    BAN_INDEX_BY_STEP,
    DecisionRecord,
    DomainError,
    GameResult,
    MAP_POOL_SIZE,
    MapId,
    MatchRecord,
    VETO_SCHEDULE,
    VetoState,
    apply_decision,
    decider,
    new_veto,
)
from .features import (
    CONTEXT_DIM,
    ContextVector,
    DECIDER_MAP_WR,
    FrozenContextBuilder,
    TeamRecord,
    build_context,
    update_team_stats,
)
from .policy import (
    ActionDistribution,
    BehaviorPolicy,
    N_ARMS,
    ParamVariant,
    PolicyParameters,
    sample_action,
)
from .rewards import RewardKind, assign_rewards, ban_reward, pick_reward

REGULATION_WIN_ROUNDS = 16
LOG_START = datetime(2024, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class EcosystemConfig:
    n_teams: int
    seed: int
    strength_scale: float = 1.0
    pick_temperature: float = 0.15
    ban_temperature: float = 0.15
    permaban_fraction: float = 0.3
    round_noise: float = 0.5

    def __post_init__(self) -> None:
        if self.n_teams < 2:
            raise DomainError(f"an ecosystem needs at least two teams, got {self.n_teams}")
        if self.pick_temperature <= 0.0 or self.ban_temperature <= 0.0:
            raise DomainError("behavior temperatures must be positive")
        if not 0.0 <= self.permaban_fraction <= 1.0:
            raise DomainError("permaban fraction must lie in [0, 1]")


@dataclass(frozen=True)
class SyntheticEcosystem:
    config: EcosystemConfig
    teams: tuple[str, ...]
    strengths: np.ndarray  # (n_teams, 7)
    permabans: Mapping[str, MapId]  # team -> forced first ban

    def team_index(self, team: str) -> int:
        return self.teams.index(team)

    def strength(self, team: str, map_id: MapId) -> float:
        return float(self.strengths[self.team_index(team), map_id])


def generate_ecosystem(n_teams: int, seed: int, **overrides) -> SyntheticEcosystem:
    """Draw per-map strengths and assign permabans to a fraction of teams."""
    config = EcosystemConfig(n_teams=n_teams, seed=seed, **overrides)
    rng = np.random.default_rng(seed)
    strengths = rng.normal(0.0, config.strength_scale, size=(n_teams, MAP_POOL_SIZE))
    teams = tuple(f"team{i:03d}" for i in range(n_teams))
    n_permaban = round(config.permaban_fraction * n_teams)
    chosen = rng.choice(n_teams, size=n_permaban, replace=False) if n_permaban else []
    permabans = {teams[i]: MapId(int(np.argmin(strengths[i]))) for i in sorted(chosen)}
    strengths.setflags(write=False)
    return SyntheticEcosystem(config=config, teams=teams, strengths=strengths, permabans=permabans)


# ---------------------------------------------------------------------------
# Behavior policies
# ---------------------------------------------------------------------------


def _greedy_win_rate_theta(temperature: float, sign: float) -> np.ndarray:
    """Block weights scoring each arm by the decider's own-map win rate."""
    theta = np.zeros((N_ARMS, CONTEXT_DIM))
    start = DECIDER_MAP_WR.start
    for arm in range(N_ARMS):
        theta[arm, start + arm] = sign / temperature
    return theta.ravel()


def behavior_policy(eco: SyntheticEcosystem) -> BehaviorPolicy:
    """The win-rate-greedy behavior as explicit softmax parameters.

    Exact only for permaban-free ecosystems; permabans override a team's
    first ban with a point mass that no linear policy expresses.
    """
    return BehaviorPolicy(
        pick=PolicyParameters(
            _greedy_win_rate_theta(eco.config.pick_temperature, +1.0), ParamVariant.SPLIT_PICK
        ),
        ban=PolicyParameters(
            _greedy_win_rate_theta(eco.config.ban_temperature, -1.0), ParamVariant.SPLIT_BAN
        ),
    )


class SimulatorBehaviorPolicy:
    """Exact logging policy including permaban overrides, for OPE targets."""

    def __init__(self, eco: SyntheticEcosystem):
        self.eco = eco
        self._linear = behavior_policy(eco)

    def pick_distribution(self, context: ContextVector, **_) -> ActionDistribution:
        return self._linear.pick_distribution(context)

    def ban_distribution(
        self,
        context: ContextVector,
        team: Optional[str] = None,
        ban_ordinal: Optional[int] = None,
        **_,
    ) -> ActionDistribution:
        permaban = self.eco.permabans.get(team) if team is not None else None
        if permaban is not None and ban_ordinal == 1 and context.availability[permaban] > 0.0:
            probs = np.zeros(N_ARMS)
            probs[permaban] = 1.0
            return ActionDistribution(probs=probs, mask=context.availability)
        return self._linear.ban_distribution(context)

    def distribution(self, record: DecisionRecord) -> np.ndarray:
        if record.kind is ActionKind.PICK:
            return self.pick_distribution(record.context).probs
        ordinal = 1 if record.ban_index in (1, 2) else 2
        return self.ban_distribution(record.context, team=record.team, ban_ordinal=ordinal).probs


def _behavior_distribution(
    eco: SyntheticEcosystem,
    linear: BehaviorPolicy,
    context: ContextVector,
    team: str,
    kind: ActionKind,
    first_ban: bool,
) -> ActionDistribution:
    if kind is ActionKind.PICK:
        return linear.pick_distribution(context)
    permaban = eco.permabans.get(team)
    if permaban is not None and first_ban and context.availability[permaban] > 0.0:
        probs = np.zeros(N_ARMS)
        probs[permaban] = 1.0
        return ActionDistribution(probs=probs, mask=context.availability)
    return linear.ban_distribution(context)


# ---------------------------------------------------------------------------
# Match simulation
# ---------------------------------------------------------------------------


def _logistic(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _play_map(
    eco: SyntheticEcosystem,
    map_id: MapId,
    team_a: str,
    team_b: str,
    rng: np.random.Generator,
) -> GameResult:
    gap = eco.strength(team_a, map_id) - eco.strength(team_b, map_id)
    a_wins = rng.random() < _logistic(gap)
    winner, loser = (team_a, team_b) if a_wins else (team_b, team_a)
    loser_gap = eco.strength(loser, map_id) - eco.strength(winner, map_id)
    noise = rng.normal(0.0, eco.config.round_noise) if eco.config.round_noise > 0.0 else 0.0
    loser_rounds = int(rng.binomial(REGULATION_WIN_ROUNDS - 1, _logistic(loser_gap + noise)))
    rounds_a, rounds_b = (
        (REGULATION_WIN_ROUNDS, loser_rounds) if a_wins else (loser_rounds, REGULATION_WIN_ROUNDS)
    )
    return GameResult(
        map=map_id, team_a=team_a, team_b=team_b, rounds_a=rounds_a, rounds_b=rounds_b, winner=winner
    )


def _play_games(
    eco: SyntheticEcosystem, veto: VetoState, rng: np.random.Generator
) -> tuple[tuple[GameResult, ...], str]:
    team_a, team_b = veto.team_a, veto.team_b
    picks = veto.picks()
    games = [
        _play_map(eco, picks[0].map, team_a, team_b, rng),
        _play_map(eco, picks[1].map, team_a, team_b, rng),
    ]
    if games[0].winner != games[1].winner:
        games.append(_play_map(eco, decider(veto), team_a, team_b, rng))
    winner = games[-1].winner if len(games) == 3 else games[0].winner
    return tuple(games), winner


@dataclass(frozen=True)
class DraftedDecision:
    context: ContextVector
    propensity: float


def _run_veto(
    eco: SyntheticEcosystem,
    team_a: str,
    team_b: str,
    stats: Mapping[str, TeamRecord],
    rng: np.random.Generator,
    intervention_step: Optional[int] = None,
    intervention_policy=None,
    context_builder: Optional[FrozenContextBuilder] = None,
    linear: Optional[BehaviorPolicy] = None,
) -> tuple[VetoState, list[DraftedDecision]]:
    """Walk the six-decision schedule with behavior policies.

    At ``intervention_step`` the on-turn decision is sampled from
    ``intervention_policy`` instead (pick_distribution / ban_distribution
    interface). The recorded propensity is always the behavior policy's.
    """
    linear = linear or behavior_policy(eco)
    state = new_veto(team_a, team_b)
    drafted: list[DraftedDecision] = []
    seen_first_ban = {team_a: False, team_b: False}
    for step, (slot, kind) in enumerate(VETO_SCHEDULE):
        team = state.team_for_slot(slot)
        opponent = state.opponent_of(team)
        if context_builder is not None:
            context = context_builder.build(team, opponent, state.available)
        else:
            context = build_context(
                stats.get(team, TeamRecord()), stats.get(opponent, TeamRecord()), state.available
            )
        first_ban = kind is ActionKind.BAN and not seen_first_ban[team]
        behavior_dist = _behavior_distribution(eco, linear, context, team, kind, first_ban)
        if step == intervention_step:
            if kind is ActionKind.PICK:
                dist = intervention_policy.pick_distribution(context)
            else:
                ordinal = 2 if seen_first_ban[team] else 1
                dist = intervention_policy.ban_distribution(
                    context, team=team, ban_ordinal=ordinal
                )
        else:
            dist = behavior_dist
        if kind is ActionKind.BAN:
            seen_first_ban[team] = True
        action = sample_action(dist, rng)
        drafted.append(DraftedDecision(context=context, propensity=float(behavior_dist.probs[action])))
        state = apply_decision(state, team, kind, action)
    return state, drafted


def simulate_match(
    eco: SyntheticEcosystem,
    team_i: str,
    team_j: str,
    rng: np.random.Generator,
    stats: Optional[Mapping[str, TeamRecord]] = None,
    match_id: str = "sim",
    date: Optional[datetime] = None,
) -> MatchRecord:
    """One full match: behavior-driven veto, then games from the latent model."""
    if team_i == team_j:
        raise DomainError("a team cannot play itself")
    veto, _ = _run_veto(eco, team_i, team_j, stats or {}, rng)
    games, winner = _play_games(eco, veto, rng)
    return MatchRecord(
        match_id=match_id, date=date or LOG_START, veto=veto, games=games, match_winner=winner
    )


@dataclass(frozen=True)
class SimulatedLog:
    matches: tuple[MatchRecord, ...]
    records: tuple[DecisionRecord, ...]  # contexts + exact propensities attached
    stats: Mapping[str, TeamRecord]  # stats after the log (chronological mode) or the frozen snapshot


def _sample_pair(n_teams: int, rng: np.random.Generator) -> tuple[int, int]:
    i = int(rng.integers(n_teams))
    j = int(rng.integers(n_teams - 1))
    if j >= i:
        j += 1
    return i, j


def generate_log(
    eco: SyntheticEcosystem,
    n_matches: int,
    seed: int,
    reward_kind: RewardKind = RewardKind.ZERO_ONE,
    stats: Optional[Mapping[str, TeamRecord]] = None,
    update_stats: bool = True,
) -> SimulatedLog:
    """Generate a chronological match log plus its decision records.

    With ``update_stats`` (the default) team statistics evolve through the log
    as they would in live data; with a frozen ``stats`` snapshot the context
    distribution is stationary, which is what the Monte-Carlo oracle assumes.
    """
    rng = np.random.default_rng(seed)
    running: dict[str, TeamRecord] = dict(stats or {})
    builder = FrozenContextBuilder(running) if not update_stats else None
    linear = behavior_policy(eco)
    matches: list[MatchRecord] = []
    records: list[DecisionRecord] = []
    for n in range(n_matches):
        i, j = _sample_pair(eco.config.n_teams, rng)
        team_a, team_b = eco.teams[i], eco.teams[j]
        veto, drafted = _run_veto(
            eco, team_a, team_b, running, rng, context_builder=builder, linear=linear
        )
        games, winner = _play_games(eco, veto, rng)
        match = MatchRecord(
            match_id=f"m{n:06d}",
            date=LOG_START + timedelta(minutes=n),
            veto=veto,
            games=games,
            match_winner=winner,
        )
        matches.append(match)
        for record, draft in zip(assign_rewards(match, reward_kind), drafted):
            records.append(
                replace(record, context=draft.context, behavior_propensity=draft.propensity)
            )
        if update_stats:
            for team in (team_a, team_b):
                running[team] = update_team_stats(running.get(team, TeamRecord()), match, team)
    return SimulatedLog(matches=tuple(matches), records=tuple(records), stats=running)


def burn_in_stats(eco: SyntheticEcosystem, n_matches: int, seed: int) -> dict[str, TeamRecord]:
    """Accumulate team statistics over a warmup period of simulated matches."""
    log = generate_log(eco, n_matches, seed=seed, update_stats=True)
    return dict(log.stats)


# ---------------------------------------------------------------------------
# Ground truth
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruePolicyValue:
    value: float
    std_error: float
    n_rollouts: int


def true_policy_value(
    eco: SyntheticEcosystem,
    policy,
    kind: ActionKind,
    reward_kind: RewardKind,
    n_rollouts: int,
    seed: int,
    stats: Optional[Mapping[str, TeamRecord]] = None,
) -> TruePolicyValue:
    """Monte-Carlo expected reward of one policy-driven decision per match.

    Each rollout draws a random ordered pairing and a random side, replaces
    exactly one of that side's decisions of ``kind`` with the evaluated
    policy (for bans, the intervened ordinal is drawn uniformly), and plays
    everything else with the behavior policies. This mirrors the per-record
    counterfactual the off-policy estimators target.
    """
    if n_rollouts < 1:
        raise DomainError("need at least one rollout")
    rng = np.random.default_rng(seed)
    stats = stats or {}
    builder = FrozenContextBuilder(stats)
    linear = behavior_policy(eco)
    pick_steps = {0: 2, 1: 3}
    ban_steps = {0: (0, 4), 1: (1, 5)}
    rewards = np.empty(n_rollouts)
    for r in range(n_rollouts):
        i, j = _sample_pair(eco.config.n_teams, rng)
        team_a, team_b = eco.teams[i], eco.teams[j]
        slot = int(rng.integers(2))
        evaluated = team_a if slot == 0 else team_b
        if kind is ActionKind.PICK:
            step = pick_steps[slot]
        else:
            ordinal_index = int(rng.integers(2))
            step = ban_steps[slot][ordinal_index]
        veto, _ = _run_veto(
            eco,
            team_a,
            team_b,
            stats,
            rng,
            intervention_step=step,
            intervention_policy=policy,
            context_builder=builder,
            linear=linear,
        )
        games, winner = _play_games(eco, veto, rng)
        if kind is ActionKind.PICK:
            game = games[0] if slot == 0 else games[1]
            rewards[r] = pick_reward(game, evaluated, reward_kind)
        else:
            rewards[r] = ban_reward(winner == evaluated, BAN_INDEX_BY_STEP[step])
    value = float(rewards.mean())
    std_error = float(rewards.std(ddof=1) / math.sqrt(n_rollouts)) if n_rollouts > 1 else float("inf")
    return TruePolicyValue(value=value, std_error=std_error, n_rollouts=n_rollouts)
