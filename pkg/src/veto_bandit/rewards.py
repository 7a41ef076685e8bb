"""Pick and ban rewards, and their attachment to a match's six decisions.

Picks are rewarded by the outcome of the picked map (0/1 or round margin).
Bans are rewarded by the match outcome with an exponential decay over the
global ban ordinal. The decider is a forced residual and never rewarded.
"""

from __future__ import annotations

from enum import Enum

from .domain import (
    ActionKind,
    BAN_INDEX_BY_STEP,
    DecisionRecord,
    DomainError,
    GameResult,
    MatchRecord,
)


class RewardKind(Enum):
    ZERO_ONE = "zero-one"
    MARGIN_OF_ROUNDS = "mor"


def pick_reward_zero_one(game: GameResult, team: str) -> float:
    """1 if the picking team won its map, else 0."""
    if team not in (game.team_a, game.team_b):
        raise DomainError(f"team {team!r} did not play on {game.map.name}")
    return 1.0 if game.winner == team else 0.0


def pick_reward_mor(game: GameResult, team: str) -> float:
    """Round margin over total rounds, from the picking team's side."""
    if team not in (game.team_a, game.team_b):
        raise DomainError(f"team {team!r} did not play on {game.map.name}")
    total = game.total_rounds
    if total == 0:
        raise DomainError("margin-of-rounds reward undefined for zero total rounds")
    own = game.rounds_for(team)
    return (own - (total - own)) / total


def pick_reward(game: GameResult, team: str, kind: RewardKind) -> float:
    if kind is RewardKind.ZERO_ONE:
        return pick_reward_zero_one(game, team)
    return pick_reward_mor(game, team)


def ban_reward(match_won: bool, ban_index: int) -> float:
    """(+1 if the match was won else -1) * 2^(-n) for global ban ordinal n."""
    if ban_index not in (1, 2, 3, 4):
        raise DomainError(f"ban_index must be in 1..4, got {ban_index}")
    sign = 1.0 if match_won else -1.0
    return sign * 2.0 ** (-ban_index)


def assign_rewards(match: MatchRecord, kind: RewardKind) -> list[DecisionRecord]:
    """Emit the match's six decision records with rewards, in veto order.

    Contexts are left unset here; dataset construction fills them in with the
    statistics available at decision time. The decider yields no record.
    """
    records: list[DecisionRecord] = []
    for step, decision in enumerate(match.veto.decisions):
        team = decision.team
        opponent = match.veto.opponent_of(team)
        if decision.kind is ActionKind.PICK:
            game = match.game_on(decision.map)
            reward = pick_reward(game, team, kind)
            ban_index = None
        else:
            ban_index = BAN_INDEX_BY_STEP[step]
            reward = ban_reward(match.match_winner == team, ban_index)
        records.append(
            DecisionRecord(
                context=None,
                action=decision.map,
                kind=decision.kind,
                team=team,
                opponent=opponent,
                match_id=match.match_id,
                ban_index=ban_index,
                reward=reward,
            )
        )
    return records
