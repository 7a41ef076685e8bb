"""Context construction: running team statistics and the block feature map.

The context is a 23-dimensional vector per decision: seven availability flags
followed by Laplace-smoothed match and per-map win rates for the deciding team
and then the opponent. The action-feature map copies the context into one
23-wide block per arm, which makes policy scores per-arm linear.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .domain import DomainError, MAP_POOL_SIZE, MapId, MatchRecord

CONTEXT_DIM = 23

# Context layout.
AVAILABILITY = slice(0, 7)
DECIDER_MATCH_WR = 7
DECIDER_MAP_WR = slice(8, 15)
OPPONENT_MATCH_WR = 15
OPPONENT_MAP_WR = slice(16, 23)

LAPLACE_WINS = 5
LAPLACE_MATCHES = 10


def smoothed_win_rate(wins: int, matches: int) -> float:
    """Laplace-smoothed win rate (wins + 5) / (matches + 10)."""
    if wins < 0 or matches < 0:
        raise DomainError(f"counts must be non-negative, got wins={wins} matches={matches}")
    if wins > matches:
        raise DomainError(f"wins ({wins}) cannot exceed matches ({matches})")
    return (wins + LAPLACE_WINS) / (matches + LAPLACE_MATCHES)


@dataclass(frozen=True)
class TeamRecord:
    """Running match and per-map win counts for one team."""

    match_wins: int = 0
    match_count: int = 0
    map_wins: tuple[int, ...] = (0,) * MAP_POOL_SIZE
    map_count: tuple[int, ...] = (0,) * MAP_POOL_SIZE

    def __post_init__(self) -> None:
        if len(self.map_wins) != MAP_POOL_SIZE or len(self.map_count) != MAP_POOL_SIZE:
            raise DomainError("per-map counts must cover the seven-map pool")
        if self.match_wins > self.match_count or self.match_wins < 0:
            raise DomainError("match wins must be within [0, match count]")
        for wins, count in zip(self.map_wins, self.map_count):
            if wins > count or wins < 0:
                raise DomainError("map wins must be within [0, map count]")

    def match_win_rate(self) -> float:
        return smoothed_win_rate(self.match_wins, self.match_count)

    def map_win_rate(self, map_id: MapId) -> float:
        return smoothed_win_rate(self.map_wins[map_id], self.map_count[map_id])

    def map_win_rates(self) -> np.ndarray:
        return np.array([self.map_win_rate(m) for m in MapId], dtype=np.float64)


def update_team_stats(record: TeamRecord, match: MatchRecord, team: str) -> TeamRecord:
    """Fold one completed match into a team's running counts."""
    if team not in (match.team_a, match.team_b):
        raise DomainError(f"team {team!r} did not play match {match.match_id}")
    map_wins = list(record.map_wins)
    map_count = list(record.map_count)
    for game in match.games:
        map_count[game.map] += 1
        if game.winner == team:
            map_wins[game.map] += 1
    return TeamRecord(
        match_wins=record.match_wins + (1 if match.match_winner == team else 0),
        match_count=record.match_count + 1,
        map_wins=tuple(map_wins),
        map_count=tuple(map_count),
    )


@dataclass(frozen=True)
class ContextVector:
    """The 23-dimensional decision context; immutable after construction."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (CONTEXT_DIM,):
            raise DomainError(f"context must have {CONTEXT_DIM} entries, got shape {values.shape}")
        flags = values[AVAILABILITY]
        if not np.all((flags == 0.0) | (flags == 1.0)):
            raise DomainError("availability entries must be exactly 0 or 1")
        if not flags.any():
            raise DomainError("context must have at least one available map")
        rates = values[MAP_POOL_SIZE:]
        if not np.all((rates > 0.0) & (rates < 1.0)):
            raise DomainError("smoothed win rates must lie strictly inside (0, 1)")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def availability(self) -> np.ndarray:
        return self.values[AVAILABILITY]

    def available_maps(self) -> frozenset[MapId]:
        return frozenset(MapId(i) for i in np.flatnonzero(self.availability))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ContextVector):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def __hash__(self) -> int:
        return hash(self.values.tobytes())


def build_context(
    decider: TeamRecord, opponent: TeamRecord, available: Iterable[MapId]
) -> ContextVector:
    """Assemble availability flags and both teams' smoothed win rates."""
    available = frozenset(available)
    if not available:
        raise DomainError("cannot build a context with no available maps")
    values = np.zeros(CONTEXT_DIM, dtype=np.float64)
    for map_id in available:
        values[MapId(map_id)] = 1.0
    values[DECIDER_MATCH_WR] = decider.match_win_rate()
    values[DECIDER_MAP_WR] = decider.map_win_rates()
    values[OPPONENT_MATCH_WR] = opponent.match_win_rate()
    values[OPPONENT_MAP_WR] = opponent.map_win_rates()
    return ContextVector(values)


def feature_map(
    context: ContextVector, action: MapId, blocks: int = MAP_POOL_SIZE, block_offset: int = 0
) -> np.ndarray:
    """phi(x, a): an all-zero vector with the context copied into action's block.

    ``blocks`` is 7 for single bandits and 14 for the episodic layout, where
    ``block_offset`` 0 addresses the pick half and 7 the ban half.
    """
    if blocks not in (MAP_POOL_SIZE, 2 * MAP_POOL_SIZE):
        raise DomainError(f"blocks must be 7 or 14, got {blocks}")
    if block_offset not in (0, MAP_POOL_SIZE):
        raise DomainError(f"block_offset must be 0 or 7, got {block_offset}")
    if block_offset + MAP_POOL_SIZE > blocks:
        raise DomainError(f"block_offset {block_offset} does not fit in {blocks} blocks")
    out = np.zeros(blocks * CONTEXT_DIM, dtype=np.float64)
    start = (block_offset + int(action)) * CONTEXT_DIM
    out[start : start + CONTEXT_DIM] = context.values
    return out


class FrozenContextBuilder:
    """Context factory over a frozen statistics snapshot.

    The 16 win-rate entries depend only on the (decider, opponent) pair, so
    they are computed once per pair and reused across availability patterns.
    """

    def __init__(self, stats: Mapping[str, TeamRecord]):
        self._stats = stats
        self._templates: dict[tuple[str, str], np.ndarray] = {}

    def build(self, team: str, opponent: str, available: Iterable[MapId]) -> ContextVector:
        key = (team, opponent)
        template = self._templates.get(key)
        if template is None:
            decider = self._stats.get(team, TeamRecord())
            opp = self._stats.get(opponent, TeamRecord())
            template = np.zeros(CONTEXT_DIM, dtype=np.float64)
            template[DECIDER_MATCH_WR] = decider.match_win_rate()
            template[DECIDER_MAP_WR] = decider.map_win_rates()
            template[OPPONENT_MATCH_WR] = opp.match_win_rate()
            template[OPPONENT_MAP_WR] = opp.map_win_rates()
            self._templates[key] = template
        values = template.copy()
        for map_id in available:
            values[MapId(map_id)] = 1.0
        return ContextVector(values)


def team_records_after(matches: Iterable[MatchRecord]) -> dict[str, TeamRecord]:
    """Accumulate per-team records over matches in the given (chronological) order."""
    stats: dict[str, TeamRecord] = {}
    for match in matches:
        for team in (match.team_a, match.team_b):
            stats[team] = update_team_stats(stats.get(team, TeamRecord()), match, team)
    return stats


def stats_lookup(stats: Mapping[str, TeamRecord], team: str) -> TeamRecord:
    """A team's record, falling back to the fresh all-0.5 smoothed baseline."""
    return stats.get(team, TeamRecord())
