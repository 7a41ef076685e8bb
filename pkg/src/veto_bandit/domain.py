"""Core types and the veto state machine for best-of-three map drafts.

A draft walks a fixed six-decision schedule (ban, ban, pick, pick, ban, ban,
alternating between the two teams), after which exactly one map remains: the
decider, which is played only if the match is tied 1-1. All types here are
immutable values; state transitions return new states.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum, IntEnum
from typing import NamedTuple, Optional, TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .features import ContextVector


class MapId(IntEnum):
    """The seven-map pool. Index and name are a fixed bijection."""

    dust2 = 0
    inferno = 1
    mirage = 2
    nuke = 3
    overpass = 4
    train = 5
    vertigo = 6


MAP_POOL: tuple[MapId, ...] = tuple(MapId)
MAP_POOL_SIZE = len(MAP_POOL)  # k = 7
FULL_POOL: frozenset[MapId] = frozenset(MAP_POOL)


class ActionKind(Enum):
    """A team decision. The decider is a forced residual, never a decision."""

    PICK = "pick"
    BAN = "ban"


class DomainError(ValueError):
    """Base class for domain validation failures."""


class VetoError(DomainError):
    """Base class for veto state machine violations."""


class TurnOrderError(VetoError):
    """A decision was attempted by the wrong team or with the wrong kind."""


class UnavailableMapError(VetoError):
    """A decision targeted a map no longer in the pool."""


class IncompleteVetoError(VetoError):
    """An operation required a completed six-decision veto."""


class Decision(NamedTuple):
    team: str
    kind: ActionKind
    map: MapId


# step -> (team slot, kind); slot 0 is team A (first banner), slot 1 is team B.
VETO_SCHEDULE: tuple[tuple[int, ActionKind], ...] = (
    (0, ActionKind.BAN),
    (1, ActionKind.BAN),
    (0, ActionKind.PICK),
    (1, ActionKind.PICK),
    (0, ActionKind.BAN),
    (1, ActionKind.BAN),
)
N_DECISIONS = len(VETO_SCHEDULE)

# Global ban ordinal n in {1,2,3,4} by veto step (steps 2 and 3 are picks).
BAN_INDEX_BY_STEP = {0: 1, 1: 2, 4: 3, 5: 4}


@dataclass(frozen=True)
class VetoState:
    """The evolving veto: who has decided what, and whose turn it is."""

    team_a: str
    team_b: str
    available: frozenset[MapId]
    decisions: tuple[Decision, ...] = ()

    @property
    def step(self) -> int:
        return len(self.decisions)

    @property
    def complete(self) -> bool:
        return self.step == N_DECISIONS

    def team_for_slot(self, slot: int) -> str:
        return self.team_a if slot == 0 else self.team_b

    def expected_turn(self) -> Optional[tuple[str, ActionKind]]:
        """The (team, kind) the schedule demands next, or None when complete."""
        if self.complete:
            return None
        slot, kind = VETO_SCHEDULE[self.step]
        return self.team_for_slot(slot), kind

    def opponent_of(self, team: str) -> str:
        if team == self.team_a:
            return self.team_b
        if team == self.team_b:
            return self.team_a
        raise DomainError(f"team {team!r} is not part of this veto")

    def picks(self) -> tuple[Decision, ...]:
        return tuple(d for d in self.decisions if d.kind is ActionKind.PICK)

    def bans(self) -> tuple[Decision, ...]:
        return tuple(d for d in self.decisions if d.kind is ActionKind.BAN)


def new_veto(team_a: str, team_b: str) -> VetoState:
    """Start a veto with the full pool; ``team_a`` is the first banner."""
    if team_a == team_b:
        raise DomainError(f"teams must be distinct, got {team_a!r} twice")
    return VetoState(team_a=team_a, team_b=team_b, available=FULL_POOL)


def apply_decision(state: VetoState, team: str, kind: ActionKind, map_id: MapId) -> VetoState:
    """Apply one pick/ban, enforcing the schedule. Returns a new state."""
    expected = state.expected_turn()
    if expected is None:
        raise TurnOrderError("veto already complete after six decisions")
    exp_team, exp_kind = expected
    if team != exp_team or kind != exp_kind:
        raise TurnOrderError(
            f"step {state.step} expects {exp_kind.value} by {exp_team!r}, "
            f"got {kind.value} by {team!r}"
        )
    if map_id not in state.available:
        raise UnavailableMapError(f"map {map_id.name} is not available at step {state.step}")
    return replace(
        state,
        available=state.available - {map_id},
        decisions=state.decisions + (Decision(team, kind, map_id),),
    )


def decider(state: VetoState) -> MapId:
    """The single map left after all six decisions."""
    if not state.complete:
        raise IncompleteVetoError(f"veto at step {state.step}, decider needs step {N_DECISIONS}")
    (remaining,) = state.available
    return remaining


@dataclass(frozen=True)
class GameResult:
    """One played map. Rounds are oriented by the match's team order."""

    map: MapId
    team_a: str
    team_b: str
    rounds_a: int
    rounds_b: int
    winner: str

    def __post_init__(self) -> None:
        if self.rounds_a < 0 or self.rounds_b < 0:
            raise DomainError("round counts must be non-negative")
        if self.rounds_a == self.rounds_b:
            raise DomainError("a map cannot end in a round tie")
        if self.rounds_a + self.rounds_b < 16:
            raise DomainError("a map is first-to-16; fewer than 16 total rounds is impossible")
        rounds_winner = self.team_a if self.rounds_a > self.rounds_b else self.team_b
        if self.winner != rounds_winner:
            raise DomainError(
                f"winner {self.winner!r} does not match round score "
                f"{self.rounds_a}-{self.rounds_b}"
            )

    def rounds_for(self, team: str) -> int:
        if team == self.team_a:
            return self.rounds_a
        if team == self.team_b:
            return self.rounds_b
        raise DomainError(f"team {team!r} did not play this game")

    @property
    def total_rounds(self) -> int:
        return self.rounds_a + self.rounds_b


@dataclass(frozen=True)
class MatchRecord:
    """A completed best-of-three: the veto plus 2-3 game results in play order."""

    match_id: str
    date: datetime
    veto: VetoState
    games: tuple[GameResult, ...]
    match_winner: str

    def __post_init__(self) -> None:
        if not self.veto.complete:
            raise IncompleteVetoError(f"match {self.match_id}: veto has {self.veto.step} decisions")
        if len(self.games) not in (2, 3):
            raise DomainError(f"match {self.match_id}: expected 2 or 3 games, got {len(self.games)}")
        picks = self.veto.picks()
        expected_maps = [picks[0].map, picks[1].map]
        if len(self.games) == 3:
            expected_maps.append(decider(self.veto))
        played = [g.map for g in self.games]
        if played != expected_maps:
            raise DomainError(
                f"match {self.match_id}: played maps {[m.name for m in played]} do not follow "
                f"the veto (expected {[m.name for m in expected_maps]})"
            )
        teams = {self.veto.team_a, self.veto.team_b}
        for game in self.games:
            if {game.team_a, game.team_b} != teams:
                raise DomainError(f"match {self.match_id}: game teams differ from match teams")
        if self.match_winner not in teams:
            raise DomainError(f"match {self.match_id}: winner {self.match_winner!r} did not play")
        wins = sum(1 for g in self.games if g.winner == self.match_winner)
        if wins < 2:
            raise DomainError(f"match {self.match_id}: winner took {wins} of {len(self.games)} maps")
        if len(self.games) == 3 and self.games[0].winner == self.games[1].winner:
            raise DomainError(f"match {self.match_id}: a third map was played after a 2-0")

    @property
    def team_a(self) -> str:
        return self.veto.team_a

    @property
    def team_b(self) -> str:
        return self.veto.team_b

    def game_on(self, map_id: MapId) -> GameResult:
        for game in self.games:
            if game.map == map_id:
                return game
        raise DomainError(f"match {self.match_id}: no game was played on {map_id.name}")


@dataclass(frozen=True)
class DecisionRecord:
    """One logged decision: the unit of bandit training and evaluation.

    ``context`` may be None on freshly rewarded records; dataset construction
    fills it in. ``reward`` and ``behavior_propensity`` are likewise absent
    until assigned/estimated.
    """

    context: Optional["ContextVector"]
    action: MapId
    kind: ActionKind
    team: str
    opponent: str
    match_id: str
    ban_index: Optional[int] = None
    reward: Optional[float] = None
    behavior_propensity: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.kind is ActionKind.BAN) != (self.ban_index is not None):
            raise DomainError("ban_index must be present exactly for ban records")
        if self.ban_index is not None and self.ban_index not in (1, 2, 3, 4):
            raise DomainError(f"ban_index must be in 1..4, got {self.ban_index}")
        if self.reward is not None:
            if self.kind is ActionKind.BAN and not -0.5 <= self.reward <= 0.5:
                raise DomainError(f"ban reward {self.reward} outside [-1/2, 1/2]")
            if self.kind is ActionKind.PICK and not -1.0 <= self.reward <= 1.0:
                raise DomainError(f"pick reward {self.reward} outside [-1, 1]")
        if self.behavior_propensity is not None and not 0.0 < self.behavior_propensity <= 1.0:
            raise DomainError(f"behavior propensity {self.behavior_propensity} outside (0, 1]")
