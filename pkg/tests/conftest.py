"""Shared fixtures: hand-built matches and small simulated worlds."""

from __future__ import annotations

from datetime import datetime, timezone

import numpy as np
import pytest

from veto_bandit.domain import (
    ActionKind,
    GameResult,
    MapId,
    MatchRecord,
    apply_decision,
    new_veto,
)
from veto_bandit.features import ContextVector, TeamRecord, build_context

# The standard veto used across tests:
# T1 bans nuke, T2 bans dust2, T1 picks mirage, T2 picks inferno,
# T1 bans overpass, T2 bans train -> decider vertigo.
STANDARD_VETO = (
    ("T1", ActionKind.BAN, MapId.nuke),
    ("T2", ActionKind.BAN, MapId.dust2),
    ("T1", ActionKind.PICK, MapId.mirage),
    ("T2", ActionKind.PICK, MapId.inferno),
    ("T1", ActionKind.BAN, MapId.overpass),
    ("T2", ActionKind.BAN, MapId.train),
)


def run_standard_veto(team_a: str = "T1", team_b: str = "T2"):
    state = new_veto(team_a, team_b)
    for team, kind, map_id in STANDARD_VETO:
        mapped = team_a if team == "T1" else team_b
        state = apply_decision(state, mapped, kind, map_id)
    return state


def make_game(map_id: MapId, winner: str, rounds=(16, 14), team_a="T1", team_b="T2") -> GameResult:
    win_rounds, lose_rounds = max(rounds), min(rounds)
    if winner == team_a:
        rounds_a, rounds_b = win_rounds, lose_rounds
    else:
        rounds_a, rounds_b = lose_rounds, win_rounds
    return GameResult(
        map=map_id, team_a=team_a, team_b=team_b, rounds_a=rounds_a, rounds_b=rounds_b, winner=winner
    )


def make_match(
    pick_a_winner: str = "T1",
    pick_b_winner: str = "T1",
    decider_winner: str = "T1",
    match_id: str = "m1",
    date: datetime | None = None,
    rounds=(16, 14),
) -> MatchRecord:
    """A standard-veto match; the decider game appears only on a 1-1 split."""
    games = [
        make_game(MapId.mirage, pick_a_winner, rounds),
        make_game(MapId.inferno, pick_b_winner, rounds),
    ]
    if pick_a_winner != pick_b_winner:
        games.append(make_game(MapId.vertigo, decider_winner, rounds))
        winner = decider_winner
    else:
        winner = pick_a_winner
    return MatchRecord(
        match_id=match_id,
        date=date or datetime(2024, 3, 1, tzinfo=timezone.utc),
        veto=run_standard_veto(),
        games=tuple(games),
        match_winner=winner,
    )


def random_context(rng: np.random.Generator, min_available: int = 1) -> ContextVector:
    values = np.zeros(23)
    n_available = int(rng.integers(min_available, 8))
    available = rng.choice(7, size=n_available, replace=False)
    values[available] = 1.0
    values[7:] = rng.uniform(0.05, 0.95, size=16)
    return ContextVector(values)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240301)


@pytest.fixture
def fresh_context() -> ContextVector:
    return build_context(TeamRecord(), TeamRecord(), list(MapId))


@pytest.fixture
def standard_match() -> MatchRecord:
    return make_match()
