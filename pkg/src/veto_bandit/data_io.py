"""Match-log ingestion, filtering, splitting, and decision-dataset construction.

Logs are JSON lines, one match per line. Ingestion replays every veto through
the state machine so malformed lines are reported (with line numbers) rather
than silently accepted. Filtering applies the minimum-games rule as a fixed
point: removing a team can drop others below the threshold.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, replace
from datetime import datetime
from typing import IO, Iterable, Mapping, Optional, Sequence, Union

from .domain import (
    ActionKind,
    DecisionRecord,
    DomainError,
    GameResult,
    MapId,
    MatchRecord,
    VETO_SCHEDULE,
    apply_decision,
    new_veto,
)
from .features import TeamRecord, build_context, update_team_stats
from .rewards import RewardKind, assign_rewards

logger = logging.getLogger(__name__)

MIN_TEAM_GAMES = 25


class DatasetError(DomainError):
    """Dataset-level failures (bad ordering, empty inputs, ...)."""


@dataclass(frozen=True)
class ParseIssue:
    line_no: int
    message: str


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DomainError(message)


def _match_from_payload(payload: dict) -> MatchRecord:
    for key in ("match_id", "date", "team_a", "team_b", "veto", "games", "winner"):
        _require(key in payload, f"missing field {key!r}")
    team_a, team_b = str(payload["team_a"]), str(payload["team_b"])
    veto_entries = payload["veto"]
    _require(isinstance(veto_entries, list), "veto must be an array")
    _require(len(veto_entries) == len(VETO_SCHEDULE), f"veto must have exactly {len(VETO_SCHEDULE)} entries")
    state = new_veto(team_a, team_b)
    for entry in veto_entries:
        for key in ("team", "action", "map"):
            _require(key in entry, f"veto entry missing {key!r}")
        _require(entry["action"] in ("ban", "pick"), f"unknown action {entry['action']!r}")
        map_name = str(entry["map"])
        _require(map_name in MapId.__members__, f"map {map_name!r} is outside the supported pool")
        state = apply_decision(
            state, str(entry["team"]), ActionKind(entry["action"]), MapId[map_name]
        )
    games = []
    for game in payload["games"]:
        for key in ("map", "rounds_a", "rounds_b"):
            _require(key in game, f"game entry missing {key!r}")
        map_name = str(game["map"])
        _require(map_name in MapId.__members__, f"map {map_name!r} is outside the supported pool")
        rounds_a, rounds_b = int(game["rounds_a"]), int(game["rounds_b"])
        winner = team_a if rounds_a > rounds_b else team_b
        games.append(
            GameResult(
                map=MapId[map_name],
                team_a=team_a,
                team_b=team_b,
                rounds_a=rounds_a,
                rounds_b=rounds_b,
                winner=winner,
            )
        )
    return MatchRecord(
        match_id=str(payload["match_id"]),
        date=datetime.fromisoformat(str(payload["date"])),
        veto=state,
        games=tuple(games),
        match_winner=str(payload["winner"]),
    )


def parse_match_log(
    source: Union[IO[bytes], IO[str], Iterable[str]],
) -> tuple[list[MatchRecord], list[ParseIssue]]:
    """Parse JSON-lines matches; invalid lines are collected, never fatal."""
    matches: list[MatchRecord] = []
    issues: list[ParseIssue] = []
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            payload = json.loads(line)
            if not isinstance(payload, dict):
                raise DomainError("line is not a JSON object")
            matches.append(_match_from_payload(payload))
        except (json.JSONDecodeError, DomainError, KeyError, TypeError, ValueError) as exc:
            issues.append(ParseIssue(line_no=line_no, message=str(exc)))
    return matches, issues


def match_to_json_line(match: MatchRecord) -> str:
    payload = {
        "match_id": match.match_id,
        "date": match.date.isoformat(),
        "team_a": match.team_a,
        "team_b": match.team_b,
        "veto": [
            {"team": d.team, "action": d.kind.value, "map": d.map.name}
            for d in match.veto.decisions
        ],
        "games": [
            {"map": g.map.name, "rounds_a": g.rounds_a, "rounds_b": g.rounds_b}
            for g in match.games
        ],
        "winner": match.match_winner,
    }
    return json.dumps(payload, separators=(",", ":"))


def write_match_log(matches: Iterable[MatchRecord], stream: IO[str]) -> None:
    for match in matches:
        stream.write(match_to_json_line(match))
        stream.write("\n")


def matches_to_log_text(matches: Iterable[MatchRecord]) -> str:
    buffer = io.StringIO()
    write_match_log(matches, buffer)
    return buffer.getvalue()


# ---------------------------------------------------------------------------
# Filtering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterReport:
    input_matches: int
    retained_matches: int
    removed_matches: int
    input_teams: int
    retained_teams: int
    removed_teams: tuple[str, ...]
    retained_games: int
    iterations: int
    min_games: int = MIN_TEAM_GAMES

    def __post_init__(self) -> None:
        if self.input_matches != self.retained_matches + self.removed_matches:
            raise DatasetError("filter report counts do not reconcile")

    def to_json(self) -> str:
        return json.dumps(
            {
                "input_matches": self.input_matches,
                "retained_matches": self.retained_matches,
                "removed_matches": self.removed_matches,
                "input_teams": self.input_teams,
                "retained_teams": self.retained_teams,
                "removed_teams": list(self.removed_teams),
                "retained_games": self.retained_games,
                "iterations": self.iterations,
                "min_games": self.min_games,
            },
            indent=2,
            sort_keys=True,
        )


def filter_dataset(
    matches: Sequence[MatchRecord], min_games: int = MIN_TEAM_GAMES
) -> tuple[list[MatchRecord], FilterReport]:
    """Keep teams with >= min_games maps against retained teams, to a fixed point."""
    all_teams = {t for m in matches for t in (m.team_a, m.team_b)}
    retained = set(all_teams)
    iterations = 0
    while True:
        iterations += 1
        games_per_team: dict[str, int] = {t: 0 for t in retained}
        for match in matches:
            if match.team_a in retained and match.team_b in retained:
                games_per_team[match.team_a] += len(match.games)
                games_per_team[match.team_b] += len(match.games)
        dropped = {t for t in retained if games_per_team[t] < min_games}
        if not dropped:
            break
        retained -= dropped
    kept = [m for m in matches if m.team_a in retained and m.team_b in retained]
    if not kept:
        logger.warning("filtering removed every match (min_games=%d)", min_games)
    report = FilterReport(
        input_matches=len(matches),
        retained_matches=len(kept),
        removed_matches=len(matches) - len(kept),
        input_teams=len(all_teams),
        retained_teams=len(retained),
        removed_teams=tuple(sorted(all_teams - retained)),
        retained_games=sum(len(m.games) for m in kept),
        iterations=iterations,
        min_games=min_games,
    )
    return kept, report


# ---------------------------------------------------------------------------
# Splitting and dataset construction
# ---------------------------------------------------------------------------


def chronological_split(
    matches: Sequence[MatchRecord], test_fraction: float = 0.2
) -> tuple[list[MatchRecord], list[MatchRecord]]:
    """Sort by date (ties by match_id) and hold out the trailing fraction."""
    if len(matches) < 5:
        raise DatasetError(f"need at least 5 matches to split, got {len(matches)}")
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test fraction must be in (0, 1), got {test_fraction}")
    ordered = sorted(matches, key=lambda m: (m.date, m.match_id))
    n_test = math.ceil(test_fraction * len(ordered))
    return ordered[:-n_test], ordered[-n_test:]


def random_split(
    matches: Sequence[MatchRecord], test_fraction: float = 0.2, seed: int = 0
) -> tuple[list[MatchRecord], list[MatchRecord]]:
    """Random by-match split, kept behind a flag for comparison runs."""
    import numpy as np

    if len(matches) < 5:
        raise DatasetError(f"need at least 5 matches to split, got {len(matches)}")
    ordered = sorted(matches, key=lambda m: (m.date, m.match_id))
    n_test = math.ceil(test_fraction * len(ordered))
    rng = np.random.default_rng(seed)
    test_idx = set(rng.choice(len(ordered), size=n_test, replace=False).tolist())
    train = [m for i, m in enumerate(ordered) if i not in test_idx]
    test = [m for i, m in enumerate(ordered) if i in test_idx]
    return train, test


def build_decision_dataset(
    matches: Sequence[MatchRecord],
    reward_kind: RewardKind,
    initial_stats: Optional[Mapping[str, TeamRecord]] = None,
    update_stats: bool = True,
) -> list[DecisionRecord]:
    """One chronological pass: contexts from strictly earlier matches, then rewards.

    ``update_stats=False`` freezes the statistics at ``initial_stats`` for
    every decision (the alternative to chronological updating).
    """
    for earlier, later in zip(matches, matches[1:]):
        if later.date < earlier.date:
            raise DatasetError(
                f"matches not in chronological order: {later.match_id} predates {earlier.match_id}"
            )
    stats: dict[str, TeamRecord] = dict(initial_stats or {})
    dataset: list[DecisionRecord] = []
    for match in matches:
        contexts = []
        state = new_veto(match.team_a, match.team_b)
        for decision in match.veto.decisions:
            opponent = state.opponent_of(decision.team)
            contexts.append(
                build_context(
                    stats.get(decision.team, TeamRecord()),
                    stats.get(opponent, TeamRecord()),
                    state.available,
                )
            )
            state = apply_decision(state, decision.team, decision.kind, decision.map)
        for record, context in zip(assign_rewards(match, reward_kind), contexts):
            dataset.append(replace(record, context=context))
        if update_stats:
            for team in (match.team_a, match.team_b):
                stats[team] = update_team_stats(stats.get(team, TeamRecord()), match, team)
    return dataset


# ---------------------------------------------------------------------------
# Columnar export
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    tuple(f"c{i}" for i in range(23))
    + ("action", "kind", "ban_index", "reward", "propensity", "match_id", "team")
)


def decisions_to_csv(records: Sequence[DecisionRecord], stream: IO[str]) -> None:
    """Columnar export; floats via repr so values round-trip bit-exactly."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in records:
        if record.context is None:
            raise DatasetError(f"record for match {record.match_id} has no context")
        row = [repr(float(v)) for v in record.context.values]
        row += [
            record.action.name,
            record.kind.value,
            "" if record.ban_index is None else str(record.ban_index),
            "" if record.reward is None else repr(float(record.reward)),
            "" if record.behavior_propensity is None else repr(float(record.behavior_propensity)),
            record.match_id,
            record.team,
        ]
        writer.writerow(row)
