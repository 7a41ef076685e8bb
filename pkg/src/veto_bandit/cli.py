"""Command-line entry point: simulate, ingest, train, evaluate, recommend, serve.

Every run resolves its configuration from flags, an optional flat JSON config
file (--config or $VETO_BANDIT_CONFIG; flags win), and writes the resolved
configuration plus input hashes next to its outputs so artifacts are fully
reproducible. All failures exit nonzero with one machine-parsable error line.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data_io import (
    build_decision_dataset,
    chronological_split,
    decisions_to_csv,
    filter_dataset,
    matches_to_log_text,
    parse_match_log,
    random_split,
)
from .domain import ActionKind, DomainError, MapId, MatchRecord, apply_decision, decider, new_veto
from .features import TeamRecord, build_context, team_records_after
from .ope import evaluation_grid, make_sniw_checkpoint_fn
from .policy import fit_behavior_policy, attach_propensities
from .rewards import RewardKind
from .simulator import generate_ecosystem, generate_log
from .service import DEFAULT_PORT, create_app
from .training import (
    BanditVariant,
    DEFAULT_GRID,
    TrainedPolicy,
    TrainingConfig,
    checkpoints_to_csv,
    grid_search,
    train,
)

CONFIG_ENV_VAR = "VETO_BANDIT_CONFIG"


class CliError(Exception):
    pass


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_run_config(output_dir: Path, command: str, args: argparse.Namespace, inputs: dict) -> None:
    resolved = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in ("func", "config") and not key.startswith("_")
    }
    payload = {"command": command, "config": resolved, "inputs": inputs}
    (output_dir / "config.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load_matches(path: Path) -> list[MatchRecord]:
    with open(path, "r", encoding="utf-8") as handle:
        matches, issues = parse_match_log(handle)
    for issue in issues[:10]:
        print(f"warning: line {issue.line_no}: {issue.message}", file=sys.stderr)
    if len(issues) > 10:
        print(f"warning: {len(issues) - 10} further malformed lines", file=sys.stderr)
    if not matches:
        raise CliError(f"no valid matches in {path}")
    return matches


def _prepare_datasets(args) -> dict:
    """Parse, filter, split, build both reward-kind datasets, attach propensities."""
    matches = _load_matches(Path(args.input))
    kept, report = filter_dataset(matches)
    if not kept:
        raise CliError("filtering removed every match")
    splitter = random_split if getattr(args, "split", "chronological") == "random" else None
    if splitter is not None:
        train_matches, test_matches = splitter(kept, args.test_fraction, seed=args.seed)
    else:
        train_matches, test_matches = chronological_split(kept, args.test_fraction)
    ordered = sorted(kept, key=lambda m: (m.date, m.match_id))
    test_ids = {m.match_id for m in test_matches}
    datasets = {}
    behavior = None
    for kind in (RewardKind.ZERO_ONE, RewardKind.MARGIN_OF_ROUNDS):
        records = build_decision_dataset(ordered, kind)
        train_records = [r for r in records if r.match_id not in test_ids]
        test_records = [r for r in records if r.match_id in test_ids]
        if behavior is None:
            behavior = fit_behavior_policy(train_records)
        datasets[kind] = {
            "train": attach_propensities(train_records, behavior),
            "test": attach_propensities(test_records, behavior),
        }
    return {
        "matches": kept,
        "report": report,
        "train_matches": train_matches,
        "test_matches": test_matches,
        "datasets": datasets,
        "behavior": behavior,
    }


def _training_config(args, variant: BanditVariant, reward: RewardKind) -> TrainingConfig:
    return TrainingConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        reward_kind=reward,
        variant=variant,
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
        masked=args.mask == "on",
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    eco = generate_ecosystem(
        args.teams,
        args.seed,
        permaban_fraction=args.permaban_fraction,
        strength_scale=args.strength_scale,
    )
    log = generate_log(eco, args.matches, seed=args.seed + 1, update_stats=True)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(matches_to_log_text(log.matches), encoding="utf-8")
    print(f"wrote {len(log.matches)} matches to {output}")
    return 0


def cmd_ingest(args) -> int:
    output_dir = Path(args.output)
    output_dir.mkdir(parents=True, exist_ok=True)
    input_path = Path(args.input)
    matches = _load_matches(input_path)
    kept, report = filter_dataset(matches)
    reward = RewardKind(args.reward)
    ordered = sorted(kept, key=lambda m: (m.date, m.match_id))
    records = build_decision_dataset(ordered, reward)
    with open(output_dir / "decisions.csv", "w", encoding="utf-8") as handle:
        decisions_to_csv(records, handle)
    (output_dir / "filter_report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    _write_run_config(output_dir, "ingest", args, {str(input_path): _sha256(input_path)})
    print(
        f"ingested {report.retained_matches}/{report.input_matches} matches "
        f"({report.retained_teams} teams, {len(records)} decisions)"
    )
    return 0


def cmd_train(args) -> int:
    output_dir = Path(args.output)
    output_dir.mkdir(parents=True, exist_ok=True)
    input_path = Path(args.input)
    prepared = _prepare_datasets(args)
    reward = RewardKind(args.reward)
    variant = BanditVariant(args.variant)
    dataset = prepared["datasets"][reward]
    config = _training_config(args, variant, reward)
    if args.grid:
        config, _ = grid_search(dataset["train"], 0.2, DEFAULT_GRID, config)
        print(f"grid search selected lr={config.learning_rate} epochs={config.epochs}")
    checkpoint_fn = make_sniw_checkpoint_fn(dataset["test"]) if dataset["test"] else None
    policy = train(dataset["train"], config, checkpoint_fn=checkpoint_fn)
    policy.save(output_dir / "model.json")
    with open(output_dir / "checkpoints.csv", "w", encoding="utf-8") as handle:
        checkpoints_to_csv(policy, handle)
    _write_run_config(output_dir, "train", args, {str(input_path): _sha256(input_path)})
    print(
        f"trained {policy.label} on {len(dataset['train'])} decisions "
        f"({len(policy.checkpoints)} checkpoints) -> {output_dir / 'model.json'}"
    )
    return 0


def cmd_evaluate(args) -> int:
    output_dir = Path(args.output)
    output_dir.mkdir(parents=True, exist_ok=True)
    input_path = Path(args.input)
    prepared = _prepare_datasets(args)
    models = []
    for variant in BanditVariant:
        for reward in (RewardKind.ZERO_ONE, RewardKind.MARGIN_OF_ROUNDS):
            config = _training_config(args, variant, reward)
            train_records = prepared["datasets"][reward]["train"]
            if args.grid:
                config, policy = grid_search(train_records, 0.2, DEFAULT_GRID, config)
                policy = train(train_records, config)
            else:
                policy = train(train_records, config)
            models.append(policy)
    test_sets = {kind: prepared["datasets"][kind]["test"] for kind in prepared["datasets"]}
    grid = evaluation_grid(models, test_sets, ridge_lambda=args.ridge_lambda)
    with open(output_dir / "grid.csv", "w", encoding="utf-8") as handle:
        grid.to_csv(handle)
    (output_dir / "grid.txt").write_text(grid.to_text(), encoding="utf-8")
    (output_dir / "filter_report.json").write_text(
        prepared["report"].to_json() + "\n", encoding="utf-8"
    )
    _write_run_config(output_dir, "evaluate", args, {str(input_path): _sha256(input_path)})
    print(grid.to_text())
    return 0


def _parse_draft(args) -> tuple:
    state = new_veto(args.team_a, args.team_b)
    if args.decisions:
        for token in args.decisions.split(","):
            parts = token.strip().split(":")
            if len(parts) != 3:
                raise CliError(f"bad decision token {token!r}; expected team:action:map")
            team, action, map_name = parts
            if map_name not in MapId.__members__:
                raise CliError(f"unknown map {map_name!r}")
            state = apply_decision(state, team, ActionKind(action), MapId[map_name])
    return state


def cmd_recommend(args) -> int:
    policy = TrainedPolicy.load(args.model)
    matches = _load_matches(Path(args.input))
    stats = team_records_after(sorted(matches, key=lambda m: (m.date, m.match_id)))
    state = _parse_draft(args)
    if state.complete:
        print(f"decider: {decider(state).name} (forced; no decision remains)")
        return 0
    team, kind = state.expected_turn()
    opponent = state.opponent_of(team)
    context = build_context(
        stats.get(team, TeamRecord()), stats.get(opponent, TeamRecord()), state.available
    )
    dist = (
        policy.pick_distribution(context)
        if kind is ActionKind.PICK
        else policy.ban_distribution(context)
    )
    print(f"step {state.step}: {kind.value} by {team} ({policy.label})")
    order = sorted(
        (MapId(i) for i in np.flatnonzero(dist.probs > 0.0)),
        key=lambda m: (-dist.probs[m], m.name),
    )
    for map_id in order:
        print(f"  {map_id.name:<10} {dist.probs[map_id]:.3f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    models = {}
    for path in args.models.split(","):
        path = Path(path.strip())
        models[path.stem] = TrainedPolicy.load(path)
    matches = _load_matches(Path(args.input))
    stats = team_records_after(sorted(matches, key=lambda m: (m.date, m.match_id)))
    app = create_app(models, stats)
    print(f"serving {len(models)} model(s) on port {args.port}")
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------


def _add_common_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--reward", choices=[k.value for k in RewardKind], default="zero-one")
    parser.add_argument("--lr", type=float, default=0.01)
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mask", choices=["on", "off"], default="on")
    parser.add_argument("--test-fraction", type=float, default=0.2, dest="test_fraction")
    parser.add_argument("--checkpoint-every", type=int, default=100, dest="checkpoint_every")
    parser.add_argument("--split", choices=["chronological", "random"], default="chronological")
    parser.add_argument("--grid", action="store_true", help="grid-search lr and epochs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veto-bandit", allow_abbrev=False)
    parser.add_argument("--config", default=None, help="flat JSON config file (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", allow_abbrev=False)
    p_sim.add_argument("--teams", type=int, default=20)
    p_sim.add_argument("--matches", type=int, default=1000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--permaban-fraction", type=float, default=0.3, dest="permaban_fraction")
    p_sim.add_argument("--strength-scale", type=float, default=1.0, dest="strength_scale")
    p_sim.add_argument("--output", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_ingest = sub.add_parser("ingest", allow_abbrev=False)
    p_ingest.add_argument("--input", required=True)
    p_ingest.add_argument("--output", required=True)
    p_ingest.add_argument("--reward", choices=[k.value for k in RewardKind], default="zero-one")
    p_ingest.set_defaults(func=cmd_ingest)

    p_train = sub.add_parser("train", allow_abbrev=False)
    p_train.add_argument("--input", required=True)
    p_train.add_argument("--output", required=True)
    p_train.add_argument("--variant", choices=[v.value for v in BanditVariant], default="combo")
    _add_common_training_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", allow_abbrev=False)
    p_eval.add_argument("--input", required=True)
    p_eval.add_argument("--output", required=True)
    p_eval.add_argument("--lambda", type=float, default=1.0, dest="ridge_lambda")
    _add_common_training_flags(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_rec = sub.add_parser("recommend", allow_abbrev=False)
    p_rec.add_argument("--model", required=True)
    p_rec.add_argument("--input", required=True, help="match log supplying team statistics")
    p_rec.add_argument("--team-a", required=True, dest="team_a")
    p_rec.add_argument("--team-b", required=True, dest="team_b")
    p_rec.add_argument("--decisions", default="", help="comma list of team:action:map")
    p_rec.set_defaults(func=cmd_recommend)

    p_serve = sub.add_parser("serve", allow_abbrev=False)
    p_serve.add_argument("--models", required=True, help="comma-separated model files")
    p_serve.add_argument("--input", required=True, help="match log supplying team statistics")
    p_serve.add_argument("--port", type=int, default=DEFAULT_PORT)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def _apply_config_file(args: argparse.Namespace, argv: Sequence[str]) -> None:
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return
    try:
        overrides = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config file {path}: {exc}")
    if not isinstance(overrides, dict):
        raise CliError(f"config file {path} must hold a flat JSON object")
    explicit = {token.split("=")[0].lstrip("-").replace("-", "_") for token in argv if token.startswith("--")}
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest in explicit or not hasattr(args, dest):
            continue
        setattr(args, dest, value)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args, argv)
        return args.func(args)
    except (CliError, DomainError, OSError) as exc:
        error = {"code": type(exc).__name__, "message": str(exc)}
        print(f"error: {json.dumps(error)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
