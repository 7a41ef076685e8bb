"""Learning-curve experiment: the combined bandit against the uniform baseline.

Trains on a frozen-statistics synthetic log, checkpoints the test-set value
every 100 decisions over 3 epochs, and verifies the crossover against the
simulator's ground truth. Writes the checkpoint series as CSV.

    python3 scripts/learning_curve.py --out runs/curve.csv
"""

from __future__ import annotations

import argparse
import io
from pathlib import Path

from veto_bandit.domain import ActionKind
from veto_bandit.ope import UniformPolicy, make_sniw_checkpoint_fn
from veto_bandit.rewards import RewardKind
from veto_bandit.simulator import burn_in_stats, generate_ecosystem, generate_log, true_policy_value
from veto_bandit.training import BanditVariant, TrainingConfig, checkpoints_to_csv, train


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/learning_curve.csv")
    parser.add_argument("--teams", type=int, default=10)
    parser.add_argument("--train-matches", type=int, default=1200)
    parser.add_argument("--test-matches", type=int, default=400)
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--lr", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=71)
    parser.add_argument("--truth-rollouts", type=int, default=20000)
    args = parser.parse_args(argv)

    eco = generate_ecosystem(
        args.teams, seed=args.seed, permaban_fraction=0.0, strength_scale=1.2
    )
    stats = burn_in_stats(eco, 800, seed=1)
    train_log = generate_log(eco, args.train_matches, seed=2, stats=stats, update_stats=False)
    test_log = generate_log(eco, args.test_matches, seed=4, stats=stats, update_stats=False)

    config = TrainingConfig(
        learning_rate=args.lr, epochs=args.epochs, reward_kind=RewardKind.ZERO_ONE,
        variant=BanditVariant.COMBO, checkpoint_every=100,
    )
    policy = train(
        list(train_log.records), config, checkpoint_fn=make_sniw_checkpoint_fn(list(test_log.records))
    )

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    checkpoints_to_csv(policy, buffer)
    out.write_text(buffer.getvalue(), encoding="utf-8")

    uniform = true_policy_value(
        eco, UniformPolicy(), ActionKind.PICK, RewardKind.ZERO_ONE,
        args.truth_rollouts, seed=5, stats=stats,
    )
    final = true_policy_value(
        eco, policy, ActionKind.PICK, RewardKind.ZERO_ONE,
        args.truth_rollouts, seed=6, stats=stats,
    )
    print(f"checkpoints written to {out} ({len(policy.checkpoints)} rows)")
    print(f"uniform true pick value: {uniform.value:.4f} +- {uniform.std_error:.4f}")
    print(f"trained true pick value: {final.value:.4f} +- {final.std_error:.4f}")
    print(f"gain over uniform: {final.value - uniform.value:+.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(run())
