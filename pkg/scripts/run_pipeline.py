"""End-to-end pipeline on synthetic data: simulate, ingest, train, evaluate.

Produces a match log, the ingested decision dataset, one trained model per
variant, and the four-setting evaluation grid, all under an output directory.

    python3 scripts/run_pipeline.py --out runs/demo --teams 16 --matches 3000
"""

from __future__ import annotations

import argparse
from pathlib import Path

from veto_bandit.cli import main as cli_main


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/pipeline")
    parser.add_argument("--teams", type=int, default=16)
    parser.add_argument("--matches", type=int, default=3000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--lr", type=float, default=0.05)
    parser.add_argument("--epochs", type=int, default=2)
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "matches.jsonl"

    steps = [
        [
            "simulate", "--teams", str(args.teams), "--matches", str(args.matches),
            "--seed", str(args.seed), "--output", str(log_path),
        ],
        ["ingest", "--input", str(log_path), "--output", str(out / "ingest")],
    ]
    for variant in ("split", "combo", "episodic"):
        steps.append(
            [
                "train", "--input", str(log_path), "--output", str(out / f"model_{variant}"),
                "--variant", variant, "--lr", str(args.lr), "--epochs", str(args.epochs),
                "--seed", str(args.seed),
            ]
        )
    steps.append(
        [
            "evaluate", "--input", str(log_path), "--output", str(out / "grid"),
            "--lr", str(args.lr), "--epochs", str(args.epochs), "--seed", str(args.seed),
        ]
    )
    for step in steps:
        print(f"$ veto-bandit {' '.join(step)}")
        code = cli_main(step)
        if code != 0:
            return code
    print(f"artifacts under {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(run())
