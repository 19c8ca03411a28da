#!/usr/bin/env python3
"""
Divergence-recovery demo: start a two-hidden-layer relu net on spirals at an
absurdly hot learning rate, watch the loss blow up to non-finite, and show
the controller halving its way back, then doubling again once training
sticks.

Produces:
  runs/spirals-aalr-seed10/  - epochs.jsonl, lr_trajectory.csv, summary.csv

Run:
  python3 scripts/recovery_demo.py [--epochs 200] [--seed 10] [--out runs]
"""

import argparse
import math

from aalr.cli import AalrSpec, ModelSpec, RunConfig, TaskSpec, execute_run, write_artifacts
from aalr.trainer import SgdConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--seed", type=int, default=10)
    parser.add_argument("--initial-lr", type=float, default=float(2**18))
    parser.add_argument("--out", default="runs")
    args = parser.parse_args()

    config = RunConfig(
        task=TaskSpec(kind="spirals", n=1000),
        model=ModelSpec(layer_sizes=(2, 64, 64, 2), activation="relu"),
        scheduler=AalrSpec(initial_lr=args.initial_lr, block="p"),
        sgd=SgdConfig(momentum=0.9, weight_decay=0.001, batch_size=100, seed=args.seed),
        epochs=args.epochs,
        seed=args.seed,
        output_dir=args.out,
    )
    result = execute_run(config)
    write_artifacts(config, result, f"spirals-aalr-seed{args.seed}")

    lrs = dict(result.lr_by_epoch)
    blowups = [r["epoch"] for r in result.records if not math.isfinite(r["eval_loss"])]
    hit = next((r["epoch"] for r in result.records if r["train_acc"] >= 0.95), None)
    print(f"non-finite loss events: {len(blowups)} (epochs {blowups[:8]}{'...' if len(blowups) > 8 else ''})")
    print(f"first epoch at 95% training accuracy: {hit}")
    print(f"best training accuracy: {max(r['train_acc'] for r in result.records):.3f}")
    print()
    print("epoch      lr  train_acc  eval_loss")
    step = max(1, args.epochs // 25)
    for r in result.records[::step]:
        loss = f"{r['eval_loss']:.4g}" if math.isfinite(r["eval_loss"]) else "inf/nan"
        print(f"{r['epoch']:5d}  {lrs[r['epoch']]:>10.3g}  {r['train_acc']:9.3f}  {loss:>9}")


if __name__ == "__main__":
    main()
