#!/usr/bin/env python3
"""
Adversarial training payoff on the blobs task: fit one linear model
naturally and one against the sign-gradient attack, then evaluate both on
clean and attacked held-out points.

Run:
  python3 scripts/adversarial_linear.py [--epsilon 0.1] [--seed 4]
"""

import argparse

import numpy as np

from aalr.trainer import (
    AttackConfig,
    SgdConfig,
    accuracy,
    fgsm,
    init_model,
    make_synthetic,
    train_epoch,
)


def fit(train, attack, epochs=40, lr=0.1, seed=0):
    model = init_model((2, 2), seed=seed)
    velocity = np.zeros_like(model.params)
    cfg = SgdConfig(momentum=0.9, batch_size=32, seed=seed)
    for epoch in range(epochs):
        model, velocity, _ = train_epoch(model, velocity, train, lr, cfg, epoch, attack)
    return model


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epsilon", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=4)
    parser.add_argument("--n", type=int, default=400)
    args = parser.parse_args()

    train = make_synthetic("blobs", args.n, seed=args.seed)
    test = make_synthetic("blobs", args.n, seed=args.seed + 100)
    natural = fit(train, None)
    hardened = fit(train, AttackConfig(epsilon=args.epsilon, alpha=args.epsilon))

    print(f"epsilon={args.epsilon}  (train seed {args.seed}, test seed {args.seed + 100})")
    print(f"{'model':<10} {'clean':>7} {'attacked':>9}")
    for name, model in (("natural", natural), ("hardened", hardened)):
        clean = accuracy(model, test)
        robust = accuracy(model, fgsm(model, test, args.epsilon))
        print(f"{name:<10} {clean:7.3f} {robust:9.3f}")
    margin = accuracy(hardened, fgsm(hardened, test, args.epsilon)) - accuracy(
        natural, fgsm(natural, test, args.epsilon)
    )
    print(f"\nrobust-accuracy margin (hardened - natural): {margin:+.3f}")


if __name__ == "__main__":
    main()
