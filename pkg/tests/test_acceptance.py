"""End-to-end acceptance checks, one test per shipped guarantee.

Each test measures its own wall clock, prints a single PASS or FAIL line
with the numbers that matter, and enforces a runtime ceiling, so a verbose
run of this file doubles as the acceptance report. One test is currently
red by design: the delay-ratio bound over short-dwell schedules is not
achievable by this controller, and its docstring carries the measured
evidence rather than a loosened threshold.
"""

from __future__ import annotations

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from aalr import (
    AttackConfig,
    Dataset,
    OptSchedule,
    ReinitializeModel,
    RestoreCheckpoint,
    SaveCheckpoint,
    SetLr,
    SgdConfig,
    Stop,
    TrainEpochs,
    accuracy,
    backward,
    delay_ratio,
    epochs_to_match_decrease,
    epochs_to_match_increase,
    fgsm,
    forward_loss,
    init_model,
    initial_directives,
    make_synthetic,
    matched_decrease_closed_form,
    new_controller,
    observe,
    simulate,
    train_epoch,
)
from aalr.cli import AalrSpec, ModelSpec, RunConfig, TaskSpec, execute_run
from aalr.cli import main as cli_main
from aalr.controller import InitializationError, ProtocolError
from aalr.schedules import StepDecay

NAN = float("nan")


def finish(name: str, limit_s: float, started: float, detail: str, problems: list[str]):
    elapsed = time.perf_counter() - started
    if elapsed >= limit_s:
        problems.append(f"runtime {elapsed:.1f}s over the {limit_s:.0f}s ceiling")
    status = "PASS" if not problems else "FAIL"
    print(f"{status} {name}: {detail} ({elapsed:.2f}s)")
    assert not problems, "; ".join(problems)


def controller_streams(initial_lr, epochs, initial_loss, losses, block="p"):
    state = new_controller(initial_lr, epochs, initial_loss, block)
    streams = [initial_directives(state)]
    for loss in losses:
        state, directives = observe(state, loss)
        streams.append(directives)
    return state, streams


# Hand-executed controller traces. Shorthand: every trace starts at lr 0.1
# with a budget of 100 epochs unless stated; the first stream is always the
# kickoff [SetLr(0.1), TrainEpochs(1)].
KICKOFF = [SetLr(0.1), TrainEpochs(1)]
GOLDEN_TRACES = [
    # exploration: a worse loss halves the rate and starts over from scratch
    dict(
        name="explore-worse-halves",
        initial_loss=1.0,
        losses=[1.2],
        expect=[KICKOFF, [ReinitializeModel(), SetLr(0.05), TrainEpochs(1)]],
    ),
    # exploration: a non-finite loss takes the same path as a worse one
    dict(
        name="explore-nan-halves",
        initial_loss=1.0,
        losses=[NAN],
        expect=[KICKOFF, [ReinitializeModel(), SetLr(0.05), TrainEpochs(1)]],
    ),
    # exploration: matching the best exactly still counts as progress
    dict(
        name="explore-tie-counts",
        initial_loss=1.0,
        losses=[1.0],
        expect=[KICKOFF, [TrainEpochs(1)]],
    ),
    # exploration: ten straight non-worsening epochs hand over, doubled
    dict(
        name="handover-after-ten",
        initial_loss=10.0,
        losses=[9, 8, 7, 6, 5, 4, 3, 2, 1, 0.5],
        expect=[KICKOFF]
        + [[TrainEpochs(1)]] * 9
        + [[SaveCheckpoint(), SetLr(0.2), TrainEpochs(1)]],
    ),
    # same handover under the longer block flavor trains patience+1 epochs
    dict(
        name="handover-after-ten-long-blocks",
        block="p1",
        initial_loss=10.0,
        losses=[9, 8, 7, 6, 5, 4, 3, 2, 1, 0.5],
        expect=[KICKOFF]
        + [[TrainEpochs(1)]] * 9
        + [[SaveCheckpoint(), SetLr(0.2), TrainEpochs(2)]],
    ),
    # exploration: one setback wipes the streak but not the best loss; the
    # next ten clean epochs must beat the best set before the setback
    dict(
        name="explore-streak-resets",
        initial_loss=5.0,
        losses=[4, 6, 3.9, 3.8, 3.7, 3.6, 3.5, 3.4, 3.3, 3.2, 3.1, 3.0],
        expect=[KICKOFF, [TrainEpochs(1)], [ReinitializeModel(), SetLr(0.05), TrainEpochs(1)]]
        + [[TrainEpochs(1)]] * 9
        + [[SaveCheckpoint(), SetLr(0.1), TrainEpochs(1)]],
    ),
    # doubling phase: strict improvement checkpoints and doubles again
    dict(
        name="double-on-improve",
        initial_loss=2.0,
        losses=[2.0] * 10 + [1.9],
        expect=[KICKOFF]
        + [[TrainEpochs(1)]] * 9
        + [
            [SaveCheckpoint(), SetLr(0.2), TrainEpochs(1)],
            [SaveCheckpoint(), SetLr(0.4), TrainEpochs(1)],
        ],
    ),
    # doubling phase: first stall retries the same rate, second stall halves
    # and doubles the patience, improvement then resets it to one
    dict(
        name="retry-then-halve-then-improve",
        initial_loss=1.8,
        losses=[1.8] * 10 + [1.9, 1.9, 1.7],
        expect=[KICKOFF]
        + [[TrainEpochs(1)]] * 9
        + [
            [SaveCheckpoint(), SetLr(0.2), TrainEpochs(1)],
            [TrainEpochs(1)],
            [SetLr(0.1), TrainEpochs(2)],
            [SaveCheckpoint(), SetLr(0.2), TrainEpochs(1)],
        ],
    ),
    # doubling phase: a non-finite loss rolls back to the checkpoint
    dict(
        name="nan-rolls-back",
        initial_loss=2.0,
        losses=[2.0] * 10 + [NAN],
        expect=[KICKOFF]
        + [[TrainEpochs(1)]] * 9
        + [
            [SaveCheckpoint(), SetLr(0.2), TrainEpochs(1)],
            [RestoreCheckpoint(), SetLr(0.1), TrainEpochs(2)],
        ],
    ),
    # same rollback under the longer block flavor: patience 2 trains 3
    dict(
        name="nan-rolls-back-long-blocks",
        block="p1",
        initial_loss=2.0,
        losses=[2.0] * 10 + [NAN],
        expect=[KICKOFF]
        + [[TrainEpochs(1)]] * 9
        + [
            [SaveCheckpoint(), SetLr(0.2), TrainEpochs(2)],
            [RestoreCheckpoint(), SetLr(0.1), TrainEpochs(3)],
        ],
    ),
    # the budget cuts the run mid-phase: the final response ends in Stop
    dict(
        name="budget-stops-run",
        epochs=12,
        initial_loss=2.0,
        losses=[2.0] * 10 + [1.9, 1.85],
        expect=[KICKOFF]
        + [[TrainEpochs(1)]] * 9
        + [
            [SaveCheckpoint(), SetLr(0.2), TrainEpochs(1)],
            [SaveCheckpoint(), SetLr(0.4), TrainEpochs(1)],
            [SaveCheckpoint(), SetLr(0.8), Stop()],
        ],
    ),
    # a two-epoch block is truncated to the single epoch the budget allows
    dict(
        name="budget-truncates-block",
        block="p1",
        epochs=11,
        initial_loss=2.0,
        losses=[2.0] * 10 + [1.9],
        expect=[KICKOFF]
        + [[TrainEpochs(1)]] * 9
        + [
            [SaveCheckpoint(), SetLr(0.2), TrainEpochs(1)],
            [SaveCheckpoint(), SetLr(0.4), Stop()],
        ],
    ),
]


def test_golden_directive_traces():
    """Hand-derived directive streams, matched exactly, plus the two
    refusal behaviors: no start on a non-finite loss, no observation after
    Stop."""
    started = time.perf_counter()
    problems = []
    final_states = {}
    for trace in GOLDEN_TRACES:
        state, got = controller_streams(
            0.1,
            trace.get("epochs", 100),
            trace["initial_loss"],
            trace["losses"],
            trace.get("block", "p"),
        )
        final_states[trace["name"]] = state
        if got != trace["expect"]:
            problems.append(f"{trace['name']}: got {got}, wanted {trace['expect']}")

    for bad in (float("inf"), NAN):
        try:
            new_controller(0.1, 100, bad)
            problems.append(f"initial loss {bad!r} was accepted")
        except InitializationError:
            pass
    stopped = final_states["budget-stops-run"]
    with pytest.raises(ProtocolError):
        observe(stopped, 1.0)

    finish(
        "golden traces",
        1.0,
        started,
        f"{len(GOLDEN_TRACES)} directive traces matched exactly",
        problems,
    )


def test_catch_up_arithmetic_and_simulator(tmp_path, capsys):
    """The rate-drop recovery count equals its direct summation, the climb
    count is two per doubling, the simulator reproduces the summation
    exactly for single drops, and the gamma=4 report shows the summation
    next to the off-by-one closed form."""
    started = time.perf_counter()
    problems = []
    for gamma in (2, 4, 8, 16):
        k = round(math.log2(gamma))
        summation = sum(2 * (2**i + 1) for i in range(1 + k))
        if epochs_to_match_decrease(gamma) != summation:
            problems.append(
                f"decrease({gamma}) = {epochs_to_match_decrease(gamma)} != sum {summation}"
            )
        if epochs_to_match_increase(gamma) != 2 * k:
            problems.append(f"increase({gamma}) != {2 * k}")
        t = simulate(OptSchedule(((0.4, 4 * gamma), (0.4 / gamma, 4 * gamma))), block="p1")
        if t.boundaries[0].catch_up != summation:
            problems.append(
                f"simulated catch-up for gamma={gamma} was {t.boundaries[0].catch_up},"
                f" summation says {summation}"
            )

    if matched_decrease_closed_form(4) != 21 or epochs_to_match_decrease(4) != 20:
        problems.append("gamma=4 pair is not (summation 20, closed form 21)")
    rc = cli_main(["simulate", "--segments", "0.4:16,0.1:16", "--out", str(tmp_path / "sim.csv")])
    report = capsys.readouterr().out
    if rc != 0:
        problems.append(f"simulate exited {rc}")
    for needle in ("expected=20", "closed_form=21", "authoritative"):
        if needle not in report:
            problems.append(f"report lacks {needle!r}")

    finish(
        "catch-up arithmetic",
        1.0,
        started,
        "summation {10,20,38,72} confirmed; gamma=4 reports 20 alongside closed form 21",
        problems,
    )


def random_short_dwell_schedule(rng) -> OptSchedule:
    """2 to 6 segments; every drop by g sits after a dwell of exactly 4*g."""
    n_seg = int(rng.integers(2, 7))
    gammas = [int(rng.choice([2, 4, 8])) for _ in range(n_seg - 1)]
    lr = float(rng.choice([0.4, 0.2, 0.1]))
    segments = []
    for g in gammas:
        segments.append((lr, 4 * g))
        lr /= g
    segments.append((lr, int(rng.integers(32, 97))))
    return OptSchedule(tuple(segments))


def test_delay_bound_short_dwell_schedules():
    """Delay ratio <= 2.5 over 100 random schedules whose drops by g are
    each preceded by a dwell of only 4*g epochs.

    This is red by design rather than weakened: re-matching a drop by g
    costs 10/20/38 controller epochs (g = 2/4/8) against a dwell of only
    8/16/32, on top of the 7/3 tracking floor every segment already pays,
    so 83 of the 100 draws exceed the bound (min 2.40, mean 2.63,
    max 2.90). The same bound holds comfortably once dwells reach about
    16x the drop factor, which is the regime the randomized bound test in
    the simulator suite pins down.
    """
    started = time.perf_counter()
    rng = np.random.default_rng(20260816)
    ratios = np.array(
        [delay_ratio(simulate(random_short_dwell_schedule(rng))) for _ in range(100)]
    )
    problems = []
    if ratios.max() > 2.5:
        problems.append(
            f"delay ratio reached {ratios.max():.4f} (min {ratios.min():.4f},"
            f" mean {ratios.mean():.4f}); 2.5 is not attainable at 4x dwells"
        )
    finish(
        "delay bound at short dwells",
        10.0,
        started,
        f"100 schedules: min {ratios.min():.4f} mean {ratios.mean():.4f} max {ratios.max():.4f}"
        " vs bound 2.5",
        problems,
    )


def test_delay_ratio_constant_schedule():
    """A never-changing oracle rate is tracked at exactly 7/3."""
    started = time.perf_counter()
    ratio = delay_ratio(simulate(OptSchedule(((0.1, 300),)), block="p1"))
    problems = []
    if abs(ratio - 7 / 3) > 0.01:
        problems.append(f"constant-rate ratio {ratio:.6f} is not 7/3 +- 0.01")
    finish(
        "constant-schedule delay ratio",
        10.0,
        started,
        f"ratio {ratio:.6f} vs 7/3 = {7 / 3:.6f}",
        problems,
    )


def fd_gradient(model, batch, h=1e-5):
    base = model.params
    grad = np.empty_like(base)
    for i in range(base.size):
        up = base.copy()
        up[i] += h
        down = base.copy()
        down[i] -= h
        grad[i] = (
            forward_loss(replace(model, params=up), batch)
            - forward_loss(replace(model, params=down), batch)
        ) / (2.0 * h)
    return grad


def test_gradient_matches_finite_differences():
    """Backprop against central differences on 50 random (model, batch)
    pairs, relative error at most 1e-4 on every pair."""
    started = time.perf_counter()
    rng = np.random.default_rng(20260816)
    problems = []
    worst = 0.0
    checked = 0
    while checked < 50:
        depth = int(rng.integers(0, 3))
        sizes = (
            int(rng.integers(2, 5)),
            *(int(rng.integers(2, 9)) for _ in range(depth)),
            int(rng.integers(2, 5)),
        )
        activation = "tanh" if checked % 2 == 0 else "relu"
        model = init_model(sizes, activation=activation, seed=int(rng.integers(0, 10_000)))
        n = int(rng.integers(3, 11))
        batch = Dataset(
            rng.uniform(0.0, 1.0, (n, sizes[0])),
            rng.integers(0, sizes[-1], n),
            sizes[-1],
        )
        if activation == "relu":
            # central differences straddle the activation kink; keep a
            # margin between every pre-activation and zero
            x = batch.inputs
            clear = True
            for w, b in zip(*_layer_views(model)):
                x = x @ w + b
                if np.abs(x).min() < 1e-3:
                    clear = False
                    break
                x = np.maximum(x, 0.0)
            if not clear:
                continue
        analytic = backward(model, batch)
        numeric = fd_gradient(model, batch)
        scale = max(float(np.abs(numeric).max()), 1e-8)
        rel = float(np.abs(analytic - numeric).max()) / scale
        worst = max(worst, rel)
        if rel > 1e-4:
            problems.append(f"pair {checked} ({sizes}, {activation}): rel err {rel:.2e}")
        checked += 1
    finish(
        "gradient oracle",
        30.0,
        started,
        f"50 pairs, worst relative error {worst:.2e} vs 1e-4",
        problems,
    )


def _layer_views(model):
    weights, biases = [], []
    offset = 0
    for a, b in zip(model.layer_sizes, model.layer_sizes[1:]):
        weights.append(model.params[offset : offset + a * b].reshape(a, b))
        offset += a * b
        biases.append(model.params[offset : offset + b])
        offset += b
    return weights, biases


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_recovery_after_divergence():
    """An absurdly hot starting rate on the spirals task blows the loss up
    to non-finite at least once; the run still reaches 95% training
    accuracy inside the 200-epoch budget, and the rate log shows a doubling
    after the first blow-up."""
    started = time.perf_counter()
    config = RunConfig(
        task=TaskSpec(kind="spirals", n=1000),
        model=ModelSpec(layer_sizes=(2, 64, 64, 2), activation="relu"),
        scheduler=AalrSpec(initial_lr=float(2**18), block="p"),
        sgd=SgdConfig(momentum=0.9, weight_decay=0.001, batch_size=100, seed=10),
        epochs=200,
        seed=10,
    )
    result = execute_run(config)
    bad_epochs = [
        r["epoch"]
        for r in result.records
        if not math.isfinite(r["eval_loss"]) or not math.isfinite(r["train_loss"])
    ]
    hit = next((r["epoch"] for r in result.records if r["train_acc"] >= 0.95), None)
    problems = []
    if not bad_epochs:
        problems.append("no non-finite loss event occurred")
    if hit is None:
        best = max(r["train_acc"] for r in result.records)
        problems.append(f"never reached 0.95 training accuracy (best {best:.3f})")
    doublings = 0
    if bad_epochs:
        lrs = dict(result.lr_by_epoch)
        doublings = sum(
            1
            for e in range(bad_epochs[0], config.epochs - 1)
            if e in lrs and e + 1 in lrs and lrs[e + 1] == 2.0 * lrs[e]
        )
        if doublings == 0:
            problems.append("rate never doubled after the first blow-up")
    finish(
        "divergence recovery",
        120.0,
        started,
        f"{len(bad_epochs)} non-finite events, 95% at epoch {hit},"
        f" {doublings} doublings after recovery",
        problems,
    )


def test_scheduler_parity_on_moons():
    """Best test accuracy of the adaptive controller over three fixed seeds
    on moons (n=1000) lands within 2 points of the best run from a
    five-point hand-tuned step-decay grid over the same seeds."""
    started = time.perf_counter()
    task = TaskSpec(kind="moons", n=1000)
    model = ModelSpec(layer_sizes=(2, 32, 2), activation="relu")
    seeds = (2, 4, 5)

    def run(scheduler, seed):
        config = RunConfig(
            task=task,
            model=model,
            scheduler=scheduler,
            sgd=SgdConfig(momentum=0.9, batch_size=32, seed=seed),
            epochs=100,
            seed=seed,
        )
        return execute_run(config).summary["best_test_acc"]

    adaptive_best = max(run(AalrSpec(), seed) for seed in seeds)
    grid_best = max(
        run(StepDecay(base_lr=lr, gamma=0.1, milestones=(60, 85)), seed)
        for lr in (0.3, 0.1, 0.03, 0.01, 0.003)
        for seed in seeds
    )
    problems = []
    if adaptive_best < grid_best - 0.02:
        problems.append(
            f"adaptive best {adaptive_best:.3f} trails grid best {grid_best:.3f}"
            f" by {grid_best - adaptive_best:.3f} (> 0.02)"
        )
    finish(
        "scheduler parity on moons",
        300.0,
        started,
        f"adaptive best {adaptive_best:.3f} vs grid best {grid_best:.3f}",
        problems,
    )


def test_fgsm_contract_and_adversarial_margin():
    """Attack invariants on 10,000 random samples (per-pixel shift at most
    epsilon, outputs inside [0,1], labels untouched), then the payoff:
    an adversarially trained linear model on the blobs task beats the
    naturally trained one under the epsilon=0.1 attack by 10+ points."""
    started = time.perf_counter()
    problems = []

    rng = np.random.default_rng(0)
    bulk = Dataset(rng.uniform(0.0, 1.0, (10_000, 2)), rng.integers(0, 2, 10_000), 2)
    probe = init_model((2, 16, 2), seed=3)
    for eps in (0.05, 0.1, 0.25):
        adv = fgsm(probe, bulk, eps)
        shift = float(np.abs(adv.inputs - bulk.inputs).max())
        if shift > eps + 1e-12:
            problems.append(f"eps={eps}: max shift {shift} exceeds eps")
        if adv.inputs.min() < 0.0 or adv.inputs.max() > 1.0:
            problems.append(f"eps={eps}: outputs escape [0,1]")
        if not np.array_equal(adv.labels, bulk.labels):
            problems.append(f"eps={eps}: labels changed")

    def fit_linear(train, attack):
        model = init_model((2, 2), seed=0)
        velocity = np.zeros_like(model.params)
        cfg = SgdConfig(momentum=0.9, batch_size=32, seed=0)
        for epoch in range(40):
            model, velocity, _ = train_epoch(model, velocity, train, 0.1, cfg, epoch, attack)
        return model

    train = make_synthetic("blobs", 400, seed=4)
    test = make_synthetic("blobs", 400, seed=104)
    natural = fit_linear(train, None)
    hardened = fit_linear(train, AttackConfig(epsilon=0.1, alpha=0.1))
    natural_robust = accuracy(natural, fgsm(natural, test, 0.1))
    hardened_robust = accuracy(hardened, fgsm(hardened, test, 0.1))
    margin = hardened_robust - natural_robust
    if margin < 0.10:
        problems.append(
            f"hardened {hardened_robust:.3f} vs natural {natural_robust:.3f}:"
            f" margin {margin:+.3f} < 0.10"
        )
    finish(
        "attack contract and training margin",
        120.0,
        started,
        f"invariants held on 10,000 samples x 3 epsilons; robust accuracy"
        f" {hardened_robust:.3f} vs {natural_robust:.3f} (margin {margin:+.3f})",
        problems,
    )
