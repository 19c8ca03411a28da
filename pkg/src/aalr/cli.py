"""Experiment front end: run training, compare schedulers, simulate delays.

Subcommands:
  run       one training run (adaptive controller or a fixed schedule),
            writing per-epoch JSONL, an LR-trajectory CSV, a final-metrics
            CSV row, and a config snapshot
  compare   several runs differing only in scheduler, aligned in one CSV
  simulate  drive the controller against a piecewise-constant rate oracle
  trace     turn recorded loss sequences into directive streams (JSON),
            the conformance surface for external reimplementations

Exit codes: 0 success, 2 usage error, 3 dataset missing.
``AALR_LOG_LEVEL`` sets the logging threshold (DEBUG/INFO/WARNING/...).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from aalr.checkpoints import Checkpoint, FileCheckpointStore, MemoryCheckpointStore
from aalr.controller import (
    ControllerState,
    InitializationError,
    Phase,
    ReinitializeModel,
    RestoreCheckpoint,
    SaveCheckpoint,
    SetLr,
    Stop,
    TrainEpochs,
    initial_directives,
    lr_trajectory,
    new_controller,
    observe,
)
from aalr.errors import DomainError, FormatError
from aalr.oracle import (
    OptSchedule,
    delay_ratio,
    epochs_to_match_decrease,
    matched_decrease_closed_form,
    simulate,
)
from aalr.schedules import CosineRestarts, CyclicTriangular, Schedule, StepDecay, lr_at
from aalr.trainer import (
    AttackConfig,
    Dataset,
    EpochRecord,
    Model,
    SgdConfig,
    accuracy,
    fgsm,
    forward_loss,
    init_model,
    load_idx,
    make_synthetic,
    train_epoch,
)

log = logging.getLogger("aalr")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATASET = 3


class UsageError(ValueError):
    """Bad command or config combination; maps to exit code 2."""


@dataclass(frozen=True)
class AalrSpec:
    """Adaptive-controller scheduler selection."""

    initial_lr: float = 0.1
    block: str = "p"


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    n: int = 400
    images: str | None = None
    labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None


@dataclass(frozen=True)
class ModelSpec:
    layer_sizes: tuple[int, ...] = (2, 32, 32, 2)
    activation: str = "relu"


@dataclass(frozen=True)
class RunConfig:
    task: TaskSpec
    model: ModelSpec
    scheduler: AalrSpec | StepDecay | CosineRestarts | CyclicTriangular
    sgd: SgdConfig
    epochs: int
    seed: int
    attack: AttackConfig | None = None
    output_dir: str = "runs"
    checkpoint_path: str | None = None


_SCHEDULER_CLASSES = {
    "aalr": AalrSpec,
    "step": StepDecay,
    "cosine": CosineRestarts,
    "cyclic": CyclicTriangular,
}


def config_to_dict(config: RunConfig) -> dict:
    out = dataclasses.asdict(config)
    for name, cls in _SCHEDULER_CLASSES.items():
        if isinstance(config.scheduler, cls):
            out["scheduler"]["kind"] = name
            break
    return out


def config_from_dict(raw: dict) -> RunConfig:
    sched_raw = dict(raw["scheduler"])
    kind = sched_raw.pop("kind")
    if kind not in _SCHEDULER_CLASSES:
        raise UsageError(f"unknown scheduler kind {kind!r}")
    if kind == "step":
        sched_raw["milestones"] = tuple(sched_raw.get("milestones", ()))
    scheduler = _SCHEDULER_CLASSES[kind](**sched_raw)
    model_raw = dict(raw["model"])
    model_raw["layer_sizes"] = tuple(model_raw["layer_sizes"])
    attack = AttackConfig(**raw["attack"]) if raw.get("attack") else None
    return RunConfig(
        task=TaskSpec(**raw["task"]),
        model=ModelSpec(**model_raw),
        scheduler=scheduler,
        sgd=SgdConfig(**raw["sgd"]),
        epochs=int(raw["epochs"]),
        seed=int(raw["seed"]),
        attack=attack,
        output_dir=raw.get("output_dir", "runs"),
        checkpoint_path=raw.get("checkpoint_path"),
    )


def load_task(task: TaskSpec, seed: int) -> tuple[Dataset, Dataset]:
    """Train and held-out test sets for a task. Synthetic tasks derive the
    test set from a shifted seed; IDX tasks reuse the training files when
    no test pair is given."""
    if task.kind == "idx":
        if not task.images or not task.labels:
            raise UsageError("idx task needs --images and --labels")
        for p in (task.images, task.labels, task.test_images, task.test_labels):
            if p and not os.path.exists(p):
                raise FileNotFoundError(p)
        train = load_idx(task.images, task.labels)
        if task.test_images and task.test_labels:
            test = load_idx(task.test_images, task.test_labels)
        else:
            test = train
        return train, test
    train = make_synthetic(task.kind, task.n, seed)
    test = make_synthetic(task.kind, max(task.n // 4, 8), seed + 1000)
    return train, test


@dataclass(frozen=True)
class RunResult:
    records: tuple[dict, ...]
    lr_by_epoch: tuple[tuple[int, float], ...]
    summary: dict


def _epoch_row(
    rec: EpochRecord,
    model: Model,
    test: Dataset,
    phase: Phase | None,
    patience: int | None,
    attack: AttackConfig | None,
) -> dict:
    row = {
        "epoch": rec.epoch,
        "lr": rec.lr,
        "train_loss": rec.train_loss,
        "eval_loss": rec.eval_loss,
        "train_acc": rec.accuracy,
        "test_acc": accuracy(model, test),
        "phase": {Phase.INITIAL_EXPLORATION: "initial", Phase.OPTIMISTIC_BINARY: "binary"}[phase]
        if phase is not None
        else "fixed",
        "patience": patience,
        "wall_ms": rec.wall_ms,
    }
    if attack is not None and attack.enabled:
        adv = fgsm(model, test, attack.epsilon)
        row["adv_acc"] = accuracy(model, adv)
    return row


def execute_aalr_run(config: RunConfig) -> RunResult:
    """Directive-execution loop around the two-phase controller.

    The controller owns every decision; this loop only carries them out:
    set-LR zeroes the momentum buffer (fresh optimizer at the new rate),
    restore/reinitialize also zero it, and the loss observed after each
    block is the full-training-set loss of the final trained epoch.
    """
    spec: AalrSpec = config.scheduler
    train, test = load_task(config.task, config.seed)
    model = init_model(config.model.layer_sizes, config.seed, config.model.activation)
    initial_params = model.params.copy()
    velocity = np.zeros_like(model.params)
    store = (
        FileCheckpointStore(config.checkpoint_path)
        if config.checkpoint_path
        else MemoryCheckpointStore()
    )

    initial_loss = forward_loss(model, train)
    state = new_controller(spec.initial_lr, config.epochs, initial_loss, spec.block)
    states = [state]
    queue = initial_directives(state)
    lr = state.lr
    records: list[dict] = []
    stopped = False

    while not stopped:
        last_record = None
        for directive in queue:
            if isinstance(directive, SetLr):
                lr = directive.lr
                velocity[:] = 0.0
            elif isinstance(directive, SaveCheckpoint):
                store.save(Checkpoint(model.params, velocity, state.best_loss, state.epoch, lr))
            elif isinstance(directive, RestoreCheckpoint):
                cp = store.restore()
                model = replace(model, params=cp.parameters)
                velocity = np.zeros_like(model.params)
            elif isinstance(directive, ReinitializeModel):
                model = replace(model, params=initial_params.copy())
                velocity = np.zeros_like(model.params)
            elif isinstance(directive, TrainEpochs):
                for _ in range(directive.count):
                    epoch_index = len(records)
                    model, velocity, rec = train_epoch(
                        model, velocity, train, lr, config.sgd, epoch_index, config.attack
                    )
                    records.append(
                        _epoch_row(rec, model, test, state.phase, state.patience, config.attack)
                    )
                    last_record = rec
            elif isinstance(directive, Stop):
                stopped = True
            else:
                raise AssertionError(f"unhandled directive {directive!r}")
        if stopped:
            break
        assert last_record is not None, "controller emitted a block with no training"
        state, queue = observe(state, last_record.eval_loss)
        states.append(state)
        if len(records) != state.epoch:
            raise AssertionError(
                f"harness at epoch {len(records)} but controller believes {state.epoch}"
            )

    return RunResult(tuple(records), tuple(lr_trajectory(states)), _summarize(records, config))


def execute_schedule_run(config: RunConfig) -> RunResult:
    """Fixed-schedule baseline loop: lr_at(schedule, epoch) every epoch."""
    schedule: Schedule = config.scheduler
    train, test = load_task(config.task, config.seed)
    model = init_model(config.model.layer_sizes, config.seed, config.model.activation)
    velocity = np.zeros_like(model.params)
    records: list[dict] = []
    lrs: list[tuple[int, float]] = []
    for epoch in range(config.epochs):
        lr = lr_at(schedule, epoch)
        model, velocity, rec = train_epoch(
            model, velocity, train, lr, config.sgd, epoch, config.attack
        )
        records.append(_epoch_row(rec, model, test, None, None, config.attack))
        lrs.append((epoch, lr))
        if not math.isfinite(rec.eval_loss):
            log.warning("non-finite loss at epoch %d under fixed schedule; stopping", epoch)
            break
    return RunResult(tuple(records), tuple(lrs), _summarize(records, config))


def execute_run(config: RunConfig) -> RunResult:
    if isinstance(config.scheduler, AalrSpec):
        return execute_aalr_run(config)
    return execute_schedule_run(config)


def _summarize(records: list[dict], config: RunConfig) -> dict:
    finite_eval = [r["eval_loss"] for r in records if math.isfinite(r["eval_loss"])]
    best_test = max((r["test_acc"] for r in records), default=0.0)
    best_epoch = next((r["epoch"] for r in records if r["test_acc"] == best_test), None)
    return {
        "scheduler": next(
            name for name, cls in _SCHEDULER_CLASSES.items() if isinstance(config.scheduler, cls)
        ),
        "seed": config.seed,
        "epochs_run": len(records),
        "final_train_acc": records[-1]["train_acc"] if records else 0.0,
        "final_test_acc": records[-1]["test_acc"] if records else 0.0,
        "best_test_acc": best_test,
        "epochs_to_best": best_epoch,
        "final_eval_loss": finite_eval[-1] if finite_eval else float("nan"),
    }


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        if math.isnan(value):
            return "NaN"
        return "Infinity" if value > 0 else "-Infinity"
    return value


def write_artifacts(config: RunConfig, result: RunResult, run_name: str) -> dict:
    out_dir = os.path.join(config.output_dir, run_name)
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "jsonl": os.path.join(out_dir, "epochs.jsonl"),
        "lr_csv": os.path.join(out_dir, "lr_trajectory.csv"),
        "summary_csv": os.path.join(out_dir, "summary.csv"),
        "config": os.path.join(out_dir, "config.json"),
    }
    with open(paths["jsonl"], "w") as fh:
        for row in result.records:
            fh.write(json.dumps({k: _json_safe(v) for k, v in row.items()}) + "\n")
    with open(paths["lr_csv"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr"])
        writer.writerows(result.lr_by_epoch)
    with open(paths["summary_csv"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(result.summary))
        writer.writerow([_json_safe(v) for v in result.summary.values()])
    with open(paths["config"], "w") as fh:
        json.dump(config_to_dict(config), fh, indent=2)
    return paths


def compare_runs(configs: list[RunConfig]) -> list[dict]:
    """Run several configs that differ only in scheduler (and seed) and
    aggregate best test accuracy per scheduler as mean and spread."""
    if len(configs) < 2:
        raise UsageError("compare needs at least 2 configs")
    def fingerprint(c: RunConfig):
        return (c.task, c.model, c.sgd.momentum, c.sgd.weight_decay, c.sgd.batch_size,
                c.epochs, c.attack)
    base = fingerprint(configs[0])
    for c in configs[1:]:
        if fingerprint(c) != base:
            raise UsageError("compare configs may differ only in scheduler and seed")
    summaries = []
    for c in configs:
        result = execute_run(c)
        summaries.append(result.summary)
        log.info("compare: %s seed=%d best_test=%.4f",
                 result.summary["scheduler"], c.seed, result.summary["best_test_acc"])
    return summaries


def aggregate_compare(summaries: list[dict]) -> list[dict]:
    by_scheduler: dict[str, list[dict]] = {}
    for s in summaries:
        by_scheduler.setdefault(s["scheduler"], []).append(s)
    rows = []
    for name, group in sorted(by_scheduler.items()):
        best = np.array([g["best_test_acc"] for g in group])
        rows.append(
            {
                "scheduler": name,
                "runs": len(group),
                "best_test_acc_mean": float(best.mean()),
                "best_test_acc_std": float(best.std()),
                "peak_accuracy": float(best.max()),
                "final_loss_mean": float(
                    np.mean([g["final_eval_loss"] for g in group])
                ),
                "epochs_to_best_mean": float(
                    np.mean([g["epochs_to_best"] for g in group if g["epochs_to_best"] is not None])
                ),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# trace: loss sequences in, directive streams out


def _loss_from_json(value) -> float:
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise UsageError(f"bad loss value {value!r}") from None
    return float(value)


def _directive_to_json(directive) -> dict:
    if isinstance(directive, SetLr):
        return {"type": "set_lr", "lr": directive.lr}
    if isinstance(directive, SaveCheckpoint):
        return {"type": "save_checkpoint"}
    if isinstance(directive, RestoreCheckpoint):
        return {"type": "restore_checkpoint"}
    if isinstance(directive, ReinitializeModel):
        return {"type": "reinitialize_model"}
    if isinstance(directive, TrainEpochs):
        return {"type": "train_epochs", "count": directive.count}
    if isinstance(directive, Stop):
        return {"type": "stop"}
    raise AssertionError(f"unhandled directive {directive!r}")


def trace_sequences(cases: list[dict]) -> list[dict]:
    """Replay recorded loss sequences through the controller.

    Each case: {initial_lr, epochs, initial_loss, losses, block?}. Losses
    past the Stop directive are ignored, mirroring a harness that halts.
    Non-finite numbers travel as the strings "NaN"/"Infinity"/"-Infinity".
    """
    out = []
    for case in cases:
        block = case.get("block", "p")
        try:
            state = new_controller(
                float(case["initial_lr"]),
                int(case["epochs"]),
                _loss_from_json(case["initial_loss"]),
                block,
            )
        except InitializationError as exc:
            out.append({"error": str(exc), "directives": []})
            continue
        streams = [[_directive_to_json(d) for d in initial_directives(state)]]
        for raw in case["losses"]:
            if state.stopped:
                break
            state, directives = observe(state, _loss_from_json(raw))
            streams.append([_directive_to_json(d) for d in directives])
        out.append({"directives": streams})
    return out


# ---------------------------------------------------------------------------
# argument parsing


def _add_common_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--task", required=True, choices=["blobs", "moons", "spirals", "idx"])
    p.add_argument("--n", type=int, default=400, help="synthetic sample count")
    p.add_argument("--images")
    p.add_argument("--labels")
    p.add_argument("--test-images")
    p.add_argument("--test-labels")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--hidden", default="32,32", help="comma-separated hidden widths")
    p.add_argument("--activation", default="relu", choices=["relu", "tanh"])
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--initial-lr", type=float, default=0.1)
    p.add_argument("--block", default="p", choices=["p", "p1"])
    p.add_argument("--gamma", type=float, default=0.1, help="step-decay factor")
    p.add_argument("--milestones", default="30,60")
    p.add_argument("--eta-min", type=float, default=0.0)
    p.add_argument("--period", type=int, default=10)
    p.add_argument("--period-mult", type=int, default=2)
    p.add_argument("--max-lr", type=float, default=0.5)
    p.add_argument("--half-cycle", type=int, default=5)
    p.add_argument("--attack", choices=["fgsm"])
    p.add_argument("--epsilon", type=float, default=8 / 255)
    p.add_argument("--alpha", type=float, default=2 / 255)
    p.add_argument("--checkpoint-path")
    p.add_argument("--out", default="runs")


def _scheduler_from_args(name: str, args) -> AalrSpec | Schedule:
    if name == "aalr":
        return AalrSpec(initial_lr=args.initial_lr, block=args.block)
    if name == "step":
        milestones = tuple(int(m) for m in args.milestones.split(",") if m)
        return StepDecay(base_lr=args.initial_lr, gamma=args.gamma, milestones=milestones)
    if name == "cosine":
        return CosineRestarts(
            eta_max=args.initial_lr,
            eta_min=args.eta_min,
            period_0=args.period,
            period_mult=args.period_mult,
        )
    if name == "cyclic":
        return CyclicTriangular(
            base_lr=args.initial_lr, max_lr=args.max_lr, half_cycle=args.half_cycle
        )
    raise UsageError(f"unknown scheduler {name!r}")


def _config_from_args(args, scheduler_name: str, seed: int) -> RunConfig:
    attack = None
    if args.attack == "fgsm":
        attack = AttackConfig(epsilon=args.epsilon, alpha=args.alpha, enabled=True)
    hidden = tuple(int(h) for h in args.hidden.split(",") if h)
    task = TaskSpec(
        kind=args.task,
        n=args.n,
        images=args.images,
        labels=args.labels,
        test_images=args.test_images,
        test_labels=args.test_labels,
    )
    if task.kind == "idx":
        layer_sizes = hidden  # input/output widths filled in by _complete_layers
    else:
        layer_sizes = (2, *hidden, 2)
    return RunConfig(
        task=task,
        model=ModelSpec(layer_sizes=layer_sizes, activation=args.activation),
        scheduler=_scheduler_from_args(scheduler_name, args),
        sgd=SgdConfig(
            momentum=args.momentum,
            weight_decay=args.weight_decay,
            batch_size=args.batch_size,
            seed=seed,
        ),
        epochs=args.epochs,
        seed=seed,
        attack=attack,
        output_dir=args.out,
        checkpoint_path=args.checkpoint_path,
    )


def _complete_layers(config: RunConfig) -> RunConfig:
    """IDX tasks get their input/output widths from the files."""
    if config.task.kind != "idx":
        return config
    train, _ = load_task(config.task, config.seed)
    sizes = (train.inputs.shape[1], *config.model.layer_sizes, train.n_classes)
    return replace(config, model=replace(config.model, layer_sizes=sizes))


def _run_name(config: RunConfig, scheduler_name: str) -> str:
    return f"{config.task.kind}-{scheduler_name}-seed{config.seed}"


def cmd_run(args) -> int:
    config = _config_from_args(args, args.scheduler, args.seed)
    try:
        config = _complete_layers(config)
        result = execute_run(config)
    except FileNotFoundError as exc:
        log.error("dataset file missing: %s", exc)
        return EXIT_DATASET
    except InitializationError as exc:
        log.error("initial loss unusable: %s", exc)
        return 1
    paths = write_artifacts(config, result, _run_name(config, args.scheduler))
    print(json.dumps({k: _json_safe(v) for k, v in result.summary.items()}, indent=2))
    log.info("artifacts: %s", paths)
    return EXIT_OK


def cmd_compare(args) -> int:
    names = [s.strip() for s in args.schedulers.split(",") if s.strip()]
    if len(names) < 2:
        raise UsageError("compare needs --schedulers with at least two entries")
    seeds = [int(s) for s in args.seeds.split(",") if s]
    configs = []
    for name in names:
        for seed in seeds:
            configs.append(_complete_layers(_config_from_args(args, name, seed)))
    try:
        summaries = compare_runs(configs)
    except FileNotFoundError as exc:
        log.error("dataset file missing: %s", exc)
        return EXIT_DATASET
    rows = aggregate_compare(summaries)
    os.makedirs(args.out, exist_ok=True)
    table = os.path.join(args.out, "compare.csv")
    with open(table, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print(
            f"{row['scheduler']}: best test acc "
            f"{row['best_test_acc_mean']:.4f} +- {row['best_test_acc_std']:.4f} "
            f"(n={row['runs']})"
        )
    log.info("compare table: %s", table)
    return EXIT_OK


def cmd_simulate(args) -> int:
    segments = []
    for part in args.segments.split(","):
        lr_text, _, len_text = part.partition(":")
        try:
            segments.append((float(lr_text), int(len_text)))
        except ValueError:
            raise UsageError(f"bad segment {part!r}; want lr:length") from None
    schedule = OptSchedule(tuple(segments))
    trajectory = simulate(schedule, block=args.block, noise=args.noise, seed=args.seed)
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "aalr_lr", "opt_lr", "effective"])
        for e in trajectory.epochs:
            writer.writerow([e.index, e.lr, e.oracle_rate, int(e.effective)])
    ratio = delay_ratio(trajectory)
    print(f"aalr_epochs={trajectory.aalr_epochs} opt_epochs={trajectory.opt_epochs} "
          f"delay_ratio={ratio:.6f}")
    for b in trajectory.boundaries:
        line = (f"segment {b.segment}: gamma={b.gamma:g} at_epoch={b.at_epoch} "
                f"catch_up={b.catch_up}")
        if b.gamma > 1 and b.gamma.is_integer():
            summed = epochs_to_match_decrease(int(b.gamma))
            closed = matched_decrease_closed_form(int(b.gamma))
            line += f" expected={summed} closed_form={closed}"
            if closed != summed:
                line += " (closed form is off by one; the summation is authoritative)"
        print(line)
    return EXIT_OK


def cmd_trace(args) -> int:
    source = sys.stdin if args.infile == "-" else open(args.infile)
    with source:
        cases = json.load(source)
    if not isinstance(cases, list):
        raise UsageError("trace input must be a JSON array of cases")
    results = trace_sequences(cases)
    text = json.dumps(results)
    if args.out == "-":
        print(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aalr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single training run")
    p_run.add_argument("--scheduler", required=True, choices=list(_SCHEDULER_CLASSES))
    p_run.add_argument("--seed", type=int, default=0)
    _add_common_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="schedulers side by side")
    p_cmp.add_argument("--schedulers", required=True, help="comma-separated list")
    p_cmp.add_argument("--seeds", default="0", help="comma-separated seeds")
    _add_common_run_flags(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_sim = sub.add_parser("simulate", help="delay simulation against a rate oracle")
    p_sim.add_argument("--segments", required=True, help="lr:length,lr:length,...")
    p_sim.add_argument("--block", default="p1", choices=["p", "p1"])
    p_sim.add_argument("--noise", type=float, default=0.0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", default="simulation.csv")
    p_sim.set_defaults(func=cmd_simulate)

    p_tr = sub.add_parser("trace", help="loss sequences to directive streams")
    p_tr.add_argument("--infile", default="-", help="JSON file of cases, - for stdin")
    p_tr.add_argument("--out", default="-", help="output path, - for stdout")
    p_tr.set_defaults(func=cmd_trace)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("AALR_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
        raise AssertionError("unreachable")
    except (DomainError, FormatError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
