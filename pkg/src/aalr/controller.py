"""Two-phase learning-rate controller driven by per-block loss observations.

The controller never touches weights or data itself. Each observation of the
full-set training loss returns a fresh state plus an ordered list of
directives (set the LR, save or restore a checkpoint, reinitialize, train N
epochs, stop) for the harness to execute, which keeps every decision
deterministic and unit-testable.

Phase 1 searches downward for a stable starting LR: one epoch per block,
halving the LR and reinitializing the model whenever the loss worsens or
turns non-finite, until ten consecutive non-worsening epochs pass.

Phase 2 explores around the running best loss: double the LR after every
improvement, give a freshly doubled LR a second block before backing off,
halve the LR and double the patience otherwise, and reload the best
checkpoint only when the loss turns non-finite.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

__all__ = [
    "Phase",
    "ControllerState",
    "SetLr",
    "SaveCheckpoint",
    "RestoreCheckpoint",
    "ReinitializeModel",
    "TrainEpochs",
    "Stop",
    "Directive",
    "InitializationError",
    "ProtocolError",
    "new_controller",
    "initial_directives",
    "observe",
    "observe_phase1",
    "observe_phase2",
    "lr_trajectory",
]

log = logging.getLogger(__name__)

PHASE1_PATIENCE = 10

# No hard LR floor: halving may continue indefinitely, but a drop this far
# below the starting point almost certainly means the run is wedged.
UNDERFLOW_FACTOR = 2.0**-30


class InitializationError(ValueError):
    """Controller construction rejected (bad arguments or non-finite loss)."""


class ProtocolError(RuntimeError):
    """Observation sequence violated the controller protocol."""


class Phase(Enum):
    INITIAL_EXPLORATION = "initial_exploration"
    OPTIMISTIC_BINARY = "optimistic_binary"


@dataclass(frozen=True, slots=True)
class SetLr:
    """Use this LR from the next step on; implies zeroed momentum buffers."""

    lr: float


@dataclass(frozen=True, slots=True)
class SaveCheckpoint:
    """Overwrite the single checkpoint slot with the current weights."""


@dataclass(frozen=True, slots=True)
class RestoreCheckpoint:
    """Reload weights from the checkpoint slot."""


@dataclass(frozen=True, slots=True)
class ReinitializeModel:
    """Reload the initial weight snapshot taken before any training."""


@dataclass(frozen=True, slots=True)
class TrainEpochs:
    """Train for ``count`` full epochs, then report the loss."""

    count: int


@dataclass(frozen=True, slots=True)
class Stop:
    """Terminate the run; no observation may follow."""


Directive = SetLr | SaveCheckpoint | RestoreCheckpoint | ReinitializeModel | TrainEpochs | Stop


@dataclass(frozen=True, slots=True)
class ControllerState:
    """Immutable controller snapshot between observations.

    ``epoch`` counts epochs actually trained so far; ``pending_epochs`` is the
    size of the block directed but not yet observed. ``block`` selects the
    Phase 2 block length: "p" trains ``patience`` epochs per block, "p1"
    trains ``patience + 1``. Phase 1 always trains single epochs.
    """

    phase: Phase
    lr: float
    patience: int
    patience_counter: int
    best_loss: float
    epoch: int
    second_try_pending: bool
    epoch_budget: int
    initial_lr: float
    block: str = "p"
    pending_epochs: int = 0
    stopped: bool = False


def new_controller(
    initial_lr: float,
    epoch_budget: int,
    initial_loss: float,
    block: str = "p",
) -> ControllerState:
    """Build the Phase 1 starting state from the untrained model's loss.

    Raises InitializationError if the initial loss is non-finite (the model
    or data is broken before any training happened) or arguments are out of
    range. The caller should then apply :func:`initial_directives`.
    """
    if not (math.isfinite(initial_lr) and initial_lr > 0.0):
        raise InitializationError(f"initial_lr must be positive and finite, got {initial_lr!r}")
    if epoch_budget < 1:
        raise InitializationError(f"epoch_budget must be >= 1, got {epoch_budget!r}")
    if block not in ("p", "p1"):
        raise InitializationError(f"block must be 'p' or 'p1', got {block!r}")
    if not math.isfinite(initial_loss):
        raise InitializationError(f"initial loss is non-finite ({initial_loss!r}); refusing to start")
    return ControllerState(
        phase=Phase.INITIAL_EXPLORATION,
        lr=initial_lr,
        patience=PHASE1_PATIENCE,
        patience_counter=0,
        best_loss=initial_loss,
        epoch=0,
        second_try_pending=False,
        epoch_budget=epoch_budget,
        initial_lr=initial_lr,
        block=block,
        pending_epochs=1,
        stopped=False,
    )


def initial_directives(state: ControllerState) -> list[Directive]:
    """Directives that start the run: set the initial LR, train one epoch."""
    return [SetLr(state.lr), TrainEpochs(1)]


def observe(state: ControllerState, loss: float) -> tuple[ControllerState, list[Directive]]:
    """Feed one loss observation, dispatching on the current phase."""
    if state.phase is Phase.INITIAL_EXPLORATION:
        return observe_phase1(state, loss)
    return observe_phase2(state, loss)


def observe_phase1(state: ControllerState, loss: float) -> tuple[ControllerState, list[Directive]]:
    """Advance the initial-exploration phase by one observed epoch.

    A loss no worse than the best so far counts as progress (equality
    included) and updates the best. A worse or non-finite loss halves the LR,
    reloads the initial weights, and resets the progress counter; the best
    loss is deliberately kept. Ten consecutive progress epochs save a
    checkpoint, double the LR, and hand over to Phase 2.
    """
    _check_observable(state, Phase.INITIAL_EXPLORATION)
    epoch = state.epoch + state.pending_epochs

    if math.isfinite(loss) and loss <= state.best_loss:
        counter = state.patience_counter + 1
        if counter >= state.patience:
            # Stable LR found: checkpoint it, then start Phase 2 doubled.
            lr = state.lr * 2.0
            nxt = replace(
                state,
                phase=Phase.OPTIMISTIC_BINARY,
                lr=lr,
                patience=1,
                patience_counter=0,
                best_loss=loss,
                second_try_pending=False,
            )
            return _emit(nxt, epoch, [SaveCheckpoint(), SetLr(lr)], _block_len(nxt))
        nxt = replace(state, patience_counter=counter, best_loss=loss)
        return _emit(nxt, epoch, [], 1)

    lr = _halved(state)
    nxt = replace(state, lr=lr, patience_counter=0)
    return _emit(nxt, epoch, [ReinitializeModel(), SetLr(lr)], 1)


def observe_phase2(state: ControllerState, loss: float) -> tuple[ControllerState, list[Directive]]:
    """Advance the optimistic-exploration phase by one observed block.

    Non-finite loss: halve the LR, restore the best checkpoint, double the
    patience. Strict improvement: record it, save a checkpoint, double the
    LR, reset the patience. A first non-improving block earns a retry at the
    same LR; a second one halves the LR and doubles the patience without
    restoring.
    """
    _check_observable(state, Phase.OPTIMISTIC_BINARY)
    epoch = state.epoch + state.pending_epochs

    if not math.isfinite(loss):
        lr = _halved(state)
        nxt = replace(state, lr=lr, patience=state.patience * 2, second_try_pending=False)
        return _emit(nxt, epoch, [RestoreCheckpoint(), SetLr(lr)], _block_len(nxt))

    if loss < state.best_loss:
        lr = state.lr * 2.0
        nxt = replace(state, lr=lr, patience=1, best_loss=loss, second_try_pending=False)
        return _emit(nxt, epoch, [SaveCheckpoint(), SetLr(lr)], _block_len(nxt))

    if not state.second_try_pending:
        # Optimistic retry: same LR gets one more block before backing off.
        nxt = replace(state, second_try_pending=True)
        return _emit(nxt, epoch, [], _block_len(nxt))

    lr = _halved(state)
    nxt = replace(state, lr=lr, patience=state.patience * 2, second_try_pending=False)
    return _emit(nxt, epoch, [SetLr(lr)], _block_len(nxt))


def lr_trajectory(states: Sequence[ControllerState]) -> list[tuple[int, float]]:
    """Expand a chain of observed states into one (epoch, lr) pair per trained epoch.

    Consecutive states bracket a trained block: the earlier state's LR covers
    every epoch up to the later state's epoch count. A single state yields
    just its own (epoch, lr) pair.
    """
    if not states:
        raise ValueError("empty state sequence")
    if len(states) == 1:
        return [(states[0].epoch, states[0].lr)]
    out: list[tuple[int, float]] = []
    for prev, cur in zip(states, states[1:]):
        if cur.epoch < prev.epoch:
            raise ValueError(f"epoch went backwards: {prev.epoch} -> {cur.epoch}")
        out.extend((e, prev.lr) for e in range(prev.epoch, cur.epoch))
    return out


def _check_observable(state: ControllerState, expected: Phase) -> None:
    if state.stopped:
        raise ProtocolError("observation arrived after Stop")
    if state.phase is not expected:
        raise ProtocolError(f"observation for {expected.value} but controller is in {state.phase.value}")


def _block_len(state: ControllerState) -> int:
    return state.patience + 1 if state.block == "p1" else state.patience


def _halved(state: ControllerState) -> float:
    lr = state.lr / 2.0
    if lr < state.initial_lr * UNDERFLOW_FACTOR:
        log.warning(
            "learning rate %.3g fell below 2^-30 of its starting value %.3g; run is likely wedged",
            lr,
            state.initial_lr,
        )
    return lr


def _emit(
    state: ControllerState,
    epoch: int,
    prefix: list[Directive],
    block_len: int,
) -> tuple[ControllerState, list[Directive]]:
    """Attach the trailing TrainEpochs/Stop directive and the epoch bookkeeping.

    Blocks never overrun the budget: they are truncated to the remaining
    epochs, and once the budget is exhausted Stop replaces TrainEpochs and
    terminates the directive list.
    """
    if epoch >= state.epoch_budget:
        nxt = replace(state, epoch=epoch, pending_epochs=0, stopped=True)
        return nxt, [*prefix, Stop()]
    count = min(block_len, state.epoch_budget - epoch)
    nxt = replace(state, epoch=epoch, pending_epochs=count)
    return nxt, [*prefix, TrainEpochs(count)]
