"""Delay measurements against a privileged piecewise-constant LR oracle.

The oracle follows a fixed schedule of (rate, length) segments and is
assumed to train optimally: one unit of progress per epoch. The controller
under test only makes progress during epochs whose LR does not exceed the
oracle's current rate. ``simulate`` runs the real Phase 2 controller against
that improvement signal, one synthetic loss per block:

* every epoch looks up the oracle rate at the current progress position;
  the epoch is effective iff the controller's LR <= that rate, and each
  effective epoch advances the position by one;
* a block that advanced the position reports a strictly improved loss (the
  state reached further along the stable trajectory than ever before); a
  block that made no progress reports a worsened one;
* the run finishes when the position reaches the schedule's total length.

Rate changes take effect at the observation that first reports a position
inside the new segment, so a drop by gamma is always met from twice the old
rate and the catch-up chain below applies to every drop, not just drops
that land exactly on a block boundary.

``delay_ratio`` is then total controller epochs over total oracle epochs.
``epochs_to_match_decrease`` gives the exact epoch count the controller
needs to re-match the oracle after a rate drop by ``gamma``, assuming the
drop lands right at an improvement observation: the doubled LR must be
halved ``1 + log2(gamma)`` times, and each halving first costs a block and
a retry at the rejected rate. The quantity is computed by direct summation;
``matched_decrease_closed_form`` keeps the tidier-looking closed form,
which disagrees with the summation by exactly one and is retained only for
side-by-side reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from aalr.controller import ControllerState, Phase, observe_phase2
from aalr.errors import DomainError

__all__ = [
    "OptSchedule",
    "SimEpoch",
    "Boundary",
    "SimTrajectory",
    "simulate",
    "delay_ratio",
    "epochs_to_match_increase",
    "epochs_to_match_decrease",
    "matched_decrease_closed_form",
]

# Oracle rule of thumb: after dropping its rate by gamma, the oracle keeps
# the new rate for at least DECREASE_DWELL_FACTOR * gamma epochs.
DECREASE_DWELL_FACTOR = 2


def _power_of_two_exponent(value: float, what: str) -> int:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{what} must be positive and finite, got {value!r}")
    k = round(math.log2(value))
    if 2.0**k != value:
        raise DomainError(f"{what} must be a power of two, got {value!r}")
    return k


@dataclass(frozen=True)
class OptSchedule:
    """Piecewise-constant oracle schedule: ((rate, length), ...).

    Consecutive rate changes must be powers of two in either direction, and
    a segment that ends in a drop by gamma must be at least 2 * gamma epochs
    long: a sharper drop earns a proportionally longer dwell before it.
    """

    segments: tuple[tuple[float, int], ...]

    def __post_init__(self):
        segs = tuple((float(lr), int(n)) for lr, n in self.segments)
        for lr, n in segs:
            if not (math.isfinite(lr) and lr > 0):
                raise DomainError(f"segment rate must be positive, got {lr!r}")
            if n < 1:
                raise DomainError(f"segment length must be >= 1, got {n}")
        for i, (gamma, _) in enumerate(zip(self.change_factors(segs), segs)):
            _power_of_two_exponent(gamma if gamma >= 1 else 1.0 / gamma, f"change factor {gamma}")
            if gamma > 1 and segs[i][1] < DECREASE_DWELL_FACTOR * gamma:
                raise DomainError(
                    f"segment {i} is {segs[i][1]} epochs but drops by {gamma}: "
                    f"needs at least {DECREASE_DWELL_FACTOR * gamma}"
                )
        object.__setattr__(self, "segments", segs)

    @staticmethod
    def change_factors(segments) -> list[float]:
        """gamma_i = rate_i / rate_{i+1}; > 1 means segment i ends in a drop."""
        return [a[0] / b[0] for a, b in zip(segments, segments[1:])]

    @property
    def total_epochs(self) -> int:
        return sum(n for _, n in self.segments)

    def rate_at(self, position: int) -> float:
        """Oracle rate in force at progress position (0-based)."""
        if position < 0 or position >= self.total_epochs:
            raise DomainError(f"position {position} outside schedule of length {self.total_epochs}")
        for lr, n in self.segments:
            if position < n:
                return lr
            position -= n
        raise AssertionError("unreachable")


@dataclass(frozen=True, slots=True)
class SimEpoch:
    """One trained epoch: controller LR, oracle rate, and whether it counted."""

    index: int
    lr: float
    oracle_rate: float
    effective: bool


@dataclass(frozen=True, slots=True)
class Boundary:
    """A rate change: gamma > 1 is a drop. ``at_epoch`` is the controller
    epoch count when the change took effect; ``catch_up`` counts epochs until
    the controller's LR re-matched the new rate (None if the run ended first)."""

    segment: int
    gamma: float
    at_epoch: int
    catch_up: int | None


@dataclass(frozen=True)
class SimTrajectory:
    schedule: OptSchedule
    block: str
    epochs: tuple[SimEpoch, ...]
    boundaries: tuple[Boundary, ...]

    @property
    def aalr_epochs(self) -> int:
        return len(self.epochs)

    @property
    def opt_epochs(self) -> int:
        return self.schedule.total_epochs

    @property
    def aalr_lrs(self) -> list[tuple[int, float]]:
        """Controller LR per trained epoch."""
        return [(e.index, e.lr) for e in self.epochs]

    @property
    def opt_lrs(self) -> list[tuple[int, float]]:
        """Oracle rate in force per trained epoch."""
        return [(e.index, e.oracle_rate) for e in self.epochs]

    @property
    def catch_up_epochs(self) -> list[int]:
        """Catch-up cost per segment: entry i holds the epochs segment i's
        entry crossing took to re-match (0 for the starting segment and for
        crossings the run never reached or never re-matched)."""
        out = [0] * len(self.schedule.segments)
        for b in self.boundaries:
            out[b.segment] = b.catch_up or 0
        return out


def simulate(
    schedule: OptSchedule,
    block: str = "p1",
    noise: float = 0.0,
    seed: int = 0,
    max_epochs: int | None = None,
) -> SimTrajectory:
    """Run the Phase 2 controller against the oracle's improvement signal.

    The controller enters at twice the oracle's starting rate (Phase 1 is
    assumed to have settled exactly on it, and the Phase 2 hand-off doubles).
    ``noise`` is the probability that a genuinely improved block is reported
    as not improved; the default is the noise-free signal.
    """
    if not 0.0 <= noise < 1.0:
        raise DomainError(f"noise must be in [0, 1), got {noise!r}")
    if not schedule.segments:
        return SimTrajectory(schedule, block, (), ())
    rho0 = schedule.segments[0][0]
    total = schedule.total_epochs
    budget = max_epochs if max_epochs is not None else max(200 * total, 10_000)
    rng = np.random.default_rng(seed)

    state = ControllerState(
        phase=Phase.OPTIMISTIC_BINARY,
        lr=2.0 * rho0,
        patience=1,
        patience_counter=0,
        best_loss=0.0,
        epoch=0,
        second_try_pending=False,
        epoch_budget=budget + 1,
        initial_lr=rho0,
        block=block,
        pending_epochs=2 if block == "p1" else 1,
    )

    cumulative = []
    acc = 0
    for _, n in schedule.segments:
        acc += n
        cumulative.append(acc)

    records: list[SimEpoch] = []
    crossings: list[tuple[int, int]] = []  # (new segment index, observation epoch)
    observations: list[tuple[int, float]] = []  # (epochs so far, lr after observing)
    pos = 0
    best_pos = 0
    segment = 0
    epoch = 0

    while pos < total:
        if epoch >= budget:
            raise DomainError(f"simulation exceeded {budget} epochs without finishing the schedule")
        for _ in range(state.pending_epochs):
            rate = schedule.rate_at(pos)
            effective = state.lr <= rate
            records.append(SimEpoch(epoch, state.lr, rate, effective))
            epoch += 1
            if effective:
                pos += 1
                if pos >= total:
                    break
        if pos >= total:
            break
        improved = pos > best_pos
        if improved and noise > 0.0 and rng.random() < noise:
            improved = False
        if improved:
            best_pos = pos
            loss = -float(pos)
        else:
            loss = state.best_loss + 1.0
        state, _ = observe_phase2(state, loss)
        observations.append((epoch, state.lr))
        while segment < len(cumulative) - 1 and pos >= cumulative[segment]:
            segment += 1
            crossings.append((segment, epoch))

    boundaries = []
    factors = OptSchedule.change_factors(schedule.segments)
    for new_segment, at_epoch in crossings:
        gamma = factors[new_segment - 1]
        new_rate = schedule.segments[new_segment][0]
        matched = None
        if gamma > 1:
            hit = next((e for e, lr in observations if e >= at_epoch and lr <= new_rate), None)
        elif gamma < 1:
            hit = next((e for e, lr in observations if e >= at_epoch and lr >= new_rate), None)
        else:
            hit = at_epoch
        if hit is not None:
            matched = hit - at_epoch
        boundaries.append(Boundary(new_segment, gamma, at_epoch, matched))

    return SimTrajectory(schedule, block, tuple(records), tuple(boundaries))


def delay_ratio(trajectory: SimTrajectory) -> float:
    """Total controller epochs over total oracle epochs for the schedule."""
    if trajectory.opt_epochs == 0:
        raise DomainError("schedule has zero length")
    return trajectory.aalr_epochs / trajectory.opt_epochs


def epochs_to_match_increase(gamma: float) -> int:
    """Epochs to climb after the oracle raises its rate by gamma: two per
    doubling. gamma = 1 is a no-op."""
    k = _power_of_two_exponent(gamma, "gamma")
    if k < 0:
        raise DomainError(f"gamma must be >= 1, got {gamma!r}")
    return 2 * k


def epochs_to_match_decrease(gamma: float) -> int:
    """Epochs wasted re-matching the oracle after a drop by gamma, computed
    by direct summation: sum of 2 * (2**i + 1) over the 1 + log2(gamma)
    halvings, counting a block plus a retry at each rejected rate."""
    k = _power_of_two_exponent(gamma, "gamma")
    if k < 1:
        raise DomainError(f"gamma must be >= 2, got {gamma!r}")
    n = 1 + k
    return sum(2 * (2**i + 1) for i in range(n))


def matched_decrease_closed_form(gamma: float) -> int:
    """Closed-form candidate 2n + 2**(n+1) - 1 for the same quantity; off by
    one from the summation, kept only so reports can show both."""
    k = _power_of_two_exponent(gamma, "gamma")
    if k < 1:
        raise DomainError(f"gamma must be >= 2, got {gamma!r}")
    n = 1 + k
    return 2 * n + 2 ** (n + 1) - 1
