"""Closed-form baseline LR schedules: step decay, cosine with warm restarts,
and a triangular cyclic policy.

These are pure functions of the epoch index so comparison runs can share one
code path: the harness asks ``lr_at(schedule, epoch)`` before each epoch and
never mutates the schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from aalr.errors import DomainError

__all__ = ["StepDecay", "CosineRestarts", "CyclicTriangular", "Schedule", "lr_at"]


@dataclass(frozen=True, slots=True)
class StepDecay:
    """base_lr scaled by gamma once per milestone already reached."""

    base_lr: float
    gamma: float = 0.1
    milestones: tuple[int, ...] = (30, 60)

    def __post_init__(self):
        if not (math.isfinite(self.base_lr) and self.base_lr > 0):
            raise DomainError(f"base_lr must be positive, got {self.base_lr!r}")
        if not (0 < self.gamma <= 1):
            raise DomainError(f"gamma must be in (0, 1], got {self.gamma!r}")
        ms = tuple(self.milestones)
        if any(m < 0 for m in ms) or any(b <= a for a, b in zip(ms, ms[1:])):
            raise DomainError(f"milestones must be non-negative and strictly increasing, got {ms!r}")
        object.__setattr__(self, "milestones", ms)

    def lr(self, epoch: int) -> float:
        k = sum(1 for m in self.milestones if m <= epoch)
        return self.base_lr * self.gamma**k


@dataclass(frozen=True, slots=True)
class CosineRestarts:
    """Cosine annealing from eta_max to eta_min, restarting with periods that
    grow by period_mult: eta_min + (eta_max - eta_min) * (1 + cos(pi*t/T)) / 2."""

    eta_max: float
    eta_min: float = 0.0
    period_0: int = 10
    period_mult: int = 2

    def __post_init__(self):
        if not (math.isfinite(self.eta_max) and self.eta_max > 0):
            raise DomainError(f"eta_max must be positive, got {self.eta_max!r}")
        if not (0 <= self.eta_min < self.eta_max):
            raise DomainError(f"need 0 <= eta_min < eta_max, got {self.eta_min!r}")
        if self.period_0 < 1 or self.period_mult < 1:
            raise DomainError("period_0 and period_mult must be >= 1")

    def lr(self, epoch: int) -> float:
        t, period = epoch, self.period_0
        while t >= period:
            t -= period
            period *= self.period_mult
        return self.eta_min + 0.5 * (self.eta_max - self.eta_min) * (1.0 + math.cos(math.pi * t / period))


@dataclass(frozen=True, slots=True)
class CyclicTriangular:
    """Linear ramp base_lr -> max_lr over half_cycle epochs, then back down."""

    base_lr: float
    max_lr: float
    half_cycle: int = 5

    def __post_init__(self):
        if not (math.isfinite(self.base_lr) and self.base_lr > 0):
            raise DomainError(f"base_lr must be positive, got {self.base_lr!r}")
        if not (math.isfinite(self.max_lr) and self.max_lr > self.base_lr):
            raise DomainError(f"max_lr must exceed base_lr, got {self.max_lr!r}")
        if self.half_cycle < 1:
            raise DomainError(f"half_cycle must be >= 1, got {self.half_cycle!r}")

    def lr(self, epoch: int) -> float:
        pos = epoch % (2 * self.half_cycle)
        span = self.max_lr - self.base_lr
        if pos <= self.half_cycle:
            return self.base_lr + span * (pos / self.half_cycle)
        return self.max_lr - span * ((pos - self.half_cycle) / self.half_cycle)


Schedule = StepDecay | CosineRestarts | CyclicTriangular


def lr_at(schedule: Schedule, epoch: int) -> float:
    """LR for the given epoch index; epochs are 0-based and non-negative."""
    if epoch < 0:
        raise DomainError(f"epoch must be >= 0, got {epoch}")
    return schedule.lr(epoch)
