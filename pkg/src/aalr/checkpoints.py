"""Single-slot checkpoint stores: latest-best in memory or on disk.

Only one checkpoint exists at a time; saving overwrites it, restoring never
consumes it. The file layout is fixed so checkpoints survive process
restarts: magic ``AALR1``, parameter count as little-endian uint64, then
little-endian float64 parameters, momentum, best loss, the epoch as uint64,
and the LR at save time.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Checkpoint",
    "MemoryCheckpointStore",
    "FileCheckpointStore",
    "NoCheckpointError",
    "CorruptCheckpointError",
]

MAGIC = b"AALR1"


class NoCheckpointError(LookupError):
    """Restore was requested but nothing has been saved."""


class CorruptCheckpointError(ValueError):
    """Checkpoint bytes do not parse as the expected layout."""


@dataclass(frozen=True)
class Checkpoint:
    """Flat weight snapshot plus the bookkeeping needed to resume."""

    parameters: np.ndarray  # 1-D float64
    momentum: np.ndarray  # same length as parameters
    best_loss: float
    epoch: int
    lr_at_save: float

    def __post_init__(self):
        params = np.ascontiguousarray(self.parameters, dtype=np.float64)
        mom = np.ascontiguousarray(self.momentum, dtype=np.float64)
        if params.ndim != 1 or mom.ndim != 1:
            raise ValueError("parameters and momentum must be 1-D vectors")
        if params.shape != mom.shape:
            raise ValueError(f"momentum length {mom.shape[0]} != parameter length {params.shape[0]}")
        if not math.isfinite(self.best_loss):
            raise ValueError(f"refusing checkpoint with non-finite best_loss {self.best_loss!r}")
        if self.epoch < 0:
            raise ValueError(f"epoch must be >= 0, got {self.epoch}")
        object.__setattr__(self, "parameters", params)
        object.__setattr__(self, "momentum", mom)


class MemoryCheckpointStore:
    """In-process slot; arrays are copied both ways so later training steps
    cannot mutate the stored snapshot."""

    def __init__(self):
        self._slot: Checkpoint | None = None

    def save(self, checkpoint: Checkpoint) -> None:
        self._slot = Checkpoint(
            parameters=checkpoint.parameters.copy(),
            momentum=checkpoint.momentum.copy(),
            best_loss=checkpoint.best_loss,
            epoch=checkpoint.epoch,
            lr_at_save=checkpoint.lr_at_save,
        )

    def restore(self) -> Checkpoint:
        if self._slot is None:
            raise NoCheckpointError("nothing saved yet")
        s = self._slot
        return Checkpoint(s.parameters.copy(), s.momentum.copy(), s.best_loss, s.epoch, s.lr_at_save)

    def __bool__(self) -> bool:
        return self._slot is not None


class FileCheckpointStore:
    """One checkpoint per file path, written atomically on save."""

    def __init__(self, path: str | os.PathLike):
        self.path = os.fspath(path)

    def save(self, checkpoint: Checkpoint) -> None:
        blob = encode_checkpoint(checkpoint)
        tmp = self.path + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, self.path)

    def restore(self) -> Checkpoint:
        if not os.path.exists(self.path):
            raise NoCheckpointError(f"no checkpoint at {self.path}")
        with open(self.path, "rb") as fh:
            return decode_checkpoint(fh.read())

    def __bool__(self) -> bool:
        return os.path.exists(self.path)


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    n = checkpoint.parameters.shape[0]
    head = MAGIC + struct.pack("<Q", n)
    body = (
        checkpoint.parameters.astype("<f8", copy=False).tobytes()
        + checkpoint.momentum.astype("<f8", copy=False).tobytes()
        + struct.pack("<d", checkpoint.best_loss)
        + struct.pack("<Q", checkpoint.epoch)
        + struct.pack("<d", checkpoint.lr_at_save)
    )
    return head + body


def decode_checkpoint(blob: bytes) -> Checkpoint:
    if blob[: len(MAGIC)] != MAGIC:
        raise CorruptCheckpointError(f"bad magic {blob[:len(MAGIC)]!r}")
    offset = len(MAGIC)
    if len(blob) < offset + 8:
        raise CorruptCheckpointError("truncated before parameter count")
    (n,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    expected = offset + 16 * n + 8 + 8 + 8
    if len(blob) != expected:
        raise CorruptCheckpointError(f"expected {expected} bytes for {n} parameters, got {len(blob)}")
    params = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).copy()
    offset += 8 * n
    momentum = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).copy()
    offset += 8 * n
    (best_loss,) = struct.unpack_from("<d", blob, offset)
    offset += 8
    (epoch,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    (lr_at_save,) = struct.unpack_from("<d", blob, offset)
    return Checkpoint(params, momentum, best_loss, epoch, lr_at_save)
