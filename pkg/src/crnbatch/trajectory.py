"""Trajectory records and checkpoint bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TrajectoryRecord:
    step: int                   # executed (non-passive) reactions so far
    time: float
    config: np.ndarray = field(repr=False)   # counts over the source species
    passive_fraction: float     # passive/(passive+real) since the last record
    coarse: bool = False        # config is from the preceding batch boundary

    def key(self) -> tuple:
        return (self.step, self.time, tuple(int(c) for c in self.config))


class Recorder:
    """Collects records at user-requested step or time checkpoints.

    Checkpoints land on the batch boundary at or after their target;
    the initial state is always recorded.
    """

    def __init__(self, targets: np.ndarray):
        self.targets = np.asarray(targets, dtype=float)
        self._next = 0
        self.records: list[TrajectoryRecord] = []
        self._seg_real = 0
        self._seg_passive = 0

    def tally(self, real: int, passive: int) -> None:
        self._seg_real += real
        self._seg_passive += passive

    def _fraction(self) -> float:
        tot = self._seg_real + self._seg_passive
        return self._seg_passive / tot if tot else 0.0

    def emit(self, step: int, time: float, config: np.ndarray, coarse: bool = False) -> None:
        self.records.append(TrajectoryRecord(int(step), float(time),
                                             np.asarray(config, dtype=np.int64).copy(),
                                             self._fraction(), coarse))
        self._seg_real = 0
        self._seg_passive = 0

    def due(self, position: float) -> bool:
        return self._next < len(self.targets) and position >= self.targets[self._next]

    def pop_due(self, position: float) -> list[float]:
        out = []
        while self.due(position):
            out.append(float(self.targets[self._next]))
            self._next += 1
        return out


def checkpoint_targets(end: float, n: int) -> np.ndarray:
    """n evenly spaced interior checkpoints over (0, end)."""
    if n <= 0 or end <= 0:
        return np.empty(0)
    return np.linspace(0.0, float(end), n + 2)[1:-1]
