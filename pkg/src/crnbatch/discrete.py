"""Discrete-time batched simulation: run batches until the requested
number of (non-passive) reactions has executed.

Each outer iteration pads the configuration with k0 catalysts, runs one
batch bounded by the remaining step budget, strips catalyst and waste,
and re-uniformizes only when the population has drifted by the refresh
factor 0.7 (recomputing adjusted rate constants every batch would
dominate the runtime; any fixed k0 keeps the sampling exact).

Batch durations are sampled from the matching hypoexponential purely to
timestamp the records: they come from a dedicated time RNG stream, so
the configuration sequence is identical whichever time sampler runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .backend import get_engine
from .crn import Crn, as_counts, order_and_generativity, total_propensity
from .errors import InvalidParams
from .hypoexp import HypoexpSpec, TimeSampler
from .trajectory import Recorder, TrajectoryRecord, checkpoint_targets
from .uniformize import SlowdownReport, uniformize

K_REFRESH_FACTOR = 0.7
PASSIVE_FALLBACK_THRESHOLD = 0.95
# batching is asymptotically worth S ~ sqrt(n); beyond this margin the
# per-reaction work of Gillespie wins
SLOWDOWN_MARGIN = 0.25


class Decision(Enum):
    BATCH = "batch"
    FALLBACK_GILLESPIE = "gillespie"


@dataclass
class BatchStats:
    """Sliding tallies the hybrid policy inspects."""

    window_real: int = 0
    window_passive: int = 0
    population: int = 0

    @property
    def passive_fraction(self) -> float:
        tot = self.window_real + self.window_passive
        return self.window_passive / tot if tot else 0.0

    def push(self, real: int, passive: int, population: int, horizon: int = 4096) -> None:
        self.window_real += real
        self.window_passive += passive
        self.population = population
        tot = self.window_real + self.window_passive
        if tot > horizon:  # exponential forgetting keeps the window bounded
            self.window_real //= 2
            self.window_passive //= 2


def hybrid_policy(report: SlowdownReport | None, stats: BatchStats,
                  threshold: float = PASSIVE_FALLBACK_THRESHOLD) -> Decision:
    """Pure performance policy; the output distribution is exact either way."""
    total = stats.window_real + stats.window_passive
    if total >= 256 and stats.passive_fraction > threshold:
        return Decision.FALLBACK_GILLESPIE
    if report is not None and math.isfinite(report.slowdown) and stats.population > 0:
        if report.slowdown > SLOWDOWN_MARGIN * math.sqrt(stats.population):
            return Decision.FALLBACK_GILLESPIE
    return Decision.BATCH


@dataclass
class RunResult:
    records: list[TrajectoryRecord]
    terminal: bool = False
    fell_back: bool = False
    total_real: int = 0
    total_passive: int = 0

    @property
    def final(self) -> TrajectoryRecord:
        return self.records[-1]


def _streams(seed):
    root = np.random.SeedSequence(seed)
    reaction_ss, time_ss = root.spawn(2)
    reaction_seed = int(reaction_ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
    return reaction_seed, np.random.default_rng(time_ss)


def run_discrete(crn: Crn, volume: float, config, steps: int, *, seed: int = 0,
                 time_sampler: str = "gamma", checkpoints: int = 0,
                 use_hybrid: bool = False, backend: str | None = None) -> RunResult:
    """Sample the discrete l-future of `crn` after `steps` reactions.

    Terminal configurations self-transition: the remaining budget is
    consumed with the configuration (and clock) frozen.
    """
    if steps < 0 or volume <= 0:
        raise InvalidParams("need steps >= 0 and volume > 0")
    counts = as_counts(config, crn.n_species)
    o, _ = order_and_generativity(crn)
    reaction_seed, time_rng = _streams(seed)
    engine = get_engine(reaction_seed, backend)
    sampler = TimeSampler(time_sampler)
    recorder = Recorder(checkpoint_targets(steps, checkpoints))
    recorder.emit(0, 0.0, counts)
    result = RunResult(recorder.records)
    if steps == 0:
        return result
    stats = BatchStats()
    done = 0
    t = 0.0
    uni = None
    while done < steps:
        if total_propensity(counts, volume, crn) <= 0.0:
            result.terminal = True
            for target in recorder.pop_due(steps):
                recorder.emit(int(target), t, counts)
            recorder.emit(steps, t, counts)
            return result
        n = int(counts.sum())
        k0 = max(n, o)
        if uni is None or not (K_REFRESH_FACTOR <= uni.k0 / k0 <= 1.0 / K_REFRESH_FACTOR):
            uni = uniformize(crn, volume, k0)
        if use_hybrid and hybrid_policy(None, stats) is Decision.FALLBACK_GILLESPIE:
            _gillespie_remainder(crn, volume, counts, steps - done, done, t,
                                 engine, recorder, result)
            result.fell_back = True
            return result
        padded = uni.padded(counts)
        n_start = int(padded.sum())
        total, real, passive, _collided = engine.batch(uni, padded, steps - done)
        counts = uni.strip(padded)
        done += int(real)
        result.total_real += int(real)
        result.total_passive += int(passive)
        stats.push(int(real), int(passive), n)
        recorder.tally(int(real), int(passive))
        t += sampler.sample(HypoexpSpec(n_start, int(total), uni.order,
                                        uni.generativity, uni.rate_scale), time_rng)
        for target in recorder.pop_due(done):
            recorder.emit(done, t, counts)
    recorder.emit(done, t, counts)
    return result


def _gillespie_remainder(crn, volume, counts, remaining_steps, done, t,
                         engine, recorder, result) -> None:
    """Finish the run with the exact per-reaction kernel (hybrid fallback)."""
    end = done + remaining_steps
    targets = recorder.pop_due(end)
    res = engine.gillespie(crn, volume, counts, steps_max=remaining_steps,
                           thresholds=[tau - done for tau in targets])
    result.terminal = res.terminal
    result.total_real += int(res.steps[-1])
    recorder.tally(int(res.steps[-1]), 0)
    for idx in range(len(targets)):
        recorder.emit(done + int(res.steps[idx]), t + float(res.times[idx]),
                      res.counts[idx])
    recorder.emit(end, t + float(res.times[-1]), res.counts[-1])
