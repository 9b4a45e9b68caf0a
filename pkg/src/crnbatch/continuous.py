"""Continuous-time exact simulation.

Outer iterations work in population buckets tied to the catalyst-reset
rule: a bucket (k0 = population at entry, padded size n0 = 2.5 * k0,
batch quota ell_max) stays in force while the population remains within
a factor 0.7 of its entry value.  Inside one bucket the configuration
is padded with k0 catalysts plus inert waste to exactly n0 molecules at
every epoch start, so successive epochs draw their durations from the
identical hypoexponential distribution (the precondition for
adaptive-rejection amortization; envelopes are cached per spec, so
revisiting a bucket resumes its adaptive state).  The 2.5 headroom
guarantees nonnegative waste padding up to the 1/0.7 drift bound while
keeping the padding-induced passive inflation well below the
power-of-two worst case.

An epoch simulates ell_max total reactions via the batch engine; when
the sampled epoch duration would overrun the deadline, end-of-run
rejection sampling decides how many stage reactions fit, and those are
simulated without a trailing collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import get_engine
from .crn import Crn, as_counts, order_and_generativity, total_propensity
from .errors import InvalidParams, RejectionLimitExceeded
from .discrete import (BatchStats, Decision, K_REFRESH_FACTOR, RunResult,
                       _streams, hybrid_policy)
from .hypoexp import HypoexpSpec, TimeSampler, sample_end_of_run
from .trajectory import Recorder, checkpoint_targets
from .uniformize import slowdown_factor, uniformize

# below this population the batching overhead cannot pay off; the exact
# per-reaction kernel takes over (distribution unchanged)
TINY_POPULATION_FACTOR = 4
# padded bucket size over the entry population; must exceed
# 1 + 1/K_REFRESH_FACTOR so waste padding stays nonnegative until the
# drift check triggers a new bucket
PAD_HEADROOM = 2.5
# refresh eagerly when the population shrinks: a shrinking population
# under a fixed n0 inflates the passive fraction quadratically
SHRINK_REFRESH_FACTOR = 0.9


def choose_p(n: int, ell_estimate: float) -> float:
    """Batching exponent: 1/2 once runs are long (l >= n^(5/4)), else 2/5."""
    if n < 1:
        raise InvalidParams("population must be >= 1")
    return 0.5 if ell_estimate >= float(n) ** 1.25 else 0.4


@dataclass(frozen=True)
class ContinuousParams:
    t_max: float
    p: float | None = None          # None: pick per run via choose_p
    time_sampler: str = "gamma"

    def __post_init__(self):
        if self.t_max < 0:
            raise InvalidParams("t_max must be nonnegative")
        if self.p is not None and not 0.0 < self.p <= 0.5:
            raise InvalidParams(f"p must lie in (0, 1/2], got {self.p}")


@dataclass
class _Bucket:
    n_entry: int
    n0: int
    k0: int
    uni: object
    ell_max: int
    spec: HypoexpSpec

    def holds(self, n: int) -> bool:
        ratio = n / self.n_entry
        return SHRINK_REFRESH_FACTOR <= ratio <= 1.0 / K_REFRESH_FACTOR


def run_continuous(crn: Crn, volume: float, config, params: ContinuousParams, *,
                   seed: int = 0, checkpoints: int = 0, use_hybrid: bool = False,
                   backend: str | None = None) -> RunResult:
    """Sample the continuous t-future of `crn` at params.t_max."""
    if volume <= 0:
        raise InvalidParams("volume must be positive")
    counts = as_counts(config, crn.n_species)
    o, g = order_and_generativity(crn)
    t_max = float(params.t_max)
    reaction_seed, time_rng = _streams(seed)
    engine = get_engine(reaction_seed, backend)
    sampler = TimeSampler(params.time_sampler)
    recorder = Recorder(checkpoint_targets(t_max, checkpoints))
    recorder.emit(0, 0.0, counts)
    result = RunResult(recorder.records)
    if t_max <= 0:
        return result
    p = params.p
    if p is None:
        ptot0 = total_propensity(counts, volume, crn)
        p = choose_p(max(int(counts.sum()), 1), t_max * ptot0)
    t = 0.0
    done = 0
    stats = BatchStats()
    bucket: _Bucket | None = None
    while True:
        if total_propensity(counts, volume, crn) <= 0.0:
            # terminal: the configuration is exact at every later time
            result.terminal = True
            for target in recorder.pop_due(t_max):
                recorder.emit(done, target, counts)
            recorder.emit(done, t_max, counts)
            return result
        n = int(counts.sum())
        # the passive-window policy check is cheap and runs per epoch; the
        # slowdown estimate (a fresh uniformization) only at bucket refresh
        if n < TINY_POPULATION_FACTOR * o or (
                use_hybrid and bucket is not None
                and hybrid_policy(None, stats) is Decision.FALLBACK_GILLESPIE):
            _gillespie_tail(crn, volume, counts, t, t_max, done, engine, recorder, result)
            result.fell_back = True
            return result
        if bucket is None or not bucket.holds(n):
            if use_hybrid and _want_fallback(crn, counts, volume, stats):
                _gillespie_tail(crn, volume, counts, t, t_max, done, engine,
                                recorder, result)
                result.fell_back = True
                return result
            k0 = max(n, o)
            uni = uniformize(crn, volume, k0)
            ell_max = max(1, int(float(n) ** p))
            n0 = math.ceil(PAD_HEADROOM * max(n, k0))
            bucket = _Bucket(n, n0, k0, uni,
                             ell_max, HypoexpSpec(n0, ell_max, o, g, uni.rate_scale))
        waste = bucket.n0 - n - bucket.k0
        assert waste >= 0, "pad headroom violated"
        t0 = sampler.sample(bucket.spec, time_rng)
        budget = bucket.ell_max
        ending = t + t0 > t_max
        if ending:
            try:
                budget, _ = sample_end_of_run(bucket.spec, t_max - t, time_rng)
            except RejectionLimitExceeded:
                # the overshoot was too unlikely to condition on by rejection;
                # redo this epoch with unconditioned per-stage times (exact,
                # and independent of the discarded aggregate draw)
                stage_sum = np.cumsum(
                    time_rng.standard_exponential(bucket.spec.k)
                    / bucket.spec.scaled_rates())
                over = np.nonzero(t + stage_sum > t_max)[0]
                if over.size == 0:
                    ending = False
                    t0 = float(stage_sum[-1])
                else:
                    budget = int(over[0])
        pre_epoch, done_pre = counts, done
        if budget > 0:
            counts = _run_epoch(engine, bucket, counts, waste, budget,
                                stats, recorder, result)
            done = result.total_real
        if ending:
            for target in recorder.pop_due(t_max):
                recorder.emit(done_pre, target, pre_epoch, coarse=True)
            recorder.emit(done, t_max, counts)
            return result
        t += t0
        for target in recorder.pop_due(t):
            recorder.emit(done_pre, target, pre_epoch, coarse=True)


def _run_epoch(engine, bucket, counts, waste, budget, stats, recorder, result):
    """Simulate exactly `budget` total reactions of the padded configuration."""
    padded = bucket.uni.padded(counts, waste=waste)
    remaining = budget
    while remaining > 0:
        total, real, passive, _collided = engine.batch(bucket.uni, padded, remaining)
        remaining -= int(total)
        result.total_real += int(real)
        result.total_passive += int(passive)
        stats.push(int(real), int(passive), int(padded.sum()))
        recorder.tally(int(real), int(passive))
    return bucket.uni.strip(padded)


def _want_fallback(crn, counts, volume, stats) -> bool:
    try:
        report = slowdown_factor(crn, counts, volume)
    except ValueError:
        return True
    return hybrid_policy(report, stats) is Decision.FALLBACK_GILLESPIE


def _gillespie_tail(crn, volume, counts, t, t_max, done, engine, recorder, result):
    """Exact per-reaction finish for tiny populations or the hybrid policy."""
    remaining_targets = [tau - t for tau in recorder.pop_due(t_max)]
    res = engine.gillespie(crn, volume, counts, t_max=t_max - t,
                           thresholds=np.array(remaining_targets))
    result.terminal = res.terminal
    result.total_real += int(res.steps[-1])
    recorder.tally(int(res.steps[-1]), 0)
    for idx in range(len(res.times) - 1):
        recorder.emit(done + int(res.steps[idx]), t + float(res.times[idx]),
                      res.counts[idx])
    recorder.emit(done + int(res.steps[-1]), t_max, res.counts[-1])
