"""Statistical harness: endpoint histograms over parallel trials,
chi-square / total-variation comparison, passive-fraction series, and
the wall-clock scaling benchmark.
"""

from __future__ import annotations

import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import chi2

from . import backend as backend_mod
from .continuous import ContinuousParams, run_continuous
from .crn import Crn
from .discrete import run_discrete
from .errors import DegenerateBins, InvalidParams
from .parser import parse_config, parse_crn
from .reference import gillespie_run


@dataclass(frozen=True)
class TrialSpec:
    """Picklable description of one endpoint experiment."""

    crn_text: str
    init_text: str
    volume: float
    species: str
    method: str = "batch"            # batch | gillespie | auto
    at_time: float | None = None
    at_steps: int | None = None
    time_sampler: str = "gamma"
    p: float | None = None
    backend: str | None = None

    def __post_init__(self):
        if (self.at_time is None) == (self.at_steps is None):
            raise InvalidParams("specify exactly one of at_time / at_steps")
        if self.method not in ("batch", "gillespie", "auto"):
            raise InvalidParams(f"unknown method {self.method!r}")


@lru_cache(maxsize=32)
def _parsed(crn_text: str, init_text: str, species: str):
    crn = parse_crn(crn_text)
    return crn, parse_config(init_text, crn).counts, crn.index_of(species)


def run_trial(spec: TrialSpec, seed: int) -> int:
    """One independent trial; returns the observable species count."""
    crn, counts, sid = _parsed(spec.crn_text, spec.init_text, spec.species)
    if spec.method == "gillespie":
        records = gillespie_run(crn, spec.volume, counts, t_max=spec.at_time,
                                steps_max=spec.at_steps, seed=seed,
                                backend=spec.backend)
        return int(records[-1].config[sid])
    hybrid = spec.method == "auto"
    if spec.at_steps is not None:
        result = run_discrete(crn, spec.volume, counts, spec.at_steps, seed=seed,
                              time_sampler=spec.time_sampler, use_hybrid=hybrid,
                              backend=spec.backend)
    else:
        params = ContinuousParams(spec.at_time, p=spec.p,
                                  time_sampler=spec.time_sampler)
        result = run_continuous(crn, spec.volume, counts, params, seed=seed,
                                use_hybrid=hybrid, backend=spec.backend)
    return int(result.final.config[sid])


def _trial_chunk(args) -> np.ndarray:
    spec, seed, lo, hi = args
    root = np.random.SeedSequence(seed)
    out = np.empty(hi - lo, dtype=np.int64)
    for i in range(lo, hi):
        trial_seed = int(np.random.SeedSequence(
            entropy=root.entropy, spawn_key=(i,)).generate_state(1)[0])
        out[i - lo] = run_trial(spec, trial_seed)
    return out


def default_workers() -> int:
    env = os.environ.get("CRNBATCH_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def endpoint_histogram(spec: TrialSpec, trials: int, seed: int = 0,
                       workers: int | None = None) -> Counter:
    """Histogram of the observable over independently seeded trials."""
    if trials < 1:
        raise InvalidParams("trials must be >= 1")
    workers = workers or default_workers()
    if workers <= 1 or trials < 64:
        values = _trial_chunk((spec, seed, 0, trials))
        return Counter(values.tolist())
    n_chunks = min(workers * 8, trials)
    bounds = np.linspace(0, trials, n_chunks + 1, dtype=int)
    jobs = [(spec, seed, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    hist: Counter = Counter()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for values in pool.map(_trial_chunk, jobs):
            hist.update(values.tolist())
    return hist


def _merge_bins(support: list, e1: np.ndarray, e2: np.ndarray,
                o1: np.ndarray, o2: np.ndarray, min_expected: float = 5.0):
    """Greedy adjacent merge until every pooled expected count is >= 5."""
    bins = []
    acc = np.zeros(4)
    for i in range(len(support)):
        acc += (e1[i], e2[i], o1[i], o2[i])
        if acc[0] >= min_expected and acc[1] >= min_expected:
            bins.append(acc.copy())
            acc[:] = 0
    if acc.any():
        if bins:
            bins[-1] += acc
        else:
            bins.append(acc.copy())
    return bins


def chisq_compare(h1: Counter, h2: Counter) -> tuple[float, float]:
    """Two-sample Pearson chi-square on pooled bins (expected < 5 merged)."""
    if not h1 or not h2:
        raise DegenerateBins("empty histogram")
    support = sorted(set(h1) | set(h2))
    o1 = np.array([h1.get(v, 0) for v in support], dtype=float)
    o2 = np.array([h2.get(v, 0) for v in support], dtype=float)
    n1, n2 = o1.sum(), o2.sum()
    pooled = (o1 + o2) / (n1 + n2)
    bins = _merge_bins(support, n1 * pooled, n2 * pooled, o1, o2)
    if len(bins) < 2:
        raise DegenerateBins("fewer than 2 bins after merging")
    stat = 0.0
    for e1, e2, x1, x2 in bins:
        stat += (x1 - e1) ** 2 / e1 + (x2 - e2) ** 2 / e2
    dof = len(bins) - 1
    return stat, float(chi2.sf(stat, dof))


def tvd(h1: Counter, h2: Counter) -> float:
    """Total variation distance between two empirical distributions."""
    if not h1 or not h2:
        raise DegenerateBins("empty histogram")
    n1 = sum(h1.values())
    n2 = sum(h2.values())
    support = set(h1) | set(h2)
    return 0.5 * sum(abs(h1.get(v, 0) / n1 - h2.get(v, 0) / n2) for v in support)


def hist_mean(h: Counter) -> float:
    n = sum(h.values())
    return sum(v * c for v, c in h.items()) / n


def passive_fraction_series(records) -> list[tuple[float, float]]:
    """(time, passive fraction since previous record) for each checkpoint."""
    return [(r.time, r.passive_fraction) for r in records[1:]]


def scaling_bench(crn_text: str, sizes, stop_time: float, init_fracs: dict[str, float],
                  methods=("batch", "gillespie"), seed: int = 0,
                  backends: tuple[str, ...] | None = None) -> list[dict]:
    """Wall-clock per method per population size (volume scales with n).

    Initial counts are round(frac*n) per species.  One timed run per
    cell, after a JIT warm-up pass.
    """
    crn = parse_crn(crn_text)
    rows = []
    backends = backends or (backend_mod.get_backend(),)
    previous = backend_mod.get_backend()
    try:
        for bk in backends:
            backend_mod.set_backend(bk)
            backend_mod.warm_up()
            for n in sizes:
                n = int(n)
                counts = np.zeros(crn.n_species, dtype=np.int64)
                for name, frac in init_fracs.items():
                    counts[crn.index_of(name)] = int(round(frac * n))
                for method in methods:
                    spec = TrialSpec(crn_text, "", float(n), crn.names[0],
                                     method=method, at_time=stop_time, backend=bk)
                    t0 = time.perf_counter()
                    _bench_once(crn, spec, counts, seed)
                    elapsed = time.perf_counter() - t0
                    rows.append({"n": n, "method": method, "backend": bk,
                                 "wall_time": elapsed})
    finally:
        backend_mod.set_backend(previous)
    return rows


def _bench_once(crn: Crn, spec: TrialSpec, counts: np.ndarray, seed: int) -> None:
    if spec.method == "gillespie":
        gillespie_run(crn, spec.volume, counts, t_max=spec.at_time, seed=seed,
                      backend=spec.backend)
    else:
        run_continuous(crn, spec.volume, counts, ContinuousParams(spec.at_time),
                       seed=seed, use_hybrid=spec.method == "auto",
                       backend=spec.backend)


def fit_loglog_slope(rows: list[dict], method: str, backend: str | None = None) -> float:
    pts = [(r["n"], r["wall_time"]) for r in rows
           if r["method"] == method and (backend is None or r["backend"] == backend)]
    if len(pts) < 2:
        raise InvalidParams(f"need at least two sizes for method {method}")
    xs = np.log([p[0] for p in pts])
    ys = np.log([p[1] for p in pts])
    return float(np.polyfit(xs, ys, 1)[0])
