"""Acceptance suite: one test per exit criterion, pinned seeds and
tolerances, a PASS line printed per criterion.

The dimerization network is written with rate constants (2, 1): under
the factorial propensity convention used throughout this package that
is the same kinetics as rates (1, 1) in the convention without the
r(A)! divisor, which is what the reference expectation E[#D] ~= 20.5 at
t = 0.5 was measured under (see README on conversions).
"""

import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

import crnbatch as cb
from crnbatch.collision import CollisionRunParams, coll_log_ccdf, urn_run_length
from crnbatch.hypoexp import first_last_delta
from crnbatch.validate import (TrialSpec, chisq_compare, endpoint_histogram,
                               fit_loglog_slope, hist_mean, scaling_bench)
from gen import random_crn

DIMER = "2M <-> D : 2, 1"
LV = "R -> 2R : 1\nF -> : 1\nF + R -> 2F : 1"
ALPHA = 1e-3


def _report(criterion: str, detail: str):
    print(f"ACCEPTANCE {criterion}: PASS ({detail})")


def test_criterion_01_continuous_exactness():
    trials = 200_000
    gill = endpoint_histogram(
        TrialSpec(DIMER, "M=100", 100.0, "D", method="gillespie", at_time=0.5),
        trials, seed=1001)
    details = []
    for sampler, seed in (("exact", 1002), ("gamma", 1003)):
        batch = endpoint_histogram(
            TrialSpec(DIMER, "M=100", 100.0, "D", method="batch", at_time=0.5,
                      time_sampler=sampler),
            trials, seed=seed)
        stat, p = chisq_compare(batch, gill)
        mean = hist_mean(batch)
        assert p > ALPHA, f"{sampler}: chi2={stat:.2f} p={p:.2e}"
        assert abs(mean - 20.5) <= 0.3, f"{sampler}: mean {mean:.3f}"
        details.append(f"{sampler}: p={p:.3f} mean={mean:.3f}")
    mean_g = hist_mean(gill)
    assert abs(mean_g - 20.5) <= 0.3
    _report("1 continuous exactness", "; ".join(details) + f"; gillespie mean={mean_g:.3f}")


def test_criterion_02_discrete_exactness():
    trials = 100_000
    batch = endpoint_histogram(
        TrialSpec(DIMER, "M=100", 100.0, "D", method="batch", at_steps=60),
        trials, seed=2001)
    gill = endpoint_histogram(
        TrialSpec(DIMER, "M=100", 100.0, "D", method="gillespie", at_steps=60),
        trials, seed=2002)
    stat, p = chisq_compare(batch, gill)
    assert p > ALPHA, f"chi2={stat:.2f} p={p:.2e}"
    _report("2 discrete exactness", f"p={p:.3f} "
            f"means {hist_mean(batch):.3f}/{hist_mean(gill):.3f}")


def test_criterion_03_collision_length_law():
    rng = np.random.default_rng(3001)
    details = []
    for (n, o, g) in [(10_000, 2, 1), (10_000, 2, 0), (1_000, 3, 2)]:
        params = CollisionRunParams(n, 0, o, g)
        draws = np.array([cb.sample_coll(params, rng) for _ in range(100_000)])
        kmax = int(draws.max()) + 1
        emp_ccdf = 1.0 - np.cumsum(np.bincount(draws, minlength=kmax + 1)) / len(draws)
        ana_ccdf = np.array([math.exp(coll_log_ccdf(params, k + 1))
                             for k in range(kmax + 1)])
        ks = float(np.abs(emp_ccdf - ana_ccdf).max())
        assert ks < 0.01, f"(n={n},o={o},g={g}): KS={ks:.4f}"
        lo, hi = cb.coll_expectation_bounds(n, o, g)
        mean = float(draws.mean())
        assert lo <= mean <= hi, f"(n={n},o={o},g={g}): mean {mean} not in [{lo},{hi}]"
        # brute-force urn comparison at n = 60 with the same (o, g)
        small = CollisionRunParams(60, 0, o, g)
        sampled = Counter(cb.sample_coll(small, rng) for _ in range(100_000))
        urn = Counter(urn_run_length(60, 0, o, g, rng) for _ in range(100_000))
        _, p = chisq_compare(sampled, urn)
        assert p > ALPHA, f"(o={o},g={g}) urn chi2 p={p:.2e}"
        details.append(f"(n={n},o={o},g={g}): KS={ks:.4f} mean={mean:.1f} urn-p={p:.3f}")
    _report("3 collision-length law", "; ".join(details))


def test_criterion_04_transform_identities():
    rng = np.random.default_rng(4001)
    worst = 0.0
    for _ in range(500):
        crn = cb.parse_crn(random_crn(rng, max_species=5, max_reactions=8,
                                      max_stoich=3))
        o = max(r.order for r in crn.reactions)
        g = max(max(r.generativity for r in crn.reactions), 0)
        k0 = int(rng.integers(o, o + 60))
        volume = float(rng.uniform(0.5, 30))
        uni = cb.uniformize(crn, volume, k0)
        for rxn in uni.base.reactions:
            assert rxn.order == o and rxn.generativity == g
        for key, group in uni.groups.items():
            passive = uni.passive_rate(key)
            assert passive >= 0.0
            assert group.total_rate + passive == pytest.approx(
                uni.k_max, rel=4e-16, abs=0.0)
        for _ in range(20):
            counts = rng.integers(0, 10 ** int(rng.integers(1, 7)),
                                  size=crn.n_species).astype(np.int64)
            padded = uni.padded(counts)
            for src, out in zip(crn.reactions, uni.base.reactions):
                want = cb.propensity(counts, volume, src)
                got = cb.propensity(padded, volume, out)
                if want == 0.0:
                    assert got == 0.0
                else:
                    rel = abs(got - want) / want
                    worst = max(worst, rel)
                    assert rel <= 1e-12
    _report("4 transform identities", f"500 CRNs, worst propensity rel err {worst:.2e}")


def test_criterion_05_moment_closed_forms():
    worst_mean = worst_var = 0.0
    for n in (10, 10**3, 10**6):
        for k in (1, 10, 10**3):
            for o in (1, 2, 3, 4):
                for g in (1, 2, 3):
                    direct_mean = float(sum(Fraction(1, math.comb(n + i * g, o))
                                            for i in range(k)))
                    direct_var = float(sum(Fraction(1, math.comb(n + i * g, o)) ** 2
                                           for i in range(k)))
                    em = abs(cb.hypoexp_mean_closed(n, k, o, g) - direct_mean) / direct_mean
                    ev = abs(cb.hypoexp_variance_closed(n, k, o, g) - direct_var) / direct_var
                    worst_mean = max(worst_mean, em)
                    worst_var = max(worst_var, ev)
                    assert em <= 1e-9 and ev <= 1e-9, (n, k, o, g, em, ev)
                    if k > 1:
                        delta = first_last_delta(n, k, o, g)
                        t1 = 1.0 / math.comb(n, o)
                        tk = 1.0 / math.comb(n + (k - 1) * g, o)
                        geo = k * math.sqrt(t1 * tk)
                        rel = abs(geo - direct_mean) / min(geo, direct_mean)
                        assert rel <= delta / 2 + delta ** 2 / 8, (n, k, o, g)
    _report("5 moment closed forms",
            f"worst mean rel {worst_mean:.2e}, worst var rel {worst_var:.2e}")


def test_criterion_06_coefficient_methods_agree():
    worst = 0.0
    for k in (4, 16, 64, 256):
        spec = cb.HypoexpSpec(100, k, 2, 1, 1.0)
        naive = cb.hypoexp_coefficients(spec)
        fast = cb.hypoexp_coefficients_fast(spec)
        assert (naive.sign == fast.sign).all()
        dlog = float(np.abs(naive.log_mag - fast.log_mag).max())
        rel = math.expm1(dlog)
        worst = max(worst, rel)
        assert rel <= 1e-8, f"k={k}: rel {rel:.2e}"
        total = sum(fast.fractions)
        assert abs(total - 1) <= 1e-8  # exact rationals: identically 1
        if k <= 8:
            # float64 summation needs well-separated rates to avoid the
            # catastrophic cancellation the log-space storage exists for
            spread = cb.HypoexpSpec(10, k, 1, 3, 1.0)
            assert cb.hypoexp_coefficients(spread).value_sum() == pytest.approx(
                1.0, abs=1e-8)
    _report("6 coefficient methods", f"worst naive-vs-fast rel err {worst:.2e}")


def test_criterion_07_scaling_slopes():
    rows = scaling_bench(LV, [10**4, 10**5, 10**6, 10**7], 1.0,
                         {"R": 0.5, "F": 0.5}, methods=("batch", "gillespie"),
                         seed=7001, backends=("numba",))
    batch_slope = fit_loglog_slope(rows, "batch", "numba")
    gill_slope = fit_loglog_slope(rows, "gillespie", "numba")
    assert batch_slope <= 0.7, f"batch slope {batch_slope:.3f}"
    assert gill_slope >= 0.85, f"gillespie slope {gill_slope:.3f}"
    _report("7 scaling (soft)",
            f"batch slope {batch_slope:.3f} <= 0.7, gillespie {gill_slope:.3f} >= 0.85")


def test_criterion_08_time_sampler_config_invariance():
    crn = cb.parse_crn(DIMER)
    counts = np.array([100, 0], dtype=np.int64)
    runs = {name: cb.run_discrete(crn, 100.0, counts, 120, seed=8001,
                                  time_sampler=name, checkpoints=12)
            for name in ("exact", "gamma", "direct")}
    base = runs["exact"].records
    for name in ("gamma", "direct"):
        other = runs[name].records
        assert len(base) == len(other)
        for a, b in zip(base, other):
            assert a.step == b.step
            assert (a.config == b.config).all()
    _report("8 time-sampler invariance",
            f"{len(base)} records bit-identical across exact/gamma/direct")


def test_criterion_09_passive_fraction_instrumentation():
    lv = cb.parse_crn(LV)
    n = 10**5
    res = cb.run_continuous(lv, float(n), np.array([n // 2, n // 2]),
                            cb.ContinuousParams(10.0), seed=9001, checkpoints=20)
    fractions = [r.passive_fraction for r in res.records[1:]]
    peak = max(fractions)
    assert peak < 0.85, f"peak passive fraction {peak:.3f}"
    _report("9 passive fraction", f"peak segment fraction {peak:.3f} < 0.85")


def test_criterion_10_parser_round_trip():
    rng = np.random.default_rng(10001)
    for _ in range(10_000):
        crn = cb.parse_crn(random_crn(rng))
        assert cb.parse_crn(cb.serialize_crn(crn)) == crn
    _report("10 parser round trip", "10000 random CRNs, zero failures")
