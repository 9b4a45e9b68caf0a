from collections import Counter

import numpy as np
import pytest

from crnbatch.errors import DegenerateBins, InvalidParams
from crnbatch.validate import (TrialSpec, chisq_compare, endpoint_histogram,
                               fit_loglog_slope, hist_mean,
                               passive_fraction_series, run_trial,
                               scaling_bench, tvd)

DIMER = "2M <-> D : 2, 1"


def test_tvd_identity_and_disjoint():
    h = Counter({1: 50, 2: 50})
    assert tvd(h, h) == 0.0
    assert tvd(Counter({1: 10}), Counter({2: 99})) == 1.0


def test_chisq_self_comparison_no_reject():
    rng = np.random.default_rng(0)
    rejections = 0
    for rep in range(20):
        a = Counter(rng.binomial(40, 0.3, size=3000).tolist())
        b = Counter(rng.binomial(40, 0.3, size=3000).tolist())
        _, p = chisq_compare(a, b)
        rejections += p <= 1e-3
    assert rejections <= 1  # calibration: >= 95% non-rejections


def test_chisq_detects_shift():
    rng = np.random.default_rng(1)
    a = Counter(rng.binomial(40, 0.30, size=4000).tolist())
    b = Counter(rng.binomial(40, 0.36, size=4000).tolist())
    _, p = chisq_compare(a, b)
    assert p < 1e-3


def test_chisq_degenerate():
    with pytest.raises(DegenerateBins):
        chisq_compare(Counter(), Counter({1: 5}))
    with pytest.raises(DegenerateBins):
        chisq_compare(Counter({1: 500}), Counter({1: 500}))


def test_hist_mean():
    assert hist_mean(Counter({2: 1, 4: 3})) == pytest.approx(3.5)


def test_trial_spec_validation():
    with pytest.raises(InvalidParams):
        TrialSpec(DIMER, "M=100", 100.0, "D")
    with pytest.raises(InvalidParams):
        TrialSpec(DIMER, "M=100", 100.0, "D", at_time=1.0, at_steps=5)
    with pytest.raises(InvalidParams):
        TrialSpec(DIMER, "M=100", 100.0, "D", at_time=1.0, method="magic")


def test_run_trial_methods():
    spec = TrialSpec(DIMER, "M=100", 100.0, "D", method="gillespie", at_time=0.2)
    v1 = run_trial(spec, 7)
    assert 0 <= v1 <= 50
    spec = TrialSpec(DIMER, "M=100", 100.0, "D", method="batch", at_steps=10)
    assert 0 <= run_trial(spec, 7) <= 10


def test_endpoint_histogram_single_trial():
    spec = TrialSpec(DIMER, "M=100", 100.0, "D", method="gillespie", at_time=0.1)
    h = endpoint_histogram(spec, 1, seed=3)
    assert sum(h.values()) == 1


def test_endpoint_histogram_deterministic_and_parallel():
    spec = TrialSpec(DIMER, "M=100", 100.0, "D", method="gillespie", at_time=0.1)
    serial = endpoint_histogram(spec, 128, seed=5, workers=1)
    parallel = endpoint_histogram(spec, 128, seed=5, workers=2)
    assert serial == parallel
    again = endpoint_histogram(spec, 128, seed=5, workers=1)
    assert serial == again


def test_passive_fraction_degenerate_cases():
    from crnbatch.trajectory import TrajectoryRecord
    recs = [TrajectoryRecord(0, 0.0, np.array([1]), 0.0),
            TrajectoryRecord(1, 1.0, np.array([1]), 0.0),
            TrajectoryRecord(2, 2.0, np.array([1]), 1.0)]
    series = passive_fraction_series(recs)
    assert series == [(1.0, 0.0), (2.0, 1.0)]


def test_scaling_bench_single_size():
    rows = scaling_bench(DIMER, [200], 0.05, {"M": 1.0},
                         methods=("gillespie",), seed=0)
    assert len(rows) == 1
    assert rows[0]["n"] == 200 and rows[0]["wall_time"] > 0
    with pytest.raises(InvalidParams):
        fit_loglog_slope(rows, "gillespie")


def test_scaling_bench_backends_column():
    rows = scaling_bench(DIMER, [100, 400], 0.02, {"M": 1.0},
                         methods=("gillespie",), seed=0,
                         backends=("numba", "numpy"))
    backends = {r["backend"] for r in rows}
    assert backends == {"numba", "numpy"}
    slope = fit_loglog_slope(rows, "gillespie", "numba")
    assert np.isfinite(slope)
