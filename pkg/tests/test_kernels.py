"""Backend parity: the JIT kernels and the numpy fallback implement the
same distributions, and their deterministic parts agree exactly."""

import math
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare, hypergeom

import crnbatch
from crnbatch import CollisionRunParams, coll_log_ccdf, parse_crn, uniformize
from crnbatch.backend import get_backend, get_engine, set_backend
from crnbatch.validate import chisq_compare

numba_kernels = pytest.importorskip("crnbatch._kernels_numba")


def test_hrua_hypergeometric_matches_exact_pmf():
    numba_kernels.seed_reactions(99)
    for (good, bad, sample) in [(50, 70, 30), (1_000_000, 2_000_000, 500),
                                (7, 3, 5), (5, 100, 50), (300, 300, 40)]:
        draws = np.array([numba_kernels.hypergeometric(good, bad, sample)
                          for _ in range(20_000)])
        lo = max(0, sample - bad)
        hi = min(good, sample)
        pk = hypergeom.pmf(np.arange(lo, hi + 1), good + bad, good, sample)
        obs = np.bincount(draws - lo, minlength=hi - lo + 1).astype(float)
        exp = pk * len(draws)
        keep = exp >= 5
        obs_m = np.append(obs[keep], obs[~keep].sum())
        exp_m = np.append(exp[keep], exp[~keep].sum())
        if exp_m[-1] < 1e-9:
            obs_m, exp_m = obs_m[:-1], exp_m[:-1]
        exp_m *= obs_m.sum() / exp_m.sum()
        _, p = chisquare(obs_m, exp_m)
        assert p > 1e-4, (good, bad, sample, p)


def test_hypergeometric_edge_cases():
    numba_kernels.seed_reactions(1)
    assert numba_kernels.hypergeometric(0, 10, 5) == 0
    assert numba_kernels.hypergeometric(10, 0, 5) == 5
    assert numba_kernels.hypergeometric(10, 10, 0) == 0
    assert numba_kernels.hypergeometric(10, 10, 20) == 10


def test_coll_ccdf_backends_agree():
    for (n, r, o, g) in [(100, 0, 2, 1), (10_000, 17, 3, 2), (500, 0, 1, 0),
                         (12, 3, 2, 2)]:
        p = CollisionRunParams(n, r, o, g)
        for k in range(0, p.max_length + 2, max(1, p.max_length // 7)):
            a = numba_kernels.coll_log_ccdf(n, r, o, g, k)
            b = coll_log_ccdf(p, k)
            if math.isinf(b):
                assert math.isinf(a)
            else:
                assert a == pytest.approx(b, rel=1e-10, abs=1e-10)


def test_coll_inversion_backends_agree():
    p = CollisionRunParams(5000, 0, 2, 1)
    for log_u in (-1e-6, -0.01, -0.5, -2.0, -10.0, -100.0):
        from crnbatch import _kernels_numpy as knp
        a = numba_kernels.invert_coll(5000, 0, 2, 1, log_u)
        b = knp.invert_coll(5000, 0, 2, 1, log_u)
        assert a == b


def test_coll_sampler_distribution_parity():
    n, o, g = 2000, 0, 1
    p = CollisionRunParams(n, 0, 2, 1)
    numba_kernels.seed_reactions(5)
    h_nb = Counter(int(numba_kernels.sample_coll(n, 0, 2, 1)) for _ in range(20_000))
    rng = np.random.default_rng(5)
    h_np = Counter(crnbatch.sample_coll(p, rng) for _ in range(20_000))
    _, p_value = chisq_compare(h_nb, h_np)
    assert p_value > 1e-3


def test_batch_kernel_distribution_parity():
    crn = parse_crn("2M <-> D : 2, 1")
    uni = uniformize(crn, 30.0, 30)
    start = uni.padded(np.array([30, 0], dtype=np.int64))
    h = {}
    for backend in ("numba", "numpy"):
        eng = get_engine(123, backend)
        hist = Counter()
        for _ in range(25_000):
            counts = start.copy()
            total, real, passive, collided = eng.batch(uni, counts, 6)
            hist[(total, int(counts[0]), int(counts[1]), real)] += 1
        h[backend] = hist
    keys = sorted(set(h["numba"]) | set(h["numpy"]), key=repr)
    h1 = Counter({i: h["numba"].get(k, 0) for i, k in enumerate(keys)})
    h2 = Counter({i: h["numpy"].get(k, 0) for i, k in enumerate(keys)})
    _, p_value = chisq_compare(h1, h2)
    assert p_value > 1e-3


def test_gillespie_kernel_distribution_parity():
    crn = parse_crn("2M <-> D : 2, 1")
    counts = np.array([100, 0], dtype=np.int64)
    hists = {}
    for backend in ("numba", "numpy"):
        hist = Counter()
        for s in range(4000):
            recs = crnbatch.gillespie_run(crn, 100.0, counts, t_max=0.5,
                                          seed=s, backend=backend)
            hist[int(recs[-1].config[1])] += 1
        hists[backend] = hist
    _, p_value = chisq_compare(hists["numba"], hists["numpy"])
    assert p_value > 1e-3


def test_backend_selection_roundtrip():
    original = get_backend()
    try:
        set_backend("numpy")
        assert get_backend() == "numpy"
        set_backend("numba")
        assert get_backend() == "numba"
    finally:
        set_backend(original)
    with pytest.raises(ValueError):
        set_backend("cuda")


def test_numpy_backend_driver_end_to_end():
    crn = parse_crn("2M <-> D : 2, 1")
    res = crnbatch.run_discrete(crn, 100.0, np.array([100, 0]), 20, seed=1,
                                backend="numpy")
    assert res.final.step == 20
    res = crnbatch.run_continuous(crn, 100.0, np.array([100, 0]),
                                  crnbatch.ContinuousParams(0.2), seed=1,
                                  backend="numpy")
    assert res.final.time == pytest.approx(0.2)
