import math
from collections import Counter

import numpy as np
import pytest

from crnbatch import (gillespie_run, gillespie_step, new_state, parse_crn,
                      scheduler_run, scheduler_step, slowdown_factor, uniformize)
from crnbatch.errors import TerminalConfiguration
from crnbatch.validate import chisq_compare


def test_single_reaction_always_chosen():
    crn = parse_crn("A -> B : 1")
    state = new_state(np.array([3, 0]), 0)
    state = gillespie_step(state, crn, 1.0)
    assert state.counts.tolist() == [2, 1]
    assert state.steps == 1
    assert state.time > 0


def test_branch_probability_three_quarters():
    crn = parse_crn("A -> B : 1\nA -> C : 3")
    hits = 0
    trials = 20_000
    state0 = np.array([1, 0, 0])
    rng = np.random.default_rng(1)
    for _ in range(trials):
        state = gillespie_step(new_state(state0, rng), crn, 1.0)
        hits += state.counts[2] == 1
    assert hits / trials == pytest.approx(0.75, abs=0.01)


def test_terminal_raises():
    crn = parse_crn("A + B -> C : 1")
    with pytest.raises(TerminalConfiguration):
        gillespie_step(new_state(np.array([1, 0, 0]), 0), crn, 1.0)


def test_waiting_times_exponential():
    crn = parse_crn("A -> A : 2.5")  # self-loop keeps the propensity fixed
    rate = 2.5 * 40
    rng = np.random.default_rng(2)
    times = []
    for _ in range(4000):
        state = gillespie_step(new_state(np.array([40]), rng), crn, 1.0)
        times.append(state.time)
    mean = np.mean(times)
    sigma = (1 / rate) / math.sqrt(len(times))
    assert abs(mean - 1 / rate) < 3 * sigma


def test_gillespie_run_zero_budget():
    crn = parse_crn("A -> B : 1")
    records = gillespie_run(crn, 1.0, np.array([5, 0]), steps_max=0, seed=0)
    assert len(records) == 1
    assert records[0].config.tolist() == [5, 0]
    records = gillespie_run(crn, 1.0, np.array([5, 0]), t_max=0.0, seed=0)
    assert len(records) == 1


def test_gillespie_run_terminal_discrete_pads_steps():
    crn = parse_crn("A -> B : 1")
    records = gillespie_run(crn, 1.0, np.array([2, 0]), steps_max=10, seed=3)
    assert records[-1].step == 10
    assert records[-1].config.tolist() == [0, 2]


def test_gillespie_run_terminal_continuous_freezes():
    crn = parse_crn("A -> B : 1")
    records = gillespie_run(crn, 1.0, np.array([2, 0]), t_max=1000.0, seed=4)
    assert records[-1].time == 1000.0
    assert records[-1].config.tolist() == [0, 2]


def test_gillespie_run_checkpoints_monotone():
    crn = parse_crn("2M <-> D : 2, 1")
    records = gillespie_run(crn, 100.0, np.array([100, 0]), t_max=0.5, seed=5,
                            checkpoints=7)
    times = [r.time for r in records]
    assert times == sorted(times)
    assert len(records) == 9  # initial + 7 checkpoints + final


def test_gillespie_run_deterministic():
    crn = parse_crn("2M <-> D : 2, 1")
    a = gillespie_run(crn, 100.0, np.array([100, 0]), t_max=0.5, seed=42)
    b = gillespie_run(crn, 100.0, np.array([100, 0]), t_max=0.5, seed=42)
    assert a[-1].config.tolist() == b[-1].config.tolist()
    assert a[-1].time == b[-1].time


def test_scheduler_nonpassive_probability_matches_slowdown():
    # the probability a scheduler step executes a real reaction is 1/S
    crn = parse_crn("2L -> L + F : 1")
    n = 400
    counts = np.array([n, 0], dtype=np.int64)
    report = slowdown_factor(crn, counts, float(n))
    uni = uniformize(crn, float(n), n)
    rng = np.random.default_rng(6)
    padded = uni.padded(counts)
    hits = 0
    trials = 30_000
    for _ in range(trials):
        _, real = scheduler_step(new_state(padded, rng), uni)
        hits += real
    assert hits / trials == pytest.approx(1.0 / report.slowdown, rel=0.1)


def test_scheduler_reaction_frequencies_match_gillespie():
    # ratio of executed real reactions matches Gillespie frequencies
    crn = parse_crn("2M <-> D : 2, 1")
    volume = 50.0
    counts = np.array([40, 10], dtype=np.int64)
    uni = uniformize(crn, volume, 50)
    padded = uni.padded(counts)
    rng = np.random.default_rng(7)
    h_sched = Counter()
    for _ in range(30_000):
        state, real = scheduler_step(new_state(padded, rng), uni)
        if real:
            h_sched[int(state.counts[1])] += 1  # D went up or down
    from crnbatch.crn import propensity
    p_fwd = propensity(counts, volume, crn.reactions[0])
    p_bwd = propensity(counts, volume, crn.reactions[1])
    total = sum(h_sched.values())
    assert h_sched[11] / total == pytest.approx(p_fwd / (p_fwd + p_bwd), abs=0.01)


def test_scheduler_passive_only_configuration():
    # no real reactions applicable: steps never increments
    crn = parse_crn("A + B -> C : 1")
    uni = uniformize(crn, 10.0, 10)
    padded = uni.padded(np.array([5, 0, 0], dtype=np.int64))
    state = scheduler_run(uni, padded, total_steps=50, seed_or_rng=8)
    assert state.steps == 0


def test_scheduler_endpoint_matches_gillespie_discrete():
    # central oracle property: scheduler counting real steps == gillespie
    crn = parse_crn("2M <-> D : 2, 1")
    volume = 30.0
    counts = np.array([30, 0], dtype=np.int64)
    uni = uniformize(crn, volume, 30)
    steps = 8
    rng = np.random.default_rng(9)
    h_sched = Counter()
    for _ in range(15_000):
        st = scheduler_run(uni, uni.padded(counts), real_steps=steps, seed_or_rng=rng)
        h_sched[int(st.counts[1])] += 1
    h_gill = Counter()
    for s in range(15_000):
        recs = gillespie_run(crn, volume, counts, steps_max=steps, seed=90_000 + s)
        h_gill[int(recs[-1].config[1])] += 1
    _, p = chisq_compare(h_sched, h_gill)
    assert p > 1e-3


def test_dimer_equilibrium_expectations():
    # long-run equilibrium: E[#D] ~= 25, E[#M] ~= 50
    crn = parse_crn("2M <-> D : 2, 1")
    totals = np.zeros(2)
    trials = 2000
    for s in range(trials):
        recs = gillespie_run(crn, 100.0, np.array([100, 0]), t_max=8.0,
                             seed=3 * 10**5 + s)
        totals += recs[-1].config
    means = totals / trials
    assert means[1] == pytest.approx(25.0, abs=0.5)
    assert means[0] == pytest.approx(50.0, abs=1.0)
