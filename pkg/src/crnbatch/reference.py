"""Exact single-step oracles: the Gillespie direct method on the source
CRN and the scheduler-based simulation of the uniformized CRN.

These are the validation baselines.  Reaction selection is a linear
scan over the reaction list; molecule draws walk the cumulative counts.
The production-speed Gillespie path (same distribution) is
`gillespie_run`, which dispatches to the active backend kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .backend import GillespieResult, get_engine
from .crn import Crn, apply_reaction, propensity, total_propensity
from .errors import PopulationTooSmall, TerminalConfiguration
from .trajectory import TrajectoryRecord, checkpoint_targets
from .uniformize import UniformizedCrn


@dataclass
class SimState:
    counts: np.ndarray
    time: float
    steps: int
    rng: np.random.Generator


def new_state(counts, seed_or_rng) -> SimState:
    rng = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
           else np.random.default_rng(seed_or_rng))
    return SimState(np.asarray(counts, dtype=np.int64).copy(), 0.0, 0, rng)


def gillespie_step(state: SimState, crn: Crn, volume: float) -> SimState:
    """One exact step: exponential holding time, propensity-weighted pick."""
    props = [propensity(state.counts, volume, r) for r in crn.reactions]
    ptot = sum(props)
    if ptot <= 0.0:
        raise TerminalConfiguration("no reaction applicable")
    dt = state.rng.standard_exponential() / ptot
    u = state.rng.random() * ptot
    acc = 0.0
    chosen = len(props) - 1
    for j, p in enumerate(props):
        acc += p
        if u < acc:
            chosen = j
            break
    return replace(state,
                   counts=apply_reaction(state.counts, crn.reactions[chosen]),
                   time=state.time + dt,
                   steps=state.steps + 1)


def gillespie_run(crn: Crn, volume: float, counts, *, t_max: float | None = None,
                  steps_max: int | None = None, seed: int = 0,
                  checkpoints: int = 0, backend: str | None = None) -> list[TrajectoryRecord]:
    """Exact trajectory via the backend kernel; checkpointed records.

    Produces exact samples of the continuous t-future (t_max) or the
    discrete l-future (steps_max); terminal configurations freeze (time)
    or self-transition (steps).
    """
    counts = np.asarray(counts, dtype=np.int64)
    end = t_max if t_max is not None else steps_max
    targets = checkpoint_targets(float(end), checkpoints)
    engine = get_engine(seed, backend)
    initial = TrajectoryRecord(0, 0.0, counts.copy(), 0.0)
    if (t_max is not None and t_max <= 0) or (steps_max is not None and steps_max <= 0):
        return [initial]
    res: GillespieResult = engine.gillespie(crn, volume, counts, t_max=t_max,
                                            steps_max=steps_max, thresholds=targets)
    records = [initial]
    for i in range(len(res.times)):
        records.append(TrajectoryRecord(int(res.steps[i]), float(res.times[i]),
                                        res.counts[i].copy(), 0.0))
    return records


def _draw_molecules(counts: np.ndarray, o: int, rng: np.random.Generator) -> np.ndarray:
    """o molecules uniformly without replacement, as a multiset vector."""
    pool = counts.copy()
    out = np.zeros_like(counts)
    for _ in range(o):
        total = int(pool.sum())
        u = rng.integers(total)
        acc = 0
        for sid in range(len(pool)):
            acc += pool[sid]
            if u < acc:
                pool[sid] -= 1
                out[sid] += 1
                break
    return out


def scheduler_step(state: SimState, uni: UniformizedCrn,
                   reset_waste: bool = True) -> tuple[SimState, bool]:
    """One scheduler interaction on the uniformized CRN.

    Draws order-many molecules uniformly without replacement, fires a
    real reaction with probability rate/k_max (passive otherwise), and
    returns (state, was_real).  `steps` counts only real reactions.
    Waste is reset to zero afterwards unless the caller keeps it.
    """
    o = uni.order
    counts = state.counts
    if counts.sum() < o:
        raise PopulationTooSmall(f"population below order {o}")
    multiset = _draw_molecules(counts, o, state.rng)
    key = tuple(int(s) for s in np.repeat(np.arange(len(multiset)), multiset))
    group = uni.groups.get(key)
    new_counts = counts.copy()
    real = False
    u = state.rng.random() * uni.k_max
    if group is not None:
        acc = 0.0
        for row, rate in enumerate(group.rates):
            acc += rate
            if u < acc:
                new_counts -= group.reactant_vec
                new_counts += group.product_vecs[row]
                real = True
                break
    if not real:  # passive: reactants return, generativity-many waste appear
        new_counts[uni.w_index] += uni.generativity
    if reset_waste:
        new_counts[uni.w_index] = 0
    return (replace(state, counts=new_counts, steps=state.steps + int(real)), real)


def scheduler_run(uni: UniformizedCrn, counts, *, real_steps: int | None = None,
                  total_steps: int | None = None, seed_or_rng=0,
                  reset_waste: bool = True) -> SimState:
    """Run scheduler interactions until a real- or total-step quota is met."""
    if (real_steps is None) == (total_steps is None):
        raise ValueError("specify exactly one of real_steps / total_steps")
    state = new_state(counts, seed_or_rng)
    done = 0
    while True:
        if real_steps is not None and state.steps >= real_steps:
            return state
        if total_steps is not None and done >= total_steps:
            return state
        state, _ = scheduler_step(state, uni, reset_waste)
        done += 1


def is_terminal(crn: Crn, counts: np.ndarray, volume: float) -> bool:
    return total_propensity(counts, volume, crn) <= 0.0
