"""Single-batch simulation: run length, batch contents, collision.

One batch samples a collision-free run length l ~ coll(n, 0, o, g)
truncated at the caller's budget, draws the multiset of reactant
o-tuples for the run with recursive multivariate hypergeometric
sampling, resolves each tuple into a real or passive reaction by a
rate-proportional multinomial, and (when the run ended in a collision
within budget) simulates one extra interaction whose reactants are
conditioned on touching at least one already-interacted molecule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .collision import CollisionRunParams, sample_coll
from .errors import InsufficientPopulation, NoRedMolecules, PopulationTooSmall
from .uniformize import UniformizedCrn


@dataclass(frozen=True)
class TransitionTensor:
    """Sparse count of reactant multisets drawn for one collision-free run.

    Keys are canonical (sorted) species-id o-tuples.
    """

    entries: dict[tuple[int, ...], int]
    order: int

    @property
    def total(self) -> int:
        return sum(self.entries.values())


@dataclass(frozen=True)
class BatchOutcome:
    new_config: np.ndarray
    steps_executed: int        # non-passive reactions
    passive_count: int
    collided: bool
    start_population: int

    @property
    def total_reactions(self) -> int:
        return self.steps_executed + self.passive_count


def sample_transition_tensor(counts: np.ndarray, ell: int, o: int,
                             rng: np.random.Generator) -> TransitionTensor:
    """Draw the reactant tuples for `ell` reactions without replacement.

    Distributionally equivalent to drawing o*ell individual molecules
    without replacement and grouping consecutive o-tuples: the first
    coordinate counts of all tuples are one multivariate hypergeometric
    draw, then each first-species group recursively allocates its next
    coordinate from the depleted pool.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = int(counts.sum())
    if ell < 0 or o * ell > n:
        raise InsufficientPopulation(f"need {o * ell} molecules, have {n}")
    if ell == 0:
        return TransitionTensor({}, o)
    pool = counts.copy()
    cells: dict[tuple[int, ...], int] = {(): ell}
    for _ in range(o):
        grown: dict[tuple[int, ...], int] = {}
        for prefix, m in cells.items():
            alloc = rng.multivariate_hypergeometric(pool, m)
            pool -= alloc
            for sid in np.nonzero(alloc)[0]:
                grown[prefix + (int(sid),)] = int(alloc[sid])
        cells = grown
    merged: dict[tuple[int, ...], int] = {}
    for prefix, m in cells.items():
        key = tuple(sorted(prefix))
        merged[key] = merged.get(key, 0) + m
    return TransitionTensor(merged, o)


def sample_collision_reactants(green: np.ndarray, red: np.ndarray, o: int,
                               rng: np.random.Generator) -> np.ndarray:
    """Uniform o-subset of green+red conditioned on >= 1 red molecule.

    Complementary weighting: the red count j >= 1 is drawn with
    probability proportional to C(#red, j) * C(#green, o-j), then the
    identities within each pool are multivariate hypergeometric.
    Returns the reactant multiset as a count vector.
    """
    green = np.asarray(green, dtype=np.int64)
    red = np.asarray(red, dtype=np.int64)
    n_red = int(red.sum())
    n_green = int(green.sum())
    if n_red < 1:
        raise NoRedMolecules("collision needs at least one red molecule")
    log_w = np.full(o + 1, -np.inf)
    for j in range(1, o + 1):
        if j <= n_red and o - j <= n_green:
            log_w[j] = (_log_comb(n_red, j) + _log_comb(n_green, o - j))
    if not np.isfinite(log_w).any():
        raise InsufficientPopulation("fewer than o molecules available for the collision")
    w = np.exp(log_w - log_w[np.isfinite(log_w)].max())
    w /= w.sum()
    j = int(rng.choice(o + 1, p=w))
    multiset = np.zeros_like(green)
    if j:
        multiset += rng.multivariate_hypergeometric(red, j)
    if o - j:
        multiset += rng.multivariate_hypergeometric(green, o - j)
    return multiset


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def execute_batch(uni: UniformizedCrn, counts: np.ndarray, ell_max: int,
                  rng: np.random.Generator) -> BatchOutcome:
    """Simulate one batch, bounded by `ell_max` total reactions.

    If the sampled run length reaches the bound the run is truncated and
    no collision is appended; otherwise the collision interaction is the
    final reaction of the batch.  `steps_executed` counts only
    non-passive reactions (passive executions are tallied separately).
    """
    counts = np.asarray(counts, dtype=np.int64)
    o, g = uni.order, uni.generativity
    n = int(counts.sum())
    if n < o:
        raise PopulationTooSmall(f"population {n} below order {o}")
    if ell_max < 1:
        raise ValueError("ell_max must be >= 1")
    length = sample_coll(CollisionRunParams(n, 0, o, g), rng)
    if length >= ell_max:
        run_len, do_collision = ell_max, False
    else:
        run_len, do_collision = length, True
    tensor = sample_transition_tensor(counts, run_len, o, rng)
    green = counts.copy()
    for key, m in tensor.entries.items():
        for sid in key:
            green[sid] -= m
    red = np.zeros_like(counts)
    real = passive = 0
    for key, m in tensor.entries.items():
        n_real, n_pass = _resolve_tuples(uni, key, m, red, rng)
        real += n_real
        passive += n_pass
    if do_collision:
        multiset = sample_collision_reactants(green, red, o, rng)
        # the batch ends here, so the pools merge and the red/green split
        # of the collision's reactants no longer matters
        merged = green + red
        merged -= multiset
        key = tuple(int(s) for s in np.repeat(np.arange(len(multiset)), multiset))
        n_real, n_pass = _resolve_tuples(uni, key, 1, merged, rng)
        real += n_real
        passive += n_pass
        new_config = merged
    else:
        new_config = green + red
    if (new_config < 0).any():
        raise AssertionError("negative count after batch; internal accounting error")
    return BatchOutcome(new_config, real, passive, do_collision, n)


def _resolve_tuples(uni: UniformizedCrn, key: tuple[int, ...], m: int,
                    red: np.ndarray, rng: np.random.Generator) -> tuple[int, int]:
    """Execute m tuples with reactant multiset `key`; products go to `red`."""
    group = uni.groups.get(tuple(sorted(key)))
    if group is None:
        n_pass = m
        n_real = 0
    else:
        probs = np.append(group.rates / uni.k_max,
                          max(0.0, 1.0 - group.total_rate / uni.k_max))
        draws = rng.multinomial(m, probs / probs.sum())
        for row, x in enumerate(draws[:-1]):
            if x:
                red += x * group.product_vecs[row]
        n_pass = int(draws[-1])
        n_real = m - n_pass
    if n_pass:
        for sid in key:
            red[sid] += n_pass
        red[uni.w_index] += n_pass * uni.generativity
    return n_real, n_pass
