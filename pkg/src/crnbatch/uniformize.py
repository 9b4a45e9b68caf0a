"""Uniform / uniformly-reactive CRN transformations.

`make_uniform` pads every reaction to the CRN's maximum order with the
catalyst species __K and to its maximum generativity with the inert
waste species __W, adjusting rate constants so that each transformed
reaction keeps exactly the propensity of its source reaction whenever
the configuration holds k0 copies of __K.

`make_uniformly_reactive` records the maximum per-reactant-multiset
total rate constant k_max; the passive reactions r -> r + g*__W with
rate k_max - totalrate(r) are implicit (never enumerated) and their
rates are computed on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .crn import (Crn, Reaction, Species, make_side, order_and_generativity,
                  propensity)
from .errors import K0TooSmall
from .parser import KAT_NAME, WASTE_NAME

# Key-table ceiling for the kernel lookup (Q^order entries).
MAX_KEY_TABLE = 1 << 24


def adjusted_rate_constant(reaction: Reaction, order: int, k0: int, volume: float) -> float:
    """Rate constant that preserves propensity after adding order-padding catalysts.

    With delta = order - ord(reaction) copies of __K added to both sides,
    the padded reaction in a configuration holding k0 catalysts keeps the
    original propensity iff its rate constant is

        k * v^delta / C(k0, delta)
      = k * delta! * v^delta / falling(k0, delta).

    The delta! numerator compensates the r(K)! divisor that the padded
    catalyst stoichiometry introduces in the propensity product.
    """
    delta = order - reaction.order
    if delta == 0:
        return reaction.rate_constant
    if delta < 0:
        raise ValueError("reaction order exceeds target order")
    if k0 < delta:
        raise K0TooSmall(f"k0={k0} < order deficit {delta}")
    return reaction.rate_constant * volume**delta / math.comb(k0, delta)


def make_uniform(crn: Crn, volume: float, k0: int) -> Crn:
    """Pad every reaction to uniform order and generativity.

    Negative CRN generativity is handled by padding to generativity 0
    (waste products are added to each shrinking reaction), so the output
    generativity is max(gen(crn), 0).
    """
    o, g = order_and_generativity(crn)
    g = max(g, 0)
    if k0 < o:
        raise K0TooSmall(f"k0={k0} must be at least the CRN order {o}")
    q = crn.n_species
    k_idx, w_idx = q, q + 1
    species = crn.species + (Species(k_idx, KAT_NAME), Species(w_idx, WASTE_NAME))
    out = []
    for rxn in crn.reactions:
        delta_o = o - rxn.order
        delta_g = g - rxn.generativity
        reactants = list(rxn.reactants)
        products = list(rxn.products)
        if delta_o:
            reactants.append((k_idx, delta_o))
            products.append((k_idx, delta_o))
        if delta_g:
            products.append((w_idx, delta_g))
        out.append(Reaction(make_side(reactants), make_side(products),
                            adjusted_rate_constant(rxn, o, k0, volume)))
    return Crn(species, tuple(out))


def total_rate_constant(crn: Crn, reactants: tuple[tuple[int, int], ...]) -> float:
    """Sum of rate constants over reactions whose reactant vector is exactly `reactants`."""
    key = make_side(reactants)
    return sum(r.rate_constant for r in crn.reactions if r.reactants == key)


def _multiset_key(reactants: tuple[tuple[int, int], ...]) -> tuple[int, ...]:
    flat: list[int] = []
    for sid, coeff in reactants:
        flat.extend([sid] * coeff)
    return tuple(sorted(flat))


@dataclass(frozen=True)
class ReactionGroup:
    """All real reactions sharing one reactant multiset."""

    reactant_vec: np.ndarray      # int64[Q]
    rates: np.ndarray             # float64[m]
    product_vecs: np.ndarray      # int64[m, Q]
    reaction_ids: tuple[int, ...]

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())


@dataclass(frozen=True)
class UniformizedCrn:
    """A uniform CRN plus the implicit passive-reaction bookkeeping."""

    base: Crn          # species = original + (__K, __W); real reactions only
    source: Crn
    order: int
    generativity: int
    k0: int
    volume: float
    k_max: float
    k_index: int
    w_index: int
    groups: dict[tuple[int, ...], ReactionGroup]

    @property
    def n_species(self) -> int:
        return self.base.n_species

    @property
    def rate_scale(self) -> float:
        """Total propensity of the uniformly reactive CRN on a configuration of
        size N equals rate_scale * C(N, order)."""
        return self.k_max / self.volume ** (self.order - 1)

    def passive_rate(self, multiset: tuple[int, ...]) -> float:
        """k_max minus the total real rate for this sorted reactant tuple."""
        group = self.groups.get(tuple(sorted(multiset)))
        if group is None:
            return self.k_max
        return self.k_max - group.total_rate

    def padded(self, counts: np.ndarray, waste: int = 0) -> np.ndarray:
        """Original-species counts extended with k0 catalysts and optional waste."""
        out = np.zeros(self.n_species, dtype=np.int64)
        out[: len(counts)] = counts
        out[self.k_index] = self.k0
        out[self.w_index] = waste
        return out

    def strip(self, counts: np.ndarray) -> np.ndarray:
        """Drop __K and __W, returning counts over the source species."""
        return counts[: self.source.n_species].copy()

    @cached_property
    def tables(self) -> "EngineTables":
        return _build_engine_tables(self)


def make_uniformly_reactive(uniform_crn: Crn, volume: float, k0: int,
                            source: Crn | None = None) -> UniformizedCrn:
    """Wrap a uniform CRN with k_max and per-multiset reaction groups.

    Passive reactions are represented implicitly: enumerating all q^o
    reactant multisets is combinatorially infeasible, and every multiset
    not backed by a real reaction has passive rate exactly k_max.
    """
    o, g = order_and_generativity(uniform_crn)
    orders = {r.order for r in uniform_crn.reactions}
    gens = {r.generativity for r in uniform_crn.reactions}
    if orders != {o} or gens != {g}:
        raise ValueError("input CRN is not uniform")
    q = uniform_crn.n_species
    by_key: dict[tuple[int, ...], list[int]] = {}
    for i, rxn in enumerate(uniform_crn.reactions):
        by_key.setdefault(_multiset_key(rxn.reactants), []).append(i)
    groups: dict[tuple[int, ...], ReactionGroup] = {}
    for key, ids in by_key.items():
        reactant_vec = np.zeros(q, dtype=np.int64)
        for sid in key:
            reactant_vec[sid] += 1
        rates = np.array([uniform_crn.reactions[i].rate_constant for i in ids])
        prods = np.zeros((len(ids), q), dtype=np.int64)
        for row, i in enumerate(ids):
            for sid, coeff in uniform_crn.reactions[i].products:
                prods[row, sid] = coeff
        groups[key] = ReactionGroup(reactant_vec, rates, prods, tuple(ids))
    k_max = max(grp.total_rate for grp in groups.values())
    k_idx = uniform_crn.index_of(KAT_NAME)
    w_idx = uniform_crn.index_of(WASTE_NAME)
    return UniformizedCrn(
        base=uniform_crn,
        source=source if source is not None else uniform_crn,
        order=o,
        generativity=g,
        k0=k0,
        volume=volume,
        k_max=k_max,
        k_index=k_idx,
        w_index=w_idx,
        groups=groups,
    )


@lru_cache(maxsize=64)
def uniformize(crn: Crn, volume: float, k0: int) -> UniformizedCrn:
    """make_uniform followed by make_uniformly_reactive (cached)."""
    return make_uniformly_reactive(make_uniform(crn, volume, k0), volume, k0, source=crn)


@dataclass(frozen=True)
class SlowdownReport:
    total_adjusted_propensity: float
    max_adjusted_rate: float       # k_max normalized by v^(order-1)
    slowdown: float

    @property
    def nonpassive_probability(self) -> float:
        return 1.0 / self.slowdown if math.isfinite(self.slowdown) else 0.0


def slowdown_factor(crn: Crn, counts: np.ndarray, volume: float) -> SlowdownReport:
    """Scheduler slowdown factor S >= 1.

    S is the expected number of scheduler interactions per non-passive
    reaction: the total propensity of the uniformized CRN on the
    K-padded configuration of size 2n, divided by the total adjusted
    (real-reaction) propensity.  A terminal configuration reports S = inf.
    """
    n = int(np.asarray(counts).sum())
    o, _ = order_and_generativity(crn)
    if n < o:
        raise ValueError(f"population {n} is below the CRN order {o}")
    k0 = max(n, o)
    uni = uniformize(crn, volume, k0)
    padded = uni.padded(np.asarray(counts, dtype=np.int64))
    total_adjusted = sum(propensity(padded, volume, rxn) for rxn in uni.base.reactions)
    max_adjusted = uni.rate_scale
    if total_adjusted == 0.0:
        return SlowdownReport(0.0, max_adjusted, math.inf)
    slowdown = max_adjusted * math.comb(n + k0, o) / total_adjusted
    return SlowdownReport(total_adjusted, max_adjusted, slowdown)


@dataclass(frozen=True)
class EngineTables:
    """Flat-array view of a UniformizedCrn for the batch kernels."""

    q: int
    order: int
    generativity: int
    k_index: int
    w_index: int
    k_max: float
    key_table: np.ndarray     # int32[q^order]: sorted-tuple code -> group id, -1 = passive-only
    group_ptr: np.ndarray     # int64[G+1] offsets into the per-reaction arrays
    probs_flat: np.ndarray    # float64[sum(m_g + 1)]: k_i/k_max ..., passive remainder
    prod_flat: np.ndarray     # int64[sum(m_g), q] product vectors of real reactions


def _build_engine_tables(uni: UniformizedCrn) -> EngineTables:
    q, o = uni.n_species, uni.order
    if q**o > MAX_KEY_TABLE:
        raise ValueError(
            f"key table q^o = {q}^{o} exceeds {MAX_KEY_TABLE}; "
            "this CRN is too wide for the dense kernel tables")
    key_table = np.full(q**o, -1, dtype=np.int32)
    group_ptr = [0]
    probs: list[float] = []
    prod_rows: list[np.ndarray] = []
    for gid, (key, grp) in enumerate(sorted(uni.groups.items())):
        code = 0
        for sid in key:
            code = code * q + sid
        key_table[code] = gid
        for rate in grp.rates:
            probs.append(rate / uni.k_max)
        real_total = grp.total_rate / uni.k_max
        probs.append(max(0.0, 1.0 - real_total))
        prod_rows.append(grp.product_vecs)
        group_ptr.append(group_ptr[-1] + len(grp.rates))
    prod_flat = (np.concatenate(prod_rows, axis=0) if prod_rows
                 else np.zeros((0, q), dtype=np.int64))
    return EngineTables(
        q=q,
        order=o,
        generativity=uni.generativity,
        k_index=uni.k_index,
        w_index=uni.w_index,
        k_max=uni.k_max,
        key_table=key_table,
        group_ptr=np.array(group_ptr, dtype=np.int64),
        probs_flat=np.array(probs),
        prod_flat=prod_flat,
    )
