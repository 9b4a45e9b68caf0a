"""Core CRN types and Gillespie-kinetics propensity arithmetic.

Counts are held in int64 numpy arrays indexed by dense species ids.
Propensities use the factorial convention: the propensity of a reaction
with rate constant k, reactant vector r and volume v is

    k / v^(|r|-1) * prod_A  C(c(A), r(A)) * r(A)!  / r(A)!
  = k / v^(|r|-1) * prod_A  falling(c(A), r(A)) / r(A)!

The README documents conversion to the convention without the r(A)!
divisor (multiply rate constants by prod_A r(A)!).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EmptyCrn, NotApplicable

# Simulation population cap: beyond this, log-gamma differences lose the
# precision that exact inversion sampling needs (64-bit floats).
POPULATION_CAP = 10**10


@dataclass(frozen=True)
class Species:
    id: int
    name: str


@dataclass(frozen=True)
class Reaction:
    """A reaction with sparse stoichiometry.

    `reactants` and `products` are tuples of (species_id, coefficient),
    sorted by species id, coefficients >= 1.
    """

    reactants: tuple[tuple[int, int], ...]
    products: tuple[tuple[int, int], ...]
    rate_constant: float

    def __post_init__(self):
        if self.rate_constant <= 0:
            raise ValueError(f"rate constant must be positive, got {self.rate_constant}")
        for side in (self.reactants, self.products):
            ids = [s for s, _ in side]
            if ids != sorted(ids) or len(set(ids)) != len(ids):
                raise ValueError("stoichiometry must be sorted by species id with unique entries")
            if any(c < 1 for _, c in side):
                raise ValueError("stoichiometric coefficients must be >= 1")

    @property
    def order(self) -> int:
        return sum(c for _, c in self.reactants)

    @property
    def generativity(self) -> int:
        return sum(c for _, c in self.products) - self.order

    def reversed(self) -> "Reaction":
        return Reaction(self.products, self.reactants, self.rate_constant)


def make_side(pairs) -> tuple[tuple[int, int], ...]:
    """Normalize an iterable of (species_id, coeff) into canonical form."""
    merged: dict[int, int] = {}
    for sid, coeff in pairs:
        merged[sid] = merged.get(sid, 0) + coeff
    return tuple(sorted((s, c) for s, c in merged.items() if c > 0))


@dataclass(frozen=True)
class Crn:
    species: tuple[Species, ...]
    reactions: tuple[Reaction, ...]

    def __post_init__(self):
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise ValueError("species names must be unique")
        if [s.id for s in self.species] != list(range(len(self.species))):
            raise ValueError("species ids must be dense 0..q-1")
        q = len(self.species)
        for rxn in self.reactions:
            for sid, _ in rxn.reactants + rxn.products:
                if not 0 <= sid < q:
                    raise ValueError(f"reaction references unknown species id {sid}")

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.species)

    def index_of(self, name: str) -> int:
        for s in self.species:
            if s.name == name:
                return s.id
        raise KeyError(name)

    @classmethod
    def from_lists(cls, names, reactions) -> "Crn":
        species = tuple(Species(i, n) for i, n in enumerate(names))
        return cls(species, tuple(reactions))


@dataclass(frozen=True)
class Configuration:
    """A count vector over the species of some CRN."""

    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if (arr < 0).any():
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", arr)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_dict(cls, crn: Crn, mapping: dict[str, int]) -> "Configuration":
        counts = np.zeros(crn.n_species, dtype=np.int64)
        for name, value in mapping.items():
            counts[crn.index_of(name)] = value
        return cls(counts)

    def to_dict(self, crn: Crn) -> dict[str, int]:
        return {s.name: int(self.counts[s.id]) for s in crn.species}


def as_counts(config, q: int) -> np.ndarray:
    """Coerce a Configuration / array / dict-free input to an int64 vector."""
    if isinstance(config, Configuration):
        arr = config.counts
    else:
        arr = np.asarray(config, dtype=np.int64)
    if arr.shape != (q,):
        raise ValueError(f"expected a count vector of length {q}, got shape {arr.shape}")
    return arr.astype(np.int64, copy=True)


def propensity(counts: np.ndarray, volume: float, reaction: Reaction) -> float:
    """Gillespie propensity of one reaction (0 when reactants are short).

    Total function: never raises for insufficient reactants.  The product
    interleaves divisions by the volume so intermediate values stay
    bounded for large counts.
    """
    acc = reaction.rate_constant
    v_left = reaction.order - 1
    for sid, coeff in reaction.reactants:
        c = int(counts[sid])
        if c < coeff:
            return 0.0
        for i in range(coeff):
            acc *= (c - i) / (i + 1)
            if v_left > 0:
                acc /= volume
                v_left -= 1
    while v_left < 0:  # order-0 reactions scale up with volume
        acc *= volume
        v_left += 1
    return acc


def total_propensity(counts: np.ndarray, volume: float, crn: Crn) -> float:
    return sum(propensity(counts, volume, rxn) for rxn in crn.reactions)


def apply_reaction(counts: np.ndarray, reaction: Reaction) -> np.ndarray:
    """Return counts - reactants + products; raises NotApplicable if short."""
    out = counts.copy()
    for sid, coeff in reaction.reactants:
        if out[sid] < coeff:
            raise NotApplicable(f"need {coeff} of species {sid}, have {out[sid]}")
        out[sid] -= coeff
    for sid, coeff in reaction.products:
        out[sid] += coeff
    return out


def order_and_generativity(crn: Crn) -> tuple[int, int]:
    if not crn.reactions:
        raise EmptyCrn("CRN has no reactions")
    return (max(r.order for r in crn.reactions),
            max(r.generativity for r in crn.reactions))


@dataclass(frozen=True)
class CrnTables:
    """Dense array view of a CRN for the simulation kernels."""

    rates: np.ndarray          # float64[R]
    orders: np.ndarray         # int64[R]
    react_ptr: np.ndarray      # int64[R+1] CSR offsets into react_sid/coef
    react_sid: np.ndarray      # int64[nnz]
    react_coef: np.ndarray     # int64[nnz]
    deltas: np.ndarray         # int64[R, Q] products - reactants


@lru_cache(maxsize=128)
def crn_tables(crn: Crn) -> CrnTables:
    q = crn.n_species
    nr = len(crn.reactions)
    rates = np.empty(nr)
    orders = np.empty(nr, dtype=np.int64)
    ptr = np.zeros(nr + 1, dtype=np.int64)
    sids, coefs = [], []
    deltas = np.zeros((nr, q), dtype=np.int64)
    for i, rxn in enumerate(crn.reactions):
        rates[i] = rxn.rate_constant
        orders[i] = rxn.order
        for sid, coeff in rxn.reactants:
            sids.append(sid)
            coefs.append(coeff)
            deltas[i, sid] -= coeff
        ptr[i + 1] = len(sids)
        for sid, coeff in rxn.products:
            deltas[i, sid] += coeff
    return CrnTables(rates, orders, ptr,
                     np.array(sids, dtype=np.int64),
                     np.array(coefs, dtype=np.int64),
                     deltas)
