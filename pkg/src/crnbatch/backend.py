"""Backend selection: numba-JIT hot kernels vs the pure-numpy fallback.

The active backend is chosen once from the CRNBATCH_BACKEND environment
variable ("numba" or "numpy"; default numba when importable) and can be
switched at runtime with set_backend() — the kernel benchmark uses that
to time both paths in one process.

An Engine instance owns the reaction RNG stream of one trajectory.
Engines of both backends expose the same operations; their random
streams differ (statistical, not bitwise, equivalence across backends).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_numpy as knp
from .batch import execute_batch
from .collision import CollisionRunParams
from .crn import Crn, crn_tables
from .uniformize import UniformizedCrn

try:
    from . import _kernels_numba as knb
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    knb = None
    _HAVE_NUMBA = False

_env = os.environ.get("CRNBATCH_BACKEND", "").strip().lower()
if _env and _env not in ("numba", "numpy"):
    raise ValueError(f"CRNBATCH_BACKEND must be 'numba' or 'numpy', got {_env!r}")
_ACTIVE = _env or ("numba" if _HAVE_NUMBA else "numpy")
if _ACTIVE == "numba" and not _HAVE_NUMBA:
    _ACTIVE = "numpy"


def get_backend() -> str:
    return _ACTIVE


def set_backend(name: str) -> None:
    global _ACTIVE
    if name not in ("numba", "numpy"):
        raise ValueError(f"backend must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    _ACTIVE = name


@dataclass
class GillespieResult:
    counts: np.ndarray   # int64[n_records, Q]
    times: np.ndarray    # float64[n_records]
    steps: np.ndarray    # int64[n_records]
    terminal: bool


class _EngineBase:
    name = "?"

    def gillespie(self, crn: Crn, volume: float, counts: np.ndarray, *,
                  t_max: float | None = None, steps_max: int | None = None,
                  thresholds=()) -> GillespieResult:
        tables = crn_tables(crn)
        mode = 0 if t_max is not None else 1
        if mode == 1 and steps_max is None:
            raise ValueError("need t_max or steps_max")
        th = np.asarray(thresholds, dtype=np.float64)
        n_out = len(th) + 1
        out_counts = np.empty((n_out, crn.n_species), dtype=np.int64)
        out_times = np.empty(n_out)
        out_steps = np.empty(n_out, dtype=np.int64)
        work = np.asarray(counts, dtype=np.int64).copy()
        terminal = self._gillespie_kernel(
            work, float(volume), tables.rates, tables.orders, tables.react_ptr,
            tables.react_sid, tables.react_coef, tables.deltas, mode,
            float(t_max if t_max is not None else 0.0),
            int(steps_max if steps_max is not None else 0),
            th, out_counts, out_times, out_steps)
        return GillespieResult(out_counts, out_times, out_steps, bool(terminal))


class NumbaEngine(_EngineBase):
    """Reaction randomness lives in numba's internal np.random state."""

    name = "numba"

    def __init__(self, seed: int):
        knb.seed_reactions(np.uint64(seed) & np.uint64(0x7FFFFFFF))

    def batch(self, uni: UniformizedCrn, counts: np.ndarray, budget: int):
        t = uni.tables
        return knb.run_batch(counts, np.int64(budget), np.int64(t.order),
                             np.int64(t.generativity), np.int64(t.w_index),
                             t.key_table, t.group_ptr, t.probs_flat, t.prod_flat)

    def sample_coll(self, p: CollisionRunParams) -> int:
        return int(knb.sample_coll(np.int64(p.n), np.int64(p.r),
                                   np.int64(p.o), np.int64(p.g)))

    def _gillespie_kernel(self, *args):
        return knb.gillespie(*args)


class NumpyEngine(_EngineBase):
    name = "numpy"

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def batch(self, uni: UniformizedCrn, counts: np.ndarray, budget: int):
        outcome = execute_batch(uni, counts, budget, self.rng)
        counts[:] = outcome.new_config
        return (outcome.total_reactions, outcome.steps_executed,
                outcome.passive_count, int(outcome.collided))

    def sample_coll(self, p: CollisionRunParams) -> int:
        return knp.sample_coll(p.n, p.r, p.o, p.g, self.rng)

    def _gillespie_kernel(self, *args):
        return knp.gillespie(*args, rng=self.rng)


def get_engine(seed: int, backend: str | None = None):
    name = backend or _ACTIVE
    if name == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("numba backend unavailable")
        return NumbaEngine(seed)
    if name == "numpy":
        return NumpyEngine(seed)
    raise ValueError(f"unknown backend {name!r}")


def warm_up() -> None:
    """Trigger JIT compilation on tiny inputs (used before benchmarks)."""
    if _ACTIVE != "numba":
        return
    from .parser import parse_crn
    from .uniformize import uniformize
    crn = parse_crn("A + B -> C : 1\nC -> A + B : 1")
    eng = get_engine(0)
    counts = np.array([5, 5, 0], dtype=np.int64)
    eng.gillespie(crn, 1.0, counts, t_max=0.01)
    eng.gillespie(crn, 1.0, counts, steps_max=2)
    uni = uniformize(crn, 10.0, 10)
    padded = uni.padded(np.array([5, 5, 0], dtype=np.int64))
    eng.batch(uni, padded, 3)
    eng.sample_coll(CollisionRunParams(100, 0, 2, 1))
