"""Pure-numpy twins of the JIT kernels (fallback backend).

Same signatures as _kernels_numba.py apart from the explicit generator
argument; selected via CRNBATCH_BACKEND=numpy or when numba is missing.
Statistically equivalent to the JIT path, not stream-identical.
"""

from __future__ import annotations

import math

import numpy as np

from .collision import CollisionRunParams, invert_coll as _invert, coll_log_ccdf as _ccdf


def coll_log_ccdf(n, r, o, g, k):
    return _ccdf(CollisionRunParams(int(n), int(r), int(o), int(g)), int(k))


def invert_coll(n, r, o, g, log_u):
    p = CollisionRunParams(int(n), int(r), int(o), int(g))
    if r == 0 and n >= o and p.max_length >= 1:
        # Pr[l >= 1] = 1 exactly; shield the search from float wobble
        return max(1, _invert(p, log_u))
    return _invert(p, log_u)


def sample_coll(n, r, o, g, rng: np.random.Generator):
    u = rng.random()
    while u <= 0.0:
        u = rng.random()
    return invert_coll(n, r, o, g, math.log(u))


def hypergeometric(good, bad, sample, rng: np.random.Generator):
    if sample <= 0 or good <= 0:
        return 0
    if bad <= 0 or sample >= good + bad:
        return min(good, sample)
    return int(rng.hypergeometric(good, bad, sample))


def gillespie(counts, volume, rates, orders, react_ptr, react_sid, react_coef,
              deltas, mode, t_max, steps_max, thresholds,
              out_counts, out_times, out_steps, rng: np.random.Generator):
    """Reference implementation of the Gillespie kernel (see numba twin)."""
    n_rxn = len(rates)
    q = len(counts)
    nth = len(thresholds)
    prop = np.empty(n_rxn)
    t = 0.0
    steps = 0
    rec = 0
    while True:
        ptot = 0.0
        for j in range(n_rxn):
            acc = rates[j]
            v_left = orders[j] - 1
            ok = True
            for idx in range(react_ptr[j], react_ptr[j + 1]):
                c = counts[react_sid[idx]]
                cc = react_coef[idx]
                if c < cc:
                    ok = False
                    break
                for i in range(cc):
                    acc *= (c - i) / (i + 1.0)
                    if v_left > 0:
                        acc /= volume
                        v_left -= 1
            if not ok:
                prop[j] = 0.0
                continue
            while v_left < 0:
                acc *= volume
                v_left += 1
            prop[j] = acc
            ptot += acc
        if ptot <= 0.0:
            while rec < nth:
                out_counts[rec] = counts
                out_times[rec] = thresholds[rec] if mode == 0 else t
                out_steps[rec] = steps if mode == 0 else int(thresholds[rec])
                rec += 1
            out_counts[nth] = counts
            out_times[nth] = t_max if mode == 0 else t
            out_steps[nth] = steps if mode == 0 else steps_max
            return 1
        dt = rng.standard_exponential() / ptot
        if mode == 0:
            while rec < nth and t + dt > thresholds[rec]:
                out_counts[rec] = counts
                out_times[rec] = thresholds[rec]
                out_steps[rec] = steps
                rec += 1
            if t + dt > t_max:
                out_counts[nth] = counts
                out_times[nth] = t_max
                out_steps[nth] = steps
                return 0
        t += dt
        u = rng.random() * ptot
        chosen = n_rxn - 1
        acc = 0.0
        for j in range(n_rxn):
            acc += prop[j]
            if u < acc:
                chosen = j
                break
        counts += deltas[chosen]
        steps += 1
        if mode == 1:
            while rec < nth and steps >= thresholds[rec]:
                out_counts[rec] = counts
                out_times[rec] = t
                out_steps[rec] = steps
                rec += 1
            if steps >= steps_max:
                out_counts[nth] = counts
                out_times[nth] = t
                out_steps[nth] = steps
                return 0
