"""JIT-compiled hot kernels: collision-length inversion, single-batch
execution, and the Gillespie loop.

The pure-numpy twins live in _kernels_numpy.py; the CRNBATCH_BACKEND
environment variable (or crnbatch.backend.set_backend) picks between
them.  All randomness in this module flows through numba's internal
np.random state, seeded once per trajectory via seed_reactions(), so the
reaction stream is independent of any Python-level generator.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_D1 = 1.7155277699214135  # 2*sqrt(2/e)
_D2 = 0.8989161620588988  # 3 - 2*sqrt(3/e)


@njit(cache=True)
def seed_reactions(seed):
    np.random.seed(seed)


@njit(cache=True, inline="always")
def _hyp_small(good, bad, sample):
    # inversion-by-counting, O(sample); used when sample <= 10
    d1 = bad + good - sample
    d2 = float(min(bad, good))
    y = d2
    k = sample
    while y > 0.0:
        y -= math.floor(np.random.random() + y / (d1 + k))
        k -= 1
        if k == 0:
            break
    z = int(d2 - y)
    if good > bad:
        z = sample - z
    return z


@njit(cache=True, inline="always")
def _hyp_hrua(good, bad, sample):
    # Stadlober's ratio-of-uniforms HRUA*: O(1) per draw
    mingoodbad = min(good, bad)
    popsize = good + bad
    maxgoodbad = max(good, bad)
    m = min(sample, popsize - sample)
    d4 = mingoodbad / popsize
    d5 = 1.0 - d4
    d6 = m * d4 + 0.5
    d7 = math.sqrt((popsize - m) * sample * d4 * d5 / (popsize - 1) + 0.5)
    d8 = _D1 * d7 + _D2
    d9 = int((m + 1) * (mingoodbad + 1) / (popsize + 2))
    d10 = (math.lgamma(d9 + 1) + math.lgamma(mingoodbad - d9 + 1)
           + math.lgamma(m - d9 + 1) + math.lgamma(maxgoodbad - m + d9 + 1))
    d11 = min(min(m, mingoodbad) + 1.0, math.floor(d6 + 16 * d7))
    while True:
        x = np.random.random()
        y = np.random.random()
        w = d6 + d8 * (y - 0.5) / x
        if w < 0.0 or w >= d11:
            continue
        z = int(math.floor(w))
        t = d10 - (math.lgamma(z + 1) + math.lgamma(mingoodbad - z + 1)
                   + math.lgamma(m - z + 1) + math.lgamma(maxgoodbad - m + z + 1))
        if x * (4.0 - x) - 3.0 <= t:
            break
        if x * (x - t) >= 1:
            continue
        if 2.0 * math.log(x) <= t:
            break
    if good > bad:
        z = m - z
    if m < sample:
        z = good - z
    return z


@njit(cache=True)
def hypergeometric(good, bad, sample):
    """Number of good in `sample` draws without replacement from good+bad."""
    if sample <= 0 or good <= 0:
        return 0
    if bad <= 0 or sample >= good + bad:
        return min(good, sample)
    if sample > 10:
        return _hyp_hrua(good, bad, sample)
    return _hyp_small(good, bad, sample)


@njit(cache=True, inline="always")
def _logmf(x, g):
    # log multifactorial x!^(g); empty product for x <= 0
    if x <= 0:
        return 0.0
    m = (x + g - 1) // g
    xg = x / g
    return m * math.log(g) + math.lgamma(xg + 1.0) - math.lgamma(xg + 1.0 - m)


@njit(cache=True)
def coll_log_ccdf(n, r, o, g, k):
    """log Pr[run length >= k] for coll(n, r, o, g)."""
    if k <= 0:
        return 0.0
    if k * o > n - r:
        return -np.inf
    acc = math.lgamma(n - r + 1) - math.lgamma(n - r - k * o + 1)
    if g > 0:
        for j in range(o):
            acc += _logmf(n - g - j, g) - _logmf(n + g * (k - 1) - j, g)
    else:
        for j in range(o):
            acc -= k * math.log(n - j)
    return acc


@njit(cache=True)
def invert_coll(n, r, o, g, log_u):
    """Largest k with log Pr[l >= k] >= log_u (binary search)."""
    lo = 1 if (r == 0 and n >= o) else 0  # Pr[l >= 1] = 1 exactly when r = 0
    hi = (n - r) // o + 1
    if hi <= lo:
        return lo if lo <= (n - r) // o else 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if coll_log_ccdf(n, r, o, g, mid) >= log_u:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def sample_coll(n, r, o, g):
    u = np.random.random()
    while u <= 0.0:
        u = np.random.random()
    return invert_coll(n, r, o, g, math.log(u))


@njit(cache=True, inline="always")
def _allocate(pool, pool_total, m, out):
    """Draw m molecules without replacement from pool; add them to out.

    Sequential conditional hypergeometric chain; mutates pool and
    returns the updated pool total.
    """
    left = m
    rest = pool_total
    for s in range(pool.shape[0]):
        if left == 0:
            break
        good = pool[s]
        rest -= good
        if good == 0:
            continue
        if rest <= 0:
            x = left
        else:
            x = hypergeometric(good, rest, left)
        if x > 0:
            pool[s] -= x
            out[s] += x
            left -= x
    return pool_total - m


@njit(cache=True, inline="always")
def _log_comb(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


@njit(cache=True)
def run_batch(counts, budget, o, g, w_idx, key_table, group_ptr, probs_flat, prod_flat):
    """One batch on `counts` (mutated in place).

    Returns (total_reactions, real, passive, collided); total <= budget.
    """
    q = counts.shape[0]
    n = np.int64(0)
    for s in range(q):
        n += counts[s]
    u = np.random.random()
    while u <= 0.0:
        u = np.random.random()
    length = invert_coll(n, 0, o, g, math.log(u))
    if length >= budget:
        run_len = budget
        do_coll = False
    else:
        run_len = length
        do_coll = True

    # transition tensor: BFS over coordinate positions, one hypergeometric
    # allocation per cell, pool depleted as molecules are committed
    pool = counts.copy()
    pool_total = n
    qo = 1
    for _ in range(o):
        qo *= q
    cap = run_len if run_len < qo else qo
    cur_code = np.empty(cap, np.int64)
    cur_cnt = np.empty(cap, np.int64)
    new_code = np.empty(cap, np.int64)
    new_cnt = np.empty(cap, np.int64)
    cur_code[0] = 0
    cur_cnt[0] = run_len
    n_cur = 1
    for _d in range(o):
        n_new = 0
        for ci in range(n_cur):
            m = cur_cnt[ci]
            code = cur_code[ci]
            left = m
            rest = pool_total
            for s in range(q):
                if left == 0:
                    break
                good = pool[s]
                rest -= good
                if good == 0:
                    continue
                if rest <= 0:
                    x = left
                else:
                    x = hypergeometric(good, rest, left)
                if x > 0:
                    pool[s] -= x
                    new_code[n_new] = code * q + s
                    new_cnt[n_new] = x
                    n_new += 1
                    left -= x
            pool_total -= m
        tmp_code = cur_code
        cur_code = new_code
        new_code = tmp_code
        tmp_cnt = cur_cnt
        cur_cnt = new_cnt
        new_cnt = tmp_cnt
        n_cur = n_new

    # resolve each reactant multiset into real / passive executions
    red = np.zeros(q, np.int64)
    digits = np.empty(o, np.int64)
    real = np.int64(0)
    passive = np.int64(0)
    for ci in range(n_cur):
        m = cur_cnt[ci]
        code = cur_code[ci]
        for d in range(o - 1, -1, -1):
            digits[d] = code % q
            code //= q
        # insertion sort (o is tiny) for the canonical multiset code
        for a in range(1, o):
            key = digits[a]
            b = a - 1
            while b >= 0 and digits[b] > key:
                digits[b + 1] = digits[b]
                b -= 1
            digits[b + 1] = key
        scode = np.int64(0)
        for d in range(o):
            scode = scode * q + digits[d]
        gid = key_table[scode]
        if gid < 0:
            passive += m
            for d in range(o):
                red[digits[d]] += m
            red[w_idx] += m * g
        else:
            start = group_ptr[gid]
            nreal = group_ptr[gid + 1] - start
            pstart = start + gid
            draws = np.random.multinomial(m, probs_flat[pstart:pstart + nreal + 1])
            for j in range(nreal):
                xj = draws[j]
                if xj > 0:
                    real += xj
                    for s in range(q):
                        red[s] += xj * prod_flat[start + j, s]
            xp = draws[nreal]
            if xp > 0:
                passive += xp
                for d in range(o):
                    red[digits[d]] += xp
                red[w_idx] += xp * g

    collided = np.int64(0)
    if do_coll:
        red_tot = np.int64(0)
        for s in range(q):
            red_tot += red[s]
        green_tot = pool_total
        # red-count j >= 1 with probability proportional to C(red,j)C(green,o-j)
        max_lw = -np.inf
        lws = np.empty(o + 1)
        lws[0] = -np.inf
        for j in range(1, o + 1):
            if j <= red_tot and o - j <= green_tot:
                lws[j] = _log_comb(red_tot, j) + _log_comb(green_tot, o - j)
                if lws[j] > max_lw:
                    max_lw = lws[j]
            else:
                lws[j] = -np.inf
        wsum = 0.0
        for j in range(1, o + 1):
            if lws[j] > -np.inf:
                lws[j] = math.exp(lws[j] - max_lw)
                wsum += lws[j]
            else:
                lws[j] = 0.0
        uu = np.random.random() * wsum
        jred = o
        acc = 0.0
        for j in range(1, o + 1):
            acc += lws[j]
            if uu < acc:
                jred = j
                break
        ms = np.zeros(q, np.int64)
        red_tot = _allocate(red, red_tot, jred, ms)
        if o - jred > 0:
            pool_total = _allocate(pool, pool_total, o - jred, ms)
        # canonical code of the collision multiset
        di = 0
        for s in range(q):
            for _ in range(ms[s]):
                digits[di] = s
                di += 1
        scode = np.int64(0)
        for d in range(o):
            scode = scode * q + digits[d]
        gid = key_table[scode]
        executed_real = False
        if gid >= 0:
            start = group_ptr[gid]
            nreal = group_ptr[gid + 1] - start
            pstart = start + gid
            uu = np.random.random()
            acc = 0.0
            for j in range(nreal):
                acc += probs_flat[pstart + j]
                if uu < acc:
                    real += 1
                    for s in range(q):
                        red[s] += prod_flat[start + j, s]
                    executed_real = True
                    break
        if not executed_real:
            passive += 1
            for s in range(q):
                red[s] += ms[s]
            red[w_idx] += g
        collided = 1

    for s in range(q):
        counts[s] = pool[s] + red[s]
    return run_len + collided, real, passive, collided


@njit(cache=True, inline="always")
def _reaction_propensity(counts, volume, rate, order, ptr, sid, coef, j):
    acc = rate
    v_left = order - 1
    for idx in range(ptr[j], ptr[j + 1]):
        c = counts[sid[idx]]
        cc = coef[idx]
        if c < cc:
            return 0.0
        for i in range(cc):
            acc *= (c - i) / (i + 1.0)
            if v_left > 0:
                acc /= volume
                v_left -= 1
    while v_left < 0:
        acc *= volume
        v_left += 1
    return acc


@njit(cache=True)
def gillespie(counts, volume, rates, orders, react_ptr, react_sid, react_coef,
              deltas, mode, t_max, steps_max, thresholds,
              out_counts, out_times, out_steps):
    """Direct-method Gillespie loop with in-kernel checkpoint recording.

    mode 0 stops at t_max (thresholds are times), mode 1 stops after
    steps_max reactions (thresholds are step counts as floats).  Fills
    len(thresholds)+1 output rows (checkpoints then the final state) and
    returns 1 if a terminal configuration was reached.
    """
    n_rxn = rates.shape[0]
    q = counts.shape[0]
    nth = thresholds.shape[0]
    prop = np.empty(n_rxn)
    t = 0.0
    steps = np.int64(0)
    rec = 0
    while True:
        ptot = 0.0
        for j in range(n_rxn):
            prop[j] = _reaction_propensity(counts, volume, rates[j], orders[j],
                                           react_ptr, react_sid, react_coef, j)
            ptot += prop[j]
        if ptot <= 0.0:
            # terminal: configuration freezes; discrete steps self-transition
            while rec < nth:
                for s in range(q):
                    out_counts[rec, s] = counts[s]
                out_times[rec] = thresholds[rec] if mode == 0 else t
                out_steps[rec] = steps if mode == 0 else np.int64(thresholds[rec])
                rec += 1
            for s in range(q):
                out_counts[nth, s] = counts[s]
            out_times[nth] = t_max if mode == 0 else t
            out_steps[nth] = steps if mode == 0 else steps_max
            return 1
        dt = np.random.standard_exponential() / ptot
        if mode == 0:
            while rec < nth and t + dt > thresholds[rec]:
                for s in range(q):
                    out_counts[rec, s] = counts[s]
                out_times[rec] = thresholds[rec]
                out_steps[rec] = steps
                rec += 1
            if t + dt > t_max:
                for s in range(q):
                    out_counts[nth, s] = counts[s]
                out_times[nth] = t_max
                out_steps[nth] = steps
                return 0
        t += dt
        u = np.random.random() * ptot
        acc = 0.0
        chosen = n_rxn - 1
        for j in range(n_rxn):
            acc += prop[j]
            if u < acc:
                chosen = j
                break
        for s in range(q):
            counts[s] += deltas[chosen, s]
        steps += 1
        if mode == 1:
            while rec < nth and steps >= thresholds[rec]:
                for s in range(q):
                    out_counts[rec, s] = counts[s]
                out_times[rec] = t
                out_steps[rec] = steps
                rec += 1
            if steps >= steps_max:
                for s in range(q):
                    out_counts[nth, s] = counts[s]
                out_times[nth] = t
                out_steps[nth] = steps
                return 0
