"""The collision-free run-length distribution coll(n, r, o, g).

A batch starts from n molecules of which r are red (already interacted).
Each reaction consumes o molecules drawn uniformly without replacement
and returns o + g red molecules.  The run length is the number of
reactions executed before any red molecule is drawn.  Its reverse CDF
has the closed form (g > 0)

    Pr[l >= k] = (n-r)! / (n-r-ko)! * prod_{j<o} (n-g-j)!^(g) / (n+g(k-1)-j)!^(g)

with multifactorials x!^(g) = x(x-g)(x-2g)... down to the last positive
term, and the g = 0 simplification prod_j (n-j)^-k.  All arithmetic is
in log space; multifactorials reduce to gamma-function ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .crn import POPULATION_CAP
from .errors import InvalidParams, PopulationCapExceeded

LOG_2 = math.log(2.0)


@dataclass(frozen=True)
class CollisionRunParams:
    n: int
    r: int
    o: int
    g: int

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.r <= self.n:
            raise InvalidParams(f"need 0 <= r <= n >= 1, got n={self.n} r={self.r}")
        if self.o < 1 or self.g < 0:
            raise InvalidParams(f"need o >= 1 and g >= 0, got o={self.o} g={self.g}")
        if self.n > POPULATION_CAP:
            raise PopulationCapExceeded(
                f"n={self.n} exceeds the 64-bit sampling cap {POPULATION_CAP}; "
                "inversion would suffer catastrophic cancellation")

    @property
    def max_length(self) -> int:
        return (self.n - self.r) // self.o


def multifactorial_log(x: int, g: int) -> float:
    """log of x!^(g) = x(x-g)(x-2g)... down to the last positive term.

    Evaluated as m*log(g) + logGamma(x/g + 1) - logGamma(x/g + 1 - m)
    with m = ceil(x/g) terms, after dividing every term by g.
    """
    if x < 1 or g < 1:
        raise InvalidParams(f"multifactorial needs x >= 1, g >= 1, got x={x} g={g}")
    return _logmf(x, g)


def _logmf(x: float, g: int) -> float:
    # internal: empty product (x <= 0) contributes log 1 = 0
    if x <= 0:
        return 0.0
    m = -(-int(x) // g)
    xg = x / g
    return m * math.log(g) + math.lgamma(xg + 1.0) - math.lgamma(xg + 1.0 - m)


def coll_log_ccdf(p: CollisionRunParams, k: int) -> float:
    """log Pr[l >= k]; -inf outside the support, 0 at k <= 0."""
    if k <= 0:
        return 0.0
    n, r, o, g = p.n, p.r, p.o, p.g
    if k * o > n - r:
        return -math.inf
    # pair numerator/denominator log-gammas of similar magnitude before summing
    terms = [math.lgamma(n - r + 1) - math.lgamma(n - r - k * o + 1)]
    if g > 0:
        for j in range(o):
            terms.append(_logmf(n - g - j, g) - _logmf(n + g * (k - 1) - j, g))
    else:
        for j in range(o):
            terms.append(-k * math.log(n - j))
    return math.fsum(terms)


def coll_ccdf_direct_log(p: CollisionRunParams, k: int) -> float:
    """O(k) oracle: log prod_{i<k} prod_{j<o} (n-r-oi-j)/(n+gi-j)."""
    if k <= 0:
        return 0.0
    total = 0.0
    for i in range(k):
        for j in range(p.o):
            num = p.n - p.r - p.o * i - j
            if num <= 0:
                return -math.inf
            total += math.log(num) - math.log(p.n + p.g * i - j)
    return total


def invert_coll(p: CollisionRunParams, log_u: float) -> int:
    """Largest k with log Pr[l >= k] >= log_u (exact half-open inversion)."""
    lo, hi = 0, p.max_length + 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if coll_log_ccdf(p, mid) >= log_u:
            lo = mid
        else:
            hi = mid
    return lo


def sample_coll(p: CollisionRunParams, rng: np.random.Generator) -> int:
    """Inversion sampling via binary search: O(log n) CCDF evaluations."""
    if p.r == p.n:
        return 0
    u = rng.random()
    while u <= 0.0:
        u = rng.random()
    return invert_coll(p, math.log(u))


def coll_pmf(p: CollisionRunParams) -> np.ndarray:
    """Full probability mass function over 0..max_length (for tests)."""
    kmax = p.max_length
    ccdf = np.array([math.exp(coll_log_ccdf(p, k)) for k in range(kmax + 2)])
    return np.maximum(ccdf[:-1] - ccdf[1:], 0.0)


def coll_expectation_bounds(n: int, o: int, g: int) -> tuple[float, float]:
    """Analytic bounds on E[l] for r = 0:  [sqrt(n)(1-e^{-o(o+g)})/(o(o+g)), 2 sqrt(n)]."""
    if n < 1 or o < 1 or g < 0:
        raise InvalidParams("need n >= 1, o >= 1, g >= 0")
    s = math.sqrt(n)
    lower = s * (1.0 - math.exp(-o * (o + g))) / (o * (o + g))
    return lower, 2.0 * s


def urn_run_length(n: int, r: int, o: int, g: int, rng: np.random.Generator) -> int:
    """Brute-force red/green urn oracle: simulate draws until a red appears."""
    green, red = n - r, r
    length = 0
    while green >= o:
        if red > 0 and rng.hypergeometric(red, green, o) > 0:
            return length
        green -= o
        red += o + g
        length += 1
    return length
