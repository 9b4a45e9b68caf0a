"""Hypoexponential batch-duration sampling.

The duration of a batch of k reactions starting from N molecules is a
sum of independent exponentials with strictly increasing rates

    lambda_i = rate_scale * C(N + i*g, o),   i = 0..k-1,

a hypoexponential distribution.  This module provides

  * exact C-coefficient computation (naive O(k^2) in log space, and a
    divide-and-conquer product tree with multipoint evaluation carried
    out in exact integer arithmetic),
  * a sign-aware log-density with analytic slope,
  * adaptive rejection sampling for the exact path,
  * digamma/trigamma closed forms for the mean and variance (computed
    with mpmath: the alternating sums cancel catastrophically in
    doubles), plus the geometric-mean shortcut used when the first and
    last stage means are within 10% of each other,
  * the moment-matched gamma sampler, and
  * end-of-simulation rejection sampling for exact stopping times.

Coefficient magnitudes explode combinatorially, so they are stored as
(sign, log magnitude); when the exact integer path ran they are also
kept as Fractions for arbitrary-precision density evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp
import numpy as np

from .errors import (DegenerateRates, EnvelopeMismatch, InvalidParams,
                     NumericUnderflow, RejectionLimitExceeded)

# below this relative spread between the first and last stage means the
# geometric-mean approximation of the moments is used (error <= d/2 + d^2/8)
GEOMETRIC_DELTA_THRESHOLD = 0.1
# k caps: beyond EXACT_K_CAP the exact sampler is refused (gamma is the
# practical default there); beyond FAST_COEFF_K_CAP the integer product
# tree is not attempted
EXACT_K_CAP = 4096
FAST_COEFF_K_CAP = 1024
# exact sampler uses plain sequential stage sums below this k
DIRECT_K_THRESHOLD = 64

_MP_DPS = 60


@dataclass(frozen=True)
class HypoexpSpec:
    """Stage-rate description of one batch's duration distribution."""

    n0: int
    k: int
    o: int
    g: int
    rate_scale: float

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParams(f"need k >= 1 stages, got {self.k}")
        if self.o < 1 or self.g < 0 or self.n0 < self.o:
            raise InvalidParams(f"need n0 >= o >= 1 and g >= 0, got {self}")
        if not (self.rate_scale > 0):
            raise InvalidParams(f"rate_scale must be positive, got {self.rate_scale}")

    def integer_rates(self) -> list[int]:
        """C(n0 + i*g, o) as exact integers, strictly increasing when g > 0."""
        return [math.comb(self.n0 + i * self.g, self.o) for i in range(self.k)]

    def scaled_rates(self) -> np.ndarray:
        return self.rate_scale * np.array(
            [math.comb(self.n0 + i * self.g, self.o) for i in range(self.k)], dtype=float)


@dataclass(frozen=True)
class HypoexpCoefficients:
    spec: HypoexpSpec
    sign: np.ndarray               # int8[k], (-1)^i for ascending rates
    log_mag: np.ndarray            # float64[k]
    fractions: tuple[Fraction, ...] | None = None

    def value_sum(self) -> float:
        """sum_i C_i, the density-normalization identity (should be 1)."""
        if self.fractions is not None:
            return float(sum(self.fractions))
        m = self.log_mag.max()
        return float(np.sum(self.sign * np.exp(self.log_mag - m)) * math.exp(m))


def _check_distinct(spec: HypoexpSpec) -> None:
    if spec.g == 0:
        raise DegenerateRates(
            "all stage rates coincide when g = 0; use the Erlang path instead")


def hypoexp_coefficients(spec: HypoexpSpec) -> HypoexpCoefficients:
    """Naive O(k^2) products C_i = prod_{j != i} lambda_j / (lambda_j - lambda_i).

    Scale-invariant, hence computed on the integer rates.  Signs are
    (-1)^i because the rates ascend.
    """
    _check_distinct(spec)
    if spec.k > EXACT_K_CAP:
        raise InvalidParams(f"k={spec.k} exceeds the exact-path cap {EXACT_K_CAP}")
    rates = np.array(spec.integer_rates(), dtype=float)
    logs = np.log(rates)
    k = spec.k
    log_mag = np.empty(k)
    for i in range(k):
        diff = np.abs(rates - rates[i])
        diff[i] = 1.0
        log_mag[i] = logs.sum() - logs[i] - np.log(diff).sum()
    sign = np.where(np.arange(k) % 2 == 0, 1, -1).astype(np.int8)
    return HypoexpCoefficients(spec, sign, log_mag)


def _log_bigint(x: int) -> float:
    bl = x.bit_length()
    if bl <= 512:
        return math.log(x)
    shift = bl - 512
    return math.log(x >> shift) + shift * LOG2


LOG2 = math.log(2.0)


def _poly_mul_abs(a: list[int], b: list[int]) -> list[int]:
    """Multiply two polynomials given by |coefficient| lists whose true
    signs alternate with the degree (products of (L - x) factors).

    Uses Kronecker substitution: pack into one big integer each, one
    CPython multiplication, unpack.  Exact.
    """
    bits = max(max(a).bit_length(), 1) + max(max(b).bit_length(), 1)
    bits += (min(len(a), len(b))).bit_length() + 1
    pa = 0
    for i in reversed(range(len(a))):
        pa = (pa << bits) | a[i]
    pb = 0
    for i in reversed(range(len(b))):
        pb = (pb << bits) | b[i]
    prod = pa * pb
    mask = (1 << bits) - 1
    out = []
    for _ in range(len(a) + len(b) - 1):
        out.append(prod & mask)
        prod >>= bits
    return out


def hypoexp_coefficients_fast(spec: HypoexpSpec) -> HypoexpCoefficients:
    """Divide-and-conquer product tree + multipoint evaluation of f'.

    f(x) = prod_j (lambda_j - x) has integer roots, so the tree is run in
    exact integer arithmetic (the float analogue cancels catastrophically
    for k beyond a few dozen); the denominators are -f'(lambda_i) via
    Horner evaluation, and C_i = (prod_j lambda_j / lambda_i) / -f'(lambda_i)
    comes out as an exact rational.
    """
    _check_distinct(spec)
    if spec.k > FAST_COEFF_K_CAP:
        raise InvalidParams(f"k={spec.k} exceeds the fast-coefficient cap {FAST_COEFF_K_CAP}")
    rates = spec.integer_rates()
    k = spec.k
    # coefficient m of f holds (-1)^m e_{k-m}; store |coefficients| ascending by degree
    polys: list[list[int]] = [[lam, 1] for lam in rates]
    while len(polys) > 1:
        nxt = [_poly_mul_abs(polys[i], polys[i + 1])
               for i in range(0, len(polys) - 1, 2)]
        if len(polys) % 2:
            nxt.append(polys[-1])
        polys = nxt
    f_abs = polys[0]
    total = 1
    for lam in rates:
        total *= lam
    fractions = []
    for i, lam in enumerate(rates):
        # f'(x) = sum_m m (-1)^m |f_m| x^(m-1), evaluated by Horner at lam
        acc = 0
        for m in range(k, 0, -1):
            acc = acc * lam + (m if m % 2 == 0 else -m) * f_abs[m]
        fractions.append(Fraction(total // lam, -acc))
    sign = np.array([1 if q > 0 else -1 for q in fractions], dtype=np.int8)
    log_mag = np.array([_log_bigint(abs(q.numerator)) - _log_bigint(q.denominator)
                        for q in fractions])
    return HypoexpCoefficients(spec, sign, log_mag, tuple(fractions))


def _signed_lse(sign: np.ndarray, log_terms: np.ndarray) -> tuple[float, float]:
    """Return (sign, log|sum|) of sum_i sign_i * exp(log_terms_i); sign 0 if <= 0."""
    m = log_terms.max()
    if not math.isfinite(m):
        return 0.0, -math.inf
    s = float(np.sum(sign * np.exp(log_terms - m)))
    if s <= 0.0:
        return (0.0, -math.inf) if s == 0.0 else (-1.0, m + math.log(-s))
    return 1.0, m + math.log(s)


def _logpdf_mp(spec: HypoexpSpec, coeffs: HypoexpCoefficients,
               t: float) -> tuple[float, float]:
    """(log P(t), d/dt log P(t)) at extended precision."""
    if coeffs.fractions is None:
        raise NumericUnderflow(
            "density evaluation cancelled catastrophically and no exact "
            "coefficients are available (k above the fast-coefficient cap)")
    with mp.workdps(max(_MP_DPS, int(coeffs.log_mag.max() / LOG2 / 3) + 30)):
        p = mp.mpf(0)
        dp = mp.mpf(0)
        for q, lam_int in zip(coeffs.fractions, spec.integer_rates()):
            lam = mp.mpf(lam_int) * spec.rate_scale
            term = mp.mpf(q.numerator) / q.denominator * lam * mp.e**(-lam * t)
            p += term
            dp -= lam * term
        if p <= 0:
            raise NumericUnderflow(f"hypoexponential density underflowed at t={t}")
        return float(mp.log(p)), float(dp / p)


def hypoexp_logpdf(spec: HypoexpSpec, coeffs: HypoexpCoefficients, t: float) -> float:
    """log P(t) = log sum_i C_i lambda_i exp(-lambda_i t), sign-aware.

    Falls back to arbitrary precision when the alternating sum loses all
    of its double-precision significance.
    """
    return _logpdf_slope(spec, coeffs, t, want_slope=False)[0]


def hypoexp_logpdf_and_slope(spec: HypoexpSpec, coeffs: HypoexpCoefficients,
                             t: float) -> tuple[float, float]:
    return _logpdf_slope(spec, coeffs, t, want_slope=True)


def _logpdf_slope(spec, coeffs, t, want_slope):
    if coeffs.spec != spec:
        raise EnvelopeMismatch("coefficients were computed for a different spec")
    if t < 0:
        raise InvalidParams("density support is t >= 0")
    lam = spec.scaled_rates()
    log_lam = np.log(lam)
    base = coeffs.log_mag + log_lam - lam * t
    sgn0, log_p = _signed_lse(coeffs.sign, base)
    # cancellation guard: the float64 noise floor of a k-term alternating
    # sum is k*eps below its largest term; demand ~8 surviving digits
    budget = -math.log(np.finfo(float).eps) - math.log(spec.k) - 18.4
    if sgn0 <= 0.0 or base.max() - log_p > budget:
        return _logpdf_mp(spec, coeffs, t)
    if not want_slope:
        return log_p, math.nan
    sgn1, log_d = _signed_lse(coeffs.sign, base + log_lam)  # |P'(t)| parts
    if sgn1 == 0.0:
        return log_p, 0.0
    if (base + log_lam).max() - log_d > budget:
        return _logpdf_mp(spec, coeffs, t)
    slope = -sgn1 * math.exp(log_d - log_p)
    return log_p, slope


def hypoexp_mean_closed(n: int, k: int, o: int, g: int) -> float:
    """sum_{i<k} 1/C(n+ig, o) via an o-term digamma identity.

    Inverse binomials decompose by partial fractions into o alternating
    terms, each an arithmetic-progression sum that telescopes into a
    digamma difference.  The alternating sum cancels catastrophically in
    doubles, so it is evaluated with mpmath.
    """
    _validate_moment_params(n, k, o, g)
    with mp.workdps(_MP_DPS):
        tot = mp.mpf(0)
        for m in range(o):
            a = mp.mpf(n - (o - 1 - m)) / g
            term = math.comb(o - 1, m) * (mp.digamma(k + a) - mp.digamma(a))
            tot += term if m % 2 == 0 else -term
        return float(mp.mpf(o) / g * tot)


def hypoexp_variance_closed(n: int, k: int, o: int, g: int) -> float:
    """sum_{i<k} 1/C(n+ig, o)^2: trigamma diagonal plus digamma cross terms."""
    _validate_moment_params(n, k, o, g)
    with mp.workdps(_MP_DPS):
        diag = mp.mpf(0)
        for m in range(o):
            a = mp.mpf(n - (o - 1 - m)) / g
            diag += math.comb(o - 1, m) ** 2 * (mp.polygamma(1, a) - mp.polygamma(1, k + a))
        tot = diag * mp.mpf(o) ** 2 / mp.mpf(g) ** 2
        cross = mp.mpf(0)
        for m in range(o):
            am = mp.mpf(n - (o - 1 - m)) / g
            for j in range(m + 1, o):
                aj = mp.mpf(n - (o - 1 - j)) / g
                val = (mp.digamma(am) - mp.digamma(k + am)
                       - mp.digamma(aj) + mp.digamma(k + aj))
                cross += (mp.mpf((-1) ** (m + j)) / (m - j)
                          * math.comb(o - 1, m) * math.comb(o - 1, j) * val)
        tot += 2 * mp.mpf(o) ** 2 / g * cross
        return float(tot)


def _validate_moment_params(n, k, o, g):
    if g < 1:
        raise InvalidParams("closed forms require g >= 1 (g = 0 is the Erlang case)")
    if o < 1 or o > n or k < 1:
        raise InvalidParams(f"need 1 <= o <= n and k >= 1, got n={n} k={k} o={o}")


def hypoexp_moments_direct(n: int, k: int, o: int, g: int) -> tuple[float, float]:
    """O(k) oracle: plain sums of 1/C(n+ig,o) and its square."""
    mean = var = 0.0
    for i in range(k):
        t = 1.0 / math.comb(n + i * g, o)
        mean += t
        var += t * t
    return mean, var


def first_last_delta(n: int, k: int, o: int, g: int) -> float:
    """Relative error between the first and last stage means, t1/tk - 1."""
    if k == 1:
        return 0.0
    t1 = 1.0 / math.comb(n, o)
    tk = 1.0 / math.comb(n + (k - 1) * g, o)
    return (t1 - tk) / tk


def hypoexp_moments(spec: HypoexpSpec) -> tuple[float, float, str]:
    """(mean, variance, method) of the scaled distribution.

    Routes: Erlang closed form for g = 0; the geometric-mean shortcut
    k*sqrt(t1 tk), k*t1*tk when the first/last spread is below 0.1;
    direct summation when k is small; digamma/trigamma closed forms
    otherwise.
    """
    n, k, o, g = spec.n0, spec.k, spec.o, spec.g
    if g == 0:
        lam = 1.0 / math.comb(n, o)
        mean, var, method = k * lam, k * lam * lam, "erlang"
    else:
        delta = first_last_delta(n, k, o, g)
        if k > 1 and delta < GEOMETRIC_DELTA_THRESHOLD:
            t1 = 1.0 / math.comb(n, o)
            tk = 1.0 / math.comb(n + (k - 1) * g, o)
            mean, var, method = k * math.sqrt(t1 * tk), k * t1 * tk, "geometric"
        elif k <= 256:
            mean, var = hypoexp_moments_direct(n, k, o, g)
            method = "direct"
        else:
            mean = hypoexp_mean_closed(n, k, o, g)
            var = hypoexp_variance_closed(n, k, o, g)
            method = "closed"
    s = spec.rate_scale
    return mean / s, var / (s * s), method


def sample_hypoexp_direct(spec: HypoexpSpec, rng: np.random.Generator) -> float:
    """Exact O(k) fallback: sum the stage exponentials individually."""
    return float(np.sum(rng.standard_exponential(spec.k) / spec.scaled_rates()))


def sample_hypoexp_gamma_approx(spec: HypoexpSpec, rng: np.random.Generator) -> float:
    """Moment-matched gamma draw; exact Erlang when g = 0."""
    mean, var, _ = hypoexp_moments(spec)
    if spec.g == 0:
        lam = spec.rate_scale * math.comb(spec.n0, spec.o)
        return float(rng.gamma(spec.k, 1.0 / lam))
    shape = mean * mean / var
    scale = var / mean
    return float(rng.gamma(shape, scale))


class ArsEnvelope:
    """Piecewise-exponential upper hull + chord lower bound for one spec.

    Tangents at the abscissae upper-bound the concave log-density; chords
    between them lower-bound it (the squeeze test).  The envelope refines
    on every rejection, so repeated draws from the same spec evaluate the
    density ever more rarely.
    """

    MAX_POINTS = 64

    def __init__(self, spec: HypoexpSpec, coeffs: HypoexpCoefficients | None = None):
        self.spec = spec
        self.coeffs = coeffs if coeffs is not None else _coeffs_for_sampling(spec)
        self.pdf_evals = 0
        mean, _, _ = hypoexp_moments(spec)
        xs = [0.5 * mean, mean, 2.0 * mean]
        pts = [(x, *self._eval(x)) for x in xs]
        # rightmost slope must be negative for an integrable hull on (0, inf)
        while pts[-1][2] >= 0 and len(pts) < 12:
            x = pts[-1][0] * 2.0
            pts.append((x, *self._eval(x)))
        while pts[0][2] <= 0 and pts[0][0] > 1e-300 and len(pts) < 24:
            x = pts[0][0] * 0.25
            pts.insert(0, (x, *self._eval(x)))
        self.x = np.array([p[0] for p in pts])
        self.h = np.array([p[1] for p in pts])
        self.dh = np.array([p[2] for p in pts])

    def _eval(self, t: float) -> tuple[float, float]:
        self.pdf_evals += 1
        return hypoexp_logpdf_and_slope(self.spec, self.coeffs, t)

    def _breakpoints(self) -> np.ndarray:
        x, h, dh = self.x, self.h, self.dh
        denom = dh[:-1] - dh[1:]
        denom = np.where(np.abs(denom) < 1e-300, 1e-300, denom)
        z = (h[1:] - h[:-1] + x[:-1] * dh[:-1] - x[1:] * dh[1:]) / denom
        z = np.clip(z, x[:-1], x[1:])  # numerical safety: keep pieces ordered
        return np.concatenate(([0.0], z, [np.inf]))

    def _upper(self, t: float) -> float:
        z = self._breakpoints()
        j = int(np.searchsorted(z[1:-1], t, side="right"))
        return float(self.h[j] + self.dh[j] * (t - self.x[j]))

    def _lower(self, t: float) -> float:
        j = int(np.searchsorted(self.x, t))
        if j == 0 or j == len(self.x):
            return -math.inf
        x0, x1 = self.x[j - 1], self.x[j]
        return float(((x1 - t) * self.h[j - 1] + (t - x0) * self.h[j]) / (x1 - x0))

    def _sample_hull(self, rng: np.random.Generator) -> float:
        z = self._breakpoints()
        b = self.h - self.x * self.dh
        a = self.dh
        # piece mass on (z_j, z_{j+1}): e^b (e^{a z1} - e^{a z0}) / a
        log_m = np.empty(len(a))
        for j in range(len(a)):
            z0, z1 = z[j], z[j + 1]
            if z1 <= z0:
                log_m[j] = -np.inf
            elif a[j] > 0:
                width = a[j] * (z1 - z0)
                log_m[j] = (b[j] + a[j] * z1 - math.log(a[j])
                            + (math.log1p(-math.exp(-width)) if width > 1e-12
                               else math.log(width)))
            elif a[j] < 0:
                if math.isinf(z1):
                    log_m[j] = b[j] + a[j] * z0 - math.log(-a[j])
                else:
                    width = -a[j] * (z1 - z0)
                    log_m[j] = (b[j] + a[j] * z0 - math.log(-a[j])
                                + (math.log1p(-math.exp(-width)) if width > 1e-12
                                   else math.log(width)))
            else:
                log_m[j] = b[j] + math.log(z1 - z0) if math.isfinite(z1) else np.inf
        m = log_m.max()
        if not math.isfinite(m):
            return math.nan
        w = np.exp(log_m - m)
        w /= w.sum()
        j = int(rng.choice(len(w), p=w))
        z0, z1 = z[j], z[j + 1]
        u = rng.random()
        aj = a[j]
        if aj == 0.0:
            return float(z0 + u * (z1 - z0))
        if math.isinf(z1):  # aj < 0 here: exponential tail
            return float(z0 + rng.standard_exponential() / -aj)
        if aj > 0:
            return float(z1 + math.log(u + (1.0 - u) * math.exp(-aj * (z1 - z0))) / aj)
        return float(z0 + math.log1p(u * math.expm1(aj * (z1 - z0))) / aj)

    def _insert(self, t: float, h: float, dh: float) -> None:
        if len(self.x) >= self.MAX_POINTS:
            return
        j = int(np.searchsorted(self.x, t))
        self.x = np.insert(self.x, j, t)
        self.h = np.insert(self.h, j, h)
        self.dh = np.insert(self.dh, j, dh)

    def sample(self, rng: np.random.Generator, max_iter: int = 1000) -> float:
        for _ in range(max_iter):
            t = self._sample_hull(rng)
            if not math.isfinite(t) or t <= 0:
                continue
            u = self._upper(t)
            w = rng.random()
            if w <= math.exp(self._lower(t) - u):
                return t
            h, dh = self._eval(t)
            if w <= math.exp(h - u):
                return t
            self._insert(t, h, dh)
        # exact fallback: the direct stage-sum draw has the same distribution
        return sample_hypoexp_direct(self.spec, rng)


def _coeffs_for_sampling(spec: HypoexpSpec) -> HypoexpCoefficients:
    if spec.k <= FAST_COEFF_K_CAP:
        return hypoexp_coefficients_fast(spec)
    return hypoexp_coefficients(spec)


def sample_hypoexp_exact(spec: HypoexpSpec, envelope: ArsEnvelope | None,
                         rng: np.random.Generator) -> tuple[float, ArsEnvelope | None]:
    """Exact draw; the returned envelope carries the adaptive state forward."""
    if spec.g == 0:
        lam = spec.rate_scale * math.comb(spec.n0, spec.o)
        return float(rng.gamma(spec.k, 1.0 / lam)), envelope
    if spec.k == 1:
        lam = spec.rate_scale * math.comb(spec.n0, spec.o)
        return float(rng.standard_exponential() / lam), envelope
    if spec.k < DIRECT_K_THRESHOLD:
        return sample_hypoexp_direct(spec, rng), envelope
    if spec.k > EXACT_K_CAP:
        raise InvalidParams(
            f"k={spec.k} exceeds the exact-path cap {EXACT_K_CAP}; use the gamma sampler")
    if envelope is None:
        envelope = ArsEnvelope(spec)
    elif envelope.spec != spec:
        raise EnvelopeMismatch("envelope belongs to a different hypoexponential")
    return envelope.sample(rng), envelope


def sample_end_of_run(spec: HypoexpSpec, remaining: float, rng: np.random.Generator,
                      max_rejections: int = 10_000) -> tuple[int, np.ndarray]:
    """Stage count that fits before the deadline, given the batch overshoots it.

    Sequentially samples the stage exponentials; the first stage whose
    cumulative time passes `remaining` marks the cut.  Completing all k
    stages within the deadline contradicts the conditioning, so the
    attempt is rejected and restarted (one expected rejection per batch).
    """
    if remaining < 0:
        raise InvalidParams("remaining time must be nonnegative")
    lam = spec.scaled_rates()
    for _ in range(max_rejections):
        stages = rng.standard_exponential(spec.k) / lam
        cumulative = np.cumsum(stages)
        over = np.nonzero(cumulative > remaining)[0]
        if over.size:
            b = int(over[0])
            return b, stages[:b]
    raise RejectionLimitExceeded(
        f"no overshooting sequence found in {max_rejections} attempts; "
        "the deadline conditioning is pathologically unlikely")


class TimeSampler:
    """Per-trajectory duration sampler with per-spec adaptive state."""

    NAMES = ("exact", "gamma", "direct")

    def __init__(self, name: str):
        if name not in self.NAMES:
            raise InvalidParams(f"unknown time sampler {name!r}; choose from {self.NAMES}")
        self.name = name
        self._envelopes: dict[HypoexpSpec, ArsEnvelope] = {}

    def sample(self, spec: HypoexpSpec, rng: np.random.Generator) -> float:
        if self.name == "direct":
            return sample_hypoexp_direct(spec, rng)
        if self.name == "gamma":
            return sample_hypoexp_gamma_approx(spec, rng)
        env = self._envelopes.get(spec)
        t, env = sample_hypoexp_exact(spec, env, rng)
        if env is not None:
            self._envelopes[spec] = env
        return t
