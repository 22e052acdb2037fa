"""Exact evaluation of the degree-D chi-square divergence between the planted
and null detection models, with the Hermite machinery and a brute-force
oracle that recomputes it from the Hermite expansion directly.

All closed forms share one identity.  With b_i = beta_1 z_i + beta_2 (1 - z_i)
and two independent prior copies (1), (2),

    chi2_{<=D} + 1 = E sum_{m=0}^{floor(D/2)} (||beta||^2 + sigma^2)^{-m}
                     sum_{alpha in N^n, |alpha| = m} prod_i <b_i^(1), b_i^(2)>^{alpha_i}.

For the supported value sets ||beta||^2 = k and the inner products factor
through the support overlap, which is hypergeometric.  Terms are indexed by
the half-degree m >= 1 (polynomial degree d = 2m).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DegreeTooLarge, TooLarge, UnsupportedValueSet

__all__ = [
    "LowDegRegime",
    "ChiSqConfig",
    "ChiSqResult",
    "hermite_eval",
    "hermite_orthonormality_check",
    "HermiteReport",
    "overlap_pmf",
    "inner_moment",
    "compositions",
    "chi2_slrd",
    "chi2_sbmslrd",
    "chi2_sym_unbalanced",
    "chi2_bruteforce_oracle",
    "chi2",
]

MAX_HALF_DEGREE = 4096


class LowDegRegime(str, Enum):
    SLRD = "slrd"
    SBMSLRD = "sbmslrd"
    SYM = "sym"


def _value_set_key(value_set) -> str:
    if isinstance(value_set, str):
        key = value_set.lower()
        if key in ("pm1", "p1"):
            return key
        raise UnsupportedValueSet(f"unknown value set {value_set!r}")
    vals = set(float(v) for v in value_set)
    if vals == {-1.0, 1.0}:
        return "pm1"
    if vals == {1.0}:
        return "p1"
    raise UnsupportedValueSet(f"exact formulas need {{-1, 1}} or {{1}}, got {sorted(vals)}")


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(str(float(x)))


@dataclass(frozen=True)
class ChiSqConfig:
    p: int
    n: int
    k: int
    sigma2: object
    D: int
    regime: LowDegRegime = LowDegRegime.SLRD
    value_set: str = "pm1"
    arithmetic: str = "rational"
    phi: object = Fraction(1, 2)

    def __post_init__(self) -> None:
        if self.D < 0:
            raise ValueError("D must be nonnegative")
        if not 1 <= self.k <= self.p or self.n < 1:
            raise ValueError("need 1 <= k <= p and n >= 1")
        if self.arithmetic not in ("rational", "float"):
            raise ValueError("arithmetic must be 'rational' or 'float'")
        object.__setattr__(self, "regime", LowDegRegime(self.regime))
        object.__setattr__(self, "value_set", _value_set_key(self.value_set))

    @property
    def exact(self) -> bool:
        return self.arithmetic == "rational"


@dataclass
class ChiSqResult:
    """``terms[m-1]`` is the contribution of degree d = 2m; ``value = sum(terms)``."""

    value: object
    terms: list
    config: ChiSqConfig

    @property
    def degrees(self) -> list[int]:
        return [2 * (i + 1) for i in range(len(self.terms))]


# ---------------------------------------------------------------- Hermite


def hermite_eval(order: int, x):
    """Probabilists' Hermite polynomial He_order(x), by H_{j+1} = x H_j - j H_{j-1}.

    Works elementwise on numpy arrays and exactly on Fractions/ints.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    h_prev = x * 0 + 1
    if order == 0:
        return h_prev
    h = x
    for j in range(1, order):
        h_prev, h = h, x * h - j * h_prev
    return h


def _multi_indices(n_vars: int, max_total: int):
    for total in range(max_total + 1):
        for combo in itertools.combinations_with_replacement(range(n_vars), total):
            alpha = [0] * n_vars
            for v in combo:
                alpha[v] += 1
            yield tuple(alpha)


@dataclass
class HermiteReport:
    indices: list[tuple[int, ...]]
    gram: np.ndarray
    stderr: np.ndarray
    max_abs_z: float
    max_abs_deviation: float

    def within(self, n_se: float = 5.0) -> bool:
        return self.max_abs_z <= n_se


def hermite_orthonormality_check(
    max_order: int,
    mc_samples: int,
    seed: int,
    *,
    n: int = 1,
    p: int = 1,
    snr: float = 1.0,
) -> HermiteReport:
    """Monte-Carlo Gram matrix of normalized Hermite products under the null.

    Variables are the n*p design entries and the n responses scaled by
    1/sqrt(snr + 1).  Entry (a, b) estimates E[H_a H_b] / sqrt(a! b!), which
    should be the identity.  z-scores use the per-entry sample standard error;
    exactly-constant products (a = b = 0) have zero error and are skipped.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    X = rng.standard_normal((mc_samples, n * p))
    y = math.sqrt(snr + 1.0) * rng.standard_normal((mc_samples, n))
    V = np.hstack([X, y / math.sqrt(snr + 1.0)])
    n_vars = V.shape[1]
    indices = list(_multi_indices(n_vars, max_order))
    cache = {}
    for v in range(n_vars):
        for o in range(max_order + 1):
            cache[v, o] = hermite_eval(o, V[:, v])
    feats = np.empty((mc_samples, len(indices)))
    for col, alpha in enumerate(indices):
        f = np.ones(mc_samples)
        norm = 1.0
        for v, o in enumerate(alpha):
            if o:
                f = f * cache[v, o]
                norm *= math.factorial(o)
        feats[:, col] = f / math.sqrt(norm)
    gram = feats.T @ feats / mc_samples
    sq = (feats**2).T @ (feats**2) / mc_samples
    stderr = np.sqrt(np.maximum(sq - gram**2, 0.0) / mc_samples)
    target = np.eye(len(indices))
    dev = np.abs(gram - target)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stderr > 0, dev / stderr, np.where(dev > 1e-12, np.inf, 0.0))
    return HermiteReport(indices, gram, stderr, float(z.max()), float(dev.max()))


# ------------------------------------------------------- overlap moments


def compositions(m: int, n: int) -> int:
    """Number of weak compositions of m into n parts, C(m + n - 1, n - 1)."""
    if m < 0 or n < 1:
        raise ValueError("need m >= 0 and n >= 1")
    return math.comb(m + n - 1, n - 1)


def overlap_pmf(p: int, k: int, exact: bool = True) -> list:
    """Hypergeometric law of |S1 & S2| for independent uniform k-subsets of [p]."""
    if not 0 <= k <= p:
        raise ValueError("need 0 <= k <= p")
    total = math.comb(p, k)
    if exact:
        return [Fraction(math.comb(k, l) * math.comb(p - k, k - l), total) for l in range(k + 1)]
    return [math.comb(k, l) * math.comb(p - k, k - l) / total for l in range(k + 1)]


def _overlap_log_pmf(p: int, k: int) -> np.ndarray:
    def lcomb(a, b):
        if b < 0 or b > a:
            return -np.inf
        return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)

    return np.array([lcomb(k, l) + lcomb(p - k, k - l) - lcomb(p, k) for l in range(k + 1)])


def _sum_moment_exact(l: int, m: int, vs: str) -> int | Fraction:
    if vs == "p1":
        return l**m
    if m % 2:
        return 0
    return Fraction(sum(math.comb(l, j) * (l - 2 * j) ** m for j in range(l + 1)), 2**l)


def inner_moment(p: int, k: int, m: int, value_set="pm1", exact: bool = True):
    """E <beta^(1), beta^(2)>^m for two independent prior draws."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    vs = _value_set_key(value_set)
    if exact:
        pmf = overlap_pmf(p, k, exact=True)
        return sum((pmf[l] * _sum_moment_exact(l, m, vs) for l in range(k + 1)), Fraction(0))
    log_m = _log_inner_moment(p, k, m, vs)
    return 0.0 if log_m == -np.inf else float(np.exp(log_m))


def _log_inner_moment(p: int, k: int, m: int, vs: str) -> float:
    """log E <beta^(1), beta^(2)>^m; -inf when the moment vanishes."""
    if m == 0:
        return 0.0
    if vs == "pm1" and m % 2:
        return -np.inf
    lpmf = _overlap_log_pmf(p, k)
    parts = []
    for l in range(1, k + 1):
        if vs == "p1":
            inner = m * math.log(l)
        else:
            js = [j for j in range(l + 1) if l != 2 * j]
            if not js:
                continue
            inner = logsumexp(
                [gammaln(l + 1) - gammaln(j + 1) - gammaln(l - j + 1) + m * math.log(abs(l - 2 * j)) for j in js]
            ) - l * math.log(2.0)
        parts.append(lpmf[l] + inner)
    return float(logsumexp(parts)) if parts else -np.inf


# ---------------------------------------------------------- closed forms


def _check_degree(M: int) -> None:
    if M > MAX_HALF_DEGREE:
        raise DegreeTooLarge(f"half-degree {M} exceeds the limit {MAX_HALF_DEGREE}")


def _assemble(config: ChiSqConfig, log_or_exact_terms: list) -> ChiSqResult:
    if config.exact:
        terms = log_or_exact_terms
        value = sum(terms, Fraction(0))
    else:
        terms = [0.0 if t == -np.inf else float(np.exp(t)) for t in log_or_exact_terms]
        value = float(sum(terms))
    return ChiSqResult(value, terms, config)


def _composition_terms(config: ChiSqConfig, part_counts) -> ChiSqResult:
    """Sum over m of (k + sigma^2)^{-m} * part_counts[m] * E<>^m for m = 1..floor(D/2)."""
    M = config.D // 2
    vs = config.value_set
    if config.exact:
        s = _to_fraction(config.sigma2)
        base = Fraction(config.k) + s
        terms = []
        for m in range(1, M + 1):
            c = part_counts[m]
            terms.append(c * inner_moment(config.p, config.k, m, vs) / base**m if c else Fraction(0))
        return _assemble(config, terms)
    log_base = math.log(config.k + float(config.sigma2))
    terms = []
    for m in range(1, M + 1):
        lc = part_counts[m]
        lm = _log_inner_moment(config.p, config.k, m, vs)
        terms.append(-np.inf if lc == -np.inf or lm == -np.inf else lc + lm - m * log_base)
    return _assemble(config, terms)


def _log_comb(a: int, b: int) -> float:
    return float(gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1))


def chi2_slrd(config: ChiSqConfig) -> ChiSqResult:
    """SLRD: chi2 + 1 = sum_m (k + s2)^{-m} C(m + n - 1, n - 1) E<>^m."""
    M = config.D // 2
    _check_degree(M)
    if config.exact:
        counts = [compositions(m, config.n) for m in range(M + 1)]
    else:
        counts = [_log_comb(m + config.n - 1, config.n - 1) for m in range(M + 1)]
    return _composition_terms(config, counts)


def chi2_sbmslrd(config: ChiSqConfig) -> ChiSqResult:
    """SBMSLRD: only even m = 2q survive, weighted by C(q + n - 1, n - 1)."""
    M = config.D // 2
    _check_degree(M)
    counts = []
    for m in range(M + 1):
        if m % 2:
            counts.append(0 if config.exact else -np.inf)
        elif config.exact:
            counts.append(compositions(m // 2, config.n))
        else:
            counts.append(_log_comb(m // 2 + config.n - 1, config.n - 1))
    return _composition_terms(config, counts)


def _part_weights(phi, M: int, exact: bool) -> list:
    """w(a) = (phi + (1 - phi) (-phi/(1 - phi))^a)^2 for a = 0..M.

    phi = 1 uses w(a) = 1: the z = 0 branch has probability zero.
    """
    if exact:
        f = _to_fraction(phi)
        if f == 1:
            return [Fraction(1)] * (M + 1)
        c = -f / (1 - f)
        return [(f + (1 - f) * c**a) ** 2 for a in range(M + 1)]
    f = float(phi)
    if f == 1.0:
        return [1.0] * (M + 1)
    c = -f / (1 - f)
    return [(f + (1 - f) * c**a) ** 2 for a in range(M + 1)]


def _truncated_power_exact(coeffs: list, n: int, M: int) -> list:
    result = [Fraction(1)] + [Fraction(0)] * M
    base = list(coeffs[: M + 1])
    while n:
        if n & 1:
            result = _poly_mul_exact(result, base, M)
        n >>= 1
        if n:
            base = _poly_mul_exact(base, base, M)
    return result


def _poly_mul_exact(a: list, b: list, M: int) -> list:
    out = [Fraction(0)] * (M + 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j in range(M + 1 - i):
            if b[j]:
                out[i + j] += ai * b[j]
    return out


def _poly_mul_log(a: np.ndarray, b: np.ndarray, M: int) -> np.ndarray:
    out = np.full(M + 1, -np.inf)
    for m in range(M + 1):
        vals = a[: m + 1] + b[m::-1]
        if np.any(np.isfinite(vals)):
            out[m] = logsumexp(vals)
    return out


def _truncated_power_log(log_coeffs: np.ndarray, n: int, M: int) -> np.ndarray:
    result = np.full(M + 1, -np.inf)
    result[0] = 0.0
    base = log_coeffs.copy()
    while n:
        if n & 1:
            result = _poly_mul_log(result, base, M)
        n >>= 1
        if n:
            base = _poly_mul_log(base, base, M)
    return result


def chi2_sym_unbalanced(config: ChiSqConfig) -> ChiSqResult:
    """Coupled pair beta_2 = -(phi/(1-phi)) beta_1 with Bernoulli(phi) labels.

    The per-sample factor E[(s^(1) s^(2))^a] = w(a) multiplies the
    composition count, so the weighted count of degree m is the coefficient of
    x^m in (sum_a w(a) x^a)^n, computed by truncated binary powering.  The
    normalization uses ||beta||^2 := ||beta_1||^2 = k.
    """
    M = config.D // 2
    _check_degree(M)
    phi = config.phi
    if not 0 < float(phi) <= 1:
        raise ValueError("phi must lie in (0, 1]")
    weights = _part_weights(phi, M, config.exact)
    if config.exact:
        counts = _truncated_power_exact(weights, config.n, M)
    else:
        with np.errstate(divide="ignore"):
            logw = np.log(np.asarray(weights, dtype=float))
        counts = list(_truncated_power_log(logw, config.n, M))
    return _composition_terms(config, counts)


def chi2(config: ChiSqConfig) -> ChiSqResult:
    """Dispatch on ``config.regime``."""
    return {
        LowDegRegime.SLRD: chi2_slrd,
        LowDegRegime.SBMSLRD: chi2_sbmslrd,
        LowDegRegime.SYM: chi2_sym_unbalanced,
    }[config.regime](config)


# ------------------------------------------------------ brute-force oracle


def _prior_outcomes(p: int, k: int, vs: str):
    """All (beta, probability) pairs of the uniform k-sparse prior."""
    values = (-1, 1) if vs == "pm1" else (1,)
    supports = list(itertools.combinations(range(p), k))
    weight = Fraction(1, len(supports) * len(values) ** k)
    for S in supports:
        for signs in itertools.product(values, repeat=k):
            beta = [0] * p
            for j, s in zip(S, signs):
                beta[j] = s
            yield beta, weight


def _label_scalars(regime: LowDegRegime, phi: Fraction):
    """(probability, s1, s2) for z = 1 and z = 0, where b_i = beta_1 s."""
    if regime is LowDegRegime.SLRD:
        return [(Fraction(1), Fraction(1))]
    if regime is LowDegRegime.SBMSLRD:
        return [(Fraction(1, 2), Fraction(1)), (Fraction(1, 2), Fraction(-1))]
    if phi == 1:
        return [(Fraction(1), Fraction(1))]
    return [(phi, Fraction(1)), (1 - phi, -phi / (1 - phi))]


def chi2_bruteforce_oracle(config: ChiSqConfig) -> Fraction:
    """chi2_{<=D} from the Hermite expansion, by exhaustive enumeration.

    Enumerates every multi-index alpha on the n x (p+1) grid with |alpha| <= D
    whose rows satisfy alpha_{i,p+1} = |alpha_{i,:p}| (all others have zero
    inner product with the likelihood ratio), evaluates
        <L, H_alpha> = (k + s2)^{-h/2} alpha_{p+1}! E[prod_ij b_ij^alpha_ij]
    with the expectation over every support, sign pattern and label vector,
    and returns sum_{alpha != 0} <L, H_alpha>^2 / alpha!.  Exact rationals.
    """
    p, n, k, D = config.p, config.n, config.k, config.D
    if p > 4 or n > 3 or D > 6:
        raise TooLarge("oracle limited to p <= 4, n <= 3, D <= 6")
    s2 = _to_fraction(config.sigma2)
    phi = _to_fraction(config.phi)
    base = Fraction(k) + s2
    outcomes = list(_prior_outcomes(p, k, config.value_set))
    labels = _label_scalars(config.regime, phi)
    label_vectors = []
    for combo in itertools.product(labels, repeat=n):
        prob = Fraction(1)
        for pr, _ in combo:
            prob *= pr
        if prob:
            label_vectors.append((prob, [s for _, s in combo]))

    # Row patterns: the p-part of each row is a weak composition of h_i.
    def row_patterns(h):
        return [pat for pat in itertools.product(range(h + 1), repeat=p) if sum(pat) == h]

    total = Fraction(0)
    for hs in itertools.product(range(D // 2 + 1), repeat=n):
        h = sum(hs)
        if h == 0 or 2 * h > D:
            continue
        for rows in itertools.product(*(row_patterns(hi) for hi in hs)):
            expect = Fraction(0)
            for beta, wb in outcomes:
                for wz, svec in label_vectors:
                    prod = Fraction(1)
                    for i in range(n):
                        s = svec[i]
                        for j in range(p):
                            a = rows[i][j]
                            if a:
                                prod *= (beta[j] * s) ** a
                    expect += wb * wz * prod
            if expect == 0:
                continue
            fact_p1 = math.prod(math.factorial(hi) for hi in hs)
            fact_alpha = fact_p1 * math.prod(math.factorial(a) for row in rows for a in row)
            inner_sq = fact_p1**2 * expect**2 / base**h
            total += inner_sq / fact_alpha
    return total
