"""Average-case reductions as executable transforms, with two-sample
validation that transformed samples follow their target distributions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .corr import corr_statistics
from .errors import BadDimensions, RecordMismatch, ZeroNoise
from .gen import Hypothesis, derive_seed, make_rng
from .recovery import estimate_z

__all__ = [
    "PadConfig",
    "PadRecord",
    "pad_instance",
    "pad_embed",
    "unpad_estimates",
    "recovery_residual",
    "detect_via_recovery",
    "DETECTION_THRESHOLD",
    "PsiResult",
    "psi_statistic",
    "psi_lower_bound",
    "spr_transform",
    "ValidationReport",
    "validate_reduction",
]

DETECTION_THRESHOLD = math.sqrt(5.0)


@dataclass(frozen=True)
class PadConfig:
    """``c`` is the hard fraction 1 - (tau xi + 1)/2 of the target instance."""

    c: float
    sigma: float
    permutation_seed: int = 0


@dataclass(frozen=True)
class PadRecord:
    """Everything needed to undo a padding.

    ``permutation[i]`` is the column of the stacked matrix [V X] that landed
    at position i of X_tilde; the first ``m`` stacked columns are padding.
    """

    p: int
    m: int
    permutation: np.ndarray
    realized_c: float

    @property
    def p_padded(self) -> int:
        return self.p + self.m


def _pad_width(c: float, p: int) -> int:
    if not 0 < c <= 1:
        raise BadDimensions(f"c must lie in (0, 1], got {c}")
    return int(math.floor((1 - c) / c * p + 1e-9))


def pad_instance(X, y, config: PadConfig):
    """Append m = floor((1-c)/c * p) pure-signal columns and shuffle.

    Returns (X_tilde, y_tilde, record) with y_tilde = y + (1/sigma) V 1.
    Each padded column acts as a +1 entry shared by both signals.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise BadDimensions(f"X {X.shape} and y {y.shape} are incompatible")
    if config.sigma <= 0:
        raise ZeroNoise("padding scales by 1/sigma; sigma must be > 0")
    n, p = X.shape
    m = _pad_width(config.c, p)
    rng = make_rng(config.permutation_seed)
    V = rng.standard_normal((n, m))
    perm = rng.permutation(p + m)
    stacked = np.hstack([V, X])
    y_tilde = y + V.sum(axis=1) / config.sigma
    record = PadRecord(p=p, m=m, permutation=perm, realized_c=p / (p + m))
    return stacked[:, perm], y_tilde, record


def pad_embed(beta, record: PadRecord) -> np.ndarray:
    """The padded-coordinate image of a signal: +1 on pads, beta elsewhere."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (record.p,):
        raise RecordMismatch(f"expected length {record.p}, got {beta.shape}")
    stacked = np.concatenate([np.ones(record.m), beta])
    return stacked[record.permutation]


def unpad_estimates(beta1_tilde, beta2_tilde, record: PadRecord):
    """Invert the shuffle and drop the padded coordinates."""
    out = []
    for b in (beta1_tilde, beta2_tilde):
        b = np.asarray(b, dtype=float)
        if b.shape != (record.p_padded,):
            raise RecordMismatch(f"expected length {record.p_padded}, got {b.shape}")
        stacked = np.empty(record.p_padded)
        stacked[record.permutation] = b
        out.append(stacked[record.m :])
    return out[0], out[1]


def recovery_residual(X, y, beta1_hat, beta2_hat, sigma: float) -> float:
    """n^{-1/2} || y - (1/sigma) X b1 * z_hat - (1/sigma) X b2 * (1 - z_hat) ||."""
    if sigma <= 0:
        raise ZeroNoise("detection residual divides by sigma")
    z_hat = estimate_z(X, y, beta1_hat, beta2_hat, sigma, detection=True)
    fit = np.where(z_hat == 1, X @ beta1_hat, X @ beta2_hat) / sigma
    return float(np.linalg.norm(y - fit) / math.sqrt(len(y)))


def detect_via_recovery(X, y, recovery_fn: Callable, sigma: float) -> Hypothesis:
    """planted iff the residual of the recovered pair is at most sqrt(5)."""
    if sigma <= 0:
        raise ZeroNoise("detection residual divides by sigma")
    b1, b2 = recovery_fn(X, y)
    stat = recovery_residual(X, y, np.asarray(b1, float), np.asarray(b2, float), sigma)
    return Hypothesis.PLANTED if stat <= DETECTION_THRESHOLD else Hypothesis.NULL


@dataclass(frozen=True)
class PsiResult:
    value: float
    exhaustive: bool
    evaluated: int
    total: int


def _sparse_sign_vectors(p: int, k: int) -> np.ndarray:
    rows = []
    for S in itertools.combinations(range(p), k):
        for signs in itertools.product((-1.0, 1.0), repeat=k):
            b = np.zeros(p)
            b[list(S)] = signs
            rows.append(b)
    return np.array(rows).reshape(-1, p)


def psi_statistic(X, y, sigma: float, k: int, search_budget: int = 10**6) -> PsiResult:
    """Minimum normalized residual over k-sparse {-1,0,1} pairs and labelings.

    ``y`` is a detection-scale response; the search runs on r = sigma * y,
    which is the sigma w of the definition when y is a null sample.  For a
    fixed pair the best labeling picks the smaller residual per sample, so only
    unordered signal pairs are enumerated.  When the number of pairs exceeds
    ``search_budget`` the first ``search_budget`` pairs (lexicographic) are
    scored and the result is an upper bound with ``exhaustive=False``.
    """
    X = np.asarray(X, dtype=float)
    r = sigma * np.asarray(y, dtype=float)
    n, p = X.shape
    n_vec = math.comb(p, k) * 2**k
    total = n_vec * (n_vec + 1) // 2
    B = _sparse_sign_vectors(p, k)
    R = (r[:, None] - X @ B.T) ** 2
    best = math.inf
    evaluated = 0
    for a in range(n_vec):
        if evaluated >= search_budget:
            break
        take = min(n_vec - a, search_budget - evaluated)
        sums = np.minimum(R[:, a : a + 1], R[:, a : a + take]).sum(axis=0)
        best = min(best, float(sums.min()))
        evaluated += take
    return PsiResult(math.sqrt(best / n), evaluated == total, evaluated, total)


def psi_lower_bound(n: int, p: int, k: int, sigma: float, delta: float) -> float:
    """e^{-(1+delta)/2} exp(-2k(log p + 1)/n) sqrt(k + sigma^2); holds w.p. >= 1 - e^{-delta n/2}."""
    return math.exp(-(1 + delta) / 2) * math.exp(-2 * k * (math.log(p) + 1) / n) * math.sqrt(k + sigma**2)


def spr_transform(X, y, mode: str, rng_seed: int):
    """(X, g(y) + w) with g = |.| ('abs') or (.)^2 ('square') and w ~ N(0, I).

    Applied to a noiseless SBMSLR detection sample this yields a sparse phase
    retrieval detection sample; the null sqrt(k/sigma^2) w1 maps to
    sqrt(k/sigma^2) |w1| + w2 in 'abs' mode.
    """
    y = np.asarray(y, dtype=float)
    if mode == "abs":
        g = np.abs(y)
    elif mode == "square":
        g = y**2
    else:
        raise ValueError(f"mode must be 'abs' or 'square', got {mode!r}")
    w = make_rng(rng_seed).standard_normal(y.shape[0])
    return np.asarray(X), g + w


@dataclass
class ValidationReport:
    """p-values of the named two-sample tests and the Bonferroni decision."""

    pvalues: dict[str, float]
    alpha: float
    n_draws: int
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        level = self.alpha / len(self.pvalues)
        self.passed = all(pv >= level for pv in self.pvalues.values())

    def lines(self) -> list[str]:
        level = self.alpha / len(self.pvalues)
        return [f"{name}: p={pv:.4g} {'ok' if pv >= level else 'REJECT'}" for name, pv in self.pvalues.items()]


def _draw_statistics(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    aug = np.hstack([X, y[:, None]])
    top = float(np.linalg.eigvalsh(aug.T @ aug / n)[-1])
    u = corr_statistics(X, y)
    return y, top, float(np.mean(u**2))


def validate_reduction(
    target_generator: Callable[[int], tuple],
    transform: Callable[[int], tuple],
    n_draws: int,
    seed: int,
    alpha: float = 0.01,
) -> ValidationReport:
    """Compare transform outputs with direct target draws.

    ``target_generator(seed)`` and ``transform(seed)`` each return one (X, y)
    sample.  Tests (all invariant to column sign flips and permutations):

    * ``ks_y``: two-sample KS on the pooled response entries;
    * ``ks_top_eig``: KS on the top eigenvalue of [X y]^T [X y] / n;
    * ``welch_u2``: Welch t-test on the per-draw mean of u_j^2;
    * ``levene_u2``: Levene test on the same statistic.

    Each is judged at alpha / 4 (Bonferroni).
    """
    stats_a = [_draw_statistics(*transform(derive_seed(seed, 2 * i))) for i in range(n_draws)]
    stats_b = [_draw_statistics(*target_generator(derive_seed(seed, 2 * i + 1))) for i in range(n_draws)]
    ya = np.concatenate([s[0] for s in stats_a])
    yb = np.concatenate([s[0] for s in stats_b])
    ea = np.array([s[1] for s in stats_a])
    eb = np.array([s[1] for s in stats_b])
    ua = np.array([s[2] for s in stats_a])
    ub = np.array([s[2] for s in stats_b])
    pvalues = {
        "ks_y": float(stats.ks_2samp(ya, yb).pvalue),
        "ks_top_eig": float(stats.ks_2samp(ea, eb).pvalue),
        "welch_u2": float(stats.ttest_ind(ua, ub, equal_var=False).pvalue),
        "levene_u2": float(stats.levene(ua, ub).pvalue),
    }
    return ValidationReport(pvalues, alpha, n_draws)
