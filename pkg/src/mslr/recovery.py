"""Signal recovery: CORR restriction followed by either spectral
initialization + alternating minimization (noiseless, unbalanced) or a
nuclear-norm penalized least-squares program (balanced)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .corr import CorrConfig, corr_support
from .errors import (
    BalancedProportions,
    DimensionMismatch,
    EigenFailure,
    IndexOutOfRange,
    SupportEmpty,
    TooFewSamples,
    ZeroNoise,
    ZeroResponse,
)

__all__ = [
    "Pipeline",
    "RecoveryResult",
    "SpectralInit",
    "rho_error",
    "restrict_support",
    "am_objective",
    "spectral_init",
    "am",
    "am_resampled",
    "estimate_z",
    "recover_noiseless",
    "convex_balanced",
    "recover_balanced",
    "DEFAULT_PROPORTION_GRID",
]

DEFAULT_PROPORTION_GRID = (0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9)


class Pipeline(str, Enum):
    AM = "AM"
    CONVEX = "CONVEX"


@dataclass
class RecoveryResult:
    """Estimated pair plus diagnostics.

    ``rho`` is ``nan`` unless a ground-truth pair was supplied.  ``history``
    holds the per-round (or per-iteration) objective values and
    ``stage_rho`` the error after each AM stage when truth is known.
    """

    beta1_hat: np.ndarray
    beta2_hat: np.ndarray
    rho: float = math.nan
    iterations: int = 0
    pipeline: Pipeline = Pipeline.AM
    flags: set[str] = field(default_factory=set)
    history: list[float] = field(default_factory=list)
    stage_rho: list[float] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def pair(self) -> tuple[np.ndarray, np.ndarray]:
        return self.beta1_hat, self.beta2_hat


def rho_error(est: Sequence[np.ndarray], truth: Sequence[np.ndarray]) -> float:
    """min over the two labelings of ||b1_hat - b1|| + ||b2_hat - b2||."""
    e1, e2 = (np.asarray(v, dtype=float) for v in est)
    t1, t2 = (np.asarray(v, dtype=float) for v in truth)
    if not (e1.shape == e2.shape == t1.shape == t2.shape):
        raise DimensionMismatch(f"shapes {e1.shape}, {e2.shape}, {t1.shape}, {t2.shape}")
    direct = np.linalg.norm(e1 - t1) + np.linalg.norm(e2 - t2)
    swapped = np.linalg.norm(e1 - t2) + np.linalg.norm(e2 - t1)
    return float(min(direct, swapped))


def restrict_support(X: np.ndarray, S) -> tuple[np.ndarray, np.ndarray]:
    """Columns of X at S in sorted order, plus the map back to ambient indices."""
    X = np.asarray(X)
    idx = np.unique(np.asarray(S, dtype=np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= X.shape[1]):
        raise IndexOutOfRange(f"support indices must lie in [0, {X.shape[1]})")
    return X[:, idx], idx


def am_objective(X: np.ndarray, y: np.ndarray, beta1: np.ndarray, beta2: np.ndarray) -> float:
    """sum_i min_b (y_i - <x_i, beta_b>)^2."""
    r1 = (y - X @ beta1) ** 2
    r2 = (y - X @ beta2) ** 2
    return float(np.minimum(r1, r2).sum())


@dataclass
class SpectralInit:
    beta1: np.ndarray
    beta2: np.ndarray
    clamped: bool = False
    degenerate: bool = False

    def __iter__(self):
        return iter((self.beta1, self.beta2))


def _delta(lam_b: float, lam_o: float, pi_b: float, pi_o: float) -> float:
    num = (lam_b - lam_o) ** 2 + pi_b**2 - pi_o**2
    den = 2.0 * (lam_o - lam_b) * pi_b
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.divide(num, den))


def spectral_init(X: np.ndarray, y: np.ndarray, n1: int, n2: int) -> SpectralInit:
    """Initialization from the top two eigenpairs of (M - I)/2.

    M = (1/n) sum_i y_i^2 x_i x_i^T is formed from y rescaled to unit RMS so
    that the unit-norm form of the method applies; the estimates are scaled
    back afterwards.  Proportions n_b/n enter Delta_b.  Signs are not
    identifiable from y^2, so every sign choice is scored by the AM objective
    and the best one is kept.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n1 == n2:
        raise BalancedProportions("n1 == n2: top eigenvectors do not identify the components")
    if n1 + n2 != n:
        raise ValueError(f"n1 + n2 = {n1 + n2} but n = {n}")
    if d < 2:
        raise ValueError("spectral_init needs at least two columns")

    scale = math.sqrt(float(np.mean(y**2)))
    if scale == 0:
        e = np.eye(d)
        return SpectralInit(e[0].copy(), e[1].copy(), degenerate=True)
    yt = y / scale
    M = (X.T * yt**2) @ X / n
    A = (M - np.eye(d)) / 2.0
    try:
        evals, evecs = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    lam = (evals[-1], evals[-2])
    vec = (evecs[:, -1], evecs[:, -2])
    pi = (n1 / n, n2 / n)

    clamped = False
    deltas = []
    for b in (0, 1):
        o = 1 - b
        delta = _delta(lam[b], lam[o], pi[b], pi[o])
        if not math.isfinite(delta):
            delta = 0.0 if math.isnan(delta) else math.copysign(1.0, delta)
            clamped = True
        elif abs(delta) > 1.0:
            delta = math.copysign(1.0, delta)
            clamped = True
        deltas.append(delta)

    # Each beta_b is fixed by M only up to its own global sign, and the sign of
    # the v_{-b} coefficient depends on the eigenvector sign convention.  Score
    # all 16 combinations by the AM objective; the first best one wins.
    per_b = []
    for b in (0, 1):
        o = 1 - b
        a = math.sqrt((1 - deltas[b]) / 2)
        c = math.sqrt((1 + deltas[b]) / 2)
        per_b.append([g * (a * vec[b] + r * c * vec[o]) * scale for r in (1.0, -1.0) for g in (1.0, -1.0)])
    best = None
    for cand1 in per_b[0]:
        for cand2 in per_b[1]:
            obj = am_objective(X, y, cand1, cand2)
            if best is None or obj < best[0]:
                best = (obj, (cand1, cand2))
    return SpectralInit(best[1][0], best[1][1], clamped=clamped)


def _lstsq(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(A, b, rcond=None)[0]


def _am_round(X, y, beta1, beta2, flags: set[str]):
    r1 = np.abs(y - X @ beta1)
    r2 = np.abs(y - X @ beta2)
    j1 = r1 < r2  # ties go to the second cluster
    j2 = ~j1
    if j1.any():
        new1 = _lstsq(X[j1], y[j1])
    else:
        new1 = beta1.copy()
        flags.add("EmptyCluster")
    if j2.any():
        new2 = _lstsq(X[j2], y[j2])
    else:
        new2 = beta2.copy()
        flags.add("EmptyCluster")
    return new1, new2


def am(X, y, init, t0: int, *, truth=None) -> RecoveryResult:
    """t0 rounds of partition-by-nearer-hypothesis then per-cluster least squares."""
    if t0 < 1:
        raise ValueError("t0 must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    b1, b2 = (np.asarray(v, dtype=float).copy() for v in init)
    flags: set[str] = set()
    history = [am_objective(X, y, b1, b2)]
    stage_rho = []
    for _ in range(t0):
        b1, b2 = _am_round(X, y, b1, b2, flags)
        history.append(am_objective(X, y, b1, b2))
        if truth is not None:
            stage_rho.append(rho_error((b1, b2), truth))
    rho = rho_error((b1, b2), truth) if truth is not None else math.nan
    return RecoveryResult(b1, b2, rho, t0, Pipeline.AM, flags, history, stage_rho)


def am_resampled(X, y, init, t0: int, *, truth=None) -> RecoveryResult:
    """One AM round on each of t0 disjoint contiguous sample blocks."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if t0 < 1 or n < t0:
        raise TooFewSamples(f"need 1 <= t0 <= n, got t0={t0}, n={n}")
    b1, b2 = (np.asarray(v, dtype=float).copy() for v in init)
    flags: set[str] = set()
    history = []
    stage_rho = []
    for block in np.array_split(np.arange(n), t0):
        b1, b2 = _am_round(X[block], y[block], b1, b2, flags)
        history.append(am_objective(X[block], y[block], b1, b2))
        if truth is not None:
            stage_rho.append(rho_error((b1, b2), truth))
    rho = rho_error((b1, b2), truth) if truth is not None else math.nan
    return RecoveryResult(b1, b2, rho, t0, Pipeline.AM, flags, history, stage_rho)


def estimate_z(X, y, beta1_hat, beta2_hat, sigma: float = 1.0, *, detection: bool = True) -> np.ndarray:
    """z_hat_i = 1 iff sample i is strictly closer to beta1_hat (ties give 0).

    With ``detection=True`` the predictions carry the 1/sigma factor of the
    detection model; otherwise the raw recovery model is used.
    """
    if detection:
        if sigma == 0:
            raise ZeroNoise("detection-normalized residuals need sigma > 0")
        c = 1.0 / sigma
    else:
        c = 1.0
    r1 = np.abs(y - c * (X @ beta1_hat))
    r2 = np.abs(y - c * (X @ beta2_hat))
    return (r1 < r2).astype(np.int8)


def _embed(p: int, idx: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.zeros(p)
    out[idx] = v
    return out


def _estimate_counts(Xs, y, grid, rounds: int = 5) -> tuple[int, int]:
    n = Xs.shape[0]
    best = None
    for pi in grid:
        n1 = int(round(pi * n))
        n1 = min(max(n1, 1), n - 1)
        if n1 == n - n1:
            continue
        init = spectral_init(Xs, y, n1, n - n1)
        res = am(Xs, y, init, rounds)
        obj = res.history[-1]
        if best is None or obj < best[0]:
            best = (obj, res)
    res = best[1]
    r1 = np.abs(y - Xs @ res.beta1_hat)
    r2 = np.abs(y - Xs @ res.beta2_hat)
    n1 = int(np.count_nonzero(r1 < r2))
    return n1, n - n1


def _corr_or_empty(X, y, config: CorrConfig):
    """CORR support, raising SupportEmpty when nothing (or no signal) is found."""
    try:
        est = corr_support(X, y, config)
    except ZeroResponse as exc:
        raise SupportEmpty("y is identically zero, so no coordinate carries signal") from exc
    if est.indices.size == 0:
        raise SupportEmpty("CORR selected no coordinates")
    return est


def recover_noiseless(
    X,
    y,
    config: CorrConfig = CorrConfig(),
    t0: int = 10,
    *,
    proportions: tuple[int, int] | None = None,
    truth=None,
    proportion_grid=DEFAULT_PROPORTION_GRID,
) -> RecoveryResult:
    """CORR -> restrict -> (n1, n2) -> spectral_init -> am_resampled -> embed.

    ``proportions`` (counts n1, n2) skips the estimation pass.  Otherwise the
    counts are read off an AM labeling started from the best of several
    candidate proportions.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    est = _corr_or_empty(X, y, config)
    Xs, idx = restrict_support(X, est.indices)
    flags: set[str] = set()
    if proportions is None:
        n1, n2 = _estimate_counts(Xs, y, proportion_grid)
    else:
        n1, n2 = proportions
    if n1 == n2:
        n1, n2 = n1 + 1, n2 - 1
        flags.add("NudgedProportions")
    init = spectral_init(Xs, y, n1, n2)
    if init.clamped:
        flags.add("ClampedDelta")
    res = am_resampled(Xs, y, init, t0)
    b1 = _embed(p, idx, res.beta1_hat)
    b2 = _embed(p, idx, res.beta2_hat)
    rho = rho_error((b1, b2), truth) if truth is not None else math.nan
    return RecoveryResult(b1, b2, rho, t0, Pipeline.AM, flags | res.flags, res.history)


def _convex_design(X: np.ndarray, y: np.ndarray, sigma: float):
    n, d = X.shape
    outer = (X[:, :, None] * X[:, None, :]).reshape(n, d * d)
    A = np.hstack([-outer, 2.0 * y[:, None] * X])
    b = y**2 - sigma**2
    return A, b


def _split(theta: np.ndarray, d: int):
    return theta[: d * d].reshape(d, d), theta[d * d :]


def _svt_sym(K: np.ndarray, thresh: float) -> tuple[np.ndarray, float]:
    """Prox of thresh * ||K||_* on symmetric K; returns (K_new, ||K_new||_*)."""
    Ks = (K + K.T) / 2.0
    w, V = np.linalg.eigh(Ks)
    w = np.sign(w) * np.maximum(np.abs(w) - thresh, 0.0)
    return (V * w) @ V.T, float(np.abs(w).sum())


def _pair_from(K: np.ndarray, g: np.ndarray, flags: set[str]):
    J = np.outer(g, g) - (K + K.T) / 2.0
    w, V = np.linalg.eigh(J)
    lam, v = w[-1], V[:, -1]
    if lam < 0:
        flags.add("NegativeTopEigenvalue")
    r = math.sqrt(max(lam, 0.0))
    return g + r * v, g - r * v


def convex_balanced(
    X,
    y,
    sigma: float,
    lam: float | None = None,
    max_iter: int = 20000,
    tol: float = 1e-12,
    *,
    lambda_scale: float = 1.0,
    truth=None,
) -> RecoveryResult:
    """Nuclear-norm penalized least squares for a balanced two-component mixture.

    Minimizes sum_i (-<x_i x_i^T, K> + 2 y_i <x_i, g> - y_i^2 + sigma^2)^2 + lam ||K||_*
    by proximal gradient with backtracking, then sets J = g g^T - K and
    beta_hat = g +- sqrt(max(lambda_top, 0)) v_top.  When ``lam`` is None it
    is set to lambda_scale * sigma (||b1|| + ||b2|| + sigma) sqrt(n d) log^3 n
    with the norms taken from an unpenalized first pass.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    A, b = _convex_design(X, y, sigma)
    G = A.T @ A
    h = A.T @ b
    c = float(b @ b)
    flags: set[str] = set()

    if lam is None:
        theta0 = _lstsq(A, b)
        K0, g0 = _split(theta0, d)
        b1, b2 = _pair_from(K0, g0, set())
        lam = lambda_scale * sigma * (np.linalg.norm(b1) + np.linalg.norm(b2) + sigma)
        lam *= math.sqrt(n * d) * math.log(n) ** 3
    if lam < 0:
        raise ValueError("lambda must be nonnegative")

    def smooth(theta):
        return float(theta @ (G @ theta) - 2.0 * h @ theta + c)

    L = 2.0 * float(np.linalg.eigvalsh(G)[-1])
    step = 1.0 / L if L > 0 else 1.0
    theta = np.zeros(d * d + d)
    f_cur = smooth(theta)
    obj = f_cur
    history = [obj]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (G @ theta - h)
        while True:
            cand = theta - step * grad
            Kc, gc = _split(cand, d)
            Kn, nuc = _svt_sym(Kc, step * lam)
            new = np.concatenate([Kn.ravel(), gc])
            f_new = smooth(new)
            diff = new - theta
            if f_new <= f_cur + grad @ diff + diff @ diff / (2.0 * step) + 1e-12 * abs(f_cur):
                break
            step /= 2.0
        new_obj = f_new + lam * nuc
        theta, f_cur = new, f_new
        history.append(new_obj)
        if abs(obj - new_obj) <= tol * max(abs(obj), 1.0):
            obj = new_obj
            converged = True
            break
        obj = new_obj
    if not converged:
        flags.add("NonConvergence")
    K, g = _split(theta, d)
    b1, b2 = _pair_from(K, g, flags)
    rho = rho_error((b1, b2), truth) if truth is not None else math.nan
    extra = {"lambda": lam, "K": (K + K.T) / 2.0, "g": g}
    return RecoveryResult(b1, b2, rho, it, Pipeline.CONVEX, flags, history, extra=extra)


def recover_balanced(
    X,
    y,
    config: CorrConfig = CorrConfig(),
    sigma: float = 0.0,
    *,
    truth=None,
    **convex_kwargs,
) -> RecoveryResult:
    """CORR -> restrict -> convex_balanced -> embed."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    est = _corr_or_empty(X, y, config)
    Xs, idx = restrict_support(X, est.indices)
    res = convex_balanced(Xs, y, sigma, **convex_kwargs)
    b1 = _embed(p, idx, res.beta1_hat)
    b2 = _embed(p, idx, res.beta2_hat)
    rho = rho_error((b1, b2), truth) if truth is not None else math.nan
    return RecoveryResult(b1, b2, rho, res.iterations, Pipeline.CONVEX, res.flags, res.history,
                          extra=res.extra)
