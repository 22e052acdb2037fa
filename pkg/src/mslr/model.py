"""Domain types, regime classification and closed-form sample-size helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateRegime

__all__ = [
    "ModelParams",
    "SignalPair",
    "RegimeTag",
    "Regime",
    "classify_regime",
    "corr_sample_bound",
    "lowdeg_sample_thresholds",
    "LowDegThresholds",
    "PM1",
    "P1",
]

PM1: tuple[float, ...] = (-1.0, 1.0)
P1: tuple[float, ...] = (1.0,)


@dataclass(frozen=True)
class ModelParams:
    """The (p, n, k, sigma, phi, value_set) tuple describing an MSLR model."""

    p: int
    n: int
    k: int
    sigma: float = 0.0
    phi: float = 0.5
    value_set: tuple[float, ...] = PM1

    def __post_init__(self) -> None:
        if self.p < 1 or self.n < 1:
            raise ValueError(f"p and n must be positive, got p={self.p}, n={self.n}")
        if not 0 <= self.k <= self.p:
            raise ValueError(f"need 0 <= k <= p, got k={self.k}, p={self.p}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must lie in [0, 1], got {self.phi}")
        if len(self.value_set) == 0 or any(v == 0 for v in self.value_set):
            raise ValueError("value_set must be a nonempty set of nonzero reals")
        object.__setattr__(self, "value_set", tuple(sorted(set(float(v) for v in self.value_set))))

    @property
    def b_min(self) -> float:
        return min(abs(v) for v in self.value_set)

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma

    def replace(self, **changes) -> "ModelParams":
        values = {f: getattr(self, f) for f in ("p", "n", "k", "sigma", "phi", "value_set")}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class SignalPair:
    """Two k-sparse signals of equal norm with their overlap statistics.

    ``xi_target``/``tau_target`` keep what the caller asked for, while ``xi``
    and ``tau`` are the realized values.  ``tau_flag`` is set when the target
    tau could not be realized exactly and the closest value was used.
    """

    beta1: np.ndarray
    beta2: np.ndarray
    xi: float
    tau: float
    xi_target: float = float("nan")
    tau_target: float = float("nan")
    tau_flag: bool = False

    def __post_init__(self) -> None:
        b1 = np.asarray(self.beta1, dtype=float)
        b2 = np.asarray(self.beta2, dtype=float)
        if b1.shape != b2.shape or b1.ndim != 1:
            raise ValueError("beta1 and beta2 must be 1-D vectors of equal length")
        if np.count_nonzero(b1) != np.count_nonzero(b2):
            raise ValueError("beta1 and beta2 must have the same sparsity")
        if not math.isclose(float(b1 @ b1), float(b2 @ b2), rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError("beta1 and beta2 must have equal norms")
        object.__setattr__(self, "beta1", b1)
        object.__setattr__(self, "beta2", b2)

    @classmethod
    def from_vectors(cls, beta1, beta2) -> "SignalPair":
        """Build a pair from explicit vectors, computing xi and tau."""
        b1 = np.asarray(beta1, dtype=float)
        b2 = np.asarray(beta2, dtype=float)
        s1 = np.flatnonzero(b1)
        s2 = np.flatnonzero(b2)
        k = max(len(s1), 1)
        inter = np.intersect1d(s1, s2)
        xi = len(inter) / k
        tau = float(b1 @ b2) / len(inter) if len(inter) else 0.0
        return cls(b1, b2, xi=xi, tau=tau, xi_target=xi, tau_target=tau)

    @property
    def p(self) -> int:
        return self.beta1.shape[0]

    @property
    def support1(self) -> np.ndarray:
        return np.flatnonzero(self.beta1)

    @property
    def support2(self) -> np.ndarray:
        return np.flatnonzero(self.beta2)

    @property
    def joint_support(self) -> np.ndarray:
        return np.union1d(self.support1, self.support2)

    @property
    def k(self) -> int:
        return len(self.support1)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.beta1))

    @property
    def norm_sq(self) -> float:
        return float(self.beta1 @ self.beta1)


class RegimeTag(str, Enum):
    SLR = "SLR"
    SBMSLR = "SBMSLR"
    PSBMSLR = "PSBMSLR"
    GENERAL = "GENERAL"


@dataclass(frozen=True)
class Regime:
    """Regime tag plus the signal-average quantities used by the CORR bounds.

    ``beta_pos_min_sq`` is ``nan`` when no joint-support index has a strictly
    positive convex combination; ``snr`` is ``inf`` when sigma is 0.
    """

    tag: RegimeTag
    beta_avg_min_sq: float
    beta_pos_min_sq: float
    snr: float
    norm_sq: float = 0.0
    phi: float = 0.5


def classify_regime(signals: SignalPair, phi: float, sigma: float = 0.0) -> Regime:
    """Classify a signal pair and compute <beta>^2_min and <beta>^2_{>0}.

    Equality tests are exact because generators emit exact value-set members.
    ``sigma`` only feeds the reported snr.
    """
    b1, b2 = signals.beta1, signals.beta2
    joint = signals.joint_support
    norm_sq = signals.norm_sq
    snr = math.inf if sigma == 0 else norm_sq / sigma**2

    if len(joint) == 0:
        return Regime(RegimeTag.GENERAL, 0.0, math.nan, snr, norm_sq, phi)

    combo = phi * b1[joint] + (1.0 - phi) * b2[joint]
    sq = combo**2
    avg_min = float(sq.min())
    positive = sq[combo > 0]
    pos_min = float(positive.min()) if positive.size else math.nan

    if np.array_equal(b1, b2):
        tag = RegimeTag.SLR
    elif phi == 0.5 and np.array_equal(b1, -b2):
        tag = RegimeTag.SBMSLR
    elif phi == 0.5 and np.any((b1 == -b2) & (b1 != 0)):
        tag = RegimeTag.PSBMSLR
    else:
        tag = RegimeTag.GENERAL
    return Regime(tag, avg_min, pos_min, snr, norm_sq, phi)


def corr_sample_bound(
    regime: Regime,
    params: ModelParams,
    eps: float = 0.5,
    *,
    use_positive_min: bool = False,
) -> int:
    """Sufficient sample size for CORR.

    General case: ceil(32(1+eps)/min{phi^2 b^2, (1-phi)^2 b^2, <beta>^2} * (||beta||^2 + sigma^2) * log 2p).
    SLR uses the constant 8 and b_min^2 alone.  ``use_positive_min`` swaps
    <beta>^2_min for <beta>^2_{>0} (the detection variant of the bound).
    Note ||beta||^2 (snr+1)/snr == ||beta||^2 + sigma^2, which is also the
    sigma = 0 limit.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    scale = (regime.norm_sq + params.sigma2) * math.log(2 * params.p)
    b2 = params.b_min**2
    if regime.tag is RegimeTag.SLR:
        return math.ceil(8 * (1 + eps) / b2 * scale)
    avg = regime.beta_pos_min_sq if use_positive_min else regime.beta_avg_min_sq
    if math.isnan(avg):
        avg = 0.0
    denom = min(params.phi**2 * b2, (1 - params.phi) ** 2 * b2, avg)
    if denom <= 0:
        raise DegenerateRegime(
            f"{regime.tag.value}: minimum signal average is 0, no finite CORR bound"
        )
    return math.ceil(32 * (1 + eps) / denom * scale)


@dataclass(frozen=True)
class LowDegThresholds:
    n_alg_sbmslr: float
    n_alg_slr: float
    n_it_slr: float


def lowdeg_sample_thresholds(params: ModelParams, norm_sq: float | None = None) -> LowDegThresholds:
    """Evaluate the three scaling formulas used as experiment axes.

    ``norm_sq`` defaults to k * b_min^2 (unit-magnitude value sets give k).
    """
    if params.p < 2 or params.k < 1:
        raise ValueError("need p >= 2 and k >= 1")
    k, p = params.k, params.p
    nsq = k * params.b_min**2 if norm_sq is None else norm_sq
    if params.sigma == 0:
        ratio = 1.0
        snr = math.inf
    else:
        snr = nsq / params.sigma2
        ratio = (snr + 1) / snr
    log_p = math.log(p)
    n_it = 0.0 if math.isinf(snr) else 2 * k * math.log(p / k) / math.log2(1 + snr)
    return LowDegThresholds(
        n_alg_sbmslr=k**2 * ratio**2 / log_p,
        n_alg_slr=k * ratio * log_p,
        n_it_slr=n_it,
    )
