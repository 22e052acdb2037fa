"""CORR: correlation thresholding for detection and (signed) support recovery."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroResponse
from .gen import Hypothesis

__all__ = [
    "CorrConfig",
    "SupportEstimate",
    "corr_statistics",
    "corr_threshold",
    "corr_support",
    "corr_detect",
    "corr_signed_support",
]


@dataclass(frozen=True)
class CorrConfig:
    eps: float = 0.5

    def __post_init__(self) -> None:
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")


@dataclass(frozen=True)
class SupportEstimate:
    indices: np.ndarray
    statistics: np.ndarray
    threshold: float


def corr_statistics(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """u_j = <X_j, y> / ||y||_2 for every column j."""
    y = np.asarray(y, dtype=float)
    norm = float(np.linalg.norm(y))
    if norm == 0:
        raise ZeroResponse("y is identically zero")
    return (np.asarray(X, dtype=float).T @ y) / norm


def corr_threshold(p: float, config: CorrConfig = CorrConfig()) -> float:
    """tau = sqrt(2 (1 + eps/2) log 2p), natural log."""
    return math.sqrt(2.0 * (1.0 + config.eps / 2.0) * math.log(2.0 * p))


def corr_support(X, y, config: CorrConfig = CorrConfig()) -> SupportEstimate:
    u = corr_statistics(X, y)
    tau = corr_threshold(u.shape[0], config)
    return SupportEstimate(np.flatnonzero(np.abs(u) >= tau), u, tau)


def corr_detect(X, y, config: CorrConfig = CorrConfig()) -> Hypothesis:
    """planted iff CORR selects at least one coordinate."""
    est = corr_support(X, y, config)
    return Hypothesis.PLANTED if est.indices.size else Hypothesis.NULL


def corr_signed_support(X, y, config: CorrConfig = CorrConfig()) -> np.ndarray:
    """beta_hat_j = 1{|u_j| >= tau} * sign(u_j), with sign(0) = 0."""
    est = corr_support(X, y, config)
    out = np.zeros(est.statistics.shape[0], dtype=np.int8)
    out[est.indices] = np.sign(est.statistics[est.indices]).astype(np.int8)
    return out
