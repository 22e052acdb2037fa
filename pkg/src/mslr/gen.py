"""Seeded generation of signal pairs, MSLR instances and detection samples.

Every sampler builds its own ``numpy.random.Generator`` on a Philox
(counter-based) bit generator seeded with a 64-bit integer, so outputs depend
only on ``(params, signals, seed)``.  Per-trial seeds come from
:func:`derive_seed`, which hashes ``(master_seed, trial_index)`` through
``numpy.random.SeedSequence``; results are therefore independent of how trials
are scheduled.  Gaussian draws use numpy's ziggurat ``standard_normal``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UnachievableOverlap, UnachievableTau, ZeroNoise
from .model import ModelParams, SignalPair

__all__ = [
    "Hypothesis",
    "Instance",
    "DetectionSample",
    "derive_seed",
    "make_rng",
    "sample_signal_pair",
    "sample_instance",
    "sample_detection",
]


class Hypothesis(str, Enum):
    PLANTED = "planted"
    NULL = "null"


def derive_seed(master_seed: int, trial_index: int) -> int:
    """Mix a master seed and a trial index into an independent 64-bit seed."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial_index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def sample_signal_pair(
    p: int,
    k: int,
    value_set=(-1.0, 1.0),
    xi_target: float = 0.0,
    tau_target: float = 0.0,
    rng_seed: int = 0,
    *,
    strict: bool = False,
) -> SignalPair:
    """Draw two k-sparse equal-norm signals with a prescribed overlap.

    Supports are uniform subject to |S1 & S2| = round(xi_target * k).  On the
    intersection, beta2 copies the magnitudes of beta1 and a number of sign
    agreements is chosen so the realized tau is as close as possible to
    ``tau_target`` (ties go to more agreements).  Off the intersection beta2
    reuses beta1's off-intersection magnitudes in random order, which keeps the
    two norms equal.  With ``strict=True`` an inexact tau raises
    :class:`UnachievableTau` instead of being flagged.
    """
    values = np.array(sorted(set(float(v) for v in value_set)))
    if values.size == 0 or np.any(values == 0):
        raise ValueError("value_set must contain nonzero reals")
    m = _round_half_up(xi_target * k)
    if m < 0 or m > k or 2 * k - m > p:
        raise UnachievableOverlap(f"cannot place overlap {m} for p={p}, k={k}")

    rng = make_rng(rng_seed)
    perm = rng.permutation(p)
    inter = perm[:m]
    only1 = perm[m:k]
    only2 = perm[k : 2 * k - m]

    beta1 = np.zeros(p)
    beta2 = np.zeros(p)
    beta1[perm[:k]] = rng.choice(values, size=k)

    symmetric = set(values) == set(-values)
    tau, flag = 0.0, False
    if m > 0:
        b_inter = beta1[inter]
        if symmetric:
            mags = b_inter**2
            # Realized tau for `a` agreements placed on a random subset.
            order = rng.permutation(m)
            best_a, best_gap = m, math.inf
            for a in range(m, -1, -1):
                signs = np.full(m, -1.0)
                signs[order[:a]] = 1.0
                t = float(signs @ mags) / m
                gap = abs(t - tau_target)
                if gap < best_gap - 1e-12:
                    best_a, best_gap = a, gap
            signs = np.full(m, -1.0)
            signs[order[:best_a]] = 1.0
        else:
            signs = np.ones(m)
        beta2[inter] = signs * b_inter
        tau = float(beta1[inter] @ beta2[inter]) / m
        flag = not math.isclose(tau, tau_target, abs_tol=1e-12)
        if flag and strict:
            raise UnachievableTau(f"closest achievable tau is {tau}, target {tau_target}")

    if k - m > 0:
        mags = np.abs(beta1[only1])[rng.permutation(k - m)]
        out = np.empty(k - m)
        for i, mag in enumerate(mags):
            choices = values[np.abs(values) == mag]
            out[i] = choices[rng.integers(len(choices))]
        beta2[only2] = out

    xi = m / k if k else 0.0
    return SignalPair(beta1, beta2, xi=xi, tau=tau, xi_target=xi_target,
                      tau_target=tau_target, tau_flag=flag)


@dataclass
class Instance:
    """An MSLR recovery instance y = X b1 * z + X b2 * (1 - z) + w."""

    X: np.ndarray
    y: np.ndarray
    z: np.ndarray
    w: np.ndarray
    params: ModelParams
    signals: SignalPair
    seed: int


@dataclass
class DetectionSample:
    """A detection sample; ``z`` is kept for planted samples (None under null)."""

    X: np.ndarray
    y: np.ndarray
    hypothesis: Hypothesis
    params: ModelParams
    signals: SignalPair
    seed: int
    z: np.ndarray | None = None
    noiseless: bool = False


def _mix(X: np.ndarray, signals: SignalPair, z: np.ndarray) -> np.ndarray:
    s1, s2 = signals.support1, signals.support2
    xb1 = X[:, s1] @ signals.beta1[s1]
    xb2 = X[:, s2] @ signals.beta2[s2]
    return np.where(z == 1, xb1, xb2)


def _draw_design(params: ModelParams, rng: np.random.Generator):
    X = rng.standard_normal((params.n, params.p))
    z = (rng.random(params.n) < params.phi).astype(np.int8)
    w = rng.standard_normal(params.n)
    return X, z, w


def sample_instance(params: ModelParams, signals: SignalPair, rng_seed: int) -> Instance:
    if signals.p != params.p:
        raise ValueError(f"signal length {signals.p} != p={params.p}")
    X, z, g = _draw_design(params, make_rng(rng_seed))
    w = params.sigma * g
    y = _mix(X, signals, z) + w
    return Instance(X, y, z, w, params, signals, int(rng_seed))


def sample_detection(
    params: ModelParams,
    signals: SignalPair,
    hypothesis: Hypothesis | str,
    rng_seed: int,
    *,
    noiseless: bool = False,
) -> DetectionSample:
    """Draw a detection sample.

    planted: y = (1/sigma) X b1 * z + (1/sigma) X b2 * (1 - z) + w, w ~ N(0, I)
    null:    y = sqrt(||b||^2 / sigma^2 + 1) * w, independent of X.

    ``noiseless=True`` drops w from the planted response and the ``+1`` from
    the null scale, which is the source model of the phase-retrieval reduction.
    The design X is drawn first under both hypotheses, so for a fixed seed the
    planted and null samples share X.
    """
    if params.sigma == 0:
        raise ZeroNoise("the detection model divides by sigma; sigma must be > 0")
    if signals.p != params.p:
        raise ValueError(f"signal length {signals.p} != p={params.p}")
    hyp = Hypothesis(hypothesis)
    X, z, w = _draw_design(params, make_rng(rng_seed))
    ratio = signals.norm_sq / params.sigma2
    if hyp is Hypothesis.PLANTED:
        y = _mix(X, signals, z) / params.sigma
        if not noiseless:
            y = y + w
        return DetectionSample(X, y, hyp, params, signals, int(rng_seed), z=z, noiseless=noiseless)
    scale = math.sqrt(ratio if noiseless else ratio + 1.0)
    return DetectionSample(X, scale * w, hyp, params, signals, int(rng_seed), noiseless=noiseless)
