"""Mixed sparse linear regression: generation, CORR, recovery pipelines,
exact low-degree chi-square evaluation, reductions and an experiment harness."""

from .model import ModelParams, SignalPair, Regime, RegimeTag, classify_regime
from .gen import Hypothesis, Instance, DetectionSample, sample_signal_pair, sample_instance, sample_detection
from .corr import CorrConfig, corr_support, corr_detect, corr_signed_support

__all__ = [
    "ModelParams",
    "SignalPair",
    "Regime",
    "RegimeTag",
    "classify_regime",
    "Hypothesis",
    "Instance",
    "DetectionSample",
    "sample_signal_pair",
    "sample_instance",
    "sample_detection",
    "CorrConfig",
    "corr_support",
    "corr_detect",
    "corr_signed_support",
]

__version__ = "0.1.0"
