"""Realized (co-)volatility vectors and their large and moderate deviations."""

from .coefficients import (
    CoefficientSpec,
    Constant,
    IncrementMoments,
    LinearMeanRevertingDrift,
    Tabulated,
    TimeOnlyDrift,
    evaluate,
    integrate_coefficient,
    interval_moments,
)
from .estimators import (
    RealizedCovolatility,
    RealizedTrajectory,
    RealizedVector,
    drift_corrected_vector,
    integrated_truth,
    realized_beta,
    realized_correlation,
    realized_trajectory,
    realized_vector,
    tilde_vector,
)
from .simulate import SamplePath, TiltedSample, simulate_path, simulate_tilted

__version__ = "0.1.0"

__all__ = [
    "CoefficientSpec",
    "Constant",
    "IncrementMoments",
    "LinearMeanRevertingDrift",
    "RealizedCovolatility",
    "RealizedTrajectory",
    "RealizedVector",
    "SamplePath",
    "Tabulated",
    "TiltedSample",
    "TimeOnlyDrift",
    "__version__",
    "drift_corrected_vector",
    "evaluate",
    "integrate_coefficient",
    "integrated_truth",
    "interval_moments",
    "realized_beta",
    "realized_correlation",
    "realized_trajectory",
    "realized_vector",
    "simulate_path",
    "simulate_tilted",
    "tilde_vector",
]
