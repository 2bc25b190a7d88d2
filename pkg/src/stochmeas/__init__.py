"""Stochastic apparatus model of quantum measurement.

The measured system's channel amplitudes are driven by a classical field of
+-1 noise variables; a single run is a martingale walk on the probability
simplex that ends in one corner, and the ensemble of runs reproduces
``|psi_j|^2``.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .apparatus import ApparatusParams, NoiseRealization
from .errors import (
    BelowThreshold,
    CollinearSingularity,
    ConfigError,
    DegenerateAmplitudes,
    EnumerationTooLarge,
    NoData,
    StochMeasError,
    UnreachablePointer,
)
from .state import AmplitudeVector, DensityMatrix, RawAmplitudes, TwoBodyMasses
from .walk import WalkResult, WalkState, run_walk, run_walks

__all__ = [
    "AmplitudeVector",
    "ApparatusParams",
    "BelowThreshold",
    "CollinearSingularity",
    "ConfigError",
    "DegenerateAmplitudes",
    "DensityMatrix",
    "EnumerationTooLarge",
    "NoData",
    "NoiseRealization",
    "RawAmplitudes",
    "StochMeasError",
    "TwoBodyMasses",
    "UnreachablePointer",
    "WalkResult",
    "WalkState",
    "run_walk",
    "run_walks",
]
