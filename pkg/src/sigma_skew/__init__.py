"""Skew Brownian motions built from continuous class-(Σ) processes, with Monte Carlo checks."""

from .errors import DegenerateEnsembleError, InsufficientQuadraticVariationError, ParameterError
from .excursions import ExcursionDecomposition, decompose, decompose_by_sign, last_zero
from .local_time import LocalTimeEstimate, lt_band, lt_tanaka, sigma_local_time
from .paths import (
    Ensemble,
    Path,
    SigmaProcess,
    StepFunction,
    generate_bm,
    make_sigma_process,
    realized_qv,
    time_change,
)
from .signs import AlphaSchedule, SignPath, sample_z_alpha, sample_z_alpha_schedule, to_cadlag_k
from .skew import SkewSolution, build_direct, build_time_changed, drift_ledger

__version__ = "0.1.0"

__all__ = [
    "AlphaSchedule",
    "DegenerateEnsembleError",
    "Ensemble",
    "ExcursionDecomposition",
    "InsufficientQuadraticVariationError",
    "LocalTimeEstimate",
    "ParameterError",
    "Path",
    "SigmaProcess",
    "SignPath",
    "SkewSolution",
    "StepFunction",
    "build_direct",
    "build_time_changed",
    "decompose",
    "decompose_by_sign",
    "drift_ledger",
    "generate_bm",
    "last_zero",
    "lt_band",
    "lt_tanaka",
    "make_sigma_process",
    "realized_qv",
    "sample_z_alpha",
    "sample_z_alpha_schedule",
    "sigma_local_time",
    "time_change",
    "to_cadlag_k",
]
