"""Endpoint-Markov model of operator spreading under weak dissipation."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("opgap")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .airy import airy_ai, airy_ai_prime, airy_zero, log_airy_ai
from .chain import ChainSpec, ChainSpecError, TridiagonalOperator, auto_length, build_discrete_step, build_generator
from .continuum import (ContinuumModel, TailPrediction, continuum_eigenvalue, continuum_mode, mode_peak,
                        tail_asymptote, wall_offset)
from .dynamics import (Autocorrelation, DecayFit, DistributionTrajectory, TrajectoryEnsemble, autocorrelation,
                       evolve_distribution, fit_decay_rate, half_life, half_life_scaling,
                       sample_tilted_trajectories, sample_trajectories, survival_log_distribution)
from .hermitian import FrameParams, frame_params, hermitize, to_hermitian_frame, to_original_frame
from .ruc import (GateOracleReport, RucParams, com_diffusion_check, endpoint_transition_estimate,
                  haar_gate_sample, ruc_params)
from .spectral import (BindingCurve, SpectralError, SpectralResult, binding_scan, classify_mode, low_spectrum,
                       spectrum_for_spec)

__all__ = [
    "airy_ai", "airy_ai_prime", "airy_zero", "log_airy_ai",
    "ChainSpec", "ChainSpecError", "TridiagonalOperator", "auto_length", "build_discrete_step", "build_generator",
    "ContinuumModel", "TailPrediction", "continuum_eigenvalue", "continuum_mode", "mode_peak", "tail_asymptote",
    "wall_offset",
    "Autocorrelation", "DecayFit", "DistributionTrajectory", "TrajectoryEnsemble", "autocorrelation",
    "evolve_distribution", "fit_decay_rate", "half_life", "half_life_scaling", "sample_tilted_trajectories",
    "sample_trajectories", "survival_log_distribution",
    "FrameParams", "frame_params", "hermitize", "to_hermitian_frame", "to_original_frame",
    "GateOracleReport", "RucParams", "com_diffusion_check", "endpoint_transition_estimate", "haar_gate_sample",
    "ruc_params",
    "BindingCurve", "SpectralError", "SpectralResult", "binding_scan", "classify_mode", "low_spectrum",
    "spectrum_for_spec",
]
