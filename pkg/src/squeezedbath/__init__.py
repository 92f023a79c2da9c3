"""Gaussian moment dynamics of bosonic modes coupled to squeezed thermal baths."""

from __future__ import annotations

__version__ = "0.1.0"

from .core import (
    BathMoments,
    CovarianceState,
    DiffusionConvention,
    ModeSpec,
    SqueezingInput,
    SystemSpec,
    diffusion_matrix,
    drift_matrix,
)
from .dynamics import evolve_covariance, evolve_first_moments, steady_state_lyapunov
from .spectral import PTPhase, SpectralReport, eigendecompose, ep_fan_scan, find_ep_on_ray

__all__ = [
    "BathMoments",
    "CovarianceState",
    "DiffusionConvention",
    "ModeSpec",
    "PTPhase",
    "SpectralReport",
    "SqueezingInput",
    "SystemSpec",
    "diffusion_matrix",
    "drift_matrix",
    "eigendecompose",
    "ep_fan_scan",
    "evolve_covariance",
    "evolve_first_moments",
    "find_ep_on_ray",
    "steady_state_lyapunov",
]
