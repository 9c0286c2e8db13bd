"""Scintillation of partially coherent beams from photon trajectory statistics.

Modules
-------
turbulence
    Refractive-index spectra and their radial moments.
beam_source
    Gaussian Shell-model source with an optional phase diffuser.
trajectory_kernel
    Single- and two-trajectory functionals and their decorrelation exponent.
quadrature
    Adaptive cubature and sampling integrators with reproducible
    parallelism.
scintillation
    Mean intensity, second moment and the scintillation index.
mc_oracle
    Independent Monte-Carlo ray tracing through synthetic turbulence.
cli
    Config-driven sweeps writing CSV, metadata and figures.
"""

__version__ = "0.1.0"

from .beam_source import BeamParams, diffuser_for_ratio, effective_radius  # noqa: E402
from .quadrature import IntegrationConfig, Method  # noqa: E402
from .scintillation import (  # noqa: E402
    ModelOptions,
    PropagationQuery,
    applicability_ratio,
    beam_radius_sq,
    intensity_moments,
    mean_intensity,
    momentum_diffusion,
    sigma2,
    sweep,
)
from .trajectory_kernel import Coefficients, KernelMode, PhasePoint, phi_pair, phi_self  # noqa: E402
from .turbulence import SpectrumModel, TurbulenceParams  # noqa: E402

__all__ = [
    "BeamParams", "diffuser_for_ratio", "effective_radius",
    "IntegrationConfig", "Method",
    "ModelOptions", "PropagationQuery", "applicability_ratio", "beam_radius_sq", "intensity_moments",
    "mean_intensity", "momentum_diffusion", "sigma2", "sweep",
    "Coefficients", "KernelMode", "PhasePoint", "phi_pair", "phi_self",
    "SpectrumModel", "TurbulenceParams",
]
