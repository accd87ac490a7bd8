"""Pseudo-spectral laboratory for damped Navier-Stokes flows on a periodic box."""

__version__ = "0.1.0"

from .spectral import (
    GridSpec,
    SpectralField,
    Multiplier,
    EmptyBandError,
    forward_transform,
    inverse_transform,
    leray_project,
    apply_multiplier,
    band_project,
    bilinear_B,
    convection,
    norm,
    norm_l2,
    norm_hs,
    norm_lp,
    norm_e,
    norm_gevrey,
    inner_l2,
)
from .forcing import PhysicalParams, ForceSpec, build_force, grashof

__all__ = [
    "GridSpec",
    "SpectralField",
    "Multiplier",
    "EmptyBandError",
    "forward_transform",
    "inverse_transform",
    "leray_project",
    "apply_multiplier",
    "band_project",
    "bilinear_B",
    "convection",
    "norm",
    "norm_l2",
    "norm_hs",
    "norm_lp",
    "norm_e",
    "norm_gevrey",
    "inner_l2",
    "PhysicalParams",
    "ForceSpec",
    "build_force",
    "grashof",
    "__version__",
]
