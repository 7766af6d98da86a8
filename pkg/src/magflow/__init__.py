"""Magnetic geodesic flows on surfaces.

Submodules: :mod:`geom` (charts, intensities, curvature), :mod:`flow`
(integration), :mod:`hyperbolic` (cylinders, closed orbits, the PSL(2, R)
model), :mod:`stability` (Riccati/Jacobi, sampled Anosov certificate),
:mod:`examples` (the exact Anosov construction, magnetic length) and
:mod:`cli`.
"""

from .flow import FlowSettings, Trajectory, integrate, integrate_many
from .geom import (
    Box,
    DomainError,
    MagneticIntensity,
    MagneticSystem,
    UnitTangent,
    magnetic_curvature,
)

__version__ = "0.1.0"

__all__ = [
    "Box", "DomainError", "FlowSettings", "MagneticIntensity", "MagneticSystem",
    "Trajectory", "UnitTangent", "integrate", "integrate_many", "magnetic_curvature",
    "__version__",
]
