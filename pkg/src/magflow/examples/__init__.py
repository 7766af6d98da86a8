"""Worked constructions: the exact Anosov surface-of-revolution system, and
cohomology and magnetic-length bookkeeping."""

from .burns import (
    BumpIntensity,
    BurnsExperiment,
    BurnsProfile,
    BurnsSystem,
    Clause,
    ConstructionError,
    build_burns_system,
    burns_certificate_experiment,
    non_anosov_witness,
    validate,
    validation_report,
)
from .cohomology import (
    ClosedCurve,
    ExactPrimitive,
    HomotopyError,
    cohomology_constant,
    cohomology_constant_from_flux,
    half_plane_primitive,
    homology_relation_check,
    line_integral,
    magnetic_length,
    orbit_curve,
    perturbed_curves,
    revolution_primitive,
    riemannian_length,
)

__all__ = [
    "BumpIntensity", "BurnsExperiment", "BurnsProfile", "BurnsSystem", "Clause",
    "ConstructionError", "build_burns_system", "burns_certificate_experiment",
    "non_anosov_witness", "validate", "validation_report",
    "ClosedCurve", "ExactPrimitive", "HomotopyError", "cohomology_constant",
    "cohomology_constant_from_flux", "half_plane_primitive", "homology_relation_check",
    "line_integral", "magnetic_length", "orbit_curve", "perturbed_curves",
    "revolution_primitive", "riemannian_length",
]
