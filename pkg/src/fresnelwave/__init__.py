"""Anisotropic time-harmonic Maxwell solver, Fresnel wave surface geometry and
Bochner-Riesz operator probes."""

__version__ = "0.1.0"

from .materials import (  # noqa: E402
    INF,
    AnisotropyClass,
    ExponentTriple,
    MaterialTensors,
    NormalizedMaterial,
    classify_anisotropy,
    normalize,
    validate_exponents,
)

__all__ = [
    "INF",
    "AnisotropyClass",
    "ExponentTriple",
    "MaterialTensors",
    "NormalizedMaterial",
    "classify_anisotropy",
    "normalize",
    "validate_exponents",
]
