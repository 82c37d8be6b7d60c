"""Numerical checks of Φ-entropy decay and integral curvature-dimension conditions."""

from .core import Grid, WeightedMeasure, integrate, make_grid, normalize_potential
from .generator import Generator, apply_semigroup, build_generator, symmetry_residual
from .gamma import GammaContext, gamma, gamma2, lemma21_residual
from .phi import DomainError, PhiFunction, phi_suite

__all__ = [
    "DomainError",
    "GammaContext",
    "Generator",
    "Grid",
    "PhiFunction",
    "WeightedMeasure",
    "apply_semigroup",
    "build_generator",
    "gamma",
    "gamma2",
    "integrate",
    "lemma21_residual",
    "make_grid",
    "normalize_potential",
    "phi_suite",
    "symmetry_residual",
]
