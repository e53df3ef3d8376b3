"""Numerical toolkit for commuting holomorphic endomorphisms of P^1 and P^2."""

__version__ = "0.1.0"

from .algebra import GaussianRational, HomPolynomial
from .projmap import ProjectiveMap, ProjectivePoint, commutes, make_map

__all__ = ["GaussianRational", "HomPolynomial", "ProjectiveMap", "ProjectivePoint", "commutes",
           "make_map", "__version__"]
