"""Numerical pipeline for parametric-resonance blow-up of wave maps on
time-periodic spacetimes: Hill/Floquet analysis, target-manifold geometry,
the linearizing integral transform, explicit blow-up certificates, and
direct PDE cross-checks."""

from . import blowup, coeffs, floquet, geometry, pdesim, transform  # noqa: F401

__version__ = "0.1.0"
