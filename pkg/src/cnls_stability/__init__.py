"""Stability of solitary waves in coupled cubic nonlinear Schrodinger equations.

Modules: specfun (special functions), model (parameters and profiles),
melnikov (pitchfork coefficients), continuation (homoclinic orbits),
evans (Evans function and zero location), spectral (Krein counts,
perturbation of embedded eigenvalues, stability verdicts), cli.
"""
__version__ = "0.1.0"

from .model import ModelParams, WaveProfile, beta1_critical, fundamental_profile

__all__ = ["ModelParams", "WaveProfile", "beta1_critical", "fundamental_profile", "__version__"]
