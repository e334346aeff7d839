"""Big q-Jacobi function transform: eigenfunctions, Plancherel measure and verification."""

from .qseries import (SeriesResult, DomainError, ConvergenceError, PoleError,
                      qpoch_finite, qpoch_inf, theta, theta_shift, phi_series)
from .lattice import (P0, Parameters, LatticePoint, LatticeWindow, LatticeFunction, apply_L,
                      inner_product, random_parameters)
from .eigen import mu, phi, psi, phi_asym, phi_asym_extended
from .cfun import c_function, ctilde_function, K_coefficients, W_gamma
from .spectral import SpectralMeasure, spectral_measure, discrete_set_S, continuous_density, green_apply
from .transform import (forward, forward_measure, inverse, plancherel_check, SpectralFunction, HahnSystem,
                        hahn_gram, big_qjacobi_norm)

__version__ = "0.1.0"

__all__ = [
    "SeriesResult", "DomainError", "ConvergenceError", "PoleError",
    "qpoch_finite", "qpoch_inf", "theta", "theta_shift", "phi_series",
    "P0", "Parameters", "LatticePoint", "LatticeWindow", "LatticeFunction", "apply_L", "inner_product",
    "random_parameters", "mu", "phi", "psi", "phi_asym", "phi_asym_extended",
    "c_function", "ctilde_function", "K_coefficients", "W_gamma",
    "SpectralMeasure", "spectral_measure", "discrete_set_S", "continuous_density", "green_apply",
    "forward", "forward_measure", "inverse", "plancherel_check", "SpectralFunction", "HahnSystem",
    "hahn_gram", "big_qjacobi_norm",
]
