"""Stationary Gaussian random fields with separable covariance.

Realizations are produced by filtering white noise with one rational
shaping filter per axis, at a cost linear in the number of samples.
"""
__version__ = "0.1.0"

from .covariance import (CovarianceModel, Kernel1D, KernelKind, dominant_lag_count,
                         eval_kernel, product_covariance, sampled_sequence)
from .spectral import (MESolveReport, RationalFilter1D, SpectralDensity1D,
                       ar1_filter_exponential, analytic_ar1_covariance, bauer_factorize,
                       build_filter, dual_gradient_hessian, me_dual_solve)
from .sampler import FieldGrid, NoiseGrid, filter_axis, generate, white_noise

__all__ = [
    "CovarianceModel", "Kernel1D", "KernelKind", "dominant_lag_count", "eval_kernel",
    "product_covariance", "sampled_sequence", "MESolveReport", "RationalFilter1D",
    "SpectralDensity1D", "ar1_filter_exponential", "analytic_ar1_covariance",
    "bauer_factorize", "build_filter", "dual_gradient_hessian", "me_dual_solve",
    "FieldGrid", "NoiseGrid", "filter_axis", "generate", "white_noise",
]
