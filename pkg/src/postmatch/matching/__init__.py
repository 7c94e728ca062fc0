"""Posterior matching kernels, mu-variants and property checks."""

from .kernels import (AwgnKernel, BscKernel, DmcKernel, ExpMeanKernel, ExponentialKernel,
                      InverseChannelKernel, MatchingKernel, TableKernel, UniformKernel,
                      kernel_eval, kernel_for, normalize_output, normalized_kernel_eval)
from .properties import (DmcPropertyReport, FixedPointReport, dmc_property_check, dominance_permutation,
                         dominated, fixed_point_scan)
from .upf import Upf, mu_variant_array, mu_variant_kernel, mu_variant_step

__all__ = [
    "AwgnKernel", "BscKernel", "DmcKernel", "ExpMeanKernel", "ExponentialKernel",
    "InverseChannelKernel", "MatchingKernel", "TableKernel", "UniformKernel",
    "kernel_eval", "kernel_for", "normalize_output", "normalized_kernel_eval",
    "DmcPropertyReport", "FixedPointReport", "dmc_property_check", "dominance_permutation",
    "dominated", "fixed_point_scan", "Upf", "mu_variant_array", "mu_variant_kernel",
    "mu_variant_step",
]
