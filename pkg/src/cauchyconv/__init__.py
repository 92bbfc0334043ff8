"""Cauchy convolution processes, their Gaussian mixture and extreme-value limits."""

from .kernels import Kernel, KernelError, QuadratureError, lattice_sites

__all__ = ["Kernel", "KernelError", "QuadratureError", "lattice_sites"]
__version__ = "0.1.0"
