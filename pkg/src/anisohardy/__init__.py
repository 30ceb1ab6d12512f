"""Numerical toolkit for anisotropic Hardy spaces with variable exponents."""
from . import analysis, atoms, dilation, report, sampling, varexp
from .dilation import DilationStructure, make_dilation, step_quasi_norm
from .errors import AnisoError

__all__ = ["analysis", "atoms", "dilation", "report", "sampling", "varexp",
           "DilationStructure", "make_dilation", "step_quasi_norm", "AnisoError"]
__version__ = "0.1.0"
