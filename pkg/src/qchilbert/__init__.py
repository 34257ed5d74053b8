"""Boundary value problems for Beltrami equations: Hilbert, Dirichlet, Neumann and
directional-derivative problems solved by factoring solutions into an analytic
function composed with a quasiconformal map."""

from .errors import (CertificationError, ConvergenceError, DomainError, InfeasibleError, InputError,
                     QCHilbertError, ResolutionError, StageError, UnsupportedError)

__all__ = [
    "QCHilbertError", "InputError", "DomainError", "UnsupportedError", "InfeasibleError",
    "CertificationError", "ResolutionError", "ConvergenceError", "StageError",
]
__version__ = "0.1.0"
