"""Exact spectra of two generalized quantum Rabi models from glued Frobenius series."""
from .fockoracle import Model, build_hamiltonian, convergence_check, eigenvalues
from .rabi_eps import Model1Params, degenerate_case_W, eigenfunction_model1, spectrum_model1, wronskian_W
from .rabi_nl import (
    Model2Params, VBranch, coeff_matrix_A, integer_x_condition, judd_curves, judd_factor,
    spectrum_model2, vector_frobenius, wronskian_model2,
)
from .spectral import Kind, SpectrumPoint, SpectrumSet, scan_zeros, sweep

__all__ = [
    "Kind", "Model", "Model1Params", "Model2Params", "SpectrumPoint", "SpectrumSet", "VBranch",
    "build_hamiltonian", "coeff_matrix_A", "convergence_check", "degenerate_case_W",
    "eigenfunction_model1", "eigenvalues", "integer_x_condition", "judd_curves", "judd_factor",
    "scan_zeros", "spectrum_model1", "spectrum_model2", "sweep", "vector_frobenius",
    "wronskian_W", "wronskian_model2",
]
__version__ = "0.1.0"
