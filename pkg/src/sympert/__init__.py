"""Rank-k structured perturbations of symplectic matrices and periodic Hamiltonian systems."""

from .matcore import SympertError, SymplecticContext, block_j, is_symplectic
from .isotropic import IsotropicBasis, isotropic_from
from .perturb import RankKPerturbation, perturbator
from .ode import PeriodicHamiltonian, example1, example2, monodromy, psi
from .stability import StabilityReport, analyze
from .jordan import SegreCharacteristic, check_thr, segre_at, symplectic_with_structure

__all__ = [
    "SympertError",
    "SymplecticContext",
    "block_j",
    "is_symplectic",
    "IsotropicBasis",
    "isotropic_from",
    "RankKPerturbation",
    "perturbator",
    "PeriodicHamiltonian",
    "example1",
    "example2",
    "monodromy",
    "psi",
    "StabilityReport",
    "analyze",
    "SegreCharacteristic",
    "check_thr",
    "segre_at",
    "symplectic_with_structure",
]

__version__ = "0.1.0"
