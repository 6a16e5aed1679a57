"""Exact diagonalization of the periodic ANNNI chain in a transverse field."""
from ._backend import BACKEND
from .crossings import Crossing, CrossingReport, FidelityDrop, detect, find_fidelity_drops
from .errors import AnnniError, UnconvergedError, ValidationError
from .fidelity import OverlapDecomposition, decompose, fidelity, fidelity_susceptibility
from .hilbert import ChainSpec, Hamiltonian, apply_hamiltonian, build_dense, diagonal_energy
from .lanczos import SolverConfig, Spectrum, dense_lowest, lanczos_lowest
from .sweep import SweepSpec, run_grid, run_sweep

__version__ = "0.1.0"
