"""Pseudo-inverse preconditioning for greedy sparse recovery.

The main entry points are re-exported here; the submodules hold the rest.
"""
from .errors import NumericalError, PmolsError, ValidationError
from .linalg import mutual_coherence, svd
from .precondition import Preconditioner, SensingSystem, apply, modified_pip, pip_preconditioner
from .recovery import RecoveryResult, SolverParams, Termination, mols, omp, pmols

__version__ = "0.1.0"
