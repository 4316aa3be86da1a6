"""Numerical laboratory for solitons, breathers and multi-breathers of the focusing mKdV equation.

    u_t + (u_xx + u^3)_x = 0

Modules, bottom-up: ``grid`` (periodic spectral substrate), ``profiles``
(exact solutions), ``cutoffs``, ``functionals`` (conservation laws),
``quadforms`` (elliptic identities, linearized operators, coercivity),
``solver`` (ETDRK4 / IFRK4 time stepping), ``modulation`` (Newton
decompositions) and ``experiments`` (run harnesses behind the CLI).
"""

from .grid import Field, PeriodicGrid, integrate, make_grid, sobolev_norm, spectral_derivative
from .profiles import (
    BreatherParams,
    ProfileSet,
    SolitonParams,
    eval_breather,
    eval_object,
    eval_profile_sum,
    eval_soliton,
    kernel_basis,
    make_profile_set,
)
from .functionals import ConservedTriple, conserved, localized_conserved, lyapunov
from .solver import SolverConfig, Trajectory, evolve, pde_residual, read_snapshot, write_snapshot
from .modulation import ModulationError, ModulationResult, modulate, modulate_single

__version__ = "0.1.0"

__all__ = [
    "BreatherParams",
    "ConservedTriple",
    "Field",
    "ModulationError",
    "ModulationResult",
    "PeriodicGrid",
    "ProfileSet",
    "SolitonParams",
    "SolverConfig",
    "Trajectory",
    "conserved",
    "eval_breather",
    "eval_object",
    "eval_profile_sum",
    "eval_soliton",
    "evolve",
    "integrate",
    "kernel_basis",
    "localized_conserved",
    "lyapunov",
    "make_grid",
    "make_profile_set",
    "modulate",
    "modulate_single",
    "pde_residual",
    "read_snapshot",
    "sobolev_norm",
    "spectral_derivative",
    "write_snapshot",
]
