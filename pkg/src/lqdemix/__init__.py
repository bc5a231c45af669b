"""Sparse recovery and demixing with lq quasi-norm regularization.

The package recovers two superposed components y = A1 x1 + A2 x2 by
penalizing each with an lq quasi-norm (0 <= q <= 1), using proximal block
coordinate descent or four-block ADMM, with multichannel joint-recovery
variants, convergence-condition checkers, and an experiment harness for
phase-transition, penalty-grid, inpainting, and robust-recovery studies.
"""

from . import experiments, imaging, linops, prox, reports, solvers
from .linops import (
    OperatorBounds,
    dct,
    dense,
    gaussian_orthonormal,
    idct,
    idct2d,
    identity,
    spectral_bounds,
)
from .prox import prox_group, prox_group_rows, prox_scalar, prox_vector
from .solvers import (
    SOLVERS,
    DemixProblem,
    SolveResult,
    SolverConfig,
    admm_penalties_convergent,
    admm_solve,
    bcd_solve,
    bcd_step_sizes_convergent,
    multitask_admm_solve,
    multitask_bcd_solve,
    next_beta,
    objective_value,
    sadmm_solve,
)

__version__ = "0.1.0"
