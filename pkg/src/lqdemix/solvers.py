"""Solvers for two-component sparse demixing with lq penalties.

All solvers target measurements y = A1 x1 + A2 x2 (or Y = A1 X1 + A2 X2
across L channels) and minimize the penalized objective

    (1/beta) ||A1 x1 + A2 x2 - y||^2 + mu ||x1||_q1^q1 + ||x2||_q2^q2

driving beta down a geometric continuation schedule so that the equality
constraint is enforced in the limit. Five solvers are provided:

* ``bcd_solve`` - block coordinate descent with proximal linearization of
  the quadratic term; a descent method whenever both step parameters
  exceed twice the largest eigenvalue of the corresponding Gram matrix.
* ``admm_solve`` - four-block ADMM on the split x_i = z_i, convergent when
  the penalties satisfy ``admm_penalties_convergent``.
* ``multitask_bcd_solve`` / ``multitask_admm_solve`` - the same schemes
  with row-wise group shrinkage, coupling the channels through a shared
  row support. With one channel they reduce to the single-task solvers.
* ``sadmm_solve`` - the classical two-block ADMM applied directly to the
  equality-constrained problem, with linearized proximal x-steps. It is a
  baseline: reliable for q = 1 but with no convergence guarantee below it.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linops import OperatorBounds, spectral_bounds
from .prox import lq_penalty, lq_row_penalty, prox_group_rows, prox_vector

__all__ = (
    "DemixProblem",
    "SolverConfig",
    "SolveResult",
    "bcd_step_sizes_convergent",
    "admm_penalties_convergent",
    "auto_step_sizes",
    "auto_admm_penalty",
    "next_beta",
    "objective_value",
    "bcd_solve",
    "admm_solve",
    "multitask_bcd_solve",
    "multitask_admm_solve",
    "sadmm_solve",
    "SOLVERS",
)


@dataclass(frozen=True)
class DemixProblem:
    """Measurements y (m or m-by-L) with the two dictionaries a1, a2."""

    a1: object
    a2: object
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim not in (1, 2):
            raise ValueError("y must be a vector or an m-by-L matrix")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        if self.a1.rows != y.shape[0] or self.a2.rows != y.shape[0]:
            raise ValueError(
                f"row mismatch: a1 has {self.a1.rows}, a2 has {self.a2.rows}, "
                f"y has {y.shape[0]}"
            )
        object.__setattr__(self, "y", y)

    @property
    def channels(self):
        return 1 if self.y.ndim == 1 else self.y.shape[1]


@dataclass(frozen=True)
class SolverConfig:
    """Penalty exponents, weights, and iteration controls shared by all solvers.

    ``eta1``/``eta2`` are the BCD proximal step parameters (and double as
    the linearization constants c1/c2 of ``sadmm_solve``); ``rho1``/``rho2``
    are the ADMM penalties (``rho1`` doubles as the single S-ADMM penalty).
    ``None`` selects values that provably satisfy the convergence
    conditions for the given operators.
    """

    q1: float = 0.5
    q2: float = 0.5
    mu: float = 1.0
    beta_target: float = 1e-6
    beta_start: float = 1.0
    beta_decay: float = 0.97
    max_iters: int = 5000
    tol: float = 1e-8
    eta1: float | None = None
    eta2: float | None = None
    rho1: float | None = None
    rho2: float | None = None

    def __post_init__(self):
        for name in ("q1", "q2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.mu <= 0.0:
            raise ValueError("mu must be positive")
        if not 0.0 < self.beta_decay < 1.0:
            raise ValueError("beta_decay must lie in (0, 1)")
        if self.beta_target <= 0.0 or self.beta_start < self.beta_target:
            raise ValueError("require beta_start >= beta_target > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        for name in ("eta1", "eta2", "rho1", "rho2"):
            v = getattr(self, name)
            if v is not None and v <= 0.0:
                raise ValueError(f"{name} must be positive when given")


@dataclass
class SolveResult:
    """Recovered components plus per-iteration traces.

    Traces all have length ``iterations``; ``objective_trace`` records the
    penalized objective at the beta in force during each iteration.
    ``converged`` is True only if the relative iterate gap reached ``tol``
    (for the continuation solvers, with beta already at its target).
    """

    x1: np.ndarray
    x2: np.ndarray
    objective_trace: np.ndarray
    residual_trace: np.ndarray
    iterate_gap_trace: np.ndarray
    iterations: int
    converged: bool
    warnings: list = field(default_factory=list)
    # final ADMM state, populated by the ADMM solvers only
    z1: np.ndarray | None = None
    z2: np.ndarray | None = None
    w1: np.ndarray | None = None
    w2: np.ndarray | None = None

    def to_json(self):
        """Serialize the public fields to a JSON document."""
        return json.dumps(
            {
                "x1": np.asarray(self.x1).tolist(),
                "x2": np.asarray(self.x2).tolist(),
                "objective_trace": np.asarray(self.objective_trace).tolist(),
                "residual_trace": np.asarray(self.residual_trace).tolist(),
                "iterations": self.iterations,
                "converged": self.converged,
            }
        )


def bcd_step_sizes_convergent(eta1, eta2, b1: OperatorBounds, b2: OperatorBounds):
    """True iff the BCD step parameters guarantee convergence.

    Requires each eta to strictly exceed twice the largest eigenvalue of
    the corresponding Gram matrix; the same test covers the multitask
    variant's step parameters.
    """
    return eta1 > 2.0 * b1.lambda_max and eta2 > 2.0 * b2.lambda_max


def admm_penalties_convergent(rho1, rho2, b1: OperatorBounds, b2: OperatorBounds):
    """True iff the ADMM penalties satisfy the sufficient convergence condition.

    Both inequalities

        rho1 > 16*l1^2/rho1 + 16*l1*l2/rho2 - 2*p1
        rho2 > 16*l2^2/rho2 + 16*l1*l2/rho1 - 2*p2

    must hold, where l_i/p_i are the largest/smallest eigenvalues of the
    Gram matrices. The multitask variant uses the identical test.
    """
    l1, p1 = b1.lambda_max, b1.lambda_min
    l2, p2 = b2.lambda_max, b2.lambda_min
    ok1 = rho1 > 16.0 * l1**2 / rho1 + 16.0 * l1 * l2 / rho2 - 2.0 * p1
    ok2 = rho2 > 16.0 * l2**2 / rho2 + 16.0 * l1 * l2 / rho1 - 2.0 * p2
    return ok1 and ok2


def auto_step_sizes(b1: OperatorBounds, b2: OperatorBounds):
    """Default proximal step parameters 2.1 * lambda_max per block."""
    return 2.1 * b1.lambda_max, 2.1 * b2.lambda_max


def auto_admm_penalty(b1: OperatorBounds, b2: OperatorBounds):
    """Smallest equal penalty rho1 = rho2 passing the convergence test, x1.05.

    With rho1 = rho2 = rho each inequality becomes a quadratic in rho whose
    positive root is the per-block threshold; the larger root is the joint
    threshold rho*.
    """
    l1, p1 = b1.lambda_max, b1.lambda_min
    l2, p2 = b2.lambda_max, b2.lambda_min
    r1 = -p1 + np.sqrt(p1**2 + 16.0 * l1 * (l1 + l2))
    r2 = -p2 + np.sqrt(p2**2 + 16.0 * l2 * (l1 + l2))
    return 1.05 * max(r1, r2)


def next_beta(beta, cfg: SolverConfig):
    """One step of the geometric continuation, clamped at the target."""
    return max(cfg.beta_decay * beta, cfg.beta_target)


def objective_value(p: DemixProblem, x1, x2, cfg: SolverConfig, beta):
    """Penalized objective at (x1, x2) for the given beta.

    Uses elementwise penalties for single-channel inputs and row-norm
    penalties for multichannel ones; with q = 0 the penalty counts nonzero
    entries (or rows).
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r = p.a1.apply(x1) + p.a2.apply(x2) - p.y
    fit = float(np.sum(r * r)) / beta
    if x1.ndim == 2 and x1.shape[1] > 1:
        return fit + cfg.mu * lq_row_penalty(x1, cfg.q1) + lq_row_penalty(x2, cfg.q2)
    return fit + cfg.mu * lq_penalty(x1, cfg.q1) + lq_penalty(x2, cfg.q2)


def _norm(x):
    return float(np.linalg.norm(x))


def _iterate_gap(x1_new, x1_old, x2_new, x2_old):
    g1 = _norm(x1_new - x1_old) / max(_norm(x1_old), 1.0)
    g2 = _norm(x2_new - x2_old) / max(_norm(x2_old), 1.0)
    return max(g1, g2)


def _as_columns(y):
    y = np.asarray(y, dtype=float)
    return y[:, None] if y.ndim == 1 else y


def _init_iterates(p: DemixProblem, init):
    shape1 = (p.a1.cols, _as_columns(p.y).shape[1])
    shape2 = (p.a2.cols, _as_columns(p.y).shape[1])
    if init is None:
        return np.zeros(shape1), np.zeros(shape2)
    x1 = _as_columns(np.asarray(init[0], dtype=float)).copy()
    x2 = _as_columns(np.asarray(init[1], dtype=float)).copy()
    if x1.shape != shape1 or x2.shape != shape2:
        raise ValueError(
            f"init shapes {x1.shape}/{x2.shape} do not match problem {shape1}/{shape2}"
        )
    return x1, x2


def _match_output(x, y):
    return x[:, 0] if np.asarray(y).ndim == 1 else x


def _penalty_fns(cfg: SolverConfig, grouped):
    if grouped:
        prox1 = lambda t, eta: prox_group_rows(t, cfg.q1, eta)
        prox2 = lambda t, eta: prox_group_rows(t, cfg.q2, eta)
        pen1 = lambda x: lq_row_penalty(x, cfg.q1)
        pen2 = lambda x: lq_row_penalty(x, cfg.q2)
    else:
        prox1 = lambda t, eta: prox_vector(t, cfg.q1, eta)
        prox2 = lambda t, eta: prox_vector(t, cfg.q2, eta)
        pen1 = lambda x: lq_penalty(x, cfg.q1)
        pen2 = lambda x: lq_penalty(x, cfg.q2)
    return prox1, prox2, pen1, pen2


def _bcd_core(p, cfg, init, grouped):
    b1, b2 = spectral_bounds(p.a1), spectral_bounds(p.a2)
    auto1, auto2 = auto_step_sizes(b1, b2)
    eta1 = cfg.eta1 if cfg.eta1 is not None else auto1
    eta2 = cfg.eta2 if cfg.eta2 is not None else auto2
    warnings = []
    if not bcd_step_sizes_convergent(eta1, eta2, b1, b2):
        warnings.append(
            f"step sizes eta1={eta1}, eta2={eta2} violate the convergence "
            f"condition (need > {2 * b1.lambda_max} and > {2 * b2.lambda_max})"
        )

    prox1, prox2, pen1, pen2 = _penalty_fns(cfg, grouped)
    y = _as_columns(p.y)
    x1, x2 = _init_iterates(p, init)
    a1, a2 = p.a1, p.a2

    beta = cfg.beta_start
    obj_trace, res_trace, gap_trace = [], [], []
    converged = False
    iterations = 0
    for _ in range(cfg.max_iters):
        r = a1.apply(x1) + a2.apply(x2) - y
        c1 = x1 - (2.0 / eta1) * a1.apply_adjoint(r)
        x1_new = prox1(c1, eta1 / (beta * cfg.mu))
        r = a1.apply(x1_new) + a2.apply(x2) - y
        c2 = x2 - (2.0 / eta2) * a2.apply_adjoint(r)
        x2_new = prox2(c2, eta2 / beta)

        gap = _iterate_gap(x1_new, x1, x2_new, x2)
        x1, x2 = x1_new, x2_new
        r = a1.apply(x1) + a2.apply(x2) - y
        fit = float(np.sum(r * r))
        obj_trace.append(fit / beta + cfg.mu * pen1(x1) + pen2(x2))
        res_trace.append(np.sqrt(fit))
        gap_trace.append(gap)
        iterations += 1
        if gap <= cfg.tol and beta == cfg.beta_target:
            converged = True
            break
        beta = next_beta(beta, cfg)

    return SolveResult(
        x1=_match_output(x1, p.y),
        x2=_match_output(x2, p.y),
        objective_trace=np.asarray(obj_trace),
        residual_trace=np.asarray(res_trace),
        iterate_gap_trace=np.asarray(gap_trace),
        iterations=iterations,
        converged=converged,
        warnings=warnings,
    )


def _make_quadratic_solver(op, rho):
    """Solver for (2 A^T A + rho I) x = v, built once per run.

    Row-orthonormal operators admit the inversion-free form
    (1/rho) I - 2/(rho (2 + rho)) A^T A; anything else gets one Cholesky
    factorization of the dense Gram system, reused for every iteration
    because rho is fixed during a solve.
    """
    if op.row_orthonormal or op.kind == "identity":
        coeff = 2.0 / (rho * (2.0 + rho))

        def solve(v):
            return v / rho - coeff * op.apply_adjoint(op.apply(v))

        return solve
    system = 2.0 * op.gram_matrix() + rho * np.eye(op.cols)
    chol = scipy.linalg.cho_factor(system)

    def solve(v):
        return scipy.linalg.cho_solve(chol, v)

    return solve


def _admm_core(p, cfg, init, grouped):
    b1, b2 = spectral_bounds(p.a1), spectral_bounds(p.a2)
    if cfg.rho1 is None and cfg.rho2 is None:
        rho1 = rho2 = auto_admm_penalty(b1, b2)
    else:
        rho1 = cfg.rho1 if cfg.rho1 is not None else auto_admm_penalty(b1, b2)
        rho2 = cfg.rho2 if cfg.rho2 is not None else rho1
    warnings = []
    if not admm_penalties_convergent(rho1, rho2, b1, b2):
        warnings.append(
            f"penalties rho1={rho1}, rho2={rho2} violate the sufficient "
            f"convergence condition"
        )

    prox1, prox2, pen1, pen2 = _penalty_fns(cfg, grouped)
    y = _as_columns(p.y)
    x1, x2 = _init_iterates(p, init)
    w1, w2 = np.zeros_like(x1), np.zeros_like(x2)
    a1, a2 = p.a1, p.a2
    solve1 = _make_quadratic_solver(a1, rho1)
    solve2 = _make_quadratic_solver(a2, rho2)

    beta = cfg.beta_start
    obj_trace, res_trace, gap_trace = [], [], []
    converged = False
    iterations = 0
    for _ in range(cfg.max_iters):
        z1 = prox1(x1 + w1 / rho1, rho1 / (beta * cfg.mu))
        z2 = prox2(x2 + w2 / rho2, rho2 / beta)
        x1_new = solve1(2.0 * a1.apply_adjoint(y - a2.apply(x2)) + rho1 * z1 - w1)
        x2_new = solve2(2.0 * a2.apply_adjoint(y - a1.apply(x1_new)) + rho2 * z2 - w2)
        w1 = w1 + rho1 * (x1_new - z1)
        w2 = w2 + rho2 * (x2_new - z2)

        gap = _iterate_gap(x1_new, x1, x2_new, x2)
        x1, x2 = x1_new, x2_new
        r = a1.apply(x1) + a2.apply(x2) - y
        fit = float(np.sum(r * r))
        obj_trace.append(fit / beta + cfg.mu * pen1(x1) + pen2(x2))
        res_trace.append(np.sqrt(fit))
        gap_trace.append(gap)
        iterations += 1
        if gap <= cfg.tol and beta == cfg.beta_target:
            converged = True
            break
        beta = next_beta(beta, cfg)

    return SolveResult(
        x1=_match_output(x1, p.y),
        x2=_match_output(x2, p.y),
        objective_trace=np.asarray(obj_trace),
        residual_trace=np.asarray(res_trace),
        iterate_gap_trace=np.asarray(gap_trace),
        iterations=iterations,
        converged=converged,
        warnings=warnings,
        z1=_match_output(z1, p.y),
        z2=_match_output(z2, p.y),
        w1=_match_output(w1, p.y),
        w2=_match_output(w2, p.y),
    )


def _require_single_channel(p, name):
    if p.channels != 1:
        raise ValueError(f"{name} handles a single channel; use the multitask variant")


def bcd_solve(p: DemixProblem, cfg: SolverConfig, init=None):
    """Proximal block coordinate descent on the penalized objective.

    Alternates shrinkage steps on x1 and x2 against linearizations of the
    quadratic term, walking beta down the continuation schedule. With step
    parameters passing ``bcd_step_sizes_convergent`` (the default), each
    iteration decreases the objective at fixed beta.

    Parameters
    ----------
    p : DemixProblem
        Single-channel problem (y one-dimensional or m-by-1).
    cfg : SolverConfig
        Solver settings; ``eta1``/``eta2`` of None selects safe defaults.
    init : tuple of (x1, x2), optional
        Starting iterates; zeros when omitted.
    """
    _require_single_channel(p, "bcd_solve")
    return _bcd_core(p, cfg, init, grouped=False)


def multitask_bcd_solve(p: DemixProblem, cfg: SolverConfig, init=None):
    """Joint-recovery BCD: row-wise group shrinkage across channels."""
    return _bcd_core(p, cfg, init, grouped=True)


def admm_solve(p: DemixProblem, cfg: SolverConfig, init=None):
    """Four-block ADMM on the split formulation x1 = z1, x2 = z2.

    Each iteration runs shrinkage on the two split variables, exact
    quadratic updates on x1/x2 (inversion-free for row-orthonormal
    dictionaries), then dual ascent. Defaults pick the smallest equal
    penalty satisfying ``admm_penalties_convergent``.
    """
    _require_single_channel(p, "admm_solve")
    return _admm_core(p, cfg, init, grouped=False)


def multitask_admm_solve(p: DemixProblem, cfg: SolverConfig, init=None):
    """Joint-recovery ADMM: row-wise group shrinkage in the z-steps."""
    return _admm_core(p, cfg, init, grouped=True)


def sadmm_solve(p: DemixProblem, cfg: SolverConfig, init=None):
    """Two-block ADMM applied directly to the constrained problem.

    The x-subproblems are handled by proximal linearization with constants
    c_i = ``eta1``/``eta2`` (defaults 2.1 * lambda_max, which makes each
    inner step a descent step on its subproblem) and penalty rho =
    ``rho1`` (default 10). There is no convergence guarantee for q < 1;
    ``converged`` reports the observed iterate gap honestly. The
    objective trace is evaluated at ``beta_target`` for comparability with
    the continuation solvers.
    """
    _require_single_channel(p, "sadmm_solve")
    b1, b2 = spectral_bounds(p.a1), spectral_bounds(p.a2)
    auto1, auto2 = auto_step_sizes(b1, b2)
    c1 = cfg.eta1 if cfg.eta1 is not None else auto1
    c2 = cfg.eta2 if cfg.eta2 is not None else auto2
    rho = cfg.rho1 if cfg.rho1 is not None else 10.0

    y = _as_columns(p.y)
    x1, x2 = _init_iterates(p, init)
    w = np.zeros_like(y)
    a1, a2 = p.a1, p.a2

    obj_trace, res_trace, gap_trace = [], [], []
    converged = False
    iterations = 0
    for _ in range(cfg.max_iters):
        u = a2.apply(x2) - y - w / rho
        g1 = a1.apply_adjoint(a1.apply(x1) + u)
        x1_new = prox_vector(x1 - g1 / c1, cfg.q1, c1 * rho / cfg.mu)
        g2 = a2.apply_adjoint(a1.apply(x1_new) + a2.apply(x2) - y - w / rho)
        x2_new = prox_vector(x2 - g2 / c2, cfg.q2, c2 * rho)
        w = w - rho * (a1.apply(x1_new) + a2.apply(x2_new) - y)

        gap = _iterate_gap(x1_new, x1, x2_new, x2)
        x1, x2 = x1_new, x2_new
        r = a1.apply(x1) + a2.apply(x2) - y
        fit = float(np.sum(r * r))
        obj_trace.append(
            fit / cfg.beta_target + cfg.mu * lq_penalty(x1, cfg.q1) + lq_penalty(x2, cfg.q2)
        )
        res_trace.append(np.sqrt(fit))
        gap_trace.append(gap)
        iterations += 1
        if gap <= cfg.tol:
            converged = True
            break

    return SolveResult(
        x1=_match_output(x1, p.y),
        x2=_match_output(x2, p.y),
        objective_trace=np.asarray(obj_trace),
        residual_trace=np.asarray(res_trace),
        iterate_gap_trace=np.asarray(gap_trace),
        iterations=iterations,
        converged=converged,
    )


SOLVERS = {
    "bcd": bcd_solve,
    "admm": admm_solve,
    "mt-bcd": multitask_bcd_solve,
    "mt-admm": multitask_admm_solve,
    "sadmm": sadmm_solve,
}
