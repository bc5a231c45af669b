"""Synthetic problem generators, noise models, metrics, and Monte-Carlo
harnesses for the separation, phase-transition, and robust-recovery studies.

Trials are fully reproducible: every trial derives its own seed from the
base seed with a fixed 64-bit mixing function, so enlarging a study leaves
earlier trials unchanged and trials may run in any order.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import linops
from .solvers import SOLVERS, DemixProblem, SolverConfig, sadmm_solve

__all__ = (
    "SyntheticSpec",
    "TrialOutcome",
    "PhaseReport",
    "GridReport",
    "derive_seed",
    "generate_sparse_signal",
    "sas_noise",
    "relerr",
    "make_operator",
    "build_instance",
    "warm_start_init",
    "solve_with_protocol",
    "run_trial",
    "run_phase_transition",
    "run_q_grid",
    "select_mu",
)

SUCCESS_RELERR = 1e-2

# floor applied to relative errors before taking 20*log10, keeping the
# decibel average finite on exact recoveries
RELERR_DB_FLOOR = 1e-12

OPERATOR_KINDS = ("dense", "identity", "dct", "idct", "gaussian-orthonormal")


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of one synthetic demixing family.

    ``noise`` is either ``None`` (x2 is a k-sparse Gaussian component) or
    a tuple ("sas", alpha, gamma): x2 is then dense symmetric alpha-stable
    noise and only x1 is judged for recovery.
    """

    m: int = 128
    n1: int = 128
    n2: int = 128
    sparsity_k: int = 10
    a1_kind: str = "dct"
    a2_kind: str = "gaussian-orthonormal"
    noise: tuple | None = None
    seed: int = 1234

    def __post_init__(self):
        if min(self.m, self.n1, self.n2) <= 0:
            raise ValueError("dimensions must be positive")
        if not 0 <= self.sparsity_k <= min(self.n1, self.n2):
            raise ValueError("sparsity_k must lie in [0, min(n1, n2)]")
        for kind in (self.a1_kind, self.a2_kind):
            if kind not in OPERATOR_KINDS:
                raise ValueError(f"unknown operator kind {kind!r}")
        if self.noise is not None:
            tag, alpha, gamma = self.noise
            if tag != "sas":
                raise ValueError(f"unknown noise model {tag!r}")
            if not 0.0 < alpha <= 2.0 or gamma <= 0.0:
                raise ValueError("SaS noise requires 0 < alpha <= 2 and gamma > 0")


@dataclass(frozen=True)
class TrialOutcome:
    relerr_x1: float
    success: bool
    iterations: int
    wall_time: float

    def __post_init__(self):
        if self.success != (self.relerr_x1 <= SUCCESS_RELERR):
            raise ValueError("success flag inconsistent with its relative error")


@dataclass
class PhaseReport:
    """Per-trial outcomes and success rates over a sparsity sweep."""

    k_values: list
    trials_per_k: int
    outcomes: dict = field(default_factory=dict)  # k -> list[TrialOutcome]

    @property
    def success_rates(self):
        return {k: float(np.mean([t.success for t in self.outcomes[k]])) for k in self.k_values}


@dataclass
class GridReport:
    """Mean recovery error in dB over a (q1, q2) grid."""

    q1_values: list
    q2_values: list
    metric: np.ndarray  # mean 20*log10(relerr), shape (len(q1), len(q2))
    trials_per_cell: int
    config: dict = field(default_factory=dict)

    def best_cell(self):
        i, j = np.unravel_index(int(np.argmin(self.metric)), self.metric.shape)
        return self.q1_values[i], self.q2_values[j]


def derive_seed(*parts):
    """Mix integers into one 64-bit seed (splitmix64 over each part)."""
    mask = (1 << 64) - 1
    state = 0x9E3779B97F4A7C15
    for part in parts:
        state = (state + (int(part) & mask) + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        state = z ^ (z >> 31)
    return state


def generate_sparse_signal(n, k, seed):
    """k-sparse vector: uniform random support, standard-normal amplitudes."""
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    support = rng.choice(n, size=k, replace=False)
    x[support] = rng.standard_normal(k)
    return x


def sas_noise(n, alpha, gamma, seed):
    """Symmetric alpha-stable samples with scale gamma.

    Uses the Chambers-Mallows-Stuck transform of a uniform angle and an
    exponential variate; alpha = 1 falls back to the Cauchy closed form
    gamma * tan(pi (u - 1/2)). alpha = 2 yields Gaussians with standard
    deviation gamma * sqrt(2).
    """
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    rng = np.random.default_rng(seed)
    u = rng.uniform(size=n)
    if alpha == 1.0:
        return gamma * np.tan(np.pi * (u - 0.5))
    theta = np.pi * (u - 0.5)
    w = rng.exponential(size=n)
    x = (np.sin(alpha * theta) / np.cos(theta) ** (1.0 / alpha)
         * (np.cos(theta - alpha * theta) / w) ** ((1.0 - alpha) / alpha))
    return gamma * x


def relerr(estimate, truth):
    """Relative l2 (Frobenius) error of an estimate against the truth."""
    truth = np.asarray(truth, dtype=float)
    scale = np.linalg.norm(truth)
    if scale == 0.0:
        raise ValueError("relative error undefined for an identically zero truth")
    return float(np.linalg.norm(np.asarray(estimate, dtype=float) - truth) / scale)


def _trial_relerr(estimate, truth):
    # zero-truth trials (k = 0) count as exact when the estimate is zero
    if np.linalg.norm(truth) == 0.0:
        return 0.0 if np.linalg.norm(estimate) == 0.0 else np.inf
    return relerr(estimate, truth)


def make_operator(kind, rows, cols, seed):
    """Instantiate an operator kind at the given shape."""
    if kind == "identity":
        if rows != cols:
            raise ValueError("identity operator must be square")
        return linops.identity(rows)
    if kind == "dct":
        if rows != cols:
            raise ValueError("dct operator must be square")
        return linops.dct(rows)
    if kind == "idct":
        if rows != cols:
            raise ValueError("idct operator must be square")
        return linops.idct(rows)
    if kind == "gaussian-orthonormal":
        return linops.gaussian_orthonormal(rows, cols, seed)
    if kind == "dense":
        rng = np.random.default_rng(seed)
        return linops.dense(rng.standard_normal((rows, cols)) / np.sqrt(rows))
    raise ValueError(f"unknown operator kind {kind!r}")


def build_instance(spec: SyntheticSpec, k, trial_seed):
    """One problem instance: operators, ground truth, and measurements."""
    op_seed1 = derive_seed(trial_seed, 1)
    op_seed2 = derive_seed(trial_seed, 2)
    a1 = make_operator(spec.a1_kind, spec.m, spec.n1, op_seed1)
    a2 = make_operator(spec.a2_kind, spec.m, spec.n2, op_seed2)
    x1 = generate_sparse_signal(spec.n1, k, derive_seed(trial_seed, 3))
    if spec.noise is None:
        x2 = generate_sparse_signal(spec.n2, k, derive_seed(trial_seed, 4))
    else:
        _, alpha, gamma = spec.noise
        x2 = sas_noise(spec.n2, alpha, gamma, derive_seed(trial_seed, 4))
    y = a1.apply(x1) + a2.apply(x2)
    return DemixProblem(a1, a2, y), x1, x2


def warm_start_init(p: DemixProblem, cfg: SolverConfig):
    """Convex warm start: S-ADMM at q1 = q2 = 1, mu = 1, capped iterations.

    Runs channel by channel for multichannel problems. The returned pair
    initializes the nonconvex solvers.
    """
    warm_cfg = SolverConfig(
        q1=1.0, q2=1.0, mu=1.0,
        beta_target=cfg.beta_target, beta_start=cfg.beta_start,
        beta_decay=cfg.beta_decay,
        max_iters=min(1000, cfg.max_iters), tol=cfg.tol,
    )
    y = p.y
    if y.ndim == 1:
        res = sadmm_solve(p, warm_cfg)
        return res.x1, res.x2
    x1 = np.zeros((p.a1.cols, y.shape[1]))
    x2 = np.zeros((p.a2.cols, y.shape[1]))
    for j in range(y.shape[1]):
        res = sadmm_solve(DemixProblem(p.a1, p.a2, y[:, j]), warm_cfg)
        x1[:, j], x2[:, j] = res.x1, res.x2
    return x1, x2


def solve_with_protocol(p: DemixProblem, solver_id, cfg: SolverConfig):
    """Solve with the standard protocol: warm-start nonconvex runs.

    The proposed solvers get the convex S-ADMM initialization whenever
    q1 < 1 or q2 < 1; the S-ADMM baseline itself always runs cold.
    """
    solver = SOLVERS[solver_id]
    init = None
    if solver_id != "sadmm" and (cfg.q1 < 1.0 or cfg.q2 < 1.0):
        init = warm_start_init(p, cfg)
    return solver(p, cfg, init)


def run_trial(spec: SyntheticSpec, solver_id, cfg: SolverConfig, k, trial_index):
    """One seeded trial; solver failures count as unsuccessful trials."""
    trial_seed = derive_seed(spec.seed, k, trial_index)
    start = time.perf_counter()
    try:
        p, x1_true, _ = build_instance(spec, k, trial_seed)
        res = solve_with_protocol(p, solver_id, cfg)
        err = _trial_relerr(res.x1, x1_true)
        iterations = res.iterations
    except Exception:
        err, iterations = np.inf, 0
    elapsed = time.perf_counter() - start
    return TrialOutcome(
        relerr_x1=float(err),
        success=bool(err <= SUCCESS_RELERR),
        iterations=iterations,
        wall_time=elapsed,
    )


def run_phase_transition(spec: SyntheticSpec, solver_id, cfg: SolverConfig,
                         k_values, trials):
    """Success rate of recovery per sparsity level k."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    report = PhaseReport(k_values=list(k_values), trials_per_k=trials)
    for k in k_values:
        report.outcomes[k] = [run_trial(spec, solver_id, cfg, k, i) for i in range(trials)]
    return report


def run_q_grid(spec: SyntheticSpec, solver_id, cfg: SolverConfig,
               q1_values, q2_values, trials):
    """Mean recovery error in dB over a (q1, q2) grid at fixed sparsity."""
    if not len(q1_values) or not len(q2_values):
        raise ValueError("q grids must be nonempty")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    metric = np.zeros((len(q1_values), len(q2_values)))
    for i, q1 in enumerate(q1_values):
        for j, q2 in enumerate(q2_values):
            cell_cfg = SolverConfig(
                q1=float(q1), q2=float(q2), mu=cfg.mu,
                beta_target=cfg.beta_target, beta_start=cfg.beta_start,
                beta_decay=cfg.beta_decay, max_iters=cfg.max_iters, tol=cfg.tol,
                eta1=cfg.eta1, eta2=cfg.eta2, rho1=cfg.rho1, rho2=cfg.rho2,
            )
            outcomes = [run_trial(spec, solver_id, cell_cfg, spec.sparsity_k, t)
                        for t in range(trials)]
            errs = np.clip([t.relerr_x1 for t in outcomes], RELERR_DB_FLOOR, 1e12)
            metric[i, j] = float(np.mean(20.0 * np.log10(errs)))
    return GridReport(
        q1_values=list(q1_values),
        q2_values=list(q2_values),
        metric=metric,
        trials_per_cell=trials,
        config={"solver": solver_id, "spec": spec, "cfg": cfg},
    )


def select_mu(candidates, evaluation):
    """Candidate with the lowest error; ties resolve to the largest mu."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate list must be nonempty")
    evaluation = list(evaluation)
    if len(evaluation) != len(candidates):
        raise ValueError("one evaluation per candidate required")
    best = min(zip(evaluation, candidates), key=lambda pair: (pair[0], -pair[1]))
    return best[1]
