"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see the
per-criterion lines as they complete). The empirical criteria use frozen
seeds, so results are reproducible run to run.
"""

import itertools
import time

import numpy as np

from lqdemix import linops
from lqdemix.cli import main
from lqdemix.experiments import (
    SyntheticSpec,
    build_instance,
    derive_seed,
    relerr,
    run_phase_transition,
    run_q_grid,
    solve_with_protocol,
)
from lqdemix.imaging import InpaintTask, inpaint, psnr, salt_pepper_corrupt, synthetic_sparse_image
from lqdemix.prox import lq_penalty, prox_group, prox_scalar, prox_vector
from lqdemix.solvers import (
    DemixProblem,
    SolverConfig,
    admm_penalties_convergent,
    admm_solve,
    bcd_solve,
    multitask_admm_solve,
    multitask_bcd_solve,
    sadmm_solve,
)

Q_SET = (0.0, 0.2, 0.5, 2.0 / 3.0, 0.9, 1.0)


def _report(num, name, ok, detail=""):
    print(f"[criterion {num:02d}] {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def test_criterion_01_prox_scalar_grid_oracle():
    start = time.time()
    rng = np.random.default_rng(101)
    grid_u = np.linspace(-1.0, 1.0, 1_000_001)
    pow_cache = {q: (grid_u != 0.0).astype(float) if q == 0.0 else np.abs(grid_u) ** q
                 for q in Q_SET}
    worst = -np.inf
    for _ in range(1000):
        t = float(rng.uniform(-10.0, 10.0))
        q = float(rng.choice(Q_SET))
        eta = float(rng.uniform(0.1, 100.0))
        x = prox_scalar(t, q, eta)
        fx = (float(x != 0.0) if q == 0.0 else abs(x) ** q) + 0.5 * eta * (x - t) ** 2
        # dumb scan of the objective over [-|t|, |t|]
        grid_obj = (abs(t) ** q) * pow_cache[q] + 0.5 * eta * (abs(t) * grid_u - t) ** 2
        worst = max(worst, fx - float(grid_obj.min()))
        if fx > grid_obj.min() + 1e-8:
            break
    oracle_ok = worst <= 1e-8

    closed_ok = True
    for _ in range(2000):
        t = float(rng.uniform(-10.0, 10.0))
        eta = float(rng.uniform(0.1, 100.0))
        hard = 0.0 if abs(t) <= np.sqrt(2.0 / eta) else t
        soft = np.sign(t) * max(abs(t) - 1.0 / eta, 0.0)
        closed_ok &= prox_scalar(t, 0.0, eta) == hard
        closed_ok &= prox_scalar(t, 1.0, eta) == soft
    elapsed = time.time() - start
    _report(1, "prox scalar oracle", oracle_ok and closed_ok and elapsed < 30.0,
            f"(worst gap {worst:.2e}, closed forms exact={closed_ok}, {elapsed:.1f}s)")


def test_criterion_02_prox_group_alpha_oracle():
    start = time.time()
    rng = np.random.default_rng(202)
    alpha = np.linspace(0.0, 1.0, 1_000_001)
    quad = (alpha - 1.0) ** 2
    pow_cache = {q: (alpha != 0.0).astype(float) if q == 0.0 else alpha**q for q in Q_SET}
    worst_obj, worst_par = -np.inf, 0.0
    for _ in range(500):
        ell = int(rng.integers(1, 9))
        t = rng.normal(0.0, 3.0, size=ell)
        q = float(rng.choice(Q_SET))
        eta = float(rng.uniform(0.1, 30.0))
        x = prox_group(t, q, eta)
        r = np.linalg.norm(t)
        nx = np.linalg.norm(x)
        fx = (float(nx != 0.0) if q == 0.0 else nx**q) + 0.5 * eta * np.linalg.norm(x - t) ** 2
        grid_obj = (r**q) * pow_cache[q] + 0.5 * eta * r**2 * quad
        worst_obj = max(worst_obj, fx - float(grid_obj.min()))
        if r > 0:
            proj = (x @ t) / (t @ t) * t
            worst_par = max(worst_par, float(np.linalg.norm(x - proj)))
    elapsed = time.time() - start
    ok = worst_obj <= 1e-8 and worst_par <= 1e-12 and elapsed < 30.0
    _report(2, "group prox oracle", ok,
            f"(worst gap {worst_obj:.2e}, worst off-axis {worst_par:.2e}, {elapsed:.1f}s)")


def test_criterion_03_admm_condition_threshold():
    one = linops.OperatorBounds(1.0, 1.0)
    at4 = admm_penalties_convergent(4.0, 4.0, one, one)
    at5 = admm_penalties_convergent(5.0, 5.0, one, one)
    lo, hi = 4.0, 5.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if admm_penalties_convergent(mid, mid, one, one):
            hi = mid
        else:
            lo = mid
    flip = 0.5 * (lo + hi)
    rho_star = np.sqrt(33.0) - 1.0
    ok = (not at4) and at5 and abs(flip - rho_star) <= 1e-3
    _report(3, "penalty condition threshold", ok,
            f"(flip at {flip:.6f}, expected {rho_star:.6f})")


def test_criterion_04_bcd_descent_fixed_beta():
    start = time.time()
    rng = np.random.default_rng(404)
    worst = -np.inf
    for trial in range(50):
        m = int(rng.integers(8, 65))
        n = int(rng.integers(m // 2 + 1, m + 1))
        a1 = linops.dense(rng.normal(size=(m, n)) / np.sqrt(m))
        a2 = linops.dense(rng.normal(size=(m, n)) / np.sqrt(m))
        y = rng.normal(size=m)
        q = (0.0, 0.5, 1.0)[trial % 3]
        cfg = SolverConfig(q1=q, q2=q, mu=float(rng.uniform(0.5, 2.0)),
                           beta_start=0.01, beta_target=0.01,
                           max_iters=200, tol=1e-14)
        res = bcd_solve(DemixProblem(a1, a2, y), cfg)
        diffs = np.diff(res.objective_trace)
        worst = max(worst, float(diffs.max(initial=-np.inf)))
    elapsed = time.time() - start
    ok = worst <= 1e-10 and elapsed < 120.0
    _report(4, "descent at fixed beta", ok, f"(worst increase {worst:.2e}, {elapsed:.1f}s)")


def _enumeration_oracle(a1, a2, y, q1, q2, mu, max_nnz=2):
    m1 = a1.apply(np.eye(a1.cols))
    m2 = a2.apply(np.eye(a2.cols))
    best_obj, best = np.inf, None
    subs1 = [s for k in range(max_nnz + 1) for s in itertools.combinations(range(m1.shape[1]), k)]
    subs2 = [s for k in range(max_nnz + 1) for s in itertools.combinations(range(m2.shape[1]), k)]
    for s1 in subs1:
        for s2 in subs2:
            cols = np.hstack([m1[:, s1], m2[:, s2]]) if s1 or s2 else np.zeros((len(y), 0))
            if cols.shape[1] == 0:
                resid, coef = np.linalg.norm(y), np.zeros(0)
            else:
                coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
                resid = np.linalg.norm(cols @ coef - y)
            if resid > 1e-9 * max(np.linalg.norm(y), 1.0):
                continue
            x1 = np.zeros(m1.shape[1])
            x1[list(s1)] = coef[: len(s1)]
            x2 = np.zeros(m2.shape[1])
            x2[list(s2)] = coef[len(s1):]
            obj = mu * lq_penalty(x1, q1) + lq_penalty(x2, q2)
            if obj < best_obj:
                best_obj, best = obj, (x1, x2)
    return best


def test_criterion_05_global_optimum_desk_scale():
    start = time.time()
    hits_bcd = hits_admm = 0
    for i in range(20):
        rng = np.random.default_rng(505 + 7 * i)
        a1, a2 = linops.dct(8), linops.identity(8)
        x1 = np.zeros(8)
        x1[rng.integers(8)] = rng.standard_normal()
        x2 = np.zeros(8)
        x2[rng.integers(8)] = rng.standard_normal()
        p = DemixProblem(a1, a2, a1.apply(x1) + x2)
        x1_ref, _ = _enumeration_oracle(a1, a2, p.y, 0.5, 0.5, 1.0)
        cfg = SolverConfig(q1=0.5, q2=0.5, mu=1.0, tol=1e-8, max_iters=3000)
        rb = solve_with_protocol(p, "bcd", cfg)
        ra = solve_with_protocol(p, "admm", cfg)
        hits_bcd += relerr(rb.x1, x1_ref) <= 1e-3
        hits_admm += relerr(ra.x1, x1_ref) <= 1e-3
    elapsed = time.time() - start
    ok = hits_bcd >= 18 and hits_admm >= 18 and elapsed < 120.0
    _report(5, "enumeration-optimum recovery", ok,
            f"(bcd {hits_bcd}/20, admm {hits_admm}/20, {elapsed:.1f}s)")


def test_criterion_06_sadmm_nonconvergence():
    start = time.time()
    spec = SyntheticSpec(m=128, n1=128, n2=128, sparsity_k=20, seed=606)
    contrasts = 0
    for i in range(10):
        p, _, _ = build_instance(spec, 20, derive_seed(606, 20, i))
        cfg = SolverConfig(q1=0.5, q2=0.5, mu=1.0, max_iters=2000, tol=1e-8)
        rs = sadmm_solve(p, cfg)
        ra = admm_solve(p, cfg)
        contrasts += (not rs.converged) and ra.converged
    elapsed = time.time() - start
    ok = contrasts >= 8 and elapsed < 300.0
    _report(6, "direct-ADMM baseline stalls, proposed converges", ok,
            f"({contrasts}/10 instances, {elapsed:.1f}s)")


def test_criterion_07_phase_transition_ordering():
    start = time.time()
    trials = 50
    gap_spec = SyntheticSpec(m=128, n1=128, n2=128, a1_kind="dct",
                             a2_kind="gaussian-orthonormal", seed=2024)
    rates = {}
    for q in (0.5, 1.0):
        cfg = SolverConfig(q1=q, q2=q, mu=1.0, tol=1e-5, max_iters=2000)
        rates[q] = run_phase_transition(gap_spec, "admm", cfg, [20, 25], trials).success_rates
    gaps = {k: rates[0.5][k] - rates[1.0][k] for k in (20, 25)}
    gap_ok = max(gaps.values()) >= 0.2

    easy_spec = SyntheticSpec(m=128, n1=128, n2=128, a1_kind="dct",
                              a2_kind="gaussian-orthonormal", seed=707)
    floors = {}
    for solver, q in [("bcd", 0.5), ("admm", 0.5), ("bcd", 1.0), ("admm", 1.0), ("sadmm", 1.0)]:
        cfg = SolverConfig(q1=q, q2=q, mu=1.0, tol=1e-5, max_iters=2000)
        floors[(solver, q)] = run_phase_transition(easy_spec, solver, cfg, [5], trials).success_rates[5]
    floor_ok = all(rate >= 0.95 for rate in floors.values())
    elapsed = time.time() - start
    ok = gap_ok and floor_ok and elapsed < 1200.0
    _report(7, "phase-transition ordering", ok,
            f"(gaps {gaps}, K=5 floors {floors}, {elapsed:.0f}s)")


def test_criterion_08_multitask_reduction():
    start = time.time()
    worst = 0.0
    for i in range(10):
        rng = np.random.default_rng(808 + i)
        m = 12
        a1 = linops.dct(m)
        a2 = linops.gaussian_orthonormal(m, m, seed=808 + i)
        y = rng.normal(size=m)
        cfg = SolverConfig(q1=float(rng.choice(Q_SET)), q2=float(rng.choice(Q_SET)),
                           max_iters=250, tol=1e-10)
        for single, multi in ((bcd_solve, multitask_bcd_solve),
                              (admm_solve, multitask_admm_solve)):
            r1 = single(DemixProblem(a1, a2, y), cfg)
            r2 = multi(DemixProblem(a1, a2, y[:, None]), cfg)
            assert r1.iterations == r2.iterations
            worst = max(
                worst,
                float(np.abs(r1.x1 - r2.x1[:, 0]).max()),
                float(np.abs(r1.x2 - r2.x2[:, 0]).max()),
                float(np.abs(np.asarray(r1.objective_trace)
                             - np.asarray(r2.objective_trace)).max()),
            )
    elapsed = time.time() - start
    ok = worst <= 1e-12 and elapsed < 60.0
    _report(8, "single-channel reduction", ok, f"(worst deviation {worst:.2e}, {elapsed:.1f}s)")


def test_criterion_09_inpainting_orderings():
    start = time.time()
    cfg = SolverConfig(tol=1e-6, max_iters=1500)
    psnr_wins = joint_wins = 0
    for seed in range(20):
        img, coefs = synthetic_sparse_image(16, 16, 3, k=5, seed=1000 + seed)
        corrupted, _ = salt_pepper_corrupt(img, 0.3, seed=2000 + seed)
        r_nc, c_nc, _ = inpaint(InpaintTask(corrupted, q1=0.7, q2=0.4, mu=1.0, joint=True),
                                cfg, "mt-admm")
        r_cv, _, _ = inpaint(InpaintTask(corrupted, q1=1.0, q2=1.0, mu=1.0, joint=True),
                             cfg, "mt-admm")
        psnr_wins += psnr(r_nc, img) > psnr(r_cv, img)
        _, c_pc, _ = inpaint(InpaintTask(corrupted, q1=0.7, q2=0.4, mu=1.0, joint=False),
                             cfg, "admm")
        joint_wins += relerr(c_nc, coefs) <= relerr(c_pc, coefs)
    elapsed = time.time() - start
    ok = psnr_wins >= 16 and joint_wins >= 14 and elapsed < 600.0
    _report(9, "inpainting orderings", ok,
            f"(nonconvex>convex {psnr_wins}/20, joint<=per-channel {joint_wins}/20, {elapsed:.0f}s)")


def test_criterion_10_robust_recovery_region():
    start = time.time()
    spec = SyntheticSpec(m=100, n1=256, n2=100, sparsity_k=20,
                         a1_kind="gaussian-orthonormal", a2_kind="identity",
                         noise=("sas", 1.0, 1e-3), seed=555)
    qs = [0.2, 0.5, 0.8]
    # the protocol tunes mu per setting by lowest error; take the best
    # metric per cell over a small mu grid
    best = np.full((3, 3), np.inf)
    for mu in (0.03, 0.1, 0.3, 1.0, 3.0):
        cfg = SolverConfig(mu=mu, tol=1e-5, max_iters=2000)
        report = run_q_grid(spec, "admm", cfg, qs, qs, trials=20)
        best = np.minimum(best, report.metric)
    i, j = np.unravel_index(int(np.argmin(best)), best.shape)
    q1_best, q2_best = qs[i], qs[j]
    elapsed = time.time() - start
    ok = q1_best <= 0.5 and q2_best >= 0.5 and elapsed < 900.0
    _report(10, "robust-recovery preferred region", ok,
            f"(best cell q1={q1_best}, q2={q2_best}, {elapsed:.0f}s)")


def test_criterion_11_cli_reproducibility(tmp_path):
    start = time.time()
    identical = True
    for command, extra in (
        ("separate", []),
        ("phase", ["--k-values", "1,2"]),
        ("grid", ["--q1-grid", "0.5,1", "--q2-grid", "0.5", "--trials", "1"]),
    ):
        outputs = []
        for run_dir in ("a", "b"):
            out = tmp_path / command / run_dir
            args = [command, "--m", "16", "--n1", "16", "--n2", "16", "--k", "2",
                    "--trials", "2", "--max-iters", "500", "--tol", "1e-5",
                    "--seed", "11", "--out", str(out)] + extra
            assert main(args) == 0
            csvs = sorted(out.glob("*.csv"))
            assert csvs, f"no CSV written for {command}"
            outputs.append(b"".join(p.read_bytes() for p in csvs))
        identical &= outputs[0] == outputs[1]
    elapsed = time.time() - start
    _report(11, "byte-identical CSV reruns", identical, f"({elapsed:.1f}s)")
