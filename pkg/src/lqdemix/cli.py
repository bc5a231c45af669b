"""Command-line front end for reproducible demixing experiments.

Commands
--------
separate   solve one synthetic separation instance and print its RelErr
phase      success rate versus sparsity K (Monte-Carlo sweep)
grid       mean recovery error over a (q1, q2) grid
robust-cs  the grid protocol on the impulsive-noise compressive-sensing
           setup (wide random dictionary, identity second dictionary,
           heavy-tailed dense x2)
inpaint    corrupt an 8-bit raster image and restore it

Every run writes, into the output directory: a flat key = value config
snapshot, result CSVs, a structured-text (JSON) summary, and matplotlib
figures rendered from the same data. CSV and JSON bodies are byte-stable
for identical effective configurations. Flags override config-file values,
which override defaults.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 solver error.
"""

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import reports
from .experiments import (
    GridReport,
    SyntheticSpec,
    build_instance,
    derive_seed,
    relerr,
    run_phase_transition,
    run_q_grid,
    run_trial,
    select_mu,
    solve_with_protocol,
)
from .imaging import InpaintTask, inpaint, psnr, read_image, salt_pepper_corrupt, write_image
from .solvers import SOLVERS, SolverConfig

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_SOLVER = 4

COMMANDS = ("separate", "phase", "grid", "robust-cs", "inpaint")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    """Effective configuration of one CLI run; every field has a default.

    The all-defaults configuration runs the synthetic separation instance
    at desk scale.
    """

    command: str = "separate"
    solver: str = "admm"
    q1: float = 0.5
    q2: float = 0.5
    mu: float = 1.0
    mu_grid: str = ""
    beta_target: float = 1e-6
    beta_start: float = 1.0
    beta_decay: float = 0.97
    max_iters: int = 2000
    tol: float = 1e-6
    m: int = 128
    n1: int = 128
    n2: int = 128
    k: int = 10
    a1_kind: str = "dct"
    a2_kind: str = "gaussian-orthonormal"
    noise: str = "none"
    k_values: str = "5,10,15,20,25,30,35,40"
    q1_grid: str = "0.2,0.5,0.8"
    q2_grid: str = "0.2,0.5,0.8"
    fraction: float = 0.3
    joint: bool = True
    image: str = ""
    trials: int = 50
    seed: int = 1234
    out: str = "lqdemix_runs"


# defaults layered on top of RunConfig for the impulsive-noise setup
ROBUST_CS_DEFAULTS = {
    "m": 100,
    "n1": 256,
    "n2": 100,
    "k": 20,
    "a1_kind": "gaussian-orthonormal",
    "a2_kind": "identity",
    "noise": "sas:1.0,1e-3",
}

_BOOL_STRINGS = {"true": True, "1": True, "yes": True,
                 "false": False, "0": False, "no": False}


def _coerce(name, kind, raw):
    raw = raw.strip() if isinstance(raw, str) else raw
    try:
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            return _BOOL_STRINGS[str(raw).lower()]
        return kind(raw)
    except (ValueError, KeyError):
        raise CliError(EXIT_VALIDATION, f"invalid value {raw!r} for {name}")


def _field_types():
    return {f.name: type(f.default) for f in fields(RunConfig)}


def parse_config_file(path):
    """Flat key = value file, # comments; returns a dict of raw strings."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read config file {path}: {exc}")
    types = _field_types()
    values = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise CliError(EXIT_VALIDATION,
                           f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip().replace("-", "_")
        if key not in types:
            raise CliError(EXIT_VALIDATION, f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, types[key], raw)
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lqdemix",
        description="Sparse demixing experiments with lq quasi-norm penalties.",
    )
    parser.add_argument("command", nargs="?", choices=COMMANDS, default=None,
                        help="experiment to run (default: separate)")
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="flat key = value config file (# comments)")
    parser.add_argument("--solver", choices=sorted(SOLVERS), default=None)
    parser.add_argument("--q1", type=float, default=None,
                        help="penalty exponent on the first component, in [0, 1]")
    parser.add_argument("--q2", type=float, default=None,
                        help="penalty exponent on the second component, in [0, 1]")
    parser.add_argument("--mu", type=float, default=None,
                        help="weight of the first component's penalty")
    parser.add_argument("--mu-grid", dest="mu_grid", default=None,
                        help="comma-separated mu candidates; best (lowest RelErr) is used")
    parser.add_argument("--beta-target", dest="beta_target", type=float, default=None)
    parser.add_argument("--beta-start", dest="beta_start", type=float, default=None)
    parser.add_argument("--beta-decay", dest="beta_decay", type=float, default=None)
    parser.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--m", type=int, default=None, help="measurement dimension")
    parser.add_argument("--n1", type=int, default=None)
    parser.add_argument("--n2", type=int, default=None)
    parser.add_argument("--k", type=int, default=None, help="sparsity of each component")
    parser.add_argument("--a1-kind", dest="a1_kind", default=None,
                        choices=("dense", "identity", "dct", "idct", "gaussian-orthonormal"))
    parser.add_argument("--a2-kind", dest="a2_kind", default=None,
                        choices=("dense", "identity", "dct", "idct", "gaussian-orthonormal"))
    parser.add_argument("--noise", default=None,
                        help="'none' or 'sas:ALPHA,GAMMA' for heavy-tailed x2")
    parser.add_argument("--k-values", dest="k_values", default=None,
                        help="comma-separated sparsity sweep for the phase command")
    parser.add_argument("--q1-grid", dest="q1_grid", default=None)
    parser.add_argument("--q2-grid", dest="q2_grid", default=None)
    parser.add_argument("--fraction", type=float, default=None,
                        help="corrupted pixel fraction for inpaint")
    parser.add_argument("--joint", dest="joint", action="store_true", default=None,
                        help="inpaint all channels jointly (default)")
    parser.add_argument("--per-channel", dest="joint", action="store_false",
                        help="inpaint channels independently")
    parser.add_argument("--image", default=None, metavar="FILE",
                        help="input raster (binary P5/P6) for inpaint")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory")
    return parser


def parse_config(argv):
    """Merge defaults, config file, and flags into a validated RunConfig."""
    args = build_parser().parse_args(argv)
    values = {}
    command = args.command
    if args.config:
        file_values = parse_config_file(args.config)
        command = command or file_values.pop("command", None)
        values.update(file_values)
    command = command or "separate"
    if command == "robust-cs":
        for key, val in ROBUST_CS_DEFAULTS.items():
            values.setdefault(key, val)
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    cfg = RunConfig(command=command, **{k: v for k, v in values.items() if k != "command"})
    validate_config(cfg)
    return cfg


def _parse_floats(text, name):
    try:
        items = [float(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError:
        raise CliError(EXIT_VALIDATION, f"{name} must be a comma-separated float list, got {text!r}")
    if not items:
        raise CliError(EXIT_VALIDATION, f"{name} must be nonempty")
    return items


def _parse_ints(text, name):
    return [int(v) for v in _parse_floats(text, name)]


def parse_noise(text):
    text = str(text).strip().lower()
    if text in ("", "none"):
        return None
    if text.startswith("sas:"):
        parts = text[4:].split(",")
        if len(parts) == 2:
            alpha, gamma = float(parts[0]), float(parts[1])
            return ("sas", alpha, gamma)
    raise CliError(EXIT_VALIDATION, f"noise must be 'none' or 'sas:ALPHA,GAMMA', got {text!r}")


def validate_config(cfg: RunConfig):
    if cfg.command not in COMMANDS:
        raise CliError(EXIT_VALIDATION, f"unknown command {cfg.command!r}")
    if cfg.solver not in SOLVERS:
        raise CliError(EXIT_VALIDATION, f"unknown solver {cfg.solver!r}")
    for name in ("q1", "q2"):
        v = getattr(cfg, name)
        if not 0.0 <= v <= 1.0:
            raise CliError(EXIT_VALIDATION, f"{name} must lie in [0, 1], got {v}")
    if cfg.mu <= 0:
        raise CliError(EXIT_VALIDATION, f"mu must be positive, got {cfg.mu}")
    if cfg.beta_target <= 0 or cfg.beta_start < cfg.beta_target:
        raise CliError(EXIT_VALIDATION,
                       "beta-target must be positive and not exceed beta-start")
    if not 0.0 < cfg.beta_decay < 1.0:
        raise CliError(EXIT_VALIDATION, f"beta-decay must lie in (0, 1), got {cfg.beta_decay}")
    if cfg.max_iters < 1:
        raise CliError(EXIT_VALIDATION, f"max-iters must be positive, got {cfg.max_iters}")
    if cfg.tol <= 0:
        raise CliError(EXIT_VALIDATION, f"tol must be positive, got {cfg.tol}")
    if cfg.trials < 1:
        raise CliError(EXIT_VALIDATION, f"trials must be at least 1, got {cfg.trials}")
    if not 0.0 <= cfg.fraction <= 1.0:
        raise CliError(EXIT_VALIDATION, f"fraction must lie in [0, 1], got {cfg.fraction}")
    if min(cfg.m, cfg.n1, cfg.n2) < 1:
        raise CliError(EXIT_VALIDATION, "dimensions m, n1, n2 must be positive")
    if not 0 <= cfg.k <= min(cfg.n1, cfg.n2):
        raise CliError(EXIT_VALIDATION,
                       f"k must lie in [0, min(n1, n2)] = [0, {min(cfg.n1, cfg.n2)}], got {cfg.k}")
    parse_noise(cfg.noise)
    if cfg.mu_grid:
        for v in _parse_floats(cfg.mu_grid, "mu-grid"):
            if v <= 0:
                raise CliError(EXIT_VALIDATION, f"mu-grid entries must be positive, got {v}")
    if cfg.command == "inpaint" and not cfg.image:
        raise CliError(EXIT_IO, "inpaint requires --image pointing to a P5/P6 raster file")


def _solver_config(cfg: RunConfig, q1=None, q2=None, mu=None):
    return SolverConfig(
        q1=cfg.q1 if q1 is None else q1,
        q2=cfg.q2 if q2 is None else q2,
        mu=cfg.mu if mu is None else mu,
        beta_target=cfg.beta_target,
        beta_start=cfg.beta_start,
        beta_decay=cfg.beta_decay,
        max_iters=cfg.max_iters,
        tol=cfg.tol,
    )


def _synthetic_spec(cfg: RunConfig):
    return SyntheticSpec(
        m=cfg.m, n1=cfg.n1, n2=cfg.n2, sparsity_k=cfg.k,
        a1_kind=cfg.a1_kind, a2_kind=cfg.a2_kind,
        noise=parse_noise(cfg.noise), seed=cfg.seed,
    )


def _select_mu_for_run(cfg: RunConfig):
    """Pick mu from the grid by mean RelErr on the run's reference setting."""
    if not cfg.mu_grid:
        return cfg.mu
    candidates = _parse_floats(cfg.mu_grid, "mu-grid")
    spec = _synthetic_spec(cfg)
    errors = []
    probe_trials = min(cfg.trials, 10)
    for mu in candidates:
        outcomes = [run_trial(spec, cfg.solver, _solver_config(cfg, mu=mu), cfg.k, t)
                    for t in range(probe_trials)]
        errors.append(float(np.mean(np.clip([t.relerr_x1 for t in outcomes], 0, 1e12))))
    return select_mu(candidates, errors)


def _config_dict(cfg: RunConfig, extra=None):
    doc = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
    if extra:
        doc.update(extra)
    return doc


def _base_name(cfg: RunConfig):
    return f"{cfg.command}_{cfg.solver}_{cfg.seed}"


def run_separate(cfg: RunConfig, outdir):
    mu = _select_mu_for_run(cfg)
    spec = _synthetic_spec(cfg)
    trial_seed = derive_seed(spec.seed, cfg.k, 0)
    problem, x1_true, _ = build_instance(spec, cfg.k, trial_seed)
    result = solve_with_protocol(problem, cfg.solver, _solver_config(cfg, mu=mu))
    err = relerr(result.x1, x1_true) if np.linalg.norm(x1_true) > 0 else 0.0

    base = _base_name(cfg)
    reports.write_config_snapshot(outdir / f"{base}_config.txt",
                                  _config_dict(cfg, {"effective_mu": mu}))
    reports.write_csv(
        outdir / f"{base}.csv",
        ["k", "relerr_x1", "success", "iterations", "converged"],
        [[cfg.k, err, err <= 1e-2, result.iterations, result.converged]],
    )
    reports.write_json(outdir / f"{base}_summary.json", {
        "command": cfg.command, "solver": cfg.solver, "seed": cfg.seed,
        "effective_mu": mu, "relerr_x1": err,
        "iterations": result.iterations, "converged": result.converged,
        "objective_trace": np.asarray(result.objective_trace).tolist(),
        "residual_trace": np.asarray(result.residual_trace).tolist(),
    })
    reports.save_trace_figure(result, outdir / f"{base}.png",
                              title=f"{cfg.solver} on one separation instance")
    print(f"RelErr = {err:.6e} (solver {cfg.solver}, k={cfg.k}, "
          f"converged={result.converged}, iterations={result.iterations})")
    return EXIT_OK


def run_phase(cfg: RunConfig, outdir):
    mu = _select_mu_for_run(cfg)
    spec = _synthetic_spec(cfg)
    k_values = _parse_ints(cfg.k_values, "k-values")
    report = run_phase_transition(spec, cfg.solver, _solver_config(cfg, mu=mu),
                                  k_values, cfg.trials)
    base = _base_name(cfg)
    rows = []
    for k in k_values:
        for i, outcome in enumerate(report.outcomes[k]):
            rows.append([k, i, outcome.relerr_x1, outcome.success, outcome.iterations])
    reports.write_config_snapshot(outdir / f"{base}_config.txt",
                                  _config_dict(cfg, {"effective_mu": mu}))
    reports.write_csv(outdir / f"{base}.csv",
                      ["k", "trial", "relerr_x1", "success", "iterations"], rows)
    reports.write_json(outdir / f"{base}_summary.json", {
        "command": cfg.command, "solver": cfg.solver, "seed": cfg.seed,
        "effective_mu": mu, "trials_per_k": cfg.trials,
        "success_rates": {str(k): report.success_rates[k] for k in k_values},
    })
    reports.save_phase_figure(report, outdir / f"{base}.png",
                              title=f"{cfg.solver}, q1={cfg.q1}, q2={cfg.q2}")
    for k in k_values:
        print(f"K={k:4d}  success rate = {report.success_rates[k]:.3f}")
    return EXIT_OK


def _run_grid_like(cfg: RunConfig, outdir):
    mu = _select_mu_for_run(cfg)
    spec = _synthetic_spec(cfg)
    q1_values = _parse_floats(cfg.q1_grid, "q1-grid")
    q2_values = _parse_floats(cfg.q2_grid, "q2-grid")
    for v in q1_values + q2_values:
        if not 0.0 <= v <= 1.0:
            raise CliError(EXIT_VALIDATION, f"grid q values must lie in [0, 1], got {v}")
    report = run_q_grid(spec, cfg.solver, _solver_config(cfg, mu=mu),
                        q1_values, q2_values, cfg.trials)
    base = _base_name(cfg)
    rows = [[q1, q2, report.metric[i, j], cfg.trials]
            for i, q1 in enumerate(q1_values) for j, q2 in enumerate(q2_values)]
    reports.write_config_snapshot(outdir / f"{base}_config.txt",
                                  _config_dict(cfg, {"effective_mu": mu}))
    reports.write_csv(outdir / f"{base}.csv",
                      ["q1", "q2", "mean_relerr_db", "trials"], rows)
    best_q1, best_q2 = report.best_cell()
    reports.write_json(outdir / f"{base}_summary.json", {
        "command": cfg.command, "solver": cfg.solver, "seed": cfg.seed,
        "effective_mu": mu, "trials_per_cell": cfg.trials,
        "q1_values": q1_values, "q2_values": q2_values,
        "metric_db": report.metric.tolist(),
        "best_cell": {"q1": best_q1, "q2": best_q2},
    })
    reports.save_grid_figure(report, outdir / f"{base}.png",
                             title=f"{cfg.solver} mean RelErr (dB), k={cfg.k}")
    print(f"best cell: q1={best_q1}, q2={best_q2} "
          f"({report.metric.min():.2f} dB over {cfg.trials} trials/cell)")
    return EXIT_OK


def run_inpaint(cfg: RunConfig, outdir):
    try:
        original = read_image(cfg.image)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read image {cfg.image}: {exc}")
    except ValueError as exc:
        raise CliError(EXIT_IO, f"bad image {cfg.image}: {exc}")
    corrupted, _ = salt_pepper_corrupt(original, cfg.fraction, cfg.seed)
    solver = cfg.solver
    if cfg.joint and not solver.startswith("mt-"):
        solver = "mt-" + solver if solver in ("bcd", "admm") else solver
    if cfg.joint and not solver.startswith("mt-"):
        raise CliError(EXIT_VALIDATION,
                       f"joint inpainting needs a bcd/admm solver, got {cfg.solver!r}")
    if not cfg.joint and solver.startswith("mt-"):
        solver = solver[3:]
    task = InpaintTask(corrupted=corrupted, q1=cfg.q1, q2=cfg.q2, mu=cfg.mu,
                       joint=cfg.joint)
    solver_cfg = _solver_config(cfg)
    restored, coefs, result = inpaint(task, solver_cfg, solver=solver)

    # reference DCT coefficients of the clean image (the dictionary is
    # orthonormal, so the adjoint inverts it)
    from . import linops

    a1 = linops.idct2d(original.height, original.width)
    true_coefs = a1.apply_adjoint(original.pixels)
    coef_err = relerr(coefs, true_coefs)
    psnr_restored = psnr(restored, original)
    psnr_corrupted = psnr(corrupted, original)

    base = _base_name(cfg)
    ext = "pgm" if original.channels == 1 else "ppm"
    write_image(corrupted, outdir / f"{base}_corrupted.{ext}")
    write_image(restored, outdir / f"{base}_restored.{ext}")
    reports.write_config_snapshot(outdir / f"{base}_config.txt", _config_dict(cfg))
    reports.write_csv(
        outdir / f"{base}.csv",
        ["fraction", "joint", "psnr_corrupted_db", "psnr_restored_db",
         "coef_relerr", "iterations", "converged"],
        [[cfg.fraction, cfg.joint, psnr_corrupted, psnr_restored,
          coef_err, result.iterations, result.converged]],
    )
    reports.write_json(outdir / f"{base}_summary.json", {
        "command": cfg.command, "solver": solver, "seed": cfg.seed,
        "image": str(cfg.image), "fraction": cfg.fraction, "joint": cfg.joint,
        "q1": cfg.q1, "q2": cfg.q2, "mu": cfg.mu,
        "psnr_corrupted_db": psnr_corrupted, "psnr_restored_db": psnr_restored,
        "coef_relerr": coef_err,
        "iterations": result.iterations, "converged": result.converged,
    })
    reports.save_inpaint_figure(original, corrupted, restored, outdir / f"{base}.png")
    print(f"PSNR: corrupted {psnr_corrupted:.2f} dB -> restored {psnr_restored:.2f} dB "
          f"(coef RelErr {coef_err:.4f})")
    return EXIT_OK


def run(cfg: RunConfig):
    """Execute a validated RunConfig; returns the process exit code."""
    outdir = Path(cfg.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        probe = outdir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(EXIT_IO, f"output directory {cfg.out} is not writable: {exc}")

    runner = {
        "separate": run_separate,
        "phase": run_phase,
        "grid": _run_grid_like,
        "robust-cs": _run_grid_like,
        "inpaint": run_inpaint,
    }[cfg.command]
    try:
        return runner(cfg, outdir)
    except CliError:
        raise
    except OSError as exc:
        raise CliError(EXIT_IO, f"I/O failure: {exc}")
    except (ValueError, RuntimeError) as exc:
        raise CliError(EXIT_SOLVER, f"solver failure: {exc}")


def main(argv=None):
    try:
        cfg = parse_config(argv if argv is not None else sys.argv[1:])
        return run(cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
