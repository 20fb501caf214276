"""Experiment runner: config parsing, runs, sweeps, diagnostics, prediction.

Configs are INI files with sections [problem], [kernel], [solver], [sweep],
[output].  Unknown sections or keys are rejected; per-problem defaults are
filled in and echoed into the run summary.  Outputs are CSV files whose
bodies are byte-stable for a fixed config and seed, plus a summary.json
(the only place a timestamp appears).

Exit codes: 0 success, 1 diagnostic check failure, 2 config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .kernels import KernelSpec
from .problems import (
    ProblemSpec,
    burgers_problem,
    elliptic_problem,
    linear_problem,
    sample_collocation,
)
from .reference import EvalGrid, burgers_true, elliptic_true, error_report
from .solver import ConditioningError, RunHistory, Solver, SolverConfig

__all__ = ["ExperimentConfig", "parse_config", "run_experiment", "run_diagnostics", "main"]


class ConfigError(ValueError):
    pass


_PROBLEM_DEFAULTS = {
    # per-problem defaults for keys the config file omits
    "elliptic": dict(
        n_total=1200, n_interior=900, family="gaussian_isotropic", lengthscales=(0.2,),
        eta=1e-13, gamma=1.0, iterations=3000, batch_size=12,
        gn_tol=1e-5, gn_max_iters=30,
    ),
    "burgers": dict(
        n_total=2400, n_interior=2000, family="gaussian_anisotropic",
        lengthscales=(0.3, 0.05), eta=1e-10, gamma=1.0, iterations=3000,
        batch_size=75, gn_tol=1e-5, gn_max_iters=100,
    ),
    "linear": dict(
        n_total=64, n_interior=64, family="gaussian_isotropic", lengthscales=(0.2,),
        eta=1e-8, gamma=1.0, iterations=200, batch_size=8,
        gn_tol=1e-8, gn_max_iters=50,
    ),
}

_KNOWN_KEYS = {
    "problem": {"name", "n_total", "n_interior", "nu", "colloc_seed"},
    "kernel": {"family", "sigma", "sigma1", "sigma2"},
    "solver": {
        "eta", "gamma", "rho", "lambda_reg", "beta", "iterations", "batch_size",
        "gn_tol", "gn_max_iters", "mode", "sampler", "clamp_bound", "seed",
        "record_every", "nugget_substitution",
    },
    "sweep": {"batch_sizes", "realizations", "iterations"},
    "output": {"directory", "error_grid", "grid_resolution", "predict_strategy"},
}


@dataclass
class ExperimentConfig:
    problem_name: str
    n_total: int
    n_interior: int
    nu: float
    colloc_seed: int
    kernel: KernelSpec
    solver: SolverConfig
    sweep_batch_sizes: tuple[int, ...] | None
    sweep_realizations: int
    sweep_iterations: int | None
    out_dir: Path
    error_grid: bool
    grid_resolution: int
    predict_strategy: str
    defaults_used: dict = field(default_factory=dict)

    def problem(self) -> ProblemSpec:
        if self.problem_name == "elliptic":
            return elliptic_problem()
        if self.problem_name == "burgers":
            return burgers_problem(self.nu)
        return linear_problem()

    def echo(self) -> dict:
        d = {
            "problem": {
                "name": self.problem_name,
                "n_total": self.n_total,
                "n_interior": self.n_interior,
                "nu": self.nu,
                "colloc_seed": self.colloc_seed,
            },
            "kernel": {
                "family": self.kernel.family,
                "lengthscales": list(self.kernel.lengthscales),
            },
            "solver": asdict(self.solver),
            "sweep": {
                "batch_sizes": list(self.sweep_batch_sizes) if self.sweep_batch_sizes else None,
                "realizations": self.sweep_realizations,
                "iterations": self.sweep_iterations,
            },
            "output": {
                "directory": str(self.out_dir),
                "error_grid": self.error_grid,
                "grid_resolution": self.grid_resolution,
                "predict_strategy": self.predict_strategy,
            },
            "defaults_used": self.defaults_used,
        }
        return d


def _get(section, key, cast, default, used: dict, name: str):
    if section is not None and key in section:
        raw = section[key]
        try:
            if cast is bool:
                return raw.strip().lower() in ("1", "true", "yes", "on")
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key}: cannot parse {raw!r}") from exc
    used[f"{name}.{key}"] = default
    return default


def parse_config(path) -> ExperimentConfig:
    """Read and validate an INI experiment config, filling per-problem defaults."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key [{section}] {key}")

    prob = parser["problem"] if parser.has_section("problem") else None
    if prob is None or "name" not in prob:
        raise ConfigError("[problem] name is required")
    name = prob["name"].strip()
    if name not in _PROBLEM_DEFAULTS:
        raise ConfigError(f"[problem] name: unknown problem {name!r}")
    dflt = _PROBLEM_DEFAULTS[name]
    used: dict = {}

    n_total = _get(prob, "n_total", int, dflt["n_total"], used, "problem")
    n_interior = _get(prob, "n_interior", int, dflt["n_interior"], used, "problem")
    nu = _get(prob, "nu", float, 0.2, used, "problem")
    colloc_seed = _get(prob, "colloc_seed", int, 0, used, "problem")

    kern = parser["kernel"] if parser.has_section("kernel") else None
    family = _get(kern, "family", str, dflt["family"], used, "kernel")
    if family == "gaussian_isotropic":
        sigma = _get(kern, "sigma", float, dflt["lengthscales"][0], used, "kernel")
        lengthscales = (sigma,)
        dimension = 2 if name in ("elliptic", "burgers") else 1
    elif family == "gaussian_anisotropic":
        base = dflt["lengthscales"] if len(dflt["lengthscales"]) == 2 else (0.3, 0.05)
        s1 = _get(kern, "sigma1", float, base[0], used, "kernel")
        s2 = _get(kern, "sigma2", float, base[1], used, "kernel")
        lengthscales = (s1, s2)
        dimension = 2
    else:
        raise ConfigError(f"[kernel] family: unknown family {family!r}")
    try:
        kernel = KernelSpec(family, lengthscales, dimension)
    except ValueError as exc:
        raise ConfigError(f"[kernel] invalid: {exc}") from exc

    sol = parser["solver"] if parser.has_section("solver") else None
    clamp_raw = sol.get("clamp_bound", "").strip() if sol is not None else ""
    try:
        solver_cfg = SolverConfig(
            eta=_get(sol, "eta", float, dflt["eta"], used, "solver"),
            gamma=_get(sol, "gamma", float, dflt["gamma"], used, "solver"),
            rho=_get(sol, "rho", float, dflt["gamma"], used, "solver"),
            lambda_reg=_get(sol, "lambda_reg", float, 1.0, used, "solver"),
            beta=_get(sol, "beta", float, 1.0, used, "solver"),
            iterations=_get(sol, "iterations", int, dflt["iterations"], used, "solver"),
            batch_size=_get(sol, "batch_size", int, dflt["batch_size"], used, "solver"),
            gn_tol=_get(sol, "gn_tol", float, dflt["gn_tol"], used, "solver"),
            gn_max_iters=_get(sol, "gn_max_iters", int, dflt["gn_max_iters"], used, "solver"),
            mode=_get(sol, "mode", str, "elimination", used, "solver"),
            sampler=_get(sol, "sampler", str, "neighborhood", used, "solver"),
            clamp_bound=float(clamp_raw) if clamp_raw else None,
            seed=_get(sol, "seed", int, 0, used, "solver"),
            record_every=_get(sol, "record_every", int, 1, used, "solver"),
            nugget_substitution=_get(sol, "nugget_substitution", bool, True, used, "solver"),
        )
    except ValueError as exc:
        raise ConfigError(f"[solver] invalid: {exc}") from exc

    sweep = parser["sweep"] if parser.has_section("sweep") else None
    batch_sizes = None
    realizations = 10
    sweep_iters = None
    if sweep is not None:
        if "batch_sizes" in sweep:
            try:
                batch_sizes = tuple(int(v) for v in sweep["batch_sizes"].split(","))
            except ValueError as exc:
                raise ConfigError(f"[sweep] batch_sizes: {exc}") from exc
        realizations = _get(sweep, "realizations", int, 10, used, "sweep")
        if "iterations" in sweep:
            sweep_iters = int(sweep["iterations"])
        if realizations < 1:
            raise ConfigError("[sweep] realizations must be at least 1")

    out = parser["output"] if parser.has_section("output") else None
    out_dir = Path(_get(out, "directory", str, f"out_{name}", used, "output"))
    error_grid = _get(out, "error_grid", bool, batch_sizes is None, used, "output")
    grid_resolution = _get(out, "grid_resolution", int, 100, used, "output")
    predict_strategy = _get(out, "predict_strategy", str, "full", used, "output")
    if predict_strategy not in ("full", "neighborhood"):
        raise ConfigError(f"[output] predict_strategy: {predict_strategy!r}")
    if grid_resolution < 2:
        raise ConfigError("[output] grid_resolution must be at least 2")

    if not 1 <= n_interior <= n_total:
        raise ConfigError("[problem] need 1 <= n_interior <= n_total")
    if solver_cfg.batch_size > n_total:
        raise ConfigError("[solver] batch_size exceeds n_total")
    if batch_sizes is not None and any(not 1 <= m <= n_total for m in batch_sizes):
        raise ConfigError("[sweep] batch sizes must lie in [1, n_total]")

    return ExperimentConfig(
        problem_name=name,
        n_total=n_total,
        n_interior=n_interior,
        nu=nu,
        colloc_seed=colloc_seed,
        kernel=kernel,
        solver=solver_cfg,
        sweep_batch_sizes=batch_sizes,
        sweep_realizations=realizations,
        sweep_iterations=sweep_iters,
        out_dir=out_dir,
        error_grid=error_grid,
        grid_resolution=grid_resolution,
        predict_strategy=predict_strategy,
        defaults_used=used,
    )


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_loss_history(path: Path, history: RunHistory) -> None:
    rows = [
        (r.k, r.psi_quadratic, r.psi_misfit, r.batch_objective, r.gn_iters)
        for r in history.records
    ]
    _write_csv(path, ["iteration", "psi_quadratic", "psi_misfit", "batch_objective", "gn_iters"], rows)


def _true_solution(config: ExperimentConfig, pts: np.ndarray) -> np.ndarray:
    if config.problem_name == "elliptic":
        return np.asarray(elliptic_true(pts))
    if config.problem_name == "burgers":
        return burgers_true(pts[:, 0], pts[:, 1], nu=config.nu)
    raise ConfigError("error grids are only defined for the PDE problems")

def write_error_grid(path: Path, config: ExperimentConfig, solver: Solver, history: RunHistory):
    problem = solver.problem
    res = config.grid_resolution
    grid = EvalGrid(problem.domain.lower, problem.domain.upper, (res, res))
    pts = grid.points()
    u_num = solver.predict(pts, history.final_state, strategy=config.predict_strategy)
    u_true = _true_solution(config, pts)
    rep = error_report(u_num, u_true)
    rows = zip(pts[:, 0], pts[:, 1], u_true, u_num, np.abs(u_num - u_true))
    _write_csv(path, ["x1", "x2", "u_true", "u_num", "abs_err"], rows)
    return rep


def _single_run(config: ExperimentConfig, solver: Solver, seed: int, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    history = solver.run(seed=seed)
    wall = time.perf_counter() - t0
    write_loss_history(out_dir / "loss_history.csv", history)
    last = history.records[-1]
    record = {
        "seed": seed,
        "batch_size": solver.config.batch_size,
        "iterations": solver.config.iterations,
        "final_psi_quadratic": last.psi_quadratic,
        "final_psi_misfit": last.psi_misfit,
        "final_loss": last.psi_quadratic + last.psi_misfit,
        "final_batch_objective": last.batch_objective,
        "loss_degraded": history.loss_degraded,
        "wall_seconds": wall,
    }
    if config.error_grid and config.problem_name != "linear":
        rep = write_error_grid(out_dir / "error_grid.csv", config, solver, history)
        record["linf_error"] = rep.linf
        record["rel_l2_error"] = rep.rel_l2
    return record


def run_experiment(config: ExperimentConfig, threads: int = 1, dry_run: bool = False) -> int:
    """Execute a single run or a batch-size sweep and write its artifacts."""
    summary = {"config": config.echo()}
    if dry_run:
        print(json.dumps(summary, indent=2))
        return 0
    config.out_dir.mkdir(parents=True, exist_ok=True)
    problem = config.problem()
    colloc = sample_collocation(problem, config.n_total, config.n_interior, config.colloc_seed)

    try:
        if config.sweep_batch_sizes is None:
            solver = Solver(problem, colloc, config.kernel, config.solver)
            record = _single_run(config, solver, config.solver.seed, config.out_dir)
            summary["run"] = record
        else:
            shared = Solver(problem, colloc, config.kernel, config.solver)
            shared.full_system()  # shared factorization across realizations
            runs = []
            jobs = []
            for m in config.sweep_batch_sizes:
                for r in range(config.sweep_realizations):
                    jobs.append((m, config.solver.seed + r))

            def one(job):
                m, seed = job
                cfg = SolverConfig(**{**asdict(config.solver), "batch_size": m,
                                      "iterations": config.sweep_iterations
                                      or config.solver.iterations})
                slv = Solver(problem, colloc, config.kernel, cfg,
                             full_system=shared._full_system)
                return _single_run(config, slv, seed, config.out_dir / f"run_M{m}_s{seed}")

            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    runs = list(pool.map(one, jobs))
            else:
                runs = [one(job) for job in jobs]
            summary["runs"] = runs
            summary["per_batch_size"] = {}
            for m in config.sweep_batch_sizes:
                losses = [r["final_loss"] for r in runs if r["batch_size"] == m]
                summary["per_batch_size"][str(m)] = {
                    "mean_final_loss": float(np.mean(losses)),
                    "final_losses": losses,
                }
    except ConditioningError as exc:
        summary["error"] = str(exc)
        (config.out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    summary["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    (config.out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    return 0


def run_diagnostics(config: ExperimentConfig, dry_run: bool = False) -> int:
    """Run the verification batteries and write diagnostics.csv."""
    if dry_run:
        print(json.dumps({"config": config.echo()}, indent=2))
        return 0
    if config.n_total > 200:
        raise ConfigError("diagnostics expect a small problem (n_total <= 200)")
    config.out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.solver.seed)
    rows: list[diag.DiagnosticRow] = []
    rows += diag.matrix_identity_battery(rng)
    rows += diag.kernel_difference_battery(config.kernel, rng)
    rows += diag.moreau_gradient_check(rng)
    sweep_rows, _ = diag.stability_sweep(
        rng, n=config.n_total, trials=max(50, config.sweep_realizations * 20)
    )
    rows += sweep_rows
    study_rows, _ = diag.envelope_gradient_study(rng, n=min(config.n_total, 64))
    rows += study_rows
    _write_csv(
        config.out_dir / "diagnostics.csv",
        ["name", "measured", "threshold", "pass"],
        [(r.name, r.measured, r.threshold, str(r.passed).lower()) for r in rows],
    )
    failed = [r for r in rows if not r.passed]
    for r in rows:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.measured:.6g}")
    return 1 if failed else 0


def predict_points(config: ExperimentConfig) -> int:
    """Run the configured solve, then write grid predictions."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    problem = config.problem()
    colloc = sample_collocation(problem, config.n_total, config.n_interior, config.colloc_seed)
    solver = Solver(problem, colloc, config.kernel, config.solver)
    history = solver.run()
    dim = problem.domain.dimension
    grid = EvalGrid(problem.domain.lower, problem.domain.upper,
                    (config.grid_resolution,) * dim)
    pts = grid.points()
    u_num = solver.predict(pts, history.final_state, strategy=config.predict_strategy)
    _write_csv(
        config.out_dir / "predictions.csv",
        [f"x{a + 1}" for a in range(dim)] + ["u_num"],
        (tuple(p) + (u,) for p, u in zip(pts, u_num)),
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="proxgp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("run", "sweep", "diagnose", "predict"):
        p = sub.add_parser(cmd)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--dry-run", action="store_true")
        p.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config)
        if args.seed is not None:
            config.solver.seed = args.seed
        if args.out is not None:
            config.out_dir = Path(args.out)
        if args.command == "sweep" and config.sweep_batch_sizes is None:
            raise ConfigError("sweep requires [sweep] batch_sizes")
        if args.command == "run":
            config.sweep_batch_sizes = None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command in ("run", "sweep"):
            return run_experiment(config, threads=args.threads, dry_run=args.dry_run)
        if args.command == "diagnose":
            return run_diagnostics(config, dry_run=args.dry_run)
        return predict_points(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConditioningError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
