"""Empirical verification batteries for the solver's supporting theory.

Each routine returns ``DiagnosticRow`` records (name, measured value,
threshold, pass flag) so the experiment runner can serialize them; the
checks mirror the stability, convexity, and envelope properties the
method's convergence argument rests on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .batching import uniform_batch
from .kernels import KernelSpec
from .problems import linear_problem, sample_collocation
from .solver import LatentState, Solver, SolverConfig, stability_probe

__all__ = [
    "DiagnosticRow",
    "matrix_identity_battery",
    "kernel_difference_battery",
    "moreau_gradient_check",
    "stability_sweep",
    "envelope_gradient_study",
    "fit_loglog_slope",
]


@dataclass
class DiagnosticRow:
    name: str
    measured: float
    threshold: float
    passed: bool


def matrix_identity_battery(rng: np.random.Generator, draws: int = 50) -> list[DiagnosticRow]:
    """I - K (K + g I)^{-1} = g (K + g I)^{-1} over random SPD matrices."""
    worst = 0.0
    for _ in range(draws):
        n = int(rng.integers(2, 21))
        b = rng.standard_normal((n, n))
        k = b @ b.T + 1e-3 * np.eye(n)
        for gamma in (1e-3, 1.0, 1e3):
            inv = np.linalg.inv(k + gamma * np.eye(n))
            dev = np.max(np.abs((np.eye(n) - k @ inv) - gamma * inv))
            worst = max(worst, float(dev))
    return [DiagnosticRow("prox_gram_identity_max_dev", worst, 1e-8, worst <= 1e-8)]


def kernel_difference_battery(
    spec: KernelSpec, rng: np.random.Generator, draws: int = 200
) -> list[DiagnosticRow]:
    """Operator entries against nested central differences of the plain kernel.

    Runs in float64 with wider steps than the test-suite oracle, so the
    pass threshold is looser; the acceptance suite carries the tight check.
    """
    from .kernels import IDENTITY, LAPLACIAN, eval_k, eval_op_k, first_deriv, second_deriv

    ops = [IDENTITY, LAPLACIAN]
    ops += [first_deriv(a) for a in range(spec.dimension)]
    ops += [second_deriv(a) for a in range(spec.dimension)]
    scales = np.sqrt(spec.axis_scales())

    def fd(op, f, x, h):
        if op.tag == "identity":
            return f(x)
        total = 0.0
        axes = range(spec.dimension) if op.tag == "laplacian" else [op.axis]
        for a in axes:
            e = np.zeros(spec.dimension)
            e[a] = h
            if op.tag == "first":
                return (f(x + e) - f(x - e)) / (2 * h)
            total += (f(x + e) - 2.0 * f(x) + f(x - e)) / (h * h)
        return total

    worst = 0.0
    for _ in range(draws):
        op_l, op_r = ops[rng.integers(len(ops))], ops[rng.integers(len(ops))]
        x = rng.random(spec.dimension)
        y = rng.random(spec.dimension)
        h = 1e-3 * float(scales.min())
        got = eval_op_k(spec, op_l, x, op_r, y)
        want = fd(op_l, lambda p: fd(op_r, lambda q: eval_k(spec, p, q), y, h), x, h)
        scale = max(abs(got), abs(want), 1e-6)
        worst = max(worst, abs(got - want) / scale)
    return [DiagnosticRow("kernel_fd_max_rel_dev", worst, 1e-3, worst <= 1e-3)]


def _linear_setup(n: int, seed: int) -> tuple:
    problem = linear_problem()
    colloc = sample_collocation(problem, n, n, rng_seed=seed)
    kernel = KernelSpec("gaussian_isotropic", (0.2,), 1)
    return problem, colloc, kernel


def moreau_gradient_check(
    rng: np.random.Generator, n: int = 24, rho: float = 2.0, directions: int = 10
) -> list[DiagnosticRow]:
    """Envelope directional derivatives against rho (z - z_hat) on a linear toy."""
    problem, colloc, kernel = _linear_setup(n, seed=int(rng.integers(2**31)))
    config = SolverConfig(
        eta=1e-8, gamma=1.0, rho=rho, mode="penalty", sampler="uniform",
        batch_size=4, gn_tol=1e-12, gn_max_iters=100,
    )
    solver = Solver(problem, colloc, kernel, config)
    state = LatentState(z=0.5 * rng.standard_normal(n))
    grad = solver.moreau_gradient(state, rho)
    h = 1e-5
    worst = 0.0
    for _ in range(directions):
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        up = solver.moreau_envelope(LatentState(z=state.z + h * d), rho)
        dn = solver.moreau_envelope(LatentState(z=state.z - h * d), rho)
        fd = (up - dn) / (2 * h)
        ref = float(grad @ d)
        worst = max(worst, abs(fd - ref) / max(abs(ref), 1e-10))
    return [DiagnosticRow("moreau_gradient_fd_rel_dev", worst, 1e-4, worst <= 1e-4)]


def fit_loglog_slope(ms, values) -> float:
    return float(np.polyfit(np.log(np.asarray(ms, float)), np.log(np.asarray(values, float)), 1)[0])


def stability_sweep(
    rng: np.random.Generator,
    n: int = 256,
    m_values=(4, 8, 16, 32, 64),
    trials: int = 200,
) -> tuple[list[DiagnosticRow], list[tuple[int, float]]]:
    """Swap-one gap decay over batch size; slope should sit near -1."""
    problem, colloc, kernel = _linear_setup(n, seed=7)
    # beta/(M gamma) must stay below one across the sweep or the per-sample
    # updates saturate and mask the 1/M decay
    config = SolverConfig(
        eta=0.0, nugget_substitution=False, lambda_reg=0.5, beta=1.0,
        gamma=1.0, mode="penalty", sampler="uniform", batch_size=4,
        gn_tol=1e-11, gn_max_iters=50,
    )
    means = []
    for m in m_values:
        gaps = stability_probe(problem, colloc, kernel, config, m, trials, rng)
        means.append((m, float(np.mean(gaps))))
    slope = fit_loglog_slope([m for m, _ in means], [v for _, v in means])
    rows = [
        DiagnosticRow("stability_gap_loglog_slope", slope, -0.5, -1.5 <= slope <= -0.5)
    ]
    rows += [
        DiagnosticRow(f"stability_mean_gap_m{m}", v, float("nan"), True)
        for m, v in means
    ]
    return rows, means


def envelope_gradient_study(
    rng: np.random.Generator,
    n: int = 64,
    m: int = 8,
    k_values=(10, 100, 1000),
    rho: float = 2.0,
    seeds: int = 5,
) -> tuple[list[DiagnosticRow], list[tuple[int, float]]]:
    """Mean squared envelope gradient at a uniformly drawn iterate, per K.

    The running minimum over increasing K must be non-increasing; the
    measured values themselves are reported for the study output.
    """
    problem, colloc, kernel = _linear_setup(n, seed=11)
    k_max = max(k_values)
    sums = {k: [] for k in k_values}
    for s in range(seeds):
        config = SolverConfig(
            eta=1e-8, gamma=2.0 * rho, rho=rho, mode="penalty", sampler="uniform",
            batch_size=m, gn_tol=1e-10, gn_max_iters=50, seed=1000 + s,
        )
        solver = Solver(problem, colloc, kernel, config)
        state = solver.initial_state()
        state = LatentState(z=state.z + rng.standard_normal(n))
        run_rng = np.random.default_rng(config.seed)
        sq_norms = []
        for k in range(1, k_max + 1):
            batch = uniform_batch(run_rng, n, m)
            system = solver._system_for(batch)
            state, _ = solver.proximal_step(state, batch, system)
            sq_norms.append(float(np.sum(solver.moreau_gradient(state, rho) ** 2)))
            if k in sums:
                sums[k].append(float(np.mean(sq_norms)))
    averages = [(k, float(np.mean(sums[k]))) for k in k_values]
    running = np.minimum.accumulate([v for _, v in averages])
    monotone = all(
        running[i] <= running[i - 1] + 1e-15 for i in range(1, len(running))
    )
    rows = [
        DiagnosticRow(
            "moreau_gradient_running_min_monotone",
            float(running[-1]),
            float(running[0]),
            monotone,
        )
    ]
    rows += [
        DiagnosticRow(f"moreau_gradient_mean_sq_k{k}", v, float("nan"), True)
        for k, v in averages
    ]
    return rows, averages
