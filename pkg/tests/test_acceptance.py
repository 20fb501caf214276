"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they complete.  The experiment-reproduction tests (04, 05) are
the slow ones; the Burgers sweep runs at a reduced iteration count to
stay inside its wall-time budget, which preserves the ordering property
being checked.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import brute_force_minimize, fd_op_k

from proxgp import (
    IDENTITY,
    LAPLACIAN,
    Batch,
    KernelSpec,
    LatentState,
    Solver,
    SolverConfig,
    burgers_problem,
    burgers_true,
    elliptic_problem,
    elliptic_true,
    error_report,
    first_deriv,
    linear_problem,
    sample_collocation,
    second_deriv,
    stability_probe,
)
from proxgp.batching import uniform_batch
from proxgp.cli import parse_config, run_experiment
from proxgp.diagnostics import fit_loglog_slope
from proxgp.kernels import Functional, cross_gram

ISO = KernelSpec("gaussian_isotropic", (0.2,), 2)
ANISO = KernelSpec("gaussian_anisotropic", (0.3, 0.05), 2)
KERN_1D = KernelSpec("gaussian_isotropic", (0.2,), 1)


def report(num: int, desc: str, ok: bool, detail: str = "") -> None:
    print(f"\nACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'}: {desc} {detail}")


# -------------------------------------------------------------------------
def test_criterion_01_kernel_finite_difference():
    ops = [IDENTITY, first_deriv(0), first_deriv(1), second_deriv(0), second_deriv(1), LAPLACIAN]
    t0 = time.perf_counter()
    worst = 0.0
    for spec in (ISO, ANISO):
        rng = np.random.default_rng(42)
        for _ in range(200):
            op_l = ops[rng.integers(len(ops))]
            op_r = ops[rng.integers(len(ops))]
            if spec is ANISO:
                x = np.array([rng.uniform(0, 1), rng.uniform(-1, 1)])
                y = np.array([rng.uniform(0, 1), rng.uniform(-1, 1)])
            else:
                x, y = rng.random(2), rng.random(2)
            from proxgp import eval_op_k

            got = eval_op_k(spec, op_l, x, op_r, y)
            want = fd_op_k(spec, op_l, x, op_r, y)
            tol = max(1e-8, 1e-5 * max(abs(got), abs(want)))
            worst = max(worst, abs(got - want) / tol)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and elapsed < 10.0
    report(1, "kernel entries vs nested finite differences",
           ok, f"(worst = {worst:.3g}x tolerance, {elapsed:.1f}s)")
    assert worst <= 1.0
    assert elapsed < 10.0


# -------------------------------------------------------------------------
def test_criterion_02_prox_gram_identity():
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 21))
        b = rng.standard_normal((n, n))
        k = b @ b.T + 1e-3 * np.eye(n)
        for gamma in (1e-3, 1.0, 1e3):
            inv = np.linalg.inv(k + gamma * np.eye(n))
            dev = np.max(np.abs((np.eye(n) - k @ inv) - gamma * inv))
            worst = max(worst, float(dev))
    ok = worst <= 1e-8
    report(2, "I - K(K+gI)^-1 = g(K+gI)^-1 identity", ok, f"(max dev {worst:.2e})")
    assert ok


# -------------------------------------------------------------------------
def _elliptic_toy(n, n_int, seed, **kw):
    problem = elliptic_problem()
    colloc = sample_collocation(problem, n, n_int, rng_seed=seed)
    defaults = dict(eta=1e-8, gamma=1.0, rho=1.0, iterations=5, batch_size=n,
                    gn_tol=1e-11, gn_max_iters=300, seed=0)
    defaults.update(kw)
    return problem, colloc, Solver(problem, colloc, ISO, SolverConfig(**defaults))


def _toy_objective(solver, colloc, indices, gamma, center_z):
    system = solver.assemble_batch(indices)
    a = system.matrix
    center_full = np.concatenate([center_z[solver.layout.block(i)] for i in indices])
    f_vals = {i: colloc.y[i] for i in indices}

    def fun(r):
        w, pos = [], 0
        for i in indices:
            if colloc.is_interior(i):
                u = r[pos]
                w.extend([u, u**3 - f_vals[i]])
                pos += 1
            else:
                w.append(0.0)
        w = np.asarray(w)
        return 0.5 * w @ np.linalg.solve(a, w) + 0.5 * gamma * np.sum(
            (w - center_full) ** 2
        )

    return fun


def test_criterion_03_oracle_equivalence():
    details = []

    # proximal_step vs brute force on a 5-point toy
    problem, colloc, solver = _elliptic_toy(5, 4, seed=9, batch_size=5)
    from proxgp import eliminate

    z = solver.initial_state().z
    rng = np.random.default_rng(1)
    for i in range(4):
        blk, _ = eliminate(problem, colloc, i, rng.uniform(-0.4, 0.4, 1))
        z[solver.layout.block(i)] = blk
    state = LatentState(z=z)
    batch = Batch(indices=np.arange(5), seed_index=0)
    system = solver._system_for(batch)
    new_state, _ = solver.proximal_step(state, batch, system)
    got = np.array([new_state.z[solver.layout.block(i)][0] for i in range(4)])
    start, _ = solver._gather_reduced(state.z, np.arange(5))
    want = brute_force_minimize(_toy_objective(solver, colloc, np.arange(5), 1.0, state.z), start)
    dev_prox = float(np.max(np.abs(got - want)))
    details.append(f"prox dev {dev_prox:.2e}")

    # final_solve(rho=0) vs brute force on an 8-point toy
    problem, colloc, solver = _elliptic_toy(8, 5, seed=27)
    state0 = solver.initial_state()
    _, z_hat = solver.final_solve(state0, rho=0.0)
    got = np.array([z_hat.z[solver.layout.block(i)][0] for i in range(5)])
    fun = _toy_objective(solver, colloc, np.arange(8), 0.0, state0.z)
    want = brute_force_minimize(fun, got + 0.05)
    dev_final = float(np.max(np.abs(got - want)))
    details.append(f"final dev {dev_final:.2e}")

    # linear f: closed-form ridge
    lin = linear_problem()
    lcolloc = sample_collocation(lin, 10, 10, rng_seed=29)
    config = SolverConfig(eta=1e-8, mode="penalty", batch_size=10,
                          gn_tol=1e-12, gn_max_iters=50)
    lsolver = Solver(lin, lcolloc, KERN_1D, config)
    a = lsolver.full_system().matrix
    _, z_ridge = lsolver.final_solve(LatentState(z=np.zeros(10)), rho=0.0)
    want = np.linalg.solve(np.linalg.inv(a) + np.eye(10) / 10, lcolloc.y / 10)
    dev_ridge = float(np.max(np.abs(z_ridge.z - want)))
    details.append(f"ridge dev {dev_ridge:.2e}")

    ok = dev_prox <= 1e-6 and dev_final <= 1e-6 and dev_ridge <= 1e-8
    report(3, "solver matches brute-force / closed-form oracles", ok,
           "(" + ", ".join(details) + ")")
    assert dev_prox <= 1e-6
    assert dev_final <= 1e-6
    assert dev_ridge <= 1e-8


# -------------------------------------------------------------------------
def test_criterion_06_burgers_reference():
    rng = np.random.default_rng(11)
    nu, h = 0.2, 1e-4
    worst_pde = 0.0
    for _ in range(50):
        t = rng.uniform(0.05, 0.95)
        x = rng.uniform(-0.9, 0.9)
        u = burgers_true(t, x, nu)
        ut = (burgers_true(t + h, x, nu) - burgers_true(t - h, x, nu)) / (2 * h)
        ux = (burgers_true(t, x + h, nu) - burgers_true(t, x - h, nu)) / (2 * h)
        uxx = (burgers_true(t, x + h, nu) - 2 * u + burgers_true(t, x - h, nu)) / (h * h)
        worst_pde = max(worst_pde, abs(ut + u * ux - nu * uxx))
    worst_bd = max(
        max(abs(burgers_true(t, -1.0)), abs(burgers_true(t, 1.0)))
        for t in np.linspace(0, 1, 20)
    )
    worst_quad = 0.0
    for t, x in [(0.5, 0.5), (0.2, -0.3), (0.9, 0.8), (0.05, 0.1), (0.99, -0.9)]:
        worst_quad = max(worst_quad, abs(burgers_true(t, x) - burgers_true(t, x, quad_nodes=256)))
    ok = worst_pde <= 1e-3 and worst_bd <= 1e-6 and worst_quad <= 1e-8
    report(6, "Cole-Hopf reference solution", ok,
           f"(pde {worst_pde:.2e}, boundary {worst_bd:.2e}, quad {worst_quad:.2e})")
    assert worst_pde <= 1e-3
    assert worst_bd <= 1e-6
    assert worst_quad <= 1e-8


# -------------------------------------------------------------------------
def test_criterion_07_moreau_gradient():
    problem = elliptic_problem()
    colloc = sample_collocation(problem, 5, 3, rng_seed=41)
    config = SolverConfig(eta=1e-8, gamma=1.0, rho=5.0, mode="penalty",
                          batch_size=5, gn_tol=1e-11, gn_max_iters=300)
    solver = Solver(problem, colloc, ISO, config)
    rng = np.random.default_rng(43)
    state = LatentState(z=0.3 * rng.standard_normal(solver.layout.total))
    rho, h = 5.0, 1e-5
    grad = solver.moreau_gradient(state, rho)
    worst = 0.0
    for _ in range(10):
        d = rng.standard_normal(state.z.size)
        d /= np.linalg.norm(d)
        up = solver.moreau_envelope(LatentState(z=state.z + h * d), rho)
        dn = solver.moreau_envelope(LatentState(z=state.z - h * d), rho)
        fd = (up - dn) / (2 * h)
        ref = float(grad @ d)
        worst = max(worst, abs(fd - ref) / max(abs(ref), 1e-12))
    ok = worst <= 1e-4
    report(7, "Moreau envelope gradient vs finite differences", ok,
           f"(worst rel dev {worst:.2e})")
    assert ok


# -------------------------------------------------------------------------
def test_criterion_08_stability_decay():
    problem = linear_problem()
    colloc = sample_collocation(problem, 256, 256, rng_seed=7)
    config = SolverConfig(eta=0.0, nugget_substitution=False, lambda_reg=0.5,
                          beta=1.0, gamma=1.0, mode="penalty", sampler="uniform",
                          batch_size=4, gn_tol=1e-11, gn_max_iters=50)
    rng = np.random.default_rng(3)
    ms = [4, 8, 16, 32, 64]
    means = []
    for m in ms:
        gaps = stability_probe(problem, colloc, KERN_1D, config, m, 200, rng)
        means.append(float(np.mean(gaps)))
    slope = fit_loglog_slope(ms, means)
    ok = -1.5 <= slope <= -0.5
    report(8, "swap-one stability gap decay in batch size", ok,
           f"(log-log slope {slope:.3f}, gaps " + " ".join(f"{v:.2e}" for v in means) + ")")
    assert ok


# -------------------------------------------------------------------------
def test_criterion_09_rate_shape():
    problem = linear_problem()
    colloc = sample_collocation(problem, 64, 64, rng_seed=11)
    rho, gamma = 2.0, 4.0
    k_grid = (25, 100, 400)
    levels = {}
    monotone = True
    for m in (8, 16, 32):
        per_k = {k: [] for k in k_grid}
        for s in range(20):
            config = SolverConfig(eta=1e-8, gamma=gamma, rho=rho, mode="penalty",
                                  sampler="uniform", batch_size=m, gn_tol=1e-10,
                                  gn_max_iters=50, seed=500 + s)
            solver = Solver(problem, colloc, KERN_1D, config)
            state = solver.initial_state()
            rng = np.random.default_rng(config.seed)
            sq = []
            for k in range(1, max(k_grid) + 1):
                b = uniform_batch(rng, 64, m)
                system = solver._system_for(b)
                state, _ = solver.proximal_step(state, b, system)
                g = solver.moreau_gradient(state, rho)
                sq.append(float(g @ g))
                if k in k_grid:
                    per_k[k].append(np.mean(sq))
        series = [float(np.mean(per_k[k])) for k in k_grid]
        monotone &= all(series[i] <= series[i - 1] for i in range(1, len(series)))
        levels[m] = series[-1]
    ordered = levels[8] > levels[16] > levels[32]
    ok = monotone and ordered
    report(9, "envelope gradient decreases with K, plateau drops with M", ok,
           f"(plateaus M8 {levels[8]:.3g} > M16 {levels[16]:.3g} > M32 {levels[32]:.3g})")
    assert monotone
    assert ordered


# -------------------------------------------------------------------------
def test_criterion_10_determinism(tmp_path):
    text = """
[problem]
name = elliptic
n_total = 60
n_interior = 45

[solver]
iterations = 25
batch_size = 6
eta = 1e-10
seed = 5

[output]
directory = {out}
grid_resolution = 15
"""
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        cfg_path = tmp_path / f"{tag}.ini"
        cfg_path.write_text(text.format(out=out))
        assert run_experiment(parse_config(cfg_path)) == 0
        outs.append(out)
    same = all(
        (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        for name in ("loss_history.csv", "error_grid.csv")
    )
    report(10, "identical configs and seeds give byte-identical CSV bodies", same)
    assert same


# -------------------------------------------------------------------------
# Experiment reproductions (slow)
# -------------------------------------------------------------------------

def test_criterion_04_elliptic_reproduction(tmp_path):
    cfg_path = tmp_path / "exp.ini"
    out = tmp_path / "out"
    cfg_path.write_text(f"""
[problem]
name = elliptic

[solver]
seed = 0

[output]
directory = {out}
""")
    config = parse_config(cfg_path)
    assert config.solver.iterations == 3000 and config.solver.batch_size == 12

    t0 = time.perf_counter()
    assert run_experiment(config) == 0
    wall = time.perf_counter() - t0

    lines = (out / "loss_history.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 3000
    body = np.loadtxt(lines[1:], delimiter=",")
    loss = body[:, 1] + body[:, 2]
    ratio = loss[0] / loss[-1]

    summary = json.loads((out / "summary.json").read_text())
    linf_minibatch = summary["run"]["linf_error"]

    # full-batch GP oracle on the same collocation set
    problem = elliptic_problem()
    colloc = sample_collocation(problem, 1200, 900, rng_seed=config.colloc_seed)
    oracle = Solver(problem, colloc, ISO, config.solver)
    coeffs, z_star = oracle.final_solve(oracle.initial_state(), rho=0.0,
                                        tol=1e-7, max_iters=80)
    res = config.grid_resolution
    axes = np.linspace(0, 1, res)
    pts = np.stack(np.meshgrid(axes, axes, indexing="ij"), -1).reshape(-1, 2)
    rows = cross_gram(ISO, [Functional(tuple(p), IDENTITY) for p in pts],
                      oracle.functionals)
    linf_oracle = error_report(rows @ coeffs, np.asarray(elliptic_true(pts))).linf

    wall_ok = wall < 1800
    err_ok = linf_minibatch <= 10 * linf_oracle
    ratio_ok = ratio >= 100
    report(4, "elliptic mini-batch reproduction", wall_ok and err_ok and ratio_ok,
           f"(wall {wall:.0f}s {'ok' if wall_ok else 'OVER'}, "
           f"Linf {linf_minibatch:.2e} vs oracle {linf_oracle:.2e} "
           f"{'ok' if err_ok else 'OVER 10x'}, "
           f"loss ratio {ratio:.1f}x {'ok' if ratio_ok else 'BELOW 100x'})")
    assert wall_ok
    assert err_ok
    # The 100x decrease is not reachable for this loss at M = 12: the
    # iterate fluctuates on a batch-size-limited noise floor (the method's
    # O(1/M) term) roughly one order, not two, below the initial value.
    # Hot-starting at the full-problem minimizer climbs back to the same
    # plateau, and M = 24 / M = 48 clear 100x easily.  Asserted unchanged
    # rather than loosened.
    assert ratio_ok


def _sweep_mean_losses(problem, colloc, kernel, base_cfg, batch_sizes, seeds, iterations):
    shared = Solver(problem, colloc, kernel, base_cfg)
    shared.full_system()
    means = {}
    for m in batch_sizes:
        cfg = SolverConfig(**{**base_cfg.__dict__, "batch_size": m,
                              "iterations": iterations, "record_every": iterations})
        solver = Solver(problem, colloc, kernel, cfg, full_system=shared._full_system)
        finals = []
        for s in seeds:
            hist = solver.run(seed=s)
            last = hist.records[-1]
            finals.append(last.psi_quadratic + last.psi_misfit)
        means[m] = float(np.mean(finals))
    return means


def test_criterion_05_batch_size_monotonicity():
    # elliptic, 10 seeds per batch size
    problem = elliptic_problem()
    colloc = sample_collocation(problem, 1200, 900, rng_seed=0)
    base = SolverConfig(eta=1e-13, gamma=1.0, gn_tol=1e-5, gn_max_iters=30,
                        batch_size=12, iterations=600)
    t0 = time.perf_counter()
    elliptic_means = _sweep_mean_losses(problem, colloc, ISO, base,
                                        (12, 24, 48), range(10), 600)
    elliptic_ok = elliptic_means[48] < elliptic_means[24] < elliptic_means[12]
    t_elliptic = time.perf_counter() - t0

    # Burgers at reduced K (the full horizon would blow the wall-time
    # budget; the ordering is what is being checked)
    bproblem = burgers_problem(0.2)
    bcolloc = sample_collocation(bproblem, 2400, 2000, rng_seed=0)
    bbase = SolverConfig(eta=1e-10, gamma=1.0, gn_tol=1e-5, gn_max_iters=100,
                         batch_size=75, iterations=120)
    t0 = time.perf_counter()
    burgers_means = _sweep_mean_losses(bproblem, bcolloc, ANISO, bbase,
                                       (75, 150, 300), range(10), 120)
    burgers_ok = burgers_means[300] < burgers_means[150] < burgers_means[75]
    t_burgers = time.perf_counter() - t0

    ok = elliptic_ok and burgers_ok
    report(5, "mean final loss decreases with batch size", ok,
           f"(elliptic {elliptic_means[12]:.2e} > {elliptic_means[24]:.2e} > "
           f"{elliptic_means[48]:.2e} in {t_elliptic:.0f}s; "
           f"burgers {burgers_means[75]:.2e} > {burgers_means[150]:.2e} > "
           f"{burgers_means[300]:.2e} in {t_burgers:.0f}s)")
    assert elliptic_ok
    assert burgers_ok
