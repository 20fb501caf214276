"""Desk-scale mini-batch solve of the nonlinear elliptic problem.

A shrunken version of the full experiment (300 points instead of 1200,
600 iterations instead of 3000) that runs in a few seconds: draw
collocation points, iterate batch proximal updates, then compare the
recovered function against the manufactured solution.
"""

import time

import numpy as np

from proxgp import (
    EvalGrid,
    KernelSpec,
    Solver,
    SolverConfig,
    elliptic_problem,
    elliptic_true,
    error_report,
    sample_collocation,
)

problem = elliptic_problem()
colloc = sample_collocation(problem, n_total=300, n_interior=225, rng_seed=0)
kernel = KernelSpec("gaussian_isotropic", (0.2,), 2)
config = SolverConfig(
    eta=1e-13, gamma=1.0, rho=1.0, iterations=600, batch_size=12,
    gn_tol=1e-5, gn_max_iters=30, seed=0, record_every=60,
)

solver = Solver(problem, colloc, kernel, config)
t0 = time.perf_counter()
history = solver.run()
print(f"ran {config.iterations} iterations in {time.perf_counter() - t0:.1f}s")

print("\nloss history (quadratic form of the reduced objective):")
for r in history.records:
    if not np.isnan(r.psi_quadratic):
        print(f"  k = {r.k:4d}   psi = {r.psi_quadratic:.3e}   gn iters = {r.gn_iters}")

# evaluate on a grid through the full representer (prox weight rho = gamma)
grid = EvalGrid(problem.domain.lower, problem.domain.upper, (60, 60))
pts = grid.points()
u_num = solver.predict(pts, history.final_state, strategy="full")
rep = error_report(u_num, np.asarray(elliptic_true(pts)))
print(f"\nerrors vs manufactured solution:  Linf {rep.linf:.3e}   rel L2 {rep.rel_l2:.3e}")

# The neighborhood strategy skips the full solve and runs one local
# proximal solve around each test point instead.  It inherits the
# iterate's local fluctuation, which a larger neighborhood averages out.
print("\npointwise predictions at (0.25, 0.5), true value %+.6f:" % elliptic_true((0.25, 0.5)))
print(f"  full representer: {solver.predict((0.25, 0.5), history.final_state, strategy='full'):+.6f}")
for m in (12, 60, 120):
    cfg = SolverConfig(**{**config.__dict__, "batch_size": m})
    local_solver = Solver(problem, colloc, kernel, cfg, full_system=solver._full_system)
    val = local_solver.predict((0.25, 0.5), history.final_state, strategy="neighborhood")
    print(f"  neighborhood M = {m:3d}: {val:+.6f}")
