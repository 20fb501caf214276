"""Batch-size study at desk scale: bigger batches reach lower loss plateaus.

Runs the elliptic problem for three batch sizes with a handful of seeds
each and prints the mean final loss; the monotone ordering mirrors what
the full-scale sweep shows.
"""

import time

import numpy as np

from proxgp import KernelSpec, Solver, SolverConfig, elliptic_problem, sample_collocation

problem = elliptic_problem()
colloc = sample_collocation(problem, n_total=300, n_interior=225, rng_seed=0)
kernel = KernelSpec("gaussian_isotropic", (0.2,), 2)

iterations, seeds = 400, range(5)
base = SolverConfig(eta=1e-13, gamma=1.0, iterations=iterations, batch_size=12,
                    gn_tol=1e-5, gn_max_iters=30, record_every=iterations)

shared = Solver(problem, colloc, kernel, base)
shared.full_system()  # one factorization reused by every run below

print(f"elliptic, N = 300, K = {iterations}, {len(list(seeds))} seeds per batch size")
means = {}
for m in (6, 12, 24):
    cfg = SolverConfig(**{**base.__dict__, "batch_size": m})
    solver = Solver(problem, colloc, kernel, cfg, full_system=shared._full_system)
    finals = []
    t0 = time.perf_counter()
    for s in seeds:
        history = solver.run(seed=s)
        last = history.records[-1]
        finals.append(last.psi_quadratic + last.psi_misfit)
    means[m] = np.mean(finals)
    print(f"  M = {m:2d}: mean final loss {means[m]:.3e}   "
          f"(spread {np.min(finals):.2e} .. {np.max(finals):.2e}, {time.perf_counter()-t0:.1f}s)")

print("\nordering holds:", means[24] < means[12] < means[6])
