"""The Cole-Hopf reference solution for viscous Burgers, and its sanity checks.

Evaluates u(t, x) through Gauss-Hermite quadrature, confirms it satisfies
the PDE under finite differences, and shows the quadrature is converged.
"""

import numpy as np

from proxgp import burgers_true

nu = 0.2

print("profile u(t, x) at a few times (x from -1 to 1):")
xs = np.linspace(-1.0, 1.0, 9)
for t in (0.0, 0.25, 0.5, 1.0):
    vals = burgers_true(np.full_like(xs, t), xs, nu)
    print(f"  t = {t:4.2f}: " + " ".join(f"{v:+.3f}" for v in vals))

print("\nPDE residual u_t + u u_x - nu u_xx under central differences:")
rng = np.random.default_rng(1)
h = 1e-4
worst = 0.0
for _ in range(20):
    t, x = rng.uniform(0.05, 0.95), rng.uniform(-0.9, 0.9)
    u = burgers_true(t, x, nu)
    ut = (burgers_true(t + h, x, nu) - burgers_true(t - h, x, nu)) / (2 * h)
    ux = (burgers_true(t, x + h, nu) - burgers_true(t, x - h, nu)) / (2 * h)
    uxx = (burgers_true(t, x + h, nu) - 2 * u + burgers_true(t, x - h, nu)) / (h * h)
    worst = max(worst, abs(ut + u * ux - nu * uxx))
print(f"  worst residual over 20 random interior points: {worst:.2e}")

print("\nquadrature refinement at (t, x) = (0.9, 0.8):")
for n in (32, 64, 128, 256):
    print(f"  {n:4d} nodes -> {burgers_true(0.9, 0.8, nu, quad_nodes=n):.12f}")

print("\nboundary values stay at zero:")
for t in (0.2, 0.6, 1.0):
    print(f"  |u({t}, -1)| = {abs(burgers_true(t, -1.0, nu)):.2e}   "
          f"|u({t}, +1)| = {abs(burgers_true(t, 1.0, nu)):.2e}")
