"""Mini-batch proximal solver for kernel-collocation problems.

Each iteration draws a batch of collocation points, assembles the batch
Gram matrix with a block-scaled nugget, and solves the reduced proximal
subproblem by Gauss-Newton:

* elimination mode: the free variables are the per-point reduced latent
  entries, the dependent entries are substituted exactly, and the batch
  objective is  (1/2) w(r)^T A^{-1} w(r) + (gamma/2) |w(r) - w_center|^2;
* penalty mode: the variables are the full batch latent entries and the
  objective is  (lambda/2) z^T A^{-1} z + (1/2M) sum |f_i(z_i) - y_i|^2
  + (gamma/2) |z - z_center|^2.

Out-of-batch latent entries never move within a step.  A full-index
version of the same subproblem (prox weight rho) produces the final
representer coefficients, the reduced loss used for run histories, and
the Moreau-envelope gradient rho (z - z_hat) used by the diagnostics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lstsq, solve_triangular

from .batching import Batch, build_index, sample_batch, uniform_batch
from .kernels import IDENTITY, Functional, KernelSpec, cross_gram, gram
from .problems import (
    CollocationSet,
    ProblemSpec,
    build_functionals,
    eliminate,
    latent_layout,
    residual,
    residual_jacobian,
)

__all__ = [
    "ConditioningError",
    "SolverConfig",
    "DiagnosticsConfig",
    "LatentState",
    "BatchSystem",
    "StepRecord",
    "RunHistory",
    "Solver",
    "gauss_newton",
    "stability_probe",
    "elliptic_weak_convexity_constants",
]

_CACHE_MAX_SIDE = 96
_CACHE_MAX_ENTRIES = 1500
_KEEP_MATRIX_MAX_SIDE = 4000


class ConditioningError(RuntimeError):
    """Cholesky or normal-equations failure; carries the attempted nugget."""

    def __init__(self, message: str, eta: float | None = None):
        super().__init__(message)
        self.eta = eta


@dataclass
class SolverConfig:
    eta: float = 1e-13
    gamma: float = 1.0
    rho: float = 1.0
    lambda_reg: float = 1.0
    beta: float = 1.0
    iterations: int = 3000
    batch_size: int = 12
    gn_tol: float = 1e-5
    gn_max_iters: int = 30
    mode: str = "elimination"
    sampler: str = "neighborhood"
    clamp_bound: float | None = None
    seed: int = 0
    record_every: int = 1
    nugget_substitution: bool = True

    def __post_init__(self):
        if self.eta < 0.0:
            raise ValueError("eta must be nonnegative")
        if self.gamma < 0.0:
            raise ValueError("gamma must be nonnegative")
        if self.rho < 0.0:
            raise ValueError("rho must be nonnegative")
        if self.lambda_reg <= 0.0 or self.beta <= 0.0:
            raise ValueError("lambda_reg and beta must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.gn_tol <= 0.0 or self.gn_max_iters < 1:
            raise ValueError("Gauss-Newton settings must be positive")
        if self.mode not in ("elimination", "penalty"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.sampler not in ("neighborhood", "uniform"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.clamp_bound is not None and self.clamp_bound <= 0.0:
            raise ValueError("clamp_bound must be positive when set")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass
class DiagnosticsConfig:
    """Constants for the empirical weak-convexity and descent checks."""

    mu: float
    u_bound: float
    hessian_bound: float
    domain_diameter: float

    def __post_init__(self):
        if min(self.mu, self.u_bound, self.hessian_bound, self.domain_diameter) < 0:
            raise ValueError("diagnostics constants must be nonnegative")


def elliptic_weak_convexity_constants(
    clamp_bound: float, forcing_bound: float
) -> DiagnosticsConfig:
    """mu = U_f * H_f for the cubic residual restricted to |z| <= clamp_bound."""
    u_f = clamp_bound**3 + forcing_bound
    h_f = 6.0 * clamp_bound
    return DiagnosticsConfig(
        mu=u_f * h_f,
        u_bound=u_f,
        hessian_bound=h_f,
        domain_diameter=2.0 * clamp_bound,
    )


@dataclass
class LatentState:
    z: np.ndarray
    k: int = 1

    def copy(self) -> "LatentState":
        return LatentState(z=self.z.copy(), k=self.k)


@dataclass
class BatchSystem:
    """Batch functional list with its nugget-regularized Gram factorization."""

    point_indices: np.ndarray
    functionals: list[Functional]
    chol: tuple
    nugget_scale: np.ndarray
    eta_used: float
    func_slices: list[slice]  # per batch point, rows in the batch vector
    matrix: np.ndarray | None = None
    base_gram: np.ndarray | None = None
    _ainv: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.functionals)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve(self.chol, b, check_finite=False)

    def half_solve(self, b: np.ndarray) -> np.ndarray:
        """L^{-1} b for A = L L^T, so that |L^{-1} b|^2 = b^T A^{-1} b."""
        return solve_triangular(self.chol[0], b, lower=True, check_finite=False)

    def half_inverse(self) -> np.ndarray:
        if self._ainv is None:
            self._ainv = solve_triangular(
                self.chol[0], np.eye(self.size), lower=True, check_finite=False
            )
        return self._ainv


@dataclass
class StepRecord:
    k: int
    psi_quadratic: float
    psi_misfit: float
    batch_objective: float
    gn_iters: int
    wall_ms: float
    flagged: bool = False


@dataclass
class RunHistory:
    records: list[StepRecord]
    final_state: LatentState
    loss_degraded: bool = False

    def loss(self) -> np.ndarray:
        return np.array([r.psi_quadratic + r.psi_misfit for r in self.records])


def _project(v: np.ndarray, bound: float | None) -> np.ndarray:
    if bound is None:
        return v
    return np.clip(v, -bound, bound)


class _EliminationObjective:
    """(1/2) w(r)^T A^{-1} w(r) + (gamma/2) |w(r) - center|^2 over reduced variables.

    The proximal term penalizes the full latent block w(r), eliminated
    entries included; damping only the free coordinates lets the large
    derivative entries swing between iterations and the loss diverges.
    """

    def __init__(self, solver, system, point_indices, red_slices, gamma, center_full, clamp):
        self.solver = solver
        self.system = system
        self.point_indices = point_indices
        self.red_slices = red_slices
        self.gamma = gamma
        self.center = center_full
        self.clamp = clamp
        self.dim = int(red_slices[-1].stop) if red_slices else 0

    def project(self, v):
        return _project(v, self.clamp)

    def _blocks(self, v):
        w = np.empty(self.system.size)
        jacs = []
        for i, fsl, rsl in zip(
            self.point_indices, self.system.func_slices, self.red_slices
        ):
            block, jac = eliminate(self.solver.problem, self.solver.colloc, i, v[rsl])
            w[fsl] = block
            jacs.append(jac)
        return w, jacs

    def _w_jacobian(self, jacs):
        wmat = np.zeros((self.system.size, self.dim))
        for fsl, rsl, jac in zip(self.system.func_slices, self.red_slices, jacs):
            if jac.shape[1]:
                wmat[fsl, rsl] = jac
        return wmat

    def full_vector(self, v):
        return self._blocks(v)[0]

    def value(self, v):
        w, _ = self._blocks(v)
        half_quad = self.system.half_solve(w)
        diff = w - self.center
        return 0.5 * float(half_quad @ half_quad) + 0.5 * self.gamma * float(diff @ diff)

    def residual_stack(self, v):
        w, jacs = self._blocks(v)
        wmat = self._w_jacobian(jacs)
        res_quad = self.system.half_solve(w)
        jac_quad = self.system.half_solve(wmat)
        if self.gamma > 0.0:
            sg = np.sqrt(self.gamma)
            res = np.concatenate([res_quad, sg * (w - self.center)])
            jac = np.vstack([jac_quad, sg * wmat])
        else:
            res, jac = res_quad, jac_quad
        return res, jac


class _PenaltyObjective:
    """(lam/2) z^T A^{-1} z + (1/2M) |f(z) - y|^2 + (gamma/2) |z - center|^2."""

    def __init__(self, solver, system, point_indices, gamma, center, clamp, lam):
        self.solver = solver
        self.system = system
        self.point_indices = point_indices
        self.gamma = gamma
        self.center = center
        self.clamp = clamp
        self.lam = lam
        self.m = len(point_indices)
        self.dim = center.size

    def project(self, v):
        return _project(v, self.clamp)

    def full_vector(self, v):
        return v

    def _misfit(self, v):
        h = np.empty(self.m)
        rows = []
        for j, (i, fsl) in enumerate(zip(self.point_indices, self.system.func_slices)):
            h[j] = residual(self.solver.problem, self.solver.colloc, i, v[fsl])
            rows.append(residual_jacobian(self.solver.problem, self.solver.colloc, i, v[fsl]))
        return h, rows

    def value(self, v):
        half_quad = self.system.half_solve(v)
        h, _ = self._misfit(v)
        diff = v - self.center
        return (
            0.5 * self.lam * float(half_quad @ half_quad)
            + 0.5 / self.m * float(h @ h)
            + 0.5 * self.gamma * float(diff @ diff)
        )

    def residual_stack(self, v):
        h, rows = self._misfit(v)
        sl = np.sqrt(self.lam)
        sm = np.sqrt(1.0 / self.m)
        hmat = np.zeros((self.m, self.dim))
        for j, (fsl, row) in enumerate(zip(self.system.func_slices, rows)):
            hmat[j, fsl] = row
        res_parts = [sl * self.system.half_solve(v), sm * h]
        jac_parts = [sl * self.system.half_inverse(), sm * hmat]
        if self.gamma > 0.0:
            sg = np.sqrt(self.gamma)
            res_parts.append(sg * (v - self.center))
            jac_parts.append(sg * np.eye(self.dim))
        return np.concatenate(res_parts), np.vstack(jac_parts)


def gauss_newton(objective, z0, tol: float, max_iters: int):
    """Damped Gauss-Newton on a reduced proximal subproblem.

    Each step minimizes the linearized objective 1/2 |res + jac @ delta|^2
    by QR least squares on the stacked residual (the normal equations of
    the same subproblem square an already nugget-limited condition number
    and stall the outer iteration on noise).  A step that fails to
    decrease the objective is halved, up to 20 times, before being given
    up.  Stops once the accepted step is shorter than ``tol``.

    Returns ``(z, n_iters, converged)``.
    """
    z = np.asarray(z0, dtype=float).copy()
    if z.size == 0:
        return z, 1, True
    converged = False
    n = 0
    for n in range(1, max_iters + 1):
        res, jac = objective.residual_stack(z)
        step, _, rank, _ = lstsq(
            jac, -res, lapack_driver="gelsy", check_finite=False,
            overwrite_a=True, overwrite_b=True,
        )
        if rank < z.size:
            raise ConditioningError(
                f"rank-deficient Gauss-Newton system (rank {rank} < {z.size})"
            )
        j0 = objective.value(z)
        candidate = objective.project(z + step)
        halvings = 0
        while objective.value(candidate) > j0 and halvings < 20:
            step = 0.5 * step
            candidate = objective.project(z + step)
            halvings += 1
        if objective.value(candidate) > j0:
            candidate = z  # no usable descent direction; stay put
        delta = float(np.linalg.norm(candidate - z))
        z = candidate
        if delta < tol:
            converged = True
            break
    return z, n, converged


class Solver:
    """Shared state for one problem instance: layout, functionals, index, caches."""

    def __init__(
        self,
        problem: ProblemSpec,
        colloc: CollocationSet,
        kernel: KernelSpec,
        config: SolverConfig,
        full_system: BatchSystem | None = None,
    ):
        if kernel.dimension != problem.domain.dimension:
            raise ValueError("kernel and domain dimensions differ")
        if config.batch_size > colloc.n_total:
            raise ValueError("batch size exceeds the number of collocation points")
        self.problem = problem
        self.colloc = colloc
        self.kernel = kernel
        self.config = config
        self.layout = latent_layout(problem, colloc)
        self.functionals = build_functionals(problem, colloc)
        self.index = build_index(colloc.points)
        self._batch_cache: dict[tuple, BatchSystem] = {}
        self._full_system = full_system  # may be shared between sibling solvers
        self._final_cache: dict[tuple, tuple[np.ndarray, LatentState]] = {}

    # ---------------- assembly ----------------

    def _nugget_scale(self, funcs: list[Functional], base: np.ndarray) -> np.ndarray:
        """Block-diagonal scaling: each operator group gets its mean Gram diagonal."""
        scale = np.empty(len(funcs))
        groups: dict = {}
        for j, f in enumerate(funcs):
            groups.setdefault(f.op, []).append(j)
        diag = np.diag(base)
        for positions in groups.values():
            scale[positions] = float(np.mean(diag[positions]))
        return scale

    def assemble_batch(
        self,
        point_indices,
        eta: float | None = None,
        store_base: bool = False,
    ) -> BatchSystem:
        """Gram matrix over the batch functionals plus the scaled nugget.

        Raises :class:`ConditioningError` carrying the attempted eta if the
        Cholesky factorization fails; callers may retry with 10 eta.
        """
        cfg = self.config
        point_indices = np.asarray(point_indices, dtype=int)
        funcs: list[Functional] = []
        slices: list[slice] = []
        pos = 0
        for i in point_indices:
            width = int(self.layout.widths[i])
            off = int(self.layout.offsets[i])
            funcs.extend(self.functionals[off : off + width])
            slices.append(slice(pos, pos + width))
            pos += width
        base = gram(self.kernel, funcs)
        n = base.shape[0]
        if cfg.nugget_substitution:
            eta = cfg.eta if eta is None else eta
            scale = self._nugget_scale(funcs, base)
            a = base + eta * np.diag(scale)
        else:
            eta = 0.0
            scale = np.ones(n)
            a = base + (cfg.lambda_reg * len(point_indices) / cfg.beta) * np.eye(n)
        keep = n <= _KEEP_MATRIX_MAX_SIDE
        try:
            chol = cho_factor(a, lower=True, overwrite_a=not keep)
        except LinAlgError as exc:
            raise ConditioningError(
                f"batch Gram Cholesky failed at eta={eta:g}: {exc}", eta=eta
            ) from exc
        return BatchSystem(
            point_indices=point_indices,
            functionals=funcs,
            chol=chol,
            nugget_scale=scale,
            eta_used=eta,
            func_slices=slices,
            matrix=a if keep else None,
            base_gram=base if store_base else None,
        )

    def _system_for(self, batch: Batch) -> BatchSystem:
        key = tuple(batch.indices.tolist())
        cached = self._batch_cache.get(key)
        if cached is not None:
            return cached
        try:
            system = self.assemble_batch(batch.indices)
        except ConditioningError as exc:
            # one escalation, then propagate
            system = self.assemble_batch(batch.indices, eta=10.0 * (exc.eta or self.config.eta))
        if system.size <= _CACHE_MAX_SIDE and len(self._batch_cache) < _CACHE_MAX_ENTRIES:
            self._batch_cache[key] = system
        return system

    def full_system(self) -> BatchSystem:
        if self._full_system is None:
            all_points = np.arange(self.colloc.n_total)
            try:
                self._full_system = self.assemble_batch(all_points)
            except ConditioningError as exc:
                self._full_system = self.assemble_batch(
                    all_points, eta=10.0 * (exc.eta or self.config.eta)
                )
        return self._full_system

    # ---------------- state handling ----------------

    def initial_state(self) -> LatentState:
        """Reduced unknowns zero, boundary blocks at their data, rest eliminated."""
        z = np.zeros(self.layout.total)
        for i in range(self.colloc.n_total):
            interior = self.colloc.is_interior(i)
            n_free = len(self.problem.reduced_positions(interior))
            block, _ = eliminate(self.problem, self.colloc, i, np.zeros(n_free))
            z[self.layout.block(i)] = block
        return LatentState(z=z, k=1)

    def _gather_reduced(self, z: np.ndarray, point_indices) -> tuple[np.ndarray, list[slice]]:
        parts = []
        slices = []
        pos = 0
        for i in point_indices:
            positions = self.problem.reduced_positions(self.colloc.is_interior(i))
            block = z[self.layout.block(i)]
            parts.append(block[list(positions)])
            slices.append(slice(pos, pos + len(positions)))
            pos += len(positions)
        vec = np.concatenate(parts) if parts else np.empty(0)
        return vec, slices

    def _gather_full(self, z: np.ndarray, point_indices) -> np.ndarray:
        return np.concatenate([z[self.layout.block(i)] for i in point_indices])

    def _scatter_full(self, z: np.ndarray, point_indices, values, slices) -> None:
        for i, sl in zip(point_indices, slices):
            z[self.layout.block(i)] = values[sl]

    # ---------------- proximal solves ----------------

    def _prox_solve(
        self,
        point_indices,
        system: BatchSystem,
        center_z: np.ndarray,
        gamma: float,
        tol: float | None = None,
        max_iters: int | None = None,
    ):
        """Solve one proximal subproblem; returns the new batch latent vector."""
        cfg = self.config
        tol = cfg.gn_tol if tol is None else tol
        max_iters = cfg.gn_max_iters if max_iters is None else max_iters
        if cfg.mode == "elimination":
            start, red_slices = self._gather_reduced(center_z, point_indices)
            center_full = self._gather_full(center_z, point_indices)
            objective = _EliminationObjective(
                self, system, point_indices, red_slices, gamma, center_full,
                cfg.clamp_bound,
            )
        else:
            start = self._gather_full(center_z, point_indices)
            objective = _PenaltyObjective(
                self, system, point_indices, gamma, start, cfg.clamp_bound,
                cfg.lambda_reg,
            )
        v, iters, converged = gauss_newton(objective, start, tol, max_iters)
        batch_vec = objective.full_vector(v)
        info = {
            "gn_iters": iters,
            "converged": converged,
            "objective": objective.value(v),
        }
        return batch_vec, info

    def proximal_step(self, state: LatentState, batch: Batch, system: BatchSystem):
        """One Algorithm-style update: only the batch latent entries move."""
        batch_vec, info = self._prox_solve(
            batch.indices, system, state.z, self.config.gamma
        )
        z = state.z.copy()
        self._scatter_full(z, batch.indices, batch_vec, system.func_slices)
        return LatentState(z=z, k=state.k + 1), info

    # ---------------- loss, final solve, prediction ----------------

    def full_loss_parts(self, state: LatentState) -> tuple[float, float]:
        """Quadratic-form and misfit addends of the reduced loss psi(z)."""
        system = self.full_system()
        zv = state.z
        quad = 0.5 * self.config.lambda_reg * float(zv @ system.solve(zv))
        if self.config.mode == "elimination":
            return quad, 0.0
        n = self.colloc.n_total
        sq = 0.0
        for i in range(n):
            sq += residual(self.problem, self.colloc, i, zv[self.layout.block(i)]) ** 2
        return quad, sq / (2.0 * n)

    def full_loss(self, state: LatentState) -> float:
        quad, misfit = self.full_loss_parts(state)
        return quad + misfit

    def final_solve(
        self,
        state: LatentState,
        rho: float,
        tol: float | None = None,
        max_iters: int | None = None,
    ) -> tuple[np.ndarray, LatentState]:
        """Full-index proximal solve around ``state``; rho = 0 is the plain GP solve.

        Returns the representer coefficients ``(K(phi, phi) + eta R)^{-1} z_hat``
        and the minimizing latent state.
        """
        system = self.full_system()
        all_points = np.arange(self.colloc.n_total)
        batch_vec, _ = self._prox_solve(
            all_points, system, state.z, rho, tol=tol, max_iters=max_iters
        )
        z = state.z.copy()
        self._scatter_full(z, all_points, batch_vec, system.func_slices)
        coeffs = system.solve(z)
        return coeffs, LatentState(z=z, k=state.k)

    def _final_cached(self, state: LatentState, rho: float):
        key = (float(rho), hash(state.z.tobytes()))
        if key not in self._final_cache:
            if len(self._final_cache) > 8:
                self._final_cache.clear()
            self._final_cache[key] = self.final_solve(state, rho)
        return self._final_cache[key]

    def predict(self, x_test, state: LatentState, strategy: str = "full"):
        """Evaluate the recovered function at test points.

        ``full`` uses the cached full-index representer; ``neighborhood``
        solves one proximal problem on the batch of nearest training points
        around each test point (prox weight rho, centered at ``state``).
        """
        pts = np.atleast_2d(np.asarray(x_test, dtype=float))
        scalar = np.asarray(x_test).ndim == 1
        if strategy == "full":
            coeffs, _ = self._final_cached(state, self.config.rho)
            rows = cross_gram(
                self.kernel,
                [Functional(tuple(p), IDENTITY) for p in pts],
                self.functionals,
            )
            vals = rows @ coeffs
        elif strategy == "neighborhood":
            m = min(self.config.batch_size, self.colloc.n_total)
            vals = np.empty(pts.shape[0])
            for j, p in enumerate(pts):
                idx = self.index.query(p, k=m)
                batch = Batch(indices=idx, seed_index=int(idx[0]))
                system = self._system_for(batch)
                batch_vec, _ = self._prox_solve(
                    batch.indices, system, state.z, self.config.rho
                )
                c = system.solve(batch_vec)
                row = cross_gram(
                    self.kernel, [Functional(tuple(p), IDENTITY)], system.functionals
                )[0]
                vals[j] = row @ c
        else:
            raise ValueError(f"unknown prediction strategy {strategy!r}")
        return float(vals[0]) if scalar else vals

    def moreau_gradient(self, state: LatentState, rho: float) -> np.ndarray:
        """Envelope gradient rho (z - z_hat) with z_hat from the full prox."""
        _, z_hat = self.final_solve(state, rho)
        return rho * (state.z - z_hat.z)

    def moreau_envelope(self, state: LatentState, rho: float) -> float:
        """Envelope value min_z psi(z) + (rho/2) |z - state.z|^2."""
        _, z_hat = self.final_solve(state, rho)
        diff = z_hat.z - state.z
        return self.full_loss(z_hat) + 0.5 * rho * float(diff @ diff)

    # ---------------- the driver ----------------

    def _draw_batch(self, rng: np.random.Generator) -> Batch:
        if self.config.sampler == "neighborhood":
            return sample_batch(self.index, rng, self.config.batch_size)
        return uniform_batch(rng, self.colloc.n_total, self.config.batch_size)

    def run(self, seed: int | None = None) -> RunHistory:
        """Execute the configured number of mini-batch proximal iterations.

        ``seed`` overrides the configured seed so sibling realizations can
        share one solver (and its cached factorizations).
        """
        cfg = self.config
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        state = self.initial_state()
        degraded = False
        try:
            self.full_system()
        except ConditioningError:
            degraded = True
        records: list[StepRecord] = []
        for k in range(1, cfg.iterations + 1):
            t0 = time.perf_counter()
            batch = self._draw_batch(rng)
            system = self._system_for(batch)
            state, info = self.proximal_step(state, batch, system)
            record_loss = k == 1 or k == cfg.iterations or k % cfg.record_every == 0
            if record_loss and not degraded:
                quad, misfit = self.full_loss_parts(state)
            elif record_loss:
                quad, misfit = info["objective"], 0.0  # degraded fallback
            else:
                quad, misfit = np.nan, np.nan
            records.append(
                StepRecord(
                    k=k,
                    psi_quadratic=quad,
                    psi_misfit=misfit,
                    batch_objective=info["objective"],
                    gn_iters=info["gn_iters"],
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                    flagged=degraded or not info["converged"],
                )
            )
        return RunHistory(records=records, final_state=state, loss_degraded=degraded)


def _phi_single(
    solver: Solver,
    system: BatchSystem,
    coeffs: np.ndarray,
    z_full: np.ndarray,
    sample: int,
) -> float:
    """Single-sample objective value phi(u, z; xi) for the stability probe."""
    cfg = solver.config
    if system.base_gram is None:
        raise ValueError("stability evaluation needs the base Gram (store_base=True)")
    u_norm_sq = float(coeffs @ system.base_gram @ coeffs)
    off = int(solver.layout.offsets[sample])
    width = int(solver.layout.widths[sample])
    sample_funcs = solver.functionals[off : off + width]
    u_at = cross_gram(solver.kernel, sample_funcs, system.functionals) @ coeffs
    z_i = z_full[solver.layout.block(sample)]
    res = residual(solver.problem, solver.colloc, sample, z_i)
    mismatch = u_at - z_i
    return (
        0.5 * cfg.lambda_reg * u_norm_sq
        + 0.5 * cfg.beta * float(mismatch @ mismatch)
        + 0.5 * res**2
    )


def stability_probe(
    problem: ProblemSpec,
    colloc: CollocationSet,
    kernel: KernelSpec,
    config: SolverConfig,
    m: int,
    trials: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Swap-one stability gaps |phi(u_hat, z_hat; xi') - phi(..._(i); xi')|.

    Each trial draws a uniform batch, replaces one member with a fresh
    uniform sample, solves both proximal problems from the same center,
    and evaluates the single-sample objective at the swapped-in sample.
    Requires penalty mode with the uniform sampler (the regime the
    stability analysis addresses).
    """
    if config.mode != "penalty":
        raise ValueError("stability probe runs in penalty mode")
    solver = Solver(problem, colloc, kernel, config)
    n = colloc.n_total
    base = solver.initial_state().z
    gaps = np.empty(trials)
    for t in range(trials):
        center = base + 0.5 * rng.standard_normal(base.size)
        batch = uniform_batch(rng, n, m)
        indices = batch.indices.copy()
        pos = int(rng.integers(m))
        others = np.delete(indices, pos)
        while True:
            fresh = int(rng.integers(n))
            if fresh not in others:
                break
        swapped = indices.copy()
        swapped[pos] = fresh
        values = []
        for idx_set in (indices, swapped):
            system = solver.assemble_batch(idx_set, store_base=True)
            batch_vec, _ = solver._prox_solve(idx_set, system, center, config.gamma)
            z_full = center.copy()
            solver._scatter_full(z_full, idx_set, batch_vec, system.func_slices)
            coeffs = system.solve(batch_vec)
            values.append(_phi_single(solver, system, coeffs, z_full, fresh))
        gaps[t] = abs(values[0] - values[1])
    return gaps
