"""Collocation encodings of the bundled problems.

Each problem maps a point to a short list of differential operators, a
per-point residual f_i(z_i) - y_i on the latent values, and an exact
elimination map expressing the dependent latent entry in terms of the
free ones so the equation holds exactly at the point.

Problems:

* ``elliptic``: -lap(u) + u^3 = f on (0,1)^2, u = 0 on the boundary.
* ``burgers``:  u_t + u u_x - nu u_xx = 0 on [0,1] x [-1,1] with
  u(0, x) = -sin(pi x) and u(t, +-1) = 0.  Boundary samples live on the
  initial slice and the two lateral lines (the final slice t = 1 carries
  no condition); each boundary point lands on a component with
  probability proportional to the component's length.
* ``linear``:   a 1-D identity-observation problem (f_i(z) = z) used by
  the stability and convergence diagnostics, where everything is convex.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import IDENTITY, LAPLACIAN, DiffOp, Functional, first_deriv, second_deriv
from .reference import elliptic_forcing

__all__ = [
    "DomainBox",
    "ProblemSpec",
    "CollocationSet",
    "LatentLayout",
    "elliptic_problem",
    "burgers_problem",
    "linear_problem",
    "sample_collocation",
    "build_functionals",
    "latent_layout",
    "residual",
    "residual_jacobian",
    "eliminate",
    "ResidualMap",
    "residual_map",
]


@dataclass(frozen=True)
class DomainBox:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds must have equal lengths")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box must have positive extent on every axis")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def contains(self, points, strict: bool = False) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        if strict:
            return np.all((pts > lo) & (pts < hi), axis=1)
        return np.all((pts >= lo) & (pts <= hi), axis=1)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: DomainBox
    interior_ops: tuple[DiffOp, ...]
    boundary_ops: tuple[DiffOp, ...]
    pde_params: dict = field(default_factory=dict)

    @property
    def interior_width(self) -> int:
        return len(self.interior_ops)

    @property
    def boundary_width(self) -> int:
        return len(self.boundary_ops)

    def reduced_positions(self, interior: bool) -> tuple[int, ...]:
        """Positions of the free latent entries within a point's block."""
        if not interior:
            return ()
        if self.name == "elliptic":
            return (0,)  # u; the Laplacian entry is eliminated
        if self.name == "burgers":
            return (0, 2, 3)  # u, u_x, u_xx; the time entry is eliminated
        if self.name == "linear":
            return ()  # the identity observation is fully determined
        raise ValueError(f"unknown problem {self.name!r}")


def elliptic_problem() -> ProblemSpec:
    return ProblemSpec(
        name="elliptic",
        domain=DomainBox((0.0, 0.0), (1.0, 1.0)),
        interior_ops=(IDENTITY, LAPLACIAN),
        boundary_ops=(IDENTITY,),
    )


def burgers_problem(nu: float = 0.2) -> ProblemSpec:
    if nu <= 0.0:
        raise ValueError("viscosity must be positive")
    return ProblemSpec(
        name="burgers",
        domain=DomainBox((0.0, -1.0), (1.0, 1.0)),
        interior_ops=(IDENTITY, first_deriv(0), first_deriv(1), second_deriv(1)),
        boundary_ops=(IDENTITY,),
        pde_params={"nu": float(nu)},
    )


def linear_problem() -> ProblemSpec:
    return ProblemSpec(
        name="linear",
        domain=DomainBox((0.0,), (1.0,)),
        interior_ops=(IDENTITY,),
        boundary_ops=(),
    )


@dataclass
class CollocationSet:
    interior_points: np.ndarray
    boundary_points: np.ndarray
    y: np.ndarray

    @property
    def n_interior(self) -> int:
        return self.interior_points.shape[0]

    @property
    def n_total(self) -> int:
        return self.n_interior + self.boundary_points.shape[0]

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.interior_points, self.boundary_points])

    def point(self, i: int) -> np.ndarray:
        if i < self.n_interior:
            return self.interior_points[i]
        return self.boundary_points[i - self.n_interior]

    def is_interior(self, i: int) -> bool:
        return i < self.n_interior


def _sample_interior(rng: np.random.Generator, box: DomainBox, n: int) -> np.ndarray:
    lo = np.asarray(box.lower)
    hi = np.asarray(box.upper)
    pts = lo + (hi - lo) * rng.random((n, box.dimension))
    # rng.random() can hit 0.0; resample the (measure-zero) offenders
    while True:
        bad = ~box.contains(pts, strict=True)
        if not bad.any():
            return pts
        pts[bad] = lo + (hi - lo) * rng.random((int(bad.sum()), box.dimension))


def _sample_boundary_elliptic(rng: np.random.Generator, n: int) -> np.ndarray:
    # perimeter walk of the unit square; edges have equal length
    s = 4.0 * rng.random(n)
    pts = np.empty((n, 2))
    for i, si in enumerate(s):
        edge, frac = int(si), si - int(si)
        if edge == 0:
            pts[i] = (frac, 0.0)
        elif edge == 1:
            pts[i] = (1.0, frac)
        elif edge == 2:
            pts[i] = (1.0 - frac, 1.0)
        else:
            pts[i] = (0.0, 1.0 - frac)
    return pts


def _sample_boundary_burgers(rng: np.random.Generator, n: int) -> np.ndarray:
    # components: {t=0} x [-1,1] (length 2), {x=-1} and {x=+1} (length 1 each)
    comp = rng.choice(3, size=n, p=[0.5, 0.25, 0.25])
    pts = np.empty((n, 2))
    u = rng.random(n)
    for i in range(n):
        if comp[i] == 0:
            pts[i] = (0.0, -1.0 + 2.0 * u[i])
        elif comp[i] == 1:
            pts[i] = (u[i], -1.0)
        else:
            pts[i] = (u[i], 1.0)
    return pts


def _data_vector(problem: ProblemSpec, interior: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    if problem.name == "elliptic":
        y_int = np.asarray(elliptic_forcing(interior), dtype=float)
        y_bd = np.zeros(boundary.shape[0])
    elif problem.name == "burgers":
        y_int = np.zeros(interior.shape[0])
        y_bd = np.where(
            boundary[:, 0] == 0.0, -np.sin(np.pi * boundary[:, 1]), 0.0
        )
    elif problem.name == "linear":
        y_int = np.sin(2.0 * np.pi * interior[:, 0])
        y_bd = np.zeros(boundary.shape[0])
    else:
        raise ValueError(f"unknown problem {problem.name!r}")
    return np.concatenate([y_int, y_bd])


def sample_collocation(
    problem: ProblemSpec, n_total: int, n_interior: int, rng_seed: int
) -> CollocationSet:
    """Draw interior points uniformly in the open domain and the rest on the boundary."""
    if not 1 <= n_interior <= n_total:
        raise ValueError(f"need 1 <= n_interior <= n_total, got {n_interior}/{n_total}")
    n_boundary = n_total - n_interior
    if n_boundary > 0 and not problem.boundary_ops:
        raise ValueError(f"problem {problem.name!r} has no boundary conditions")
    rng = np.random.default_rng(rng_seed)
    interior = _sample_interior(rng, problem.domain, n_interior)
    if n_boundary == 0:
        boundary = np.empty((0, problem.domain.dimension))
    elif problem.name == "elliptic":
        boundary = _sample_boundary_elliptic(rng, n_boundary)
    elif problem.name == "burgers":
        boundary = _sample_boundary_burgers(rng, n_boundary)
    else:
        raise ValueError(f"unknown problem {problem.name!r}")
    y = _data_vector(problem, interior, boundary)
    return CollocationSet(interior_points=interior, boundary_points=boundary, y=y)


@dataclass(frozen=True)
class LatentLayout:
    """Point-major layout of the global latent vector and its reduced counterpart."""

    offsets: np.ndarray
    widths: np.ndarray
    reduced_offsets: np.ndarray
    reduced_widths: np.ndarray

    @property
    def total(self) -> int:
        return int(self.offsets[-1] + self.widths[-1]) if len(self.widths) else 0

    @property
    def reduced_total(self) -> int:
        if not len(self.reduced_widths):
            return 0
        return int(self.reduced_offsets[-1] + self.reduced_widths[-1])

    def block(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i] + self.widths[i]))

    def reduced_block(self, i: int) -> slice:
        return slice(
            int(self.reduced_offsets[i]),
            int(self.reduced_offsets[i] + self.reduced_widths[i]),
        )


def latent_layout(problem: ProblemSpec, colloc: CollocationSet) -> LatentLayout:
    n = colloc.n_total
    widths = np.empty(n, dtype=int)
    reduced = np.empty(n, dtype=int)
    for i in range(n):
        interior = colloc.is_interior(i)
        widths[i] = problem.interior_width if interior else problem.boundary_width
        reduced[i] = len(problem.reduced_positions(interior))
    offsets = np.concatenate([[0], np.cumsum(widths)[:-1]])
    reduced_offsets = np.concatenate([[0], np.cumsum(reduced)[:-1]])
    return LatentLayout(
        offsets=offsets,
        widths=widths,
        reduced_offsets=reduced_offsets,
        reduced_widths=reduced,
    )


def build_functionals(problem: ProblemSpec, colloc: CollocationSet) -> list[Functional]:
    """Flattened functional list aligned with the latent layout (point-major)."""
    out: list[Functional] = []
    for i in range(colloc.n_total):
        ops = problem.interior_ops if colloc.is_interior(i) else problem.boundary_ops
        pt = tuple(colloc.point(i))
        out.extend(Functional(pt, op) for op in ops)
    return out


def _check_block(problem: ProblemSpec, colloc: CollocationSet, i: int, z_i) -> np.ndarray:
    z_i = np.asarray(z_i, dtype=float)
    width = problem.interior_width if colloc.is_interior(i) else problem.boundary_width
    if z_i.shape != (width,):
        raise ValueError(f"latent block for point {i} must have width {width}")
    return z_i


def residual(problem: ProblemSpec, colloc: CollocationSet, i: int, z_i) -> float:
    """Pointwise equation residual f_i(z_i) - y_i."""
    z_i = _check_block(problem, colloc, i, z_i)
    y_i = colloc.y[i]
    if not colloc.is_interior(i):
        return float(z_i[0] - y_i)
    if problem.name == "elliptic":
        u, lap = z_i
        return float(-lap + u**3 - y_i)
    if problem.name == "burgers":
        u, ut, ux, uxx = z_i
        nu = problem.pde_params["nu"]
        return float(ut + u * ux - nu * uxx - y_i)
    if problem.name == "linear":
        return float(z_i[0] - y_i)
    raise ValueError(f"unknown problem {problem.name!r}")


def residual_jacobian(problem: ProblemSpec, colloc: CollocationSet, i: int, z_i) -> np.ndarray:
    """Gradient of the pointwise residual with respect to the latent block."""
    z_i = _check_block(problem, colloc, i, z_i)
    if not colloc.is_interior(i):
        return np.array([1.0])
    if problem.name == "elliptic":
        u = z_i[0]
        return np.array([3.0 * u**2, -1.0])
    if problem.name == "burgers":
        u, _, ux, _ = z_i
        nu = problem.pde_params["nu"]
        return np.array([ux, 1.0, u, -nu])
    if problem.name == "linear":
        return np.array([1.0])
    raise ValueError(f"unknown problem {problem.name!r}")


def eliminate(
    problem: ProblemSpec, colloc: CollocationSet, i: int, reduced
) -> tuple[np.ndarray, np.ndarray]:
    """Full latent block with the equation solved exactly, and its Jacobian.

    Returns ``(block, jac)`` where ``jac[a, b] = d block[a] / d reduced[b]``.
    Boundary points (and linear-problem points) have no free entries and
    come back pinned to their data.
    """
    reduced = np.asarray(reduced, dtype=float)
    interior = colloc.is_interior(i)
    n_free = len(problem.reduced_positions(interior))
    if reduced.shape != (n_free,):
        raise ValueError(f"reduced block for point {i} must have width {n_free}")
    y_i = colloc.y[i]
    if not interior or problem.name == "linear":
        return np.array([y_i]), np.zeros((1, 0))
    if problem.name == "elliptic":
        u = reduced[0]
        block = np.array([u, u**3 - y_i])
        jac = np.array([[1.0], [3.0 * u**2]])
        return block, jac
    if problem.name == "burgers":
        u, ux, uxx = reduced
        nu = problem.pde_params["nu"]
        ut = nu * uxx - u * ux + y_i
        block = np.array([u, ut, ux, uxx])
        jac = np.array(
            [
                [1.0, 0.0, 0.0],
                [-ux, -u, nu],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        return block, jac
    raise ValueError(f"unknown problem {problem.name!r}")


class ResidualMap:
    """Callable view of the per-point residuals and their Jacobians."""

    def __init__(self, problem: ProblemSpec, colloc: CollocationSet):
        self.problem = problem
        self.colloc = colloc

    def value(self, i: int, z_i) -> float:
        return residual(self.problem, self.colloc, i, z_i)

    def jacobian(self, i: int, z_i) -> np.ndarray:
        return residual_jacobian(self.problem, self.colloc, i, z_i)


def residual_map(problem: ProblemSpec, colloc: CollocationSet) -> ResidualMap:
    return ResidualMap(problem, colloc)
