"""Gaussian-family kernels and closed-form operator-applied evaluations.

Two kernel families are supported:

* ``gaussian_isotropic``:   k(x, y) = exp(-|x - y|^2 / (2 sigma^2))
* ``gaussian_anisotropic``: k(x, y) = exp(-sum_a (x_a - y_a)^2 / sigma_a^2)

Note the two conventions differ: the isotropic family carries the 1/2
factor in the exponent, the anisotropic family does not.  Both are
separable products of one-dimensional Gaussians exp(-r^2 / c) with
per-axis scale c (2 sigma^2 isotropic, sigma_a^2 anisotropic), so every
derivative entry is a product of Hermite-polynomial factors.  That is
what :func:`eval_op_k` evaluates; no automatic differentiation is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "UnsupportedOperatorError",
    "KernelSpec",
    "DiffOp",
    "Functional",
    "IDENTITY",
    "LAPLACIAN",
    "first_deriv",
    "second_deriv",
    "eval_k",
    "eval_op_k",
    "gram",
    "cross_row",
    "cross_gram",
]

ISOTROPIC = "gaussian_isotropic"
ANISOTROPIC = "gaussian_anisotropic"


class UnsupportedOperatorError(ValueError):
    """Raised for operator/kernel pairings outside the supported set."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus lengthscales.

    ``lengthscales`` holds a single sigma for the isotropic family and one
    sigma per axis for the anisotropic family.
    """

    family: str
    lengthscales: tuple[float, ...]
    dimension: int

    def __post_init__(self):
        if self.family not in (ISOTROPIC, ANISOTROPIC):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        scales = tuple(float(s) for s in self.lengthscales)
        object.__setattr__(self, "lengthscales", scales)
        if any(s <= 0.0 for s in scales):
            raise ValueError("all lengthscales must be strictly positive")
        if self.family == ISOTROPIC and len(scales) != 1:
            raise ValueError("isotropic family takes exactly one lengthscale")
        if self.family == ANISOTROPIC and len(scales) != self.dimension:
            raise ValueError(
                "anisotropic family needs one lengthscale per axis "
                f"({len(scales)} given for dimension {self.dimension})"
            )

    def axis_scales(self) -> np.ndarray:
        """Per-axis scale c_a of the factor exp(-r^2 / c_a)."""
        if self.family == ISOTROPIC:
            return np.full(self.dimension, 2.0 * self.lengthscales[0] ** 2)
        return np.array([s**2 for s in self.lengthscales])


@dataclass(frozen=True)
class DiffOp:
    """Differential operator tag: identity, first/second derivative, Laplacian."""

    tag: str
    axis: int | None = None

    def __post_init__(self):
        if self.tag in ("identity", "laplacian"):
            if self.axis is not None:
                raise ValueError(f"{self.tag} takes no axis")
        elif self.tag in ("first", "second"):
            if self.axis is None or self.axis < 0:
                raise ValueError(f"{self.tag} needs a nonnegative axis")
        else:
            raise UnsupportedOperatorError(f"unknown operator tag {self.tag!r}")

    def sort_key(self) -> tuple[int, int]:
        rank = {"identity": 0, "first": 1, "second": 2, "laplacian": 3}[self.tag]
        return (rank, -1 if self.axis is None else self.axis)


IDENTITY = DiffOp("identity")
LAPLACIAN = DiffOp("laplacian")


def first_deriv(axis: int) -> DiffOp:
    return DiffOp("first", axis)


def second_deriv(axis: int) -> DiffOp:
    return DiffOp("second", axis)


@dataclass(frozen=True)
class Functional:
    """Point evaluation of a differential operator: delta_x composed with op."""

    point: tuple[float, ...]
    op: DiffOp

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))


def _check_point(spec: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dimension,):
        raise ValueError(
            f"point of shape {x.shape} does not match kernel dimension {spec.dimension}"
        )
    return x


def _op_terms(op: DiffOp, dim: int) -> list[np.ndarray]:
    """Expand an operator into per-axis derivative-order vectors."""
    if op.tag == "identity":
        return [np.zeros(dim, dtype=int)]
    if op.tag == "first" or op.tag == "second":
        if op.axis >= dim:
            raise UnsupportedOperatorError(
                f"axis {op.axis} out of range for dimension {dim}"
            )
        orders = np.zeros(dim, dtype=int)
        orders[op.axis] = 1 if op.tag == "first" else 2
        return [orders]
    if op.tag == "laplacian":
        terms = []
        for axis in range(dim):
            orders = np.zeros(dim, dtype=int)
            orders[axis] = 2
            terms.append(orders)
        return terms
    raise UnsupportedOperatorError(f"unknown operator tag {op.tag!r}")


def _hermite(n: int, u: np.ndarray) -> np.ndarray:
    # Physicists' Hermite polynomials; d^n/du^n exp(-u^2) = (-1)^n H_n(u) exp(-u^2).
    if n == 1:
        return 2.0 * u
    if n == 2:
        return 4.0 * u * u - 2.0
    if n == 3:
        return u * (8.0 * u * u - 12.0)
    if n == 4:
        u2 = u * u
        return 16.0 * u2 * u2 - 48.0 * u2 + 12.0
    raise UnsupportedOperatorError(f"derivative order {n} not supported")


def _pair_values(
    spec: KernelSpec, op_l: DiffOp, xs: np.ndarray, op_r: DiffOp, ys: np.ndarray
) -> np.ndarray:
    """(L_x (x) L_y) k(x, y) over all pairs of rows of ``xs`` and ``ys``.

    The left operator acts on the first kernel argument, the right on the
    second; differentiating the second argument of exp(-(x-y)^2/c) flips
    the sign of each odd-order factor, which the (-1)^m bookkeeping below
    absorbs.
    """
    dim = spec.dimension
    sqrt_c = np.sqrt(spec.axis_scales())
    u = (xs[:, None, :] - ys[None, :, :]) / sqrt_c
    envelope = np.exp(-np.sum(u * u, axis=-1))
    total = np.zeros(envelope.shape)
    for ml in _op_terms(op_l, dim):
        for mr in _op_terms(op_r, dim):
            orders = ml + mr
            term = np.ones(envelope.shape)
            if ml.sum() % 2 == 1:
                term = -term
            for axis in range(dim):
                k = int(orders[axis])
                if k == 0:
                    continue
                term = term * (_hermite(k, u[:, :, axis]) / sqrt_c[axis] ** k)
            total = total + term
    return total * envelope


def eval_k(spec: KernelSpec, x, y) -> float:
    """Plain kernel value k(x, y)."""
    x = _check_point(spec, x)
    y = _check_point(spec, y)
    return float(_pair_values(spec, IDENTITY, x[None, :], IDENTITY, y[None, :])[0, 0])


def eval_op_k(spec: KernelSpec, op_l: DiffOp, x, op_r: DiffOp, y) -> float:
    """Operator-applied kernel entry (L_x (x) L_y) k(x, y).

    Exact under exchange of (op_l, x) with (op_r, y): arguments are put in
    a canonical order before evaluation so both orderings run the same
    float arithmetic.
    """
    x = _check_point(spec, x)
    y = _check_point(spec, y)
    if op_l.sort_key() > op_r.sort_key():
        op_l, x, op_r, y = op_r, y, op_l, x
    return float(_pair_values(spec, op_l, x[None, :], op_r, y[None, :])[0, 0])


def _group_by_op(functionals) -> list[tuple[DiffOp, np.ndarray, np.ndarray]]:
    """Group functionals by operator, keeping original positions."""
    groups: dict[DiffOp, list[int]] = {}
    for j, f in enumerate(functionals):
        groups.setdefault(f.op, []).append(j)
    out = []
    for op in sorted(groups, key=DiffOp.sort_key):
        idx = np.array(groups[op], dtype=int)
        pts = np.array([functionals[j].point for j in idx], dtype=float)
        out.append((op, idx, pts))
    return out


def gram(spec: KernelSpec, functionals) -> np.ndarray:
    """Gram matrix k(phi, phi) over a sequence of functionals.

    Entries are assembled block-wise by operator group and mirrored, so the
    result is bit-exactly symmetric.
    """
    functionals = list(functionals)
    if not functionals:
        raise ValueError("gram needs a non-empty functional sequence")
    n = len(functionals)
    groups = _group_by_op(functionals)
    a = np.empty((n, n))
    for gi, (op_i, idx_i, pts_i) in enumerate(groups):
        for op_j, idx_j, pts_j in groups[gi:]:
            block = _pair_values(spec, op_i, pts_i, op_j, pts_j)
            if op_i == op_j and idx_i is idx_j:
                # diagonal group: mirror the upper triangle for exact symmetry
                block = np.triu(block) + np.triu(block, 1).T
                a[np.ix_(idx_i, idx_j)] = block
            else:
                a[np.ix_(idx_i, idx_j)] = block
                a[np.ix_(idx_j, idx_i)] = block.T
    return a


def cross_gram(spec: KernelSpec, rows, cols) -> np.ndarray:
    """Rectangular matrix of operator-applied entries between two functional lists."""
    rows = list(rows)
    cols = list(cols)
    out = np.empty((len(rows), len(cols)))
    for op_i, idx_i, pts_i in _group_by_op(rows):
        for op_j, idx_j, pts_j in _group_by_op(cols):
            if op_i.sort_key() <= op_j.sort_key():
                block = _pair_values(spec, op_i, pts_i, op_j, pts_j)
            else:
                block = _pair_values(spec, op_j, pts_j, op_i, pts_i).T
            out[np.ix_(idx_i, idx_j)] = block
    return out


def cross_row(spec: KernelSpec, x, functionals) -> np.ndarray:
    """Row vector k(x, phi): the functionals applied to k(x, .)."""
    x = _check_point(spec, x)
    return cross_gram(spec, [Functional(tuple(x), IDENTITY)], functionals)[0]
