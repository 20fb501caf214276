"""Spatial index and mini-batch samplers.

Experiments draw a batch as a uniformly random anchor point plus its M-1
nearest neighbors (k-d tree backed); the convergence diagnostics use plain
uniform sampling without replacement, which is what the stability theory
assumes.  Nearest-neighbor ties always break toward the smaller point
index so batches are reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

__all__ = ["Batch", "SpatialIndex", "build_index", "sample_batch", "uniform_batch"]


@dataclass
class Batch:
    indices: np.ndarray
    seed_index: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=int)
        if len(np.unique(self.indices)) != self.indices.size:
            raise ValueError("batch indices must be distinct")
        if self.seed_index not in self.indices:
            raise ValueError("seed index must belong to the batch")

    @property
    def size(self) -> int:
        return int(self.indices.size)


class SpatialIndex:
    """Exact Euclidean k-nearest-neighbor queries over a fixed point set."""

    def __init__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.size == 0:
            raise ValueError("cannot index an empty point set")
        self.points = points
        self._tree = cKDTree(points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def query(self, x, k: int, scale=None) -> np.ndarray:
        """Indices of the k nearest points to ``x``, ties by ascending index.

        ``scale`` optionally rescales coordinates before measuring distance
        (off by default; experiments use raw coordinates).
        """
        if not 1 <= k <= self.n:
            raise ValueError(f"need 1 <= k <= {self.n}, got {k}")
        x = np.asarray(x, dtype=float)
        pts = self.points
        if scale is not None:
            scale = np.asarray(scale, dtype=float)
            dists = np.linalg.norm((pts - x) / scale, axis=1)
            order = np.lexsort((np.arange(self.n), dists))
            return order[:k]
        if k == self.n:
            candidates = np.arange(self.n)
        else:
            kth_dist = np.atleast_1d(self._tree.query(x, k=k)[0])[-1]
            # inflate the radius a hair: extra candidates are harmless, a
            # missed tie is not
            radius = kth_dist * (1.0 + 1e-9) + 1e-300
            candidates = np.asarray(self._tree.query_ball_point(x, radius), dtype=int)
        dists = np.linalg.norm(pts[candidates] - x, axis=1)
        order = np.lexsort((candidates, dists))
        return candidates[order[:k]]


def build_index(points) -> SpatialIndex:
    return SpatialIndex(points)


def sample_batch(index: SpatialIndex, rng: np.random.Generator, m: int, scale=None) -> Batch:
    """Uniform anchor plus its m-1 nearest other points."""
    if not 1 <= m <= index.n:
        raise ValueError(f"need 1 <= m <= {index.n}, got {m}")
    seed = int(rng.integers(index.n))
    if m == 1:
        return Batch(indices=np.array([seed]), seed_index=seed)
    nearest = index.query(index.points[seed], k=m, scale=scale)
    others = nearest[nearest != seed][: m - 1]
    if others.size < m - 1:
        # anchor was crowded out of its own top-m by duplicate coordinates
        wider = index.query(index.points[seed], k=min(index.n, m + 1), scale=scale)
        others = wider[wider != seed][: m - 1]
    return Batch(indices=np.concatenate([[seed], others]), seed_index=seed)


def uniform_batch(rng: np.random.Generator, n: int, m: int) -> Batch:
    """m distinct indices drawn uniformly; the first drawn is the seed."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= {n}, got {m}")
    indices = rng.choice(n, size=m, replace=False)
    return Batch(indices=indices, seed_index=int(indices[0]))
