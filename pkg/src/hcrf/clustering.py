"""Lloyd k-means over descriptor vectors with deterministic k-means++ seeding.

All randomness comes from the package's xorshift64* generator, so identical
(points, k, seed) give bit-identical results.  Assignment ties go to the
lower centroid index; empty clusters are re-seeded with the point farthest
from its currently assigned centroid.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .rng import Xorshift64Star


@dataclass(frozen=True, eq=False)
class ClusterSet:
    centroids: np.ndarray  # (k, dim)
    assignments: np.ndarray  # (n,) int32
    inertia: float

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.centroids, dtype=np.float64))
        a = np.ascontiguousarray(np.asarray(self.assignments, dtype=np.int32))
        if c.ndim != 2:
            raise ArgumentError(f"centroids must be (k, dim), got {c.shape}")
        if a.ndim != 1:
            raise ArgumentError(f"assignments must be 1-D, got {a.shape}")
        if a.size and (a.min() < 0 or a.max() >= c.shape[0]):
            raise ArgumentError("assignment index out of range")
        c.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "assignments", a)

    @property
    def k(self):
        return self.centroids.shape[0]


def _seed_centroids(points, k, rng):
    """k-means++ seeding: first centroid uniform, later ones sampled with
    probability proportional to squared distance from the chosen set."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.next_index(n)]
    nearest_d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(nearest_d2.sum())
        if total > 0.0:
            target = rng.next_double() * total
            idx = int(np.searchsorted(np.cumsum(nearest_d2), target, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = rng.next_index(n)
        centroids[j] = points[idx]
        nearest_d2 = np.minimum(nearest_d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _assign(points, centroids):
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assignments = np.argmin(d2, axis=1).astype(np.int32)
    return assignments, d2


def _fix_empty(points, centroids, assignments, d2, k):
    """Re-seed each empty cluster (ascending index) with the point farthest
    from its assigned centroid; singleton clusters are never robbed."""
    counts = np.bincount(assignments, minlength=k)
    for cluster in np.nonzero(counts == 0)[0]:
        own_d2 = d2[np.arange(points.shape[0]), assignments].copy()
        own_d2[counts[assignments] <= 1] = -1.0
        idx = int(np.argmax(own_d2))
        counts[assignments[idx]] -= 1
        assignments[idx] = cluster
        counts[cluster] = 1
        centroids[cluster] = points[idx]
    return assignments


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100) -> ClusterSet:
    """Lloyd's algorithm with k-means++ seeding.

    Stops at an assignment fixpoint or after max_iter update rounds; within-
    cluster squared distance is asserted non-increasing along the way.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2:
        raise ArgumentError(f"points must be (n, dim), got shape {pts.shape}")
    if k < 1:
        raise ArgumentError("k must be >= 1")
    if pts.shape[0] < k:
        raise ArgumentError(f"need at least k={k} points, got {pts.shape[0]}")
    if max_iter < 1:
        raise ArgumentError("max_iter must be >= 1")

    rng = Xorshift64Star(seed)
    centroids = _seed_centroids(pts, k, rng)
    previous = None
    inertia = None
    converged = False
    for _ in range(max_iter):
        assignments, d2 = _assign(pts, centroids)
        assignments = _fix_empty(pts, centroids, assignments, d2, k)
        new_inertia = float(((pts - centroids[assignments]) ** 2).sum())
        assert inertia is None or new_inertia <= inertia + 1e-9 * max(1.0, abs(inertia)), (
            "k-means inertia increased"
        )
        inertia = new_inertia
        if previous is not None and np.array_equal(assignments, previous):
            converged = True
            break
        previous = assignments
        for cluster in range(k):
            centroids[cluster] = pts[assignments == cluster].mean(axis=0)
    if not converged:
        # max_iter exhausted after an update: one more assignment pass so the
        # returned set satisfies the nearest-centroid invariant.
        assignments, _ = _assign(pts, centroids)
        new_inertia = float(((pts - centroids[assignments]) ** 2).sum())
        assert new_inertia <= inertia + 1e-9 * max(1.0, abs(inertia))
        inertia = new_inertia
    return ClusterSet(centroids, assignments, inertia)


def nearest_cluster(clusters: ClusterSet, descriptor) -> int:
    """Index of the centroid nearest to the descriptor (ties to lower index)."""
    d = np.asarray(descriptor, dtype=np.float64)
    if d.shape != (clusters.centroids.shape[1],):
        raise ArgumentError(
            f"descriptor length {d.size} does not match centroids "
            f"({clusters.centroids.shape[1]})"
        )
    distances = np.sqrt(((clusters.centroids - d) ** 2).sum(axis=1))
    return int(np.argmin(distances))
