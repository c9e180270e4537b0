"""K-means, pseudo-labeling, and the cluster-to-class permutation."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class KMeansResult:
    centers: np.ndarray
    assignments: np.ndarray
    inertia: float
    iterations: int


def _sq_dists(x, centers):
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _plusplus_init(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total == 0.0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def kmeans_fit(x, k, seed=0, max_iter=300, tol=1e-6):
    """Lloyd iterations from k-means++ seeding.

    Stops when relative center movement drops below `tol`. Empty clusters
    are re-seeded from the point farthest from its assigned center.
    Deterministic under `seed`.
    """
    n = x.shape[0]
    if n < k:
        raise ValueError(f"kmeans needs at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)
    centers = _plusplus_init(x, k, rng)
    assignments = np.zeros(n, dtype=np.int64)
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(x, centers)
        assignments = d2.argmin(axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = assignments == j
            if members.any():
                new_centers[j] = x[members].mean(axis=0)
            else:
                farthest = d2[np.arange(n), assignments].argmax()
                new_centers[j] = x[farthest]
        move = np.linalg.norm(new_centers - centers)
        centers = new_centers
        if move <= tol * max(1.0, np.linalg.norm(centers)):
            break
    d2 = _sq_dists(x, centers)
    assignments = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), assignments].sum())
    return KMeansResult(centers=centers, assignments=assignments,
                        inertia=inertia, iterations=it)


def pseudo_labels(p):
    """Row-wise argmax of an assignment matrix; ties go to the lowest index."""
    return np.asarray(p).argmax(axis=1)


def _best_total(counts):
    r, c = linear_sum_assignment(counts, maximize=True)
    return int(counts[r, c].sum())


def hungarian_map(confusion):
    """Count-maximizing bijection predicted-cluster -> true-class.

    `confusion[i, j]` counts samples predicted as cluster i with true
    class j (both 0-based within the unseen range). Among equally optimal
    assignments the lexicographically smallest one is returned.
    """
    confusion = np.asarray(confusion)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {confusion.shape}")
    u = confusion.shape[0]
    best = _best_total(confusion)
    mapping = {}
    free_cols = list(range(u))
    fixed = 0
    for i in range(u):
        for j in sorted(free_cols):
            rest_rows = [r for r in range(i + 1, u)]
            rest_cols = [c for c in free_cols if c != j]
            rest = _best_total(confusion[np.ix_(rest_rows, rest_cols)]) \
                if rest_rows else 0
            if fixed + confusion[i, j] + rest == best:
                mapping[i] = j
                fixed += int(confusion[i, j])
                free_cols.remove(j)
                break
    return mapping
