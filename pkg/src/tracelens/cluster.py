"""K-means++ seeding, Lloyd refinement, silhouette validation, and the
job/arrival clustering built on top of them.

Points are plain float64 arrays of shape (n, d). All operations are pure
functions of (data, seed): the high-level entry points sort points
lexicographically before seeding, so results do not depend on input order.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError, DegenerateDataError
from .trace_model import JobClass, JobRecord

__all__ = [
    "ClusterModel",
    "JobClassification",
    "ArrivalClusters",
    "kmeanspp_seed",
    "lloyd",
    "silhouette",
    "classify_jobs",
    "sweep_k",
    "cluster_arrivals",
]

DEFAULT_RESTARTS = 10
DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6
# Exact silhouette is O(n^2); above this size a seeded subsample is scored.
SILHOUETTE_EXACT_MAX = 50_000

# Tolerance for the per-iteration "wcss never increases" assertion: exact in
# real arithmetic, so only float rounding slack is allowed.
_WCSS_SLACK = 1e-9


def as_points(data) -> np.ndarray:
    """Normalize input to a (n, d) float64 array and validate it."""
    pts = np.asarray(data, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
        raise ValueError(f"points must be a non-empty (n, d) array, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("points contain non-finite coordinates")
    return pts


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centers: np.ndarray  # (k, d)
    assignment: np.ndarray  # (n,) int64, values in [0, k)
    wcss: float
    iterations: int
    silhouette_mean: float = 0.0
    silhouette_subsampled: bool = False
    wcss_history: tuple = ()

    def __post_init__(self):
        if self.assignment.size and (self.assignment.min() < 0 or self.assignment.max() >= self.k):
            raise ValueError("assignment indices out of range")
        if self.wcss < 0:
            raise ValueError("wcss must be >= 0")
        if not -1.0 <= self.silhouette_mean <= 1.0:
            raise ValueError("silhouette_mean must be in [-1, 1]")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "centers": self.centers.tolist(),
            "assignment": self.assignment.tolist(),
            "wcss": self.wcss,
            "iterations": self.iterations,
            "silhouette_mean": self.silhouette_mean,
            "silhouette_subsampled": self.silhouette_subsampled,
            "wcss_history": list(self.wcss_history),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClusterModel":
        return cls(
            k=data["k"],
            centers=np.asarray(data["centers"], dtype=np.float64),
            assignment=np.asarray(data["assignment"], dtype=np.int64),
            wcss=data["wcss"],
            iterations=data["iterations"],
            silhouette_mean=data["silhouette_mean"],
            silhouette_subsampled=data["silhouette_subsampled"],
            wcss_history=tuple(data["wcss_history"]),
        )


def _lex_order(pts: np.ndarray) -> np.ndarray:
    """Indices sorting points lexicographically (first coord major)."""
    return np.lexsort(tuple(pts[:, t] for t in range(pts.shape[1] - 1, -1, -1)))


def _distinct_count(pts: np.ndarray) -> int:
    return np.unique(pts, axis=0).shape[0]


def kmeanspp_seed(points, k: int, rng: np.random.Generator) -> np.ndarray:
    """Pick k distinct data points as initial centers.

    The first center is drawn uniformly; each later one is drawn with
    probability proportional to the squared distance to its nearest
    already-chosen center. Points are sorted internally so the draw is a
    function of (data, seed) only, not of input order.
    """
    pts = as_points(points)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    distinct = _distinct_count(pts)
    if k > distinct:
        raise ValueError(f"k={k} exceeds the {distinct} distinct points available")
    pts = pts[_lex_order(pts)]
    n = pts.shape[0]
    centers = np.empty((k, pts.shape[1]), dtype=np.float64)
    centers[0] = pts[int(rng.integers(n))]
    if k == 1:
        return centers
    diff = pts - centers[0]
    d2 = np.einsum("ij,ij->i", diff, diff)
    for c in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            raise ContractError("ran out of distinct points during seeding")
        cum = np.cumsum(d2)
        r = rng.random() * total
        idx = int(np.searchsorted(cum, r, side="right"))
        idx = min(idx, n - 1)
        centers[c] = pts[idx]
        diff = pts - centers[c]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return centers


def lloyd(points, initial_centers, max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL) -> ClusterModel:
    """Alternate nearest-center assignment and mean updates until centers
    move at most `tol` (max Euclidean shift) or `max_iter` is hit.

    An emptied cluster is re-seeded at the point farthest from its assigned
    center, keeping k constant.
    """
    pts = as_points(points)
    centers = np.array(initial_centers, dtype=np.float64)
    if centers.ndim == 1:
        centers = centers[:, None]
    if centers.shape[0] == 0:
        raise ValueError("initial_centers must be non-empty")
    if centers.shape[1] != pts.shape[1]:
        raise ValueError(
            f"dimension mismatch: points are {pts.shape[1]}-d, centers {centers.shape[1]}-d"
        )
    if not np.isfinite(centers).all():
        raise ValueError("initial_centers contain non-finite coordinates")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")

    k = centers.shape[0]
    history: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        assignment, min_sq = kernels.assign_points(pts, centers)
        wcss = float(np.sum(min_sq))
        _check_monotone(history, wcss)
        history.append(wcss)

        sums, counts = kernels.center_sums(pts, assignment, k)
        new_centers = sums / np.maximum(counts, 1)[:, None]
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            far = min_sq.copy()
            for c in empty:
                j = int(np.argmax(far))
                if far[j] <= 0.0:
                    new_centers[c] = centers[c]  # all points sit on centers
                else:
                    new_centers[c] = pts[j]
                    far[j] = -1.0
        movement = float(np.sqrt(np.max(np.einsum("ij,ij->i", new_centers - centers, new_centers - centers))))
        centers = new_centers
        if movement <= tol:
            break

    assignment, min_sq = kernels.assign_points(pts, centers)
    wcss = float(np.sum(min_sq))
    _check_monotone(history, wcss)
    history.append(wcss)
    return ClusterModel(
        k=k,
        centers=centers,
        assignment=assignment,
        wcss=wcss,
        iterations=iterations,
        wcss_history=tuple(history),
    )


def _check_monotone(history: list, wcss: float) -> None:
    if history and wcss > history[-1] + _WCSS_SLACK * max(1.0, history[-1]):
        raise ContractError(
            f"wcss increased from {history[-1]!r} to {wcss!r} during refinement"
        )


def silhouette(points, assignment):
    """Exact silhouette scores: s(i) = (b - a) / max(a, b), with a the mean
    intra-cluster distance and b the best mean distance to another cluster.
    Points in singleton clusters score 0. Returns (scores, mean)."""
    pts = as_points(points)
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.shape[0] != pts.shape[0]:
        raise ValueError("assignment length must match point count")
    if assignment.min() < 0:
        raise ValueError("assignment indices must be >= 0")
    k = int(assignment.max()) + 1
    occupied = np.unique(assignment).size
    if occupied < 2:
        raise ValueError("silhouette requires at least 2 non-empty clusters")
    scores = kernels.silhouette_scores(pts, assignment, k)
    return scores, float(scores.mean())


def _model_silhouette(pts: np.ndarray, model: ClusterModel, rng: np.random.Generator) -> ClusterModel:
    """Attach a silhouette mean, subsampling above SILHOUETTE_EXACT_MAX."""
    if np.unique(model.assignment).size < 2:
        return model
    n = pts.shape[0]
    if n <= SILHOUETTE_EXACT_MAX:
        scores = kernels.silhouette_scores(pts, model.assignment, model.k)
        return dataclasses.replace(model, silhouette_mean=float(scores.mean()))
    idx = rng.choice(n, size=SILHOUETTE_EXACT_MAX, replace=False)
    idx.sort()
    sub_assign = model.assignment[idx]
    if np.unique(sub_assign).size < 2:
        return model
    scores = kernels.silhouette_scores(pts[idx], sub_assign, model.k)
    return dataclasses.replace(
        model, silhouette_mean=float(scores.mean()), silhouette_subsampled=True
    )


def _best_model(
    sorted_pts: np.ndarray,
    k: int,
    rng: np.random.Generator,
    restarts: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> ClusterModel:
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for _ in range(restarts):
        seeds = kmeanspp_seed(sorted_pts, k, rng)
        model = lloyd(sorted_pts, seeds, max_iter=max_iter, tol=tol)
        if best is None or model.wcss < best.wcss:
            best = model
    return best


def sweep_k(points, k_range, rng: np.random.Generator, restarts: int = DEFAULT_RESTARTS):
    """Fit best-of-`restarts` models for each k in the inclusive range and
    report per-k silhouette means so callers can pick the best k."""
    pts = as_points(points)
    k_min, k_max = int(k_range[0]), int(k_range[-1])
    distinct = _distinct_count(pts)
    if k_min < 2 or k_min > k_max:
        raise ValueError(f"k range must satisfy 2 <= k_min <= k_max, got [{k_min}, {k_max}]")
    if k_max > distinct:
        raise ValueError(f"k_max={k_max} exceeds the {distinct} distinct points available")

    order = _lex_order(pts)
    sorted_pts = np.ascontiguousarray(pts[order])
    results = []
    for k in range(k_min, k_max + 1):
        model = _best_model(sorted_pts, k, rng, restarts)
        model = _model_silhouette(sorted_pts, model, rng)
        assignment = np.empty_like(model.assignment)
        assignment[order] = model.assignment
        results.append((k, dataclasses.replace(model, assignment=assignment)))
    return results


@dataclass(frozen=True)
class JobClassification:
    model: ClusterModel  # in min-max normalized feature space
    labels: tuple  # JobClass per input record
    centers: np.ndarray  # (3, 2) de-normalized (cpu, memory) centers
    counts: tuple
    shares: tuple


def classify_jobs(
    records, rng: np.random.Generator, restarts: int = DEFAULT_RESTARTS
) -> JobClassification:
    """Cluster jobs on (mean_cpu, mean_memory) with k=3 and name the clusters
    MINOR/MEDIOCRE/MAJOR by ascending magnitude of the de-normalized center
    (ties broken by cpu, then memory)."""
    records = list(records)
    if len(records) < 3:
        raise ValueError(f"need at least 3 job records, got {len(records)}")
    pts = as_points([[r.mean_cpu, r.mean_memory] for r in records])
    if _distinct_count(pts) < 3:
        raise DegenerateDataError(
            "fewer than 3 distinct (cpu, memory) points: no tri-modal structure exists"
        )
    mins = pts.min(axis=0)
    ranges = pts.max(axis=0) - mins
    safe_ranges = np.where(ranges > 0, ranges, 1.0)
    normed = (pts - mins) / safe_ranges

    order = _lex_order(normed)
    sorted_pts = np.ascontiguousarray(normed[order])
    model = _best_model(sorted_pts, 3, rng, restarts)

    denorm = model.centers * safe_ranges + mins
    norms = np.hypot(denorm[:, 0], denorm[:, 1])
    rank = np.lexsort((denorm[:, 1], denorm[:, 0], norms))  # ascending magnitude
    relabel = np.empty(3, dtype=np.int64)
    relabel[rank] = np.arange(3)

    sorted_assignment = relabel[model.assignment]
    model = dataclasses.replace(
        model, centers=model.centers[rank], assignment=sorted_assignment
    )
    model = _model_silhouette(sorted_pts, model, rng)

    assignment = np.empty_like(model.assignment)
    assignment[order] = model.assignment
    model = dataclasses.replace(model, assignment=assignment)

    counts = np.bincount(assignment, minlength=3)
    n = len(records)
    return JobClassification(
        model=model,
        labels=tuple(JobClass(int(c)) for c in assignment),
        centers=denorm[rank],
        counts=tuple(int(c) for c in counts),
        shares=tuple(float(c) / n for c in counts),
    )


@dataclass(frozen=True)
class ArrivalClusters:
    model: ClusterModel
    extents_seconds: tuple  # per-cluster (max - min) arrival time


def cluster_arrivals(
    records, k: int, rng: np.random.Generator, restarts: int = DEFAULT_RESTARTS
) -> ArrivalClusters:
    """Cluster 1-D job arrival times (seconds); small per-cluster extents
    indicate bursty arrivals."""
    records = list(records)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(records) < k:
        raise ValueError(f"need at least k={k} records, got {len(records)}")
    seconds = np.array([r.arrival_time / 1e6 for r in records], dtype=np.float64)
    pts = seconds[:, None]
    distinct = _distinct_count(pts)
    if k > distinct:
        raise ValueError(f"k={k} exceeds the {distinct} distinct arrival times")

    order = _lex_order(pts)
    sorted_pts = np.ascontiguousarray(pts[order])
    model = _best_model(sorted_pts, k, rng, restarts)
    if k >= 2:
        model = _model_silhouette(sorted_pts, model, rng)
    assignment = np.empty_like(model.assignment)
    assignment[order] = model.assignment
    model = dataclasses.replace(model, assignment=assignment)

    extents = []
    for c in range(k):
        member_times = seconds[assignment == c]
        extents.append(float(member_times.max() - member_times.min()) if member_times.size else 0.0)
    return ArrivalClusters(model=model, extents_seconds=tuple(extents))
