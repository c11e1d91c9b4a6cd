"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

Set TRACELENS_NUMBA=0 to force the numpy path (e.g. where a JIT compile is
unwanted). Both paths are exported with `_numpy` / `_numba` suffixes so the
benchmark and the equivalence tests can compare them directly.

Numerical notes: the assignment and center-sum kernels accumulate in the
same order on both paths, so cluster models are bit-identical across paths.
Silhouette sums are reassociated for speed (fastmath / blockwise numpy), so
the two paths agree only to float rounding, ~1e-12 relative.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "assign_points",
    "center_sums",
    "silhouette_scores",
    "pareto_ks_scan",
]

_env = os.environ.get("TRACELENS_NUMBA", "1").strip().lower()
_want_numba = _env not in ("0", "false", "off", "no")

try:
    if _want_numba:
        from numba import njit, prange

        NUMBA_ENABLED = True
    else:
        NUMBA_ENABLED = False
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    NUMBA_ENABLED = False

if not NUMBA_ENABLED:  # no-op decorators keep the _numba names importable
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range


# ---------------------------------------------------------------------------
# nearest-center assignment


def assign_points_numpy(points: np.ndarray, centers: np.ndarray, chunk: int = 16384):
    """For each point, index of the nearest center and the squared distance."""
    n = points.shape[0]
    assignment = np.empty(n, dtype=np.int64)
    min_sq = np.empty(n, dtype=np.float64)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        diff = points[lo:hi, None, :] - centers[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        idx = np.argmin(sq, axis=1)
        assignment[lo:hi] = idx
        min_sq[lo:hi] = sq[np.arange(hi - lo), idx]
    return assignment, min_sq


@njit(cache=True)
def assign_points_numba(points, centers):
    n, d = points.shape
    k = centers.shape[0]
    assignment = np.empty(n, dtype=np.int64)
    min_sq = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = 0
        best_sq = np.inf
        for c in range(k):
            sq = 0.0
            for t in range(d):
                diff = points[i, t] - centers[c, t]
                sq += diff * diff
            if sq < best_sq:
                best_sq = sq
                best = c
        assignment[i] = best
        min_sq[i] = best_sq
    return assignment, min_sq


# ---------------------------------------------------------------------------
# per-cluster coordinate sums (Lloyd center update)


def center_sums_numpy(points: np.ndarray, assignment: np.ndarray, k: int):
    n, d = points.shape
    sums = np.empty((k, d), dtype=np.float64)
    for t in range(d):
        sums[:, t] = np.bincount(assignment, weights=points[:, t], minlength=k)
    counts = np.bincount(assignment, minlength=k).astype(np.int64)
    return sums, counts


@njit(cache=True)
def center_sums_numba(points, assignment, k):
    n, d = points.shape
    sums = np.zeros((k, d), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        c = assignment[i]
        counts[c] += 1
        for t in range(d):
            sums[c, t] += points[i, t]
    return sums, counts


# ---------------------------------------------------------------------------
# silhouette: per-point mean distance to every cluster
#
# Points are pre-sorted so each cluster is a contiguous block; the inner
# reductions then run over contiguous memory and vectorize.


def _sil_from_sums(dist_sums, counts, assignment_sorted):
    """Silhouette scores given per-(point, cluster) distance sums."""
    n = dist_sums.shape[0]
    counts_f = counts.astype(np.float64)
    own = assignment_sorted
    own_count = counts_f[own]
    rows = np.arange(n)
    a = np.zeros(n)
    multi = own_count > 1
    a[multi] = dist_sums[rows[multi], own[multi]] / (own_count[multi] - 1.0)

    means = dist_sums / np.where(counts_f == 0, np.inf, counts_f)[None, :]
    means[rows, own] = np.inf
    b = means.min(axis=1)

    scores = np.zeros(n)
    denom = np.maximum(a, b)
    ok = multi & np.isfinite(b) & (denom > 0)
    scores[ok] = (b[ok] - a[ok]) / denom[ok]
    return np.clip(scores, -1.0, 1.0)


def silhouette_sums_numpy(points: np.ndarray, offsets: np.ndarray, chunk: int = 512):
    """dist_sums[i, c] = sum of Euclidean distances from point i to cluster c.

    `points` must be ordered so cluster c occupies rows offsets[c]:offsets[c+1].
    """
    n = points.shape[0]
    k = offsets.shape[0] - 1
    dist_sums = np.empty((n, k), dtype=np.float64)
    starts = np.minimum(offsets[:-1], max(n - 1, 0))
    empty = offsets[:-1] == offsets[1:]
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        diff = points[lo:hi, None, :] - points[None, :, :]
        dists = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        sums = np.add.reduceat(dists, starts, axis=1)
        sums[:, empty] = 0.0
        dist_sums[lo:hi] = sums
    return dist_sums


@njit(cache=True, parallel=True, fastmath=True)
def silhouette_sums_numba(points, offsets):
    n, d = points.shape
    k = offsets.shape[0] - 1
    dist_sums = np.zeros((n, k), dtype=np.float64)
    if d == 2:
        xs = np.ascontiguousarray(points[:, 0])
        ys = np.ascontiguousarray(points[:, 1])
        for i in prange(n):
            xi = xs[i]
            yi = ys[i]
            for c in range(k):
                acc = 0.0
                for j in range(offsets[c], offsets[c + 1]):
                    dx = xi - xs[j]
                    dy = yi - ys[j]
                    acc += np.sqrt(dx * dx + dy * dy)
                dist_sums[i, c] = acc
    elif d == 1:
        xs = np.ascontiguousarray(points[:, 0])
        for i in prange(n):
            xi = xs[i]
            for c in range(k):
                acc = 0.0
                for j in range(offsets[c], offsets[c + 1]):
                    acc += abs(xi - xs[j])
                dist_sums[i, c] = acc
    else:
        for i in prange(n):
            for c in range(k):
                acc = 0.0
                for j in range(offsets[c], offsets[c + 1]):
                    sq = 0.0
                    for t in range(d):
                        diff = points[i, t] - points[j, t]
                        sq += diff * diff
                    acc += np.sqrt(sq)
                dist_sums[i, c] = acc
    return dist_sums


# ---------------------------------------------------------------------------
# Pareto tail: Hill exponent + KS distance for every candidate threshold
#
# xs is sorted ascending; candidate j uses xmin = xs[j] and the strictly
# greater samples xs[j+1:] as the tail.


def pareto_ks_scan_numpy(logs: np.ndarray, suffix_logsum: np.ndarray, cand: np.ndarray):
    n = logs.shape[0]
    alphas = np.empty(cand.shape[0], dtype=np.float64)
    ks = np.empty(cand.shape[0], dtype=np.float64)
    for ci in range(cand.shape[0]):
        j = cand[ci]
        k = n - 1 - j
        tail_logs = logs[j + 1 :]
        alpha = k / (suffix_logsum[j + 1] - k * logs[j])
        fitted = -np.expm1(-alpha * (tail_logs - logs[j]))
        steps = np.arange(1, k + 1, dtype=np.float64) / k
        d_hi = np.abs(steps - fitted)
        d_lo = np.abs(steps - 1.0 / k - fitted)
        alphas[ci] = alpha
        ks[ci] = max(d_hi.max(), d_lo.max())
    return alphas, ks


@njit(cache=True, parallel=True)
def pareto_ks_scan_numba(logs, suffix_logsum, cand):
    n = logs.shape[0]
    m = cand.shape[0]
    alphas = np.empty(m, dtype=np.float64)
    ks = np.empty(m, dtype=np.float64)
    for ci in prange(m):
        j = cand[ci]
        k = n - 1 - j
        log_xmin = logs[j]
        alpha = k / (suffix_logsum[j + 1] - k * log_xmin)
        inv_k = 1.0 / k
        worst = 0.0
        for i in range(k):
            fitted = -np.expm1(-alpha * (logs[j + 1 + i] - log_xmin))
            hi = (i + 1) * inv_k - fitted
            lo = i * inv_k - fitted
            if hi < 0.0:
                hi = -hi
            if lo < 0.0:
                lo = -lo
            if hi > worst:
                worst = hi
            if lo > worst:
                worst = lo
        alphas[ci] = alpha
        ks[ci] = worst
    return alphas, ks


# ---------------------------------------------------------------------------
# dispatchers


def assign_points(points: np.ndarray, centers: np.ndarray):
    if NUMBA_ENABLED:
        return assign_points_numba(points, centers)
    return assign_points_numpy(points, centers)


def center_sums(points: np.ndarray, assignment: np.ndarray, k: int):
    if NUMBA_ENABLED:
        return center_sums_numba(points, assignment, k)
    return center_sums_numpy(points, assignment, k)


def silhouette_scores(points: np.ndarray, assignment: np.ndarray, k: int) -> np.ndarray:
    """Silhouette score per point; singleton-cluster points score 0."""
    n = points.shape[0]
    order = np.argsort(assignment, kind="stable")
    sorted_points = np.ascontiguousarray(points[order], dtype=np.float64)
    sorted_assignment = assignment[order]
    counts = np.bincount(sorted_assignment, minlength=k).astype(np.int64)
    offsets = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    if NUMBA_ENABLED:
        dist_sums = silhouette_sums_numba(sorted_points, offsets)
    else:
        dist_sums = silhouette_sums_numpy(sorted_points, offsets)
    sorted_scores = _sil_from_sums(dist_sums, counts, sorted_assignment)
    scores = np.empty(n, dtype=np.float64)
    scores[order] = sorted_scores
    return scores


def pareto_ks_scan(logs: np.ndarray, suffix_logsum: np.ndarray, cand: np.ndarray):
    if NUMBA_ENABLED:
        return pareto_ks_scan_numba(logs, suffix_logsum, cand)
    return pareto_ks_scan_numpy(logs, suffix_logsum, cand)
