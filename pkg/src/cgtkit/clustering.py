"""Density-based clustering of 2-D points (DBSCAN).

Used to aggregate connector-endpoint candidates during flowchart
reconstruction.  Semantics are pinned down so results are reproducible:

* a core point has at least ``min_pts`` neighbors within ``eps``,
  counting itself;
* clusters are the connected components of the core points under the
  eps-neighbor relation, numbered by the smallest input index of any of
  their core points;
* a non-core point within eps of at least one core point joins the
  cluster of its nearest core point (ties go to the lower-numbered
  cluster); everything else is noise (label ``NOISE`` = -1).

The hot kernel runs under numba when available.  Set ``CGTKIT_NO_NUMBA=1``
to force the pure-numpy path (see ``benchmarks/bench_dbscan.py`` for a
comparison of the two).
"""

from __future__ import annotations

import os

import numpy as np

NOISE = -1

_DISABLED = os.environ.get("CGTKIT_NO_NUMBA", "").lower() in ("1", "true", "yes")

if not _DISABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        _DISABLED = True

if _DISABLED:
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]


class InvalidParamError(ValueError):
    code = "INVALID_PARAM"


@njit(cache=True)
def _dbscan_kernel(pts: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    n = pts.shape[0]
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    eps2 = eps * eps

    # Neighbor counts (inclusive of the point itself).
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            if dx * dx + dy * dy <= eps2:
                counts[i] += 1
    core = counts >= min_pts

    # Flood-fill connected components of core points, seeded in input
    # order so cluster k's smallest core index grows with k.
    comp = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    n_clusters = 0
    for seed in range(n):
        if not core[seed] or comp[seed] >= 0:
            continue
        cid = n_clusters
        n_clusters += 1
        comp[seed] = cid
        top = 0
        stack[top] = seed
        top += 1
        while top > 0:
            top -= 1
            i = stack[top]
            for j in range(n):
                if core[j] and comp[j] < 0:
                    dx = pts[i, 0] - pts[j, 0]
                    dy = pts[i, 1] - pts[j, 1]
                    if dx * dx + dy * dy <= eps2:
                        comp[j] = cid
                        stack[top] = j
                        top += 1

    for i in range(n):
        if core[i]:
            labels[i] = comp[i]
            continue
        best = -1
        best_d = np.inf
        for j in range(n):
            if core[j]:
                dx = pts[i, 0] - pts[j, 0]
                dy = pts[i, 1] - pts[j, 1]
                d2 = dx * dx + dy * dy
                if d2 <= eps2 and (d2 < best_d or (d2 == best_d and comp[j] < best)):
                    best_d = d2
                    best = comp[j]
        if best >= 0:
            labels[i] = best
    return labels


def _dbscan_numpy(pts: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Vectorized fallback with identical semantics to the jitted kernel."""
    n = pts.shape[0]
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    adj = d2 <= eps * eps
    core = adj.sum(axis=1) >= min_pts

    comp = np.full(n, -1, dtype=np.int64)
    n_clusters = 0
    core_idx = np.flatnonzero(core)
    for seed in core_idx:
        if comp[seed] >= 0:
            continue
        cid = n_clusters
        n_clusters += 1
        frontier = [seed]
        comp[seed] = cid
        while frontier:
            i = frontier.pop()
            reach = core_idx[adj[i, core_idx] & (comp[core_idx] < 0)]
            comp[reach] = cid
            frontier.extend(reach.tolist())

    labels[core] = comp[core]
    border = np.flatnonzero(~core)
    if core_idx.size:
        for i in border:
            near = core_idx[adj[i, core_idx]]
            if near.size:
                dist = d2[i, near]
                order = np.lexsort((comp[near], dist))
                labels[i] = comp[near[order[0]]]
    return labels


def dbscan(points, eps: float, min_pts: int, *, use_numba: bool | None = None) -> list[int]:
    """Cluster 2-D points; returns one label per point (NOISE = -1)."""
    if eps <= 0:
        raise InvalidParamError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise InvalidParamError(f"min_pts must be >= 1, got {min_pts}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise InvalidParamError("points must be finite")
    if use_numba is None:
        use_numba = not _DISABLED
    if use_numba and not _DISABLED:
        labels = _dbscan_kernel(pts, float(eps), int(min_pts))
    else:
        labels = _dbscan_numpy(pts, float(eps), int(min_pts))
    return [int(x) for x in labels]
