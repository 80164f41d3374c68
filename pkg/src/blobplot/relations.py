"""Directed KNN graphs and the overlap / proximity / confusion matrices.

All relation matrices are row-stochastic fractions of directed KNN edges
between groups (sub-clusters or class labels). The same construction runs
in the original space and in 2D, which is what makes the two comparable.
Neighbor ordering is ascending distance with ties broken by ascending
node id; the Euclidean metric is used throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError


@dataclass
class RelationParams:
    k_overlap: int = 10
    k_proximity: int = 5
    k_confusion: int = 10

    def __post_init__(self):
        for name in ("k_overlap", "k_proximity", "k_confusion"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")


@dataclass(frozen=True)
class KnnGraph:
    """Per-node ordered out-neighbors; -1 / inf padding where the candidate
    pool ran short of k."""

    neighbors: np.ndarray  # (n, k) int64
    dist2: np.ndarray      # (n, k) float64, squared distances
    k: int

    @property
    def n(self) -> int:
        return self.neighbors.shape[0]


def build_knn(points: np.ndarray, k: int, groups: np.ndarray | None = None,
              backend: str | None = None) -> KnnGraph:
    """Exact directed KNN graph over `points`.

    Without `groups`, each point's own id is the only exclusion; 2D inputs
    go through a uniform-grid spatial index, anything else is brute force,
    and both return exactly what brute force would. With `groups`, all
    same-group candidates are excluded (the proximity construction).
    `backend` forces 'grid' or 'brute' for verification runs.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if groups is None:
        if k > n - 1:
            warnings.warn(f"k={k} exceeds the {n - 1} available candidates; "
                          f"out-degree truncated", RuntimeWarning)
        if backend == "grid" or (backend is None and points.shape[1] == 2):
            idx, d2 = _kernels.knn_grid2d(points, k)
        else:
            idx, d2 = _kernels.knn_brute(points, k)
    else:
        groups = np.asarray(groups, dtype=np.int64)
        counts = np.bincount(groups)
        foreign = n - counts[groups]
        if foreign.min(initial=n) <= 0:
            raise ValueError("a group sees zero foreign candidates")
        if foreign.min() < k:
            warnings.warn(f"k={k} exceeds the smallest foreign candidate pool "
                          f"({int(foreign.min())}); out-degree truncated",
                          RuntimeWarning)
        idx, d2 = _kernels.knn_exclude(points, groups, k)
    return KnnGraph(neighbors=idx, dist2=d2, k=int(k))


def edge_counts(graph: KnnGraph, groups: np.ndarray, n_groups: int) -> np.ndarray:
    """Directed edge counts aggregated by (source group, target group)."""
    groups = np.asarray(groups, dtype=np.int64)
    src = np.repeat(groups, graph.neighbors.shape[1])
    dst = graph.neighbors.ravel()
    valid = dst >= 0
    pairs = src[valid] * n_groups + groups[dst[valid]]
    counts = np.bincount(pairs, minlength=n_groups * n_groups)
    return counts.reshape(n_groups, n_groups).astype(np.float64)


def _row_normalize(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=1, keepdims=True)
    if (totals == 0).any():
        warnings.warn("group with no out-edges: its matrix row stays zero",
                      RuntimeWarning)
    safe = np.where(totals == 0, 1.0, totals)
    return counts / safe


def anchor_overlap(graph: KnnGraph, assignment: np.ndarray,
                   n_subclusters: int) -> np.ndarray:
    """Sub-cluster level overlap: the fraction of each sub-cluster's
    directed KNN edges that land in every other sub-cluster (self included)."""
    return _row_normalize(edge_counts(graph, assignment, n_subclusters))


def label_overlap(graph: KnnGraph, labels: np.ndarray,
                  n_labels: int) -> np.ndarray:
    """Class-level overlap: same edge fractions grouped by label."""
    return _row_normalize(edge_counts(graph, labels, n_labels))


def proximity(anchors: np.ndarray, anchor_label: np.ndarray,
              k_proximity: int) -> np.ndarray:
    """Class-level proximity from a KNN graph over the anchors with
    same-label edges forbidden. The diagonal is exactly zero."""
    anchor_label = np.asarray(anchor_label, dtype=np.int64)
    n_labels = int(anchor_label.max()) + 1
    if n_labels < 2:
        raise ValueError("proximity requires at least 2 labels")
    graph = build_knn(np.asarray(anchors, dtype=np.float64), k_proximity,
                      groups=anchor_label)
    return _row_normalize(edge_counts(graph, anchor_label, n_labels))


def mae(high: np.ndarray, low: np.ndarray) -> tuple[float, tuple[int, int]]:
    """Maximum absolute entry-wise difference and its first (row-major)
    argmax position."""
    high = np.asarray(high, dtype=np.float64)
    low = np.asarray(low, dtype=np.float64)
    if high.shape != low.shape:
        raise ValueError(f"shape mismatch: {high.shape} vs {low.shape}")
    diff = np.abs(high - low)
    flat = int(np.argmax(diff))
    i, j = divmod(flat, diff.shape[1])
    return float(diff[i, j]), (i, j)


def knn_confusion(points: np.ndarray, labels: np.ndarray, n_labels: int,
                  k_confusion: int) -> np.ndarray:
    """Leave-one-out KNN classifier confusion matrix.

    Majority vote among the k nearest neighbors; vote ties go to the class
    with the smallest summed neighbor distance, then to the lowest label id.
    Entry (i, j) is the fraction of class-i points predicted as j.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = points.shape[0]
    counts = np.bincount(labels, minlength=n_labels)
    if (counts <= 1).any():
        raise ValueError("every class needs more than one point")
    self_groups = np.arange(n, dtype=np.int64)
    idx, d2 = _kernels.knn_exclude(points, self_groups, k_confusion)
    conf = np.zeros((n_labels, n_labels))
    dist = np.sqrt(d2)
    for i in range(n):
        nbrs = idx[i]
        valid = nbrs >= 0
        nl = labels[nbrs[valid]]
        nd = dist[i][valid]
        votes = np.bincount(nl, minlength=n_labels)
        top = votes.max()
        tied = np.flatnonzero(votes == top)
        if tied.size == 1:
            pred = int(tied[0])
        else:
            sums = np.array([nd[nl == t].sum() for t in tied])
            pred = int(tied[np.argmin(sums)])
        conf[labels[i], pred] += 1.0
    return conf / counts[:, None]


def write_matrix(path: str, matrix: np.ndarray, names: list[str]) -> None:
    """First line: comma-joined names; then row-major full-precision values."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(names) + "\n")
        for row in np.asarray(matrix, dtype=np.float64):
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix(path: str) -> tuple[np.ndarray, list[str]]:
    with open(path, "r", encoding="utf-8") as f:
        names = f.readline().rstrip("\n").split(",")
        rows = [[float(c) for c in ln.split(",")] for ln in f if ln.strip()]
    return np.array(rows), names
