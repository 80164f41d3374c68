"""Per-class BIRCH sub-clustering.

Each class is reduced independently with a single-pass CF-tree: points are
absorbed into the nearest leaf entry whenever the merged entry's RMS radius
stays within the threshold, otherwise they open a new entry; nodes split by
farthest-pair seeding when they exceed the branching factor. Only the tree
build phase is implemented; there is no global refinement pass. The leaf
centroids ("anchors") sample each class with roughly uniform areal density
regardless of how the point density varies, which is what the rest of the
pipeline relies on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class BirchParams:
    threshold: float | str = "auto"
    branching: int = 50
    auto_target: tuple[int, int] = (20, 60)
    max_bisect: int = 20

    def __post_init__(self):
        if isinstance(self.threshold, str):
            if self.threshold != "auto":
                raise ConfigError(f"threshold must be a number or 'auto', "
                                  f"got {self.threshold!r}")
        elif self.threshold <= 0:
            raise ConfigError("threshold must be > 0")
        if self.branching < 2:
            raise ConfigError("branching factor must be >= 2")
        lo, hi = self.auto_target
        if lo > hi or lo < 3:
            raise ConfigError("auto_target must satisfy 3 <= lo <= hi")


class CFEntry:
    """Clustering feature: point count, linear sum, squared-norm sum.

    Merging two entries adds the three fields; centroid and RMS radius are
    recovered in O(D) from the sums.
    """

    __slots__ = ("n", "ls", "ss", "members")

    def __init__(self, n, ls, ss, members):
        self.n = n
        self.ls = ls
        self.ss = ss
        self.members = members

    @classmethod
    def of_point(cls, x: np.ndarray, idx: int) -> "CFEntry":
        return cls(1, x.copy(), float(x @ x), [idx])

    @property
    def centroid(self) -> np.ndarray:
        return self.ls / self.n

    @property
    def radius(self) -> float:
        c = self.ls / self.n
        # floating cancellation can push the variance a hair below zero
        r2 = self.ss / self.n - float(c @ c)
        return np.sqrt(r2) if r2 > 0.0 else 0.0

    def radius_if_merged(self, x: np.ndarray) -> float:
        n = self.n + 1
        ls = self.ls + x
        ss = self.ss + float(x @ x)
        c = ls / n
        r2 = ss / n - float(c @ c)
        return np.sqrt(r2) if r2 > 0.0 else 0.0

    def absorb(self, x: np.ndarray, idx: int) -> None:
        self.n += 1
        self.ls = self.ls + x
        self.ss += float(x @ x)
        self.members.append(idx)

    def add_entry(self, other: "CFEntry") -> None:
        self.n += other.n
        self.ls = self.ls + other.ls
        self.ss += other.ss


class _Node:
    __slots__ = ("entries", "children")

    def __init__(self, leaf: bool):
        self.entries: list[CFEntry] = []
        self.children: list["_Node"] | None = None if leaf else []

    @property
    def is_leaf(self) -> bool:
        return self.children is None


def _summary(node: _Node) -> CFEntry:
    e0 = node.entries[0]
    s = CFEntry(e0.n, e0.ls.copy(), e0.ss, None)
    for e in node.entries[1:]:
        s.add_entry(e)
    return s


def _split(node: _Node) -> tuple[_Node, _Node]:
    """Farthest-pair seeding; entries go to the nearer seed (ties: first)."""
    cents = np.array([e.ls / e.n for e in node.entries])
    diffs = cents[:, None, :] - cents[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diffs, diffs)
    a, b = np.unravel_index(np.argmax(d2), d2.shape)
    left = _Node(node.is_leaf)
    right = _Node(node.is_leaf)
    for i, e in enumerate(node.entries):
        side = right if d2[i, a] > d2[i, b] else left
        side.entries.append(e)
        if not node.is_leaf:
            side.children.append(node.children[i])
    return left, right


class _CFTree:
    def __init__(self, threshold: float, branching: int):
        self.t = threshold
        self.b = branching
        self.root = _Node(leaf=True)

    def insert(self, x: np.ndarray, idx: int) -> None:
        res = self._insert(self.root, x, idx)
        if res is not None:
            left, right = res
            new_root = _Node(leaf=False)
            new_root.entries = [_summary(left), _summary(right)]
            new_root.children = [left, right]
            self.root = new_root

    def _insert(self, node: _Node, x, idx):
        if node.is_leaf:
            if node.entries:
                cents = np.array([e.ls / e.n for e in node.entries])
                d2 = ((cents - x) ** 2).sum(axis=1)
                j = int(np.argmin(d2))
                if node.entries[j].radius_if_merged(x) <= self.t:
                    node.entries[j].absorb(x, idx)
                    return None
            node.entries.append(CFEntry.of_point(x, idx))
        else:
            cents = np.array([e.ls / e.n for e in node.entries])
            d2 = ((cents - x) ** 2).sum(axis=1)
            j = int(np.argmin(d2))
            res = self._insert(node.children[j], x, idx)
            if res is None:
                e = node.entries[j]
                e.n += 1
                e.ls = e.ls + x
                e.ss += float(x @ x)
            else:
                left, right = res
                node.entries[j] = _summary(left)
                node.children[j] = left
                node.entries.insert(j + 1, _summary(right))
                node.children.insert(j + 1, right)
        if len(node.entries) > self.b:
            return _split(node)
        return None

    def leaves(self) -> list[CFEntry]:
        out: list[CFEntry] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.extend(node.entries)
            else:
                stack.extend(reversed(node.children))
        return out


def birch_fit(points: np.ndarray, threshold: float,
              branching: int = 50) -> tuple[list[CFEntry], np.ndarray]:
    """Build the CF-tree over `points` in row order.

    Returns the leaf entries (left-to-right tree order) and the per-point
    entry assignment. Always succeeds; the worst case is one leaf per point.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a non-empty 2D matrix")
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    tree = _CFTree(float(threshold), int(branching))
    for i in range(points.shape[0]):
        tree.insert(points[i], i)
    entries = tree.leaves()
    assignment = np.empty(points.shape[0], dtype=np.int64)
    for j, e in enumerate(entries):
        assignment[e.members] = j
    return entries, assignment


@dataclass(frozen=True)
class SubClustering:
    """Every class reduced to radius-bounded sub-clusters with centroids."""

    assignment: np.ndarray    # (N,) global sub-cluster id per data row
    anchors: np.ndarray       # (N_A, D) sub-cluster centroids
    anchor_label: np.ndarray  # (N_A,) class index per anchor
    sizes: np.ndarray         # (N_A,) member counts
    radii: np.ndarray         # (N_A,) RMS distance to centroid
    threshold: float          # shared radius bound actually used
    threshold_converged: bool = True

    @property
    def n_anchors(self) -> int:
        return self.anchors.shape[0]

    def anchor_ids_of(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.anchor_label == label)


def _fit_all_classes(ds, threshold: float, branching: int):
    per_class = []
    for c in range(ds.m):
        rows = np.flatnonzero(ds.labels == c)
        entries, local = birch_fit(ds.points[rows], threshold, branching)
        per_class.append((rows, entries, local))
    return per_class


def _median_count(per_class) -> float:
    return float(np.median([len(entries) for _, entries, _ in per_class]))


def subcluster_dataset(ds, params: BirchParams) -> SubClustering:
    """Fit one CF-tree per class with a shared global threshold.

    With ``threshold='auto'`` the threshold is found by bisection so the
    median per-class anchor count lands inside ``params.auto_target``; if
    the search exhausts its budget the closest threshold found is used and
    ``threshold_converged`` is set False.
    """
    converged = True
    if params.threshold == "auto":
        t, per_class, converged = _auto_threshold(ds, params)
    else:
        t = float(params.threshold)
        per_class = _fit_all_classes(ds, t, params.branching)

    anchors, anchor_label, sizes, radii = [], [], [], []
    assignment = np.empty(ds.n, dtype=np.int64)
    offset = 0
    for c, (rows, entries, local) in enumerate(per_class):
        assignment[rows] = offset + local
        for e in entries:
            anchors.append(e.centroid)
            anchor_label.append(c)
            sizes.append(e.n)
            radii.append(e.radius)
        offset += len(entries)
    return SubClustering(
        assignment=assignment,
        anchors=np.array(anchors),
        anchor_label=np.array(anchor_label, dtype=np.int64),
        sizes=np.array(sizes, dtype=np.int64),
        radii=np.array(radii),
        threshold=t,
        threshold_converged=converged,
    )


def _auto_threshold(ds, params: BirchParams):
    lo_target, hi_target = params.auto_target
    # bracket: a hair above zero up to the bounding-box diagonal
    span = ds.points.max(axis=0) - ds.points.min(axis=0)
    t_hi = float(np.sqrt(span @ span))
    if t_hi == 0.0:
        t_hi = 1.0
    t_lo = 1e-9 * t_hi

    def band_distance(c):
        if c < lo_target:
            return lo_target - c
        if c > hi_target:
            return c - hi_target
        return 0.0

    best = None  # (distance, t, fits)
    lo, hi = t_lo, t_hi
    for _ in range(params.max_bisect):
        mid = 0.5 * (lo + hi)
        fits = _fit_all_classes(ds, mid, params.branching)
        count = _median_count(fits)
        dist = band_distance(count)
        if best is None or dist < best[0]:
            best = (dist, mid, fits)
        if dist == 0.0:
            return mid, fits, True
        if count > hi_target:
            lo = mid  # too many anchors: grow the radius bound
        else:
            hi = mid
    warnings.warn(
        f"auto threshold search missed the target band {params.auto_target}; "
        f"using closest threshold {best[1]:.6g}",
        RuntimeWarning,
    )
    return best[1], best[2], False


def anchor_stats(sc: SubClustering) -> dict:
    """Read-only summary used by the CLI and by debugging sessions."""
    m = int(sc.anchor_label.max()) + 1 if sc.n_anchors else 0
    per_class = np.bincount(sc.anchor_label, minlength=m)
    hist_vals, hist_edges = np.histogram(sc.sizes, bins=10)
    return {
        "n_points": int(sc.sizes.sum()),
        "n_anchors": int(sc.n_anchors),
        "per_class_counts": per_class.tolist(),
        "size_histogram": {
            "counts": hist_vals.tolist(),
            "edges": [float(e) for e in hist_edges],
        },
        "max_radius": float(sc.radii.max()) if sc.n_anchors else 0.0,
        "threshold": sc.threshold,
        "threshold_converged": sc.threshold_converged,
    }


def dump_anchors(sc: SubClustering, path: str) -> None:
    """Anchor table: id, label, size, radius, then the D coordinates.

    This is the hand-off format for external embedding tools; feed these
    rows to the reducer of your choice and import the 2D result with the
    embedding module's coordinate-import path.
    """
    with open(path, "w", encoding="utf-8") as f:
        d = sc.anchors.shape[1]
        f.write("id,label,size,radius," +
                ",".join(f"c{i}" for i in range(d)) + "\n")
        for j in range(sc.n_anchors):
            cells = [str(j), str(int(sc.anchor_label[j])),
                     str(int(sc.sizes[j])), repr(float(sc.radii[j]))]
            cells += [repr(float(v)) for v in sc.anchors[j]]
            f.write(",".join(cells) + "\n")
