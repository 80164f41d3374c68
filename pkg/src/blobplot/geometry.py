"""2D blob geometry: outlier filtering, alpha-shape boundaries, clipped
Voronoi cells, virtual-point sampling and outline smoothing.

Everything here operates in the canonical [0,100]^2 frame. A blob is built
per class: anchors flagged by the local-outlier-factor filter are dropped
(their data counts migrate to the nearest kept anchor), the kept anchors
get a concave alpha-shape boundary, the boundary is partitioned into
Voronoi cells, and virtual points are spread uniformly inside each cell to
stand in for the sub-cluster's data population when overlap is re-measured
in 2D.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError

from . import _kernels
from .errors import ConfigError, DataError

_EPS_AREA = 1e-12
_REACH_EPS = 1e-12  # distance floor guarding duplicate-point densities


@dataclass
class GeometryParams:
    alpha_radius: float | str = "auto"  # circumradius bound, canonical units
    lof_k: int = 20
    lof_threshold: float = 1.5
    smoothing_passes: int = 3
    virtual_cap: int = 20_000
    seed: int = 0
    capsule_radius: float = 2.0  # degenerate-label disk radius

    def __post_init__(self):
        if isinstance(self.alpha_radius, str):
            if self.alpha_radius != "auto":
                raise ConfigError("alpha_radius must be a number or 'auto'")
        elif self.alpha_radius <= 0:
            raise ConfigError("alpha_radius must be > 0")
        if self.lof_k < 2:
            raise ConfigError("lof_k must be >= 2")
        if self.lof_threshold <= 1:
            raise ConfigError("lof_threshold must be > 1")
        if self.smoothing_passes < 0:
            raise ConfigError("smoothing_passes must be >= 0")
        if self.virtual_cap < 1:
            raise ConfigError("virtual_cap must be >= 1")


@dataclass
class CellGeometry:
    """One Voronoi cell clipped to the blob boundary."""

    owner: int                    # global anchor id
    loops: list[np.ndarray]       # pieces; outer CCW, holes CW
    area: float
    bbox: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax


@dataclass
class BlobGeometry:
    label: int
    inlier_anchor_ids: np.ndarray          # global ids owning the cells
    boundary: list[np.ndarray]             # closed loops, CCW outer / CW holes
    cells: list[CellGeometry]
    outline: list[np.ndarray]              # smoothed loops for rendering
    area: float
    cell_counts: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))


@dataclass
class VirtualPointSet:
    points: np.ndarray        # (V, 2)
    owner_anchor: np.ndarray  # (V,) global anchor id
    owner_label: np.ndarray   # (V,)


# ---------------------------------------------------------------------------
# polygon basics
# ---------------------------------------------------------------------------

def polygon_area(loop: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise loops."""
    if len(loop) < 3:
        return 0.0
    x = loop[:, 0]
    y = loop[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns the hull as a CCW loop."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) <= 2:
        return pts

    def half(seq):
        out: list[np.ndarray] = []
        for p in seq:
            while len(out) >= 2:
                u = out[-1] - out[-2]
                v = p - out[-2]
                if u[0] * v[1] - u[1] * v[0] > 0:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


# ---------------------------------------------------------------------------
# local outlier factor
# ---------------------------------------------------------------------------

def lof(points: np.ndarray, k: int) -> np.ndarray:
    """Local outlier factor of every point (Breunig et al. construction).

    The neighborhood of a point is every other point within its k-distance,
    so exact ties at the k-th rank all count. Reachability distances are
    floored at a tiny epsilon so exact duplicates share a finite density
    and score about 1 instead of collapsing to infinity.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n <= k:
        raise ValueError(f"need more than k={k} points, got {n}")
    sq = np.zeros((n, n))
    for t in range(points.shape[1]):
        diff = points[:, t, None] - points[None, :, t]
        sq += diff * diff
    np.fill_diagonal(sq, np.inf)
    kth_d2 = np.partition(sq, k - 1, axis=1)[:, k - 1]
    dist = np.sqrt(sq)
    kdist = np.sqrt(kth_d2)
    neigh = sq <= kth_d2[:, None]

    reach = np.maximum(dist, kdist[None, :])  # reach(i -> o) uses kdist(o)
    reach = np.maximum(reach, _REACH_EPS)
    sizes = neigh.sum(axis=1)
    lrd = sizes / np.where(neigh, reach, 0.0).sum(axis=1)
    scores = np.where(neigh, lrd[None, :], 0.0).sum(axis=1) / sizes / lrd
    return scores


# ---------------------------------------------------------------------------
# alpha shape
# ---------------------------------------------------------------------------

def _circumradii(pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a = pts[tris[:, 0]]
    b = pts[tris[:, 1]]
    c = pts[tris[:, 2]]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(a - c, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    cross = np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) -
                   (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    with np.errstate(divide="ignore"):
        r = np.where(cross > 0, la * lb * lc / (2.0 * cross), np.inf)
    return r


def _connected_and_covering(tris: np.ndarray, keep: np.ndarray,
                            n_points: int) -> bool:
    kept = tris[keep]
    if len(kept) == 0:
        return False
    if len(np.unique(kept)) != n_points:
        return False
    # union-find over triangles sharing an edge
    parent = list(range(len(kept)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edge_owner: dict[tuple[int, int], int] = {}
    for t, tri in enumerate(kept):
        for e in range(3):
            u, v = int(tri[e]), int(tri[(e + 1) % 3])
            key = (u, v) if u < v else (v, u)
            if key in edge_owner:
                ra, rb = find(edge_owner[key]), find(t)
                parent[ra] = rb
            else:
                edge_owner[key] = t
    root = find(0)
    return all(find(t) == root for t in range(len(kept)))


def _orient_ccw(pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a = pts[tris[:, 0]]
    b = pts[tris[:, 1]]
    c = pts[tris[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - \
            (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    out = tris.copy()
    flip = cross < 0
    out[flip, 1], out[flip, 2] = tris[flip, 2], tris[flip, 1]
    return out


def _boundary_loops(pts: np.ndarray, tris: np.ndarray) -> list[np.ndarray]:
    """Stitch directed boundary edges of CCW triangles into closed loops.

    Outer loops come out counter-clockwise and holes clockwise because each
    boundary edge inherits its orientation from its unique triangle.
    """
    tris = _orient_ccw(pts, tris)
    count: dict[tuple[int, int], int] = {}
    for tri in tris:
        for e in range(3):
            u, v = int(tri[e]), int(tri[(e + 1) % 3])
            key = (u, v) if u < v else (v, u)
            count[key] = count.get(key, 0) + 1
    succ: dict[int, list[int]] = {}
    for tri in tris:
        for e in range(3):
            u, v = int(tri[e]), int(tri[(e + 1) % 3])
            key = (u, v) if u < v else (v, u)
            if count[key] == 1:
                succ.setdefault(u, []).append(v)
    for u in succ:
        succ[u].sort(reverse=True)  # pop() yields the lowest target id
    loops = []
    for s in sorted(succ):
        while succ.get(s):
            loop = [s]
            cur = succ[s].pop()
            while cur != s:
                loop.append(cur)
                nxt_list = succ.get(cur)
                if not nxt_list:
                    # open chain: numerically degenerate input; drop it
                    loop = None
                    break
                cur = nxt_list.pop()
            if loop is not None and len(loop) >= 3:
                loops.append(pts[np.array(loop)])
    return loops


def _capsule(points: np.ndarray, radius: float) -> list[np.ndarray]:
    """Fallback blob for degenerate anchor sets: the convex hull of small
    disks centered on every anchor."""
    angles = np.linspace(0.0, 2.0 * np.pi, 32, endpoint=False)
    ring = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    cloud = (points[:, None, :] + ring[None, :, :]).reshape(-1, 2)
    return [convex_hull(cloud)]


def _alpha_shape_full(points: np.ndarray, alpha_radius,
                      capsule_radius: float) -> tuple[list[np.ndarray], np.ndarray]:
    """Boundary loops plus a mask of points covered by kept triangles."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    covered = np.ones(n, dtype=bool)
    uniq, inverse = np.unique(points, axis=0, return_inverse=True)
    if len(uniq) < 3:
        return _capsule(points, capsule_radius), covered
    # collinearity check via the smaller singular value
    centered = uniq - uniq.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[-1] <= 1e-9 * max(svals[0], 1.0):
        return _capsule(points, capsule_radius), covered
    try:
        tri = Delaunay(uniq)
    except QhullError:
        return _capsule(points, capsule_radius), covered
    tris = tri.simplices
    radii = _circumradii(uniq, tris)

    if alpha_radius == "auto":
        levels = np.unique(radii[np.isfinite(radii)])
        if len(levels) == 0:
            return _capsule(points, capsule_radius), covered
        lo, hi = 0, len(levels) - 1
        if not _connected_and_covering(tris, radii <= levels[hi], len(uniq)):
            # even the full complex fails; fall back to everything finite
            keep = np.isfinite(radii)
        else:
            while lo < hi:
                mid = (lo + hi) // 2
                if _connected_and_covering(tris, radii <= levels[mid], len(uniq)):
                    hi = mid
                else:
                    lo = mid + 1
            keep = radii <= levels[lo]
    else:
        keep = radii <= float(alpha_radius)
        if not keep.any():
            raise DataError(
                f"alpha radius {alpha_radius} keeps no triangles (smallest "
                f"circumradius is {radii.min():.6g}); shape is empty"
            )
    loops = _boundary_loops(uniq, tris[keep])
    cov_uniq = np.zeros(len(uniq), dtype=bool)
    cov_uniq[np.unique(tris[keep])] = True
    covered = cov_uniq[inverse]
    return loops, covered


def alpha_shape(points: np.ndarray, alpha_radius,
                capsule_radius: float = 2.0) -> list[np.ndarray]:
    """Concave boundary of `points`: Delaunay triangles with circumradius
    within the bound, boundary edges stitched into closed loops.

    'auto' picks the smallest bound whose kept triangles form one
    edge-connected component covering every point. Fewer than 3 distinct
    or collinear points fall back to a capsule around the points.
    """
    loops, _ = _alpha_shape_full(points, alpha_radius, capsule_radius)
    return loops


# ---------------------------------------------------------------------------
# clipped Voronoi partition
# ---------------------------------------------------------------------------

def clipped_voronoi(anchors: np.ndarray, boundary: list[np.ndarray],
                    owner_ids: np.ndarray | None = None) -> list[CellGeometry]:
    """Voronoi cells of the anchors intersected with the boundary loops.

    Each cell is the set of boundary points whose nearest anchor is the
    cell's owner. Exact duplicate anchors collapse into the first one; the
    later duplicates get empty cells.
    """
    anchors = np.asarray(anchors, dtype=np.float64)
    n = anchors.shape[0]
    if owner_ids is None:
        owner_ids = np.arange(n)
    all_pts = np.concatenate(boundary)
    mins = all_pts.min(axis=0)
    maxs = all_pts.max(axis=0)
    pad = 0.05 * max(maxs[0] - mins[0], maxs[1] - mins[1], 1e-9)
    rect = np.array([
        [mins[0] - pad, mins[1] - pad],
        [maxs[0] + pad, mins[1] - pad],
        [maxs[0] + pad, maxs[1] + pad],
        [mins[0] - pad, maxs[1] + pad],
    ])
    cells: list[CellGeometry] = []
    for i in range(n):
        dup = False
        for j in range(i):
            if anchors[j, 0] == anchors[i, 0] and anchors[j, 1] == anchors[i, 1]:
                dup = True
                break
        if dup:
            cells.append(CellGeometry(int(owner_ids[i]), [], 0.0,
                                      (0.0, 0.0, 0.0, 0.0)))
            continue
        others = np.delete(anchors, i, axis=0)
        d2 = ((others - anchors[i]) ** 2).sum(axis=1)
        order = np.argsort(d2, kind="stable")
        convex = _kernels.halfplane_cell(anchors[i], others, order, rect)
        pieces: list[np.ndarray] = []
        area = 0.0
        if len(convex) >= 3:
            for loop in boundary:
                piece = _kernels.clip_loop_convex(loop, convex)
                if len(piece) >= 3:
                    a = polygon_area(piece)
                    if abs(a) > _EPS_AREA:
                        pieces.append(piece)
                        area += a
        if area <= _EPS_AREA or not pieces:
            cells.append(CellGeometry(int(owner_ids[i]), [], 0.0,
                                      (0.0, 0.0, 0.0, 0.0)))
            continue
        stack = np.concatenate(pieces)
        bbox = (float(stack[:, 0].min()), float(stack[:, 1].min()),
                float(stack[:, 0].max()), float(stack[:, 1].max()))
        cells.append(CellGeometry(int(owner_ids[i]), pieces, float(area), bbox))
    return cells


# ---------------------------------------------------------------------------
# virtual points
# ---------------------------------------------------------------------------

def sample_virtual(cells: list[CellGeometry], counts: np.ndarray,
                   seed: int, owner_label: int = 0) -> VirtualPointSet:
    """Uniform rejection sampling inside each cell, exactly counts[i] points.

    Candidates are drawn uniformly in the cell's bounding box and accepted
    by the even-odd test against the cell's loops. The RNG stream of a cell
    is derived from (seed, owner anchor id), so per-cell work is order- and
    thread-independent.
    """
    total = int(np.sum(counts))
    pts = np.empty((total, 2))
    owner_anchor = np.empty(total, dtype=np.int64)
    w = 0
    for cell, want in zip(cells, counts):
        want = int(want)
        if want == 0:
            continue
        if cell.area <= 0.0 or not cell.loops:
            raise DataError(f"cell of anchor {cell.owner} has no area but "
                            f"{want} points were requested")
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(cell.owner,)))
        xmin, ymin, xmax, ymax = cell.bbox
        span = np.array([xmax - xmin, ymax - ymin])
        base = np.array([xmin, ymin])
        got = 0
        attempts = 0
        while got < want:
            batch = max(64, 2 * (want - got))
            cand = base + rng.random((batch, 2)) * span
            inside = _kernels.points_in_loops(cand, cell.loops)
            attempts += batch
            take = cand[inside]
            if len(take) > want - got:
                take = take[: want - got]
            pts[w + got: w + got + len(take)] = take
            got += len(take)
            if attempts > 1_000_000 and got < attempts * 1e-4:
                raise DataError(
                    f"cell of anchor {cell.owner} is a degenerate sliver: "
                    f"acceptance {got}/{attempts}")
        owner_anchor[w: w + want] = cell.owner
        w += want
    labels = np.full(total, owner_label, dtype=np.int64)
    return VirtualPointSet(points=pts, owner_anchor=owner_anchor,
                           owner_label=labels)


# ---------------------------------------------------------------------------
# outline smoothing
# ---------------------------------------------------------------------------

def smooth_outline(loops: list[np.ndarray], passes: int) -> list[np.ndarray]:
    """Chaikin corner cutting (1/4 - 3/4 rule), `passes` times per loop."""
    out = []
    for loop in loops:
        cur = np.asarray(loop, dtype=np.float64)
        for _ in range(passes):
            nxt = np.roll(cur, -1, axis=0)
            q = 0.75 * cur + 0.25 * nxt
            r = 0.25 * cur + 0.75 * nxt
            cur = np.empty((2 * len(cur), 2))
            cur[0::2] = q
            cur[1::2] = r
        out.append(cur)
    return out


# ---------------------------------------------------------------------------
# blob assembly
# ---------------------------------------------------------------------------

def lof_inliers(coords2d: np.ndarray, params: GeometryParams) -> np.ndarray:
    """Outlier-filter mask: score anchors, drop those over the threshold,
    but never keep fewer than 3 (the lowest scorers survive)."""
    n = coords2d.shape[0]
    if n <= 3:
        return np.ones(n, dtype=bool)
    k = min(params.lof_k, n - 1)
    scores = lof(coords2d, k)
    inlier = scores <= params.lof_threshold
    if inlier.sum() < 3:
        keep = np.argsort(scores, kind="stable")[:3]
        inlier = np.zeros(n, dtype=bool)
        inlier[keep] = True
    return inlier


def build_blob(label: int, coords2d: np.ndarray, anchor_ids: np.ndarray,
               sizes: np.ndarray, params: GeometryParams,
               counts: np.ndarray | None = None,
               inlier_mask: np.ndarray | None = None) -> BlobGeometry:
    """Assemble one class's blob from its anchors' 2D coordinates.

    `coords2d`, `anchor_ids` and `sizes` are parallel arrays for this label
    only; `counts` (defaults to `sizes`) is the virtual-point budget per
    anchor, already scaled by the caller. Outlier anchors keep no cell;
    their budget moves to the nearest kept anchor. `inlier_mask` bypasses
    the outlier filter with a verdict the caller fixed earlier (the
    optimizer freezes the filter at the initial layout so moving an anchor
    on purpose cannot get it dropped mid-run).
    """
    coords2d = np.asarray(coords2d, dtype=np.float64)
    anchor_ids = np.asarray(anchor_ids, dtype=np.int64)
    n = coords2d.shape[0]
    if n == 0:
        raise ValueError(f"label {label} has no anchors")
    if counts is None:
        counts = np.asarray(sizes, dtype=np.int64).copy()
    else:
        counts = np.asarray(counts, dtype=np.int64).copy()

    if inlier_mask is not None:
        inlier = np.asarray(inlier_mask, dtype=bool).copy()
    else:
        inlier = lof_inliers(coords2d, params)

    loops, covered = _alpha_shape_full(coords2d[inlier], params.alpha_radius,
                                       params.capsule_radius)
    # anchors the kept triangles miss cannot own a cell either
    final = inlier.copy()
    final[np.flatnonzero(inlier)[~covered]] = False

    final_idx = np.flatnonzero(final)
    dropped = np.flatnonzero(~final)
    if len(dropped):
        for di in dropped:
            d2 = ((coords2d[final_idx] - coords2d[di]) ** 2).sum(axis=1)
            counts[final_idx[int(np.argmin(d2))]] += counts[di]
            counts[di] = 0

    cells = clipped_voronoi(coords2d[final_idx], loops,
                            owner_ids=anchor_ids[final_idx])
    # a cell can come out empty or as a sliver too thin for rejection
    # sampling (acceptance is area over bounding-box area); merge those
    cell_area = np.empty(len(cells))
    for ci, c in enumerate(cells):
        a = c.area
        if a > 0.0 and c.loops:
            bx = (c.bbox[2] - c.bbox[0]) * (c.bbox[3] - c.bbox[1])
            if bx <= 0.0 or a / bx < 1e-3:
                a = 0.0
        cell_area[ci] = a
        if a == 0.0:
            cells[ci] = CellGeometry(c.owner, [], 0.0, (0.0, 0.0, 0.0, 0.0))
    empty = np.flatnonzero(cell_area <= 0.0)
    if len(empty) and len(empty) < len(cells):
        alive = np.flatnonzero(cell_area > 0.0)
        for e in empty:
            gidx = final_idx[e]
            d2 = ((coords2d[final_idx[alive]] - coords2d[gidx]) ** 2).sum(axis=1)
            target = final_idx[alive[int(np.argmin(d2))]]
            counts[target] += counts[gidx]
            counts[gidx] = 0
    elif len(empty) == len(cells):
        raise DataError(f"label {label}: every Voronoi cell degenerated")

    area = sum(polygon_area(lp) for lp in loops)
    return BlobGeometry(
        label=int(label),
        inlier_anchor_ids=anchor_ids[final_idx],
        boundary=loops,
        cells=cells,
        outline=smooth_outline(loops, params.smoothing_passes),
        area=float(area),
        cell_counts=counts[final_idx],
    )
