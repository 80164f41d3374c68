"""Hot numeric kernels, JIT-compiled with numba when available.

Each kernel ships in two interchangeable flavors: a numba ``@njit`` loop
implementation and a vectorized pure-numpy fallback. The active backend is
picked once at import time; set ``BLOBPLOT_NO_NUMBA=1`` to force the numpy
path (debugging, or machines without a working numba). ``benchmarks/``
contains a script timing one backend against the other.

Backend parity is a hard requirement, not a nicety: downstream determinism
tests compare full pipeline outputs. All distance computations accumulate
squared differences dimension by dimension in the same order, and all
nearest-neighbor selections order candidates by (squared distance, point id)
so both flavors return bit-identical results.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = os.environ.get("BLOBPLOT_NO_NUMBA", "").strip()
_FORCE_NUMPY = _ENV_FLAG not in ("", "0")

try:
    if _FORCE_NUMPY:
        raise ImportError("numba disabled via BLOBPLOT_NO_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    njit = None
    NUMBA_ENABLED = False


# ---------------------------------------------------------------------------
# k-nearest neighbors, brute force with group exclusion
# ---------------------------------------------------------------------------

def _knn_exclude_numpy(points, groups, k):
    n, d = points.shape
    idx = np.full((n, k), -1, dtype=np.int64)
    d2 = np.full((n, k), np.inf, dtype=np.float64)
    # chunk rows so the (chunk, n) distance block stays around 32 MB
    chunk = max(1, (4 << 20) // max(n, 1))
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        block = np.zeros((e - s, n), dtype=np.float64)
        for t in range(d):
            diff = points[s:e, t, None] - points[None, :, t]
            block += diff * diff
        block[groups[s:e, None] == groups[None, :]] = np.inf
        kk = min(k, n)
        order = np.argsort(block, axis=1, kind="stable")[:, :kk]
        bd = np.take_along_axis(block, order, axis=1)
        valid = np.isfinite(bd)
        idx[s:e, :kk] = np.where(valid, order, -1)
        d2[s:e, :kk] = np.where(valid, bd, np.inf)
    return idx, d2


def _knn_exclude_loops(points, groups, k):
    n, d = points.shape
    idx = np.full((n, k), -1, dtype=np.int64)
    d2 = np.full((n, k), np.inf, dtype=np.float64)
    for i in range(n):
        bi = idx[i]
        bd = d2[i]
        cnt = 0
        for j in range(n):
            if groups[j] == groups[i]:
                continue
            s = 0.0
            for t in range(d):
                diff = points[i, t] - points[j, t]
                s += diff * diff
            if cnt < k or s < bd[k - 1]:
                pos = cnt if cnt < k else k - 1
                while pos > 0 and bd[pos - 1] > s:
                    bd[pos] = bd[pos - 1]
                    bi[pos] = bi[pos - 1]
                    pos -= 1
                bd[pos] = s
                bi[pos] = j
                if cnt < k:
                    cnt += 1
    return idx, d2


# ---------------------------------------------------------------------------
# k-nearest neighbors in 2D via a uniform grid index
# ---------------------------------------------------------------------------

def _knn_grid2d_loops(points, k):
    n = points.shape[0]
    idx = np.full((n, k), -1, dtype=np.int64)
    d2 = np.full((n, k), np.inf, dtype=np.float64)
    if n <= 1:
        return idx, d2
    kk = k if k < n - 1 else n - 1

    xmin = points[0, 0]
    xmax = points[0, 0]
    ymin = points[0, 1]
    ymax = points[0, 1]
    for i in range(n):
        x = points[i, 0]
        y = points[i, 1]
        if x < xmin:
            xmin = x
        if x > xmax:
            xmax = x
        if y < ymin:
            ymin = y
        if y > ymax:
            ymax = y
    span = xmax - xmin
    if ymax - ymin > span:
        span = ymax - ymin
    # aim for ~2 points per cell; degenerate spans collapse to one cell
    ncols = int(np.sqrt(n / 2.0)) + 1
    cell = span / ncols if span > 0.0 else 1.0
    gx = int((xmax - xmin) / cell) + 1
    gy = int((ymax - ymin) / cell) + 1

    cid = np.empty(n, dtype=np.int64)
    counts = np.zeros(gx * gy + 1, dtype=np.int64)
    for i in range(n):
        cx = int((points[i, 0] - xmin) / cell)
        cy = int((points[i, 1] - ymin) / cell)
        if cx >= gx:
            cx = gx - 1
        if cy >= gy:
            cy = gy - 1
        cid[i] = cx * gy + cy
        counts[cid[i] + 1] += 1
    starts = np.cumsum(counts)
    fill = starts[:-1].copy()
    order = np.empty(n, dtype=np.int64)
    for i in range(n):
        order[fill[cid[i]]] = i
        fill[cid[i]] += 1

    max_ring = gx + gy
    for i in range(n):
        qx = points[i, 0]
        qy = points[i, 1]
        cx = int((qx - xmin) / cell)
        cy = int((qy - ymin) / cell)
        if cx >= gx:
            cx = gx - 1
        if cy >= gy:
            cy = gy - 1
        bi = idx[i]
        bd = d2[i]
        cnt = 0
        r = 0
        while r <= max_ring:
            # cells at Chebyshev ring r are at least (r-1)*cell away
            if cnt == kk and r >= 2:
                bound = (r - 1) * cell
                if bound * bound > bd[kk - 1]:
                    break
            x0 = cx - r
            x1 = cx + r
            y0 = cy - r
            y1 = cy + r
            for ux in range(x0, x1 + 1):
                if ux < 0 or ux >= gx:
                    continue
                for uy in range(y0, y1 + 1):
                    if uy < 0 or uy >= gy:
                        continue
                    on_ring = ux == x0 or ux == x1 or uy == y0 or uy == y1
                    if not on_ring:
                        continue
                    c = ux * gy + uy
                    for p in range(starts[c], starts[c + 1]):
                        j = order[p]
                        if j == i:
                            continue
                        dx = qx - points[j, 0]
                        dy = qy - points[j, 1]
                        s = dx * dx + dy * dy
                        if cnt < kk or s < bd[kk - 1] or (
                            s == bd[kk - 1] and j < bi[kk - 1]
                        ):
                            pos = cnt if cnt < kk else kk - 1
                            while pos > 0 and (
                                bd[pos - 1] > s
                                or (bd[pos - 1] == s and bi[pos - 1] > j)
                            ):
                                bd[pos] = bd[pos - 1]
                                bi[pos] = bi[pos - 1]
                                pos -= 1
                            bd[pos] = s
                            bi[pos] = j
                            if cnt < kk:
                                cnt += 1
            r += 1
    return idx, d2


def _knn_grid2d_numpy(points, k):
    # exact results are defined by the brute-force ordering, so the numpy
    # fallback of the grid path simply is the brute-force path
    groups = np.arange(points.shape[0], dtype=np.int64)
    return _knn_exclude_numpy(points, groups, k)


# ---------------------------------------------------------------------------
# even-odd point-in-polygon over a set of loops
# ---------------------------------------------------------------------------

def _points_in_loops_loops(pts, verts, offsets):
    m = pts.shape[0]
    inside = np.zeros(m, dtype=np.bool_)
    nloops = offsets.shape[0] - 1
    for i in range(m):
        px = pts[i, 0]
        py = pts[i, 1]
        hit = False
        for l in range(nloops):
            lo = offsets[l]
            hi = offsets[l + 1]
            nv = hi - lo
            for e in range(nv):
                ax = verts[lo + e, 0]
                ay = verts[lo + e, 1]
                bx = verts[lo + (e + 1) % nv, 0]
                by = verts[lo + (e + 1) % nv, 1]
                if (ay > py) != (by > py):
                    xint = ax + (py - ay) * (bx - ax) / (by - ay)
                    if px < xint:
                        hit = not hit
        inside[i] = hit
    return inside


def _points_in_loops_numpy(pts, verts, offsets):
    m = pts.shape[0]
    if m == 0 or verts.shape[0] == 0:
        return np.zeros(m, dtype=bool)
    a_list = []
    b_list = []
    for l in range(offsets.shape[0] - 1):
        loop = verts[offsets[l]:offsets[l + 1]]
        a_list.append(loop)
        b_list.append(np.roll(loop, -1, axis=0))
    a = np.concatenate(a_list)
    b = np.concatenate(b_list)
    inside = np.zeros(m, dtype=bool)
    chunk = max(1, (4 << 20) // max(a.shape[0], 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        for s in range(0, m, chunk):
            e = min(m, s + chunk)
            px = pts[s:e, 0, None]
            py = pts[s:e, 1, None]
            cond = (a[None, :, 1] > py) != (b[None, :, 1] > py)
            xint = a[None, :, 0] + (py - a[None, :, 1]) * (
                b[None, :, 0] - a[None, :, 0]
            ) / (b[None, :, 1] - a[None, :, 1])
            cross = cond & (px < xint)
            inside[s:e] = (cross.sum(axis=1) % 2).astype(bool)
    return inside


# ---------------------------------------------------------------------------
# polygon clipping primitives
# ---------------------------------------------------------------------------

def _clip_loop_convex_loops(subject, clip, out):
    """Sutherland-Hodgman: clip `subject` (any simple loop) by CCW convex
    `clip`. Writes into `out` and returns the vertex count, or -1 when the
    scratch buffer is too small (caller retries with a larger one)."""
    ns = subject.shape[0]
    nc = clip.shape[0]
    cap = out.shape[0]
    buf_a = out
    buf_b = np.empty_like(out)
    cur = buf_a
    nxt = buf_b
    m = ns
    for i in range(ns):
        cur[i, 0] = subject[i, 0]
        cur[i, 1] = subject[i, 1]
    for e in range(nc):
        ax = clip[e, 0]
        ay = clip[e, 1]
        bx = clip[(e + 1) % nc, 0]
        by = clip[(e + 1) % nc, 1]
        dx = bx - ax
        dy = by - ay
        w = 0
        if m == 0:
            break
        # signed side of each vertex; inside is the left of a CCW edge
        pcx = cur[m - 1, 0]
        pcy = cur[m - 1, 1]
        pcr = dx * (pcy - ay) - dy * (pcx - ax)
        for v in range(m):
            cx = cur[v, 0]
            cy = cur[v, 1]
            cr = dx * (cy - ay) - dy * (cx - ax)
            if w + 2 > cap:
                return -1
            if cr >= 0.0:
                if pcr < 0.0:
                    t = pcr / (pcr - cr)
                    nxt[w, 0] = pcx + t * (cx - pcx)
                    nxt[w, 1] = pcy + t * (cy - pcy)
                    w += 1
                nxt[w, 0] = cx
                nxt[w, 1] = cy
                w += 1
            elif pcr >= 0.0:
                t = pcr / (pcr - cr)
                nxt[w, 0] = pcx + t * (cx - pcx)
                nxt[w, 1] = pcy + t * (cy - pcy)
                w += 1
            pcx = cx
            pcy = cy
            pcr = cr
        tmp = cur
        cur = nxt
        nxt = tmp
        m = w
    if cur is not out:
        for i in range(m):
            out[i, 0] = cur[i, 0]
            out[i, 1] = cur[i, 1]
    return m


def _clip_loop_convex_numpy(subject, clip, out):
    cur = subject.copy()
    nc = clip.shape[0]
    for e in range(nc):
        if cur.shape[0] == 0:
            break
        a = clip[e]
        b = clip[(e + 1) % nc]
        dx = b[0] - a[0]
        dy = b[1] - a[1]
        cr = dx * (cur[:, 1] - a[1]) - dy * (cur[:, 0] - a[0])
        inside = cr >= 0.0
        prev = np.roll(inside, 1)
        prev_pts = np.roll(cur, 1, axis=0)
        prev_cr = np.roll(cr, 1)
        crossing = inside != prev
        with np.errstate(divide="ignore", invalid="ignore"):
            t = prev_cr / (prev_cr - cr)
            ipts = prev_pts + t[:, None] * (cur - prev_pts)
        keys = []
        pts = []
        m = cur.shape[0]
        arange2 = 2 * np.arange(m)
        if crossing.any():
            keys.append(arange2[crossing] - 1)
            pts.append(ipts[crossing])
        if inside.any():
            keys.append(arange2[inside])
            pts.append(cur[inside])
        if not keys:
            cur = np.empty((0, 2))
            continue
        keys = np.concatenate(keys)
        pts = np.concatenate(pts)
        cur = pts[np.argsort(keys, kind="stable")]
    m = cur.shape[0]
    if m > out.shape[0]:
        return -1
    out[:m] = cur
    return m


def _halfplane_cell_loops(site, others, order, rect, out):
    """Convex Voronoi cell of `site` vs `others`, clipped to `rect`.

    `order` lists candidate indices by ascending distance so the loop can
    stop once the remaining bisectors provably miss the shrinking cell.
    Returns the vertex count written into `out`, -1 on buffer overflow.
    """
    cap = out.shape[0]
    m = rect.shape[0]
    buf_a = out
    buf_b = np.empty_like(out)
    cur = buf_a
    nxt = buf_b
    for i in range(m):
        cur[i, 0] = rect[i, 0]
        cur[i, 1] = rect[i, 1]
    sx = site[0]
    sy = site[1]
    for oi in range(order.shape[0]):
        j = order[oi]
        ox = others[j, 0]
        oy = others[j, 1]
        ddx = ox - sx
        ddy = oy - sy
        d2 = ddx * ddx + ddy * ddy
        if d2 == 0.0:
            continue
        # farthest cell vertex from the site bounds all future cuts
        rmax2 = 0.0
        for v in range(m):
            ex = cur[v, 0] - sx
            ey = cur[v, 1] - sy
            e2 = ex * ex + ey * ey
            if e2 > rmax2:
                rmax2 = e2
        if d2 >= 4.0 * rmax2:
            break
        mx = 0.5 * (sx + ox)
        my = 0.5 * (sy + oy)
        w = 0
        pcx = cur[m - 1, 0]
        pcy = cur[m - 1, 1]
        pcr = (pcx - mx) * ddx + (pcy - my) * ddy
        for v in range(m):
            cx = cur[v, 0]
            cy = cur[v, 1]
            cr = (cx - mx) * ddx + (cy - my) * ddy
            if w + 2 > cap:
                return -1
            if cr <= 0.0:
                if pcr > 0.0:
                    t = pcr / (pcr - cr)
                    nxt[w, 0] = pcx + t * (cx - pcx)
                    nxt[w, 1] = pcy + t * (cy - pcy)
                    w += 1
                nxt[w, 0] = cx
                nxt[w, 1] = cy
                w += 1
            elif pcr <= 0.0:
                t = pcr / (pcr - cr)
                nxt[w, 0] = pcx + t * (cx - pcx)
                nxt[w, 1] = pcy + t * (cy - pcy)
                w += 1
            pcx = cx
            pcy = cy
            pcr = cr
        tmp = cur
        cur = nxt
        nxt = tmp
        m = w
        if m == 0:
            break
    if cur is not out:
        for i in range(m):
            out[i, 0] = cur[i, 0]
            out[i, 1] = cur[i, 1]
    return m


def _halfplane_cell_numpy(site, others, order, rect, out):
    cur = rect.copy()
    for j in order:
        if cur.shape[0] == 0:
            break
        dd = others[j] - site
        d2 = dd[0] * dd[0] + dd[1] * dd[1]
        if d2 == 0.0:
            continue
        rel = cur - site
        rmax2 = (rel * rel).sum(axis=1).max()
        if d2 >= 4.0 * rmax2:
            break
        mid = 0.5 * (site + others[j])
        cr = (cur[:, 0] - mid[0]) * dd[0] + (cur[:, 1] - mid[1]) * dd[1]
        inside = cr <= 0.0
        prev_pts = np.roll(cur, 1, axis=0)
        prev_cr = np.roll(cr, 1)
        crossing = inside != (prev_cr <= 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = prev_cr / (prev_cr - cr)
            ipts = prev_pts + t[:, None] * (cur - prev_pts)
        keys = []
        pts = []
        arange2 = 2 * np.arange(cur.shape[0])
        if crossing.any():
            keys.append(arange2[crossing] - 1)
            pts.append(ipts[crossing])
        if inside.any():
            keys.append(arange2[inside])
            pts.append(cur[inside])
        if not keys:
            cur = np.empty((0, 2))
            continue
        keys = np.concatenate(keys)
        pts = np.concatenate(pts)
        cur = pts[np.argsort(keys, kind="stable")]
    m = cur.shape[0]
    if m > out.shape[0]:
        return -1
    out[:m] = cur
    return m


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    _knn_exclude_impl = njit(cache=True)(_knn_exclude_loops)
    _knn_grid2d_impl = njit(cache=True)(_knn_grid2d_loops)
    _points_in_loops_impl = njit(cache=True)(_points_in_loops_loops)
    _clip_loop_convex_impl = njit(cache=True)(_clip_loop_convex_loops)
    _halfplane_cell_impl = njit(cache=True)(_halfplane_cell_loops)
else:
    _knn_exclude_impl = _knn_exclude_numpy
    _knn_grid2d_impl = _knn_grid2d_numpy
    _points_in_loops_impl = _points_in_loops_numpy
    _clip_loop_convex_impl = _clip_loop_convex_numpy
    _halfplane_cell_impl = _halfplane_cell_numpy


def knn_exclude(points, groups, k):
    """Exact KNN among `points`, skipping candidates in the caller's group.

    Neighbor lists are sorted ascending by squared distance, ties broken by
    ascending point id; rows with fewer than k reachable candidates are
    padded with -1 / inf.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    return _knn_exclude_impl(points, groups, int(k))


def knn_brute(points, k):
    """Exact self-excluded KNN by exhaustive search (any dimension)."""
    groups = np.arange(points.shape[0], dtype=np.int64)
    return knn_exclude(points, groups, k)


def knn_grid2d(points, k):
    """Exact self-excluded KNN in 2D through a uniform grid index."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.shape[1] != 2:
        raise ValueError("grid index requires 2D points")
    return _knn_grid2d_impl(points, int(k))


def points_in_loops(pts, loops):
    """Even-odd inclusion test of `pts` against a list of closed loops."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if not loops:
        return np.zeros(pts.shape[0], dtype=bool)
    verts = np.ascontiguousarray(np.concatenate(loops), dtype=np.float64)
    offsets = np.zeros(len(loops) + 1, dtype=np.int64)
    for i, loop in enumerate(loops):
        offsets[i + 1] = offsets[i] + len(loop)
    return np.asarray(_points_in_loops_impl(pts, verts, offsets), dtype=bool)


def clip_loop_convex(subject, clip):
    """Intersection of a simple loop with a CCW convex loop (may be empty)."""
    subject = np.ascontiguousarray(subject, dtype=np.float64)
    clip = np.ascontiguousarray(clip, dtype=np.float64)
    if subject.shape[0] == 0 or clip.shape[0] < 3:
        return np.empty((0, 2))
    size = 4 * (subject.shape[0] + clip.shape[0]) + 16
    while True:
        out = np.empty((size, 2))
        m = _clip_loop_convex_impl(subject, clip, out)
        if m >= 0:
            return out[:m].copy()
        size *= 2


def halfplane_cell(site, others, order, rect):
    """Voronoi cell of `site` against `others`, clipped to convex `rect`."""
    site = np.ascontiguousarray(site, dtype=np.float64)
    others = np.ascontiguousarray(others, dtype=np.float64)
    order = np.ascontiguousarray(order, dtype=np.int64)
    rect = np.ascontiguousarray(rect, dtype=np.float64)
    size = rect.shape[0] + order.shape[0] + 16
    while True:
        out = np.empty((size, 2))
        m = _halfplane_cell_impl(site, others, order, rect, out)
        if m >= 0:
            return out[:m].copy()
        size *= 2


def warmup():
    """Trigger JIT compilation of every kernel (no-op on the numpy path)."""
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    knn_brute(pts, 2)
    knn_grid2d(pts, 2)
    knn_exclude(pts, np.array([0, 0, 1, 1]), 1)
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    points_in_loops(np.array([[0.5, 0.5]]), [square])
    clip_loop_convex(square, square + 0.5)
    halfplane_cell(pts[0], pts[1:], np.array([0, 1, 2]), square * 4.0)
