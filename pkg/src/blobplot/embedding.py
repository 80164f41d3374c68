"""Initial 2D coordinates for the anchors.

Built-in backends are PCA and classical MDS, both solved with power
iteration plus deflation so the numerics stay self-contained; externally
computed coordinates (e.g. from UMAP, run with min-dist 1 on the anchor
dump) can be imported instead. Raw coordinates are then normalized into
the canonical [0,100] x [0,100] frame that all downstream geometry and
step sizes assume.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000
CANVAS_SIDE = 100.0


@dataclass
class EmbedSpec:
    backend: str = "pca"  # "pca" | "mds" | "external"
    external_path: str | None = None

    def __post_init__(self):
        if self.backend not in ("pca", "mds", "external"):
            raise ConfigError(f"unknown embedding backend {self.backend!r}")
        if (self.backend == "external") != (self.external_path is not None):
            raise ConfigError("external_path must be given exactly when "
                              "backend is 'external'")


@dataclass(frozen=True)
class CanonicalFrame:
    """Uniform scale + offset from raw embedding to the canonical square."""

    scale: float
    offset: np.ndarray  # (2,)

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return raw * self.scale + self.offset


@dataclass(frozen=True)
class AnchorEmbedding:
    coords: np.ndarray  # (N_A, 2), canonical-frame units
    frame: CanonicalFrame

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def _power_iteration(mat: np.ndarray) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of a symmetric PSD matrix.

    The start vector is a fixed ramp, not a random draw, so repeated runs
    are bit-identical.
    """
    n = mat.shape[0]
    v = 1.0 + 1e-4 * np.arange(n)
    v /= np.linalg.norm(v)
    for _ in range(POWER_MAX_ITER):
        w = mat @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v
        w /= nw
        if np.linalg.norm(w - v) < POWER_TOL:
            v = w
            break
        v = w
    lam = float(v @ (mat @ v))
    return lam, v


def _top2_symmetric(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Top-2 eigenpairs by power iteration with deflation."""
    lam1, v1 = _power_iteration(mat)
    deflated = mat - lam1 * np.outer(v1, v1)
    lam2, v2 = _power_iteration(deflated)
    return np.array([lam1, lam2]), np.stack([v1, v2], axis=1)


def _fix_sign(vec: np.ndarray) -> float:
    """Sign convention: the largest-magnitude entry comes out positive."""
    j = int(np.argmax(np.abs(vec)))
    return -1.0 if vec[j] < 0 else 1.0


def pca_2d(anchors: np.ndarray) -> np.ndarray:
    """Project anchors onto the top-2 principal axes.

    For wide matrices (D > N_A) the iteration runs on the Gram matrix
    instead of the D x D covariance; the projections are identical.
    """
    anchors = np.asarray(anchors, dtype=np.float64)
    n, d = anchors.shape
    if n < 3:
        raise ValueError(f"need at least 3 anchors, got {n}")
    x = anchors - anchors.mean(axis=0)
    if d <= n:
        cov = (x.T @ x) / (n - 1)
        lams, vecs = _top2_symmetric(cov)
        comps = vecs
    else:
        gram = (x @ x.T) / (n - 1)
        lams, us = _top2_symmetric(gram)
        comps = np.zeros((d, 2))
        for k in range(2):
            w = x.T @ us[:, k]
            nw = np.linalg.norm(w)
            if nw > 0:
                comps[:, k] = w / nw
    scale = max(lams[0], 1.0)
    for k in range(2):
        if lams[k] <= 1e-12 * scale:
            lams[k] = 0.0
            comps[:, k] = 0.0
        else:
            comps[:, k] *= _fix_sign(comps[:, k])
    if lams[1] == 0.0:
        warnings.warn("anchor cloud is effectively one-dimensional; "
                      "second axis zeroed", RuntimeWarning)
    return x @ comps


def mds_2d(anchors: np.ndarray) -> np.ndarray:
    """Classical MDS: double-centered squared distances, top-2 spectrum."""
    anchors = np.asarray(anchors, dtype=np.float64)
    n = anchors.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 anchors, got {n}")
    sq = np.zeros((n, n))
    for t in range(anchors.shape[1]):
        diff = anchors[:, t, None] - anchors[None, :, t]
        sq += diff * diff
    row = sq.mean(axis=1, keepdims=True)
    col = sq.mean(axis=0, keepdims=True)
    b = -0.5 * (sq - row - col + sq.mean())
    lams, vecs = _top2_symmetric(b)
    # Euclidean input makes the Gram matrix PSD; a clearly negative leading
    # eigenvalue means the caller fed something else
    assert lams[0] >= -1e-9 * max(abs(sq).max(), 1.0), \
        "negative leading eigenvalue: input distances are not Euclidean"
    coords = np.zeros((n, 2))
    for k in range(2):
        lam = max(lams[k], 0.0)
        coords[:, k] = vecs[:, k] * _fix_sign(vecs[:, k]) * np.sqrt(lam)
    return coords


def import_coords(path: str, expected_n: int) -> np.ndarray:
    """Read `id,x,y` rows (no header) and align them by anchor id."""
    if not os.path.exists(path):
        raise DataError(f"coordinate file not found: {path}")
    coords = np.full((expected_n, 2), np.nan)
    seen = np.zeros(expected_n, dtype=bool)
    n_rows = 0
    with open(path, "r", encoding="utf-8") as f:
        for line_no, ln in enumerate(f, start=1):
            ln = ln.strip()
            if not ln:
                continue
            cells = ln.split(",")
            if len(cells) != 3:
                raise DataError(f"line {line_no}: expected id,x,y")
            try:
                idx = int(cells[0])
                x = float(cells[1])
                y = float(cells[2])
            except ValueError:
                raise DataError(f"line {line_no}: cannot parse {ln!r}") from None
            if not (np.isfinite(x) and np.isfinite(y)):
                raise DataError(f"line {line_no}: non-finite coordinate")
            if not 0 <= idx < expected_n:
                raise DataError(f"line {line_no}: anchor id {idx} out of range "
                                f"(expected 0..{expected_n - 1})")
            if seen[idx]:
                raise DataError(f"line {line_no}: duplicate anchor id {idx}")
            seen[idx] = True
            coords[idx] = (x, y)
            n_rows += 1
    if n_rows != expected_n:
        raise DataError(f"coordinate file holds {n_rows} rows, "
                        f"expected {expected_n}")
    return coords


def to_canonical(raw: np.ndarray) -> AnchorEmbedding:
    """Center the bounding box in [0,100]^2 with the longest side at 100.

    Uniform scaling preserves every distance ratio; the frame is recorded
    so externally produced overlays can be mapped the same way.
    """
    raw = np.asarray(raw, dtype=np.float64)
    mins = raw.min(axis=0)
    maxs = raw.max(axis=0)
    w, h = maxs - mins
    span = max(w, h)
    if span == 0.0:
        raise DataError("all embedded anchors coincide; cannot scale")
    s = CANVAS_SIDE / span
    offset = -mins * s + (CANVAS_SIDE - np.array([w, h]) * s) / 2.0
    frame = CanonicalFrame(scale=s, offset=offset)
    return AnchorEmbedding(coords=frame.apply(raw), frame=frame)


def embed_anchors(anchors: np.ndarray, spec: EmbedSpec) -> AnchorEmbedding:
    """Run the chosen backend and normalize into the canonical frame."""
    if spec.backend == "pca":
        raw = pca_2d(anchors)
    elif spec.backend == "mds":
        raw = mds_2d(anchors)
    else:
        raw = import_coords(spec.external_path, anchors.shape[0])
    return to_canonical(raw)
