"""Greedy anchor relaxation.

Each iteration re-measures the 2D sub-cluster overlap matrix from freshly
sampled virtual points, finds the entry that disagrees most with the
overlap measured in the original space, and moves one anchor along the
line joining the offending pair: away from it when 2D overlap is too
high, toward it when too low. The loop stops when the maximum absolute
difference drops under the configured threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import relations
from .embedding import AnchorEmbedding
from .errors import ConfigError
from .geometry import BlobGeometry, GeometryParams, VirtualPointSet, \
    build_blob, lof_inliers, sample_virtual
from .subclustering import SubClustering

PUSH = "push"
PULL = "pull"


@dataclass
class OptimizeParams:
    iterations: int = 1000
    learning_rate: float = 0.05
    delta: float = 0.02
    stall_patience: int = 25
    damp_factor: float = 0.5
    # the loss is driven over inter-label pairs by default: same-label
    # overlap of a 3D (or higher) cluster flattened to 2D carries an
    # irreducible self-retention surplus no anchor arrangement removes
    inter_label_only: bool = True
    lazy: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0.0 <= self.learning_rate < 1.0:
            raise ConfigError("learning rate must be in [0, 1)")
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if not 0.0 < self.damp_factor < 1.0:
            raise ConfigError("damp factor must be in (0, 1)")
        if self.stall_patience < 1:
            raise ConfigError("stall patience must be >= 1")


@dataclass
class TraceRecord:
    iteration: int
    loss: float
    pair: tuple[int, int]
    direction: str  # "push" | "pull" | "stop"
    step_size: float


@dataclass
class OptimizationTrace:
    records: list[TraceRecord] = field(default_factory=list)
    status: str = "exhausted"  # "converged" | "exhausted"
    best_loss: float = float("inf")
    best_iteration: int = 0


@dataclass
class MeasureResult:
    overlap: np.ndarray  # (N_A, N_A) sub-cluster overlap measured in 2D
    blobs: list[BlobGeometry]
    virtual: VirtualPointSet


@dataclass
class OptimizeResult:
    embedding: AnchorEmbedding
    trace: OptimizationTrace
    overlap_before: np.ndarray
    overlap_after: np.ndarray
    blobs_after: list[BlobGeometry]
    virtual_after: VirtualPointSet


def step(coords: np.ndarray, i: int, j: int, direction: str,
         learning_rate: float, rng: np.random.Generator | None = None
         ) -> np.ndarray:
    """Move anchor i along the line through anchor j.

    Push multiplies the pair distance by exactly (1 + learning_rate), pull
    by (1 - learning_rate); only anchor i moves. Coincident anchors get a
    unit direction at a seeded random angle so the update stays defined.
    """
    if i == j:
        raise ValueError("cannot step an anchor against itself")
    out = coords.copy()
    d = coords[i] - coords[j]
    if d[0] == 0.0 and d[1] == 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        d = np.array([np.cos(angle), np.sin(angle)])
    if direction == PUSH:
        out[i] = coords[i] + learning_rate * d
    elif direction == PULL:
        out[i] = coords[i] - learning_rate * d
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return out


def scale_virtual_counts(sizes: np.ndarray, cap: int) -> np.ndarray:
    """Per-anchor virtual budgets: proportional to sub-cluster sizes,
    total at most `cap`, every non-empty sub-cluster at least 1."""
    sizes = np.asarray(sizes, dtype=np.int64)
    total = int(sizes.sum())
    if total <= cap:
        return sizes.copy()
    if cap < len(sizes):
        raise ValueError(f"virtual cap {cap} below the {len(sizes)} sub-clusters")
    counts = np.maximum(1, np.floor(sizes * (cap / total))).astype(np.int64)
    while counts.sum() > cap:
        candidates = np.flatnonzero(counts > 1)
        shave = candidates[np.argmax(counts[candidates])]
        counts[shave] -= 1
    return counts


def _label_seed(seed: int, label: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(label,))
    return int(ss.generate_state(1, np.uint64)[0])


def measure_lowdim(coords: np.ndarray, sub: SubClustering,
                   geom: GeometryParams, rel: "relations.RelationParams",
                   cache: dict | None = None,
                   inlier_masks: dict[int, np.ndarray] | None = None
                   ) -> MeasureResult:
    """Sub-cluster overlap of the embedded anchors, measured on virtual
    points spread through each label's blob.

    Virtual points are a pure function of the label's anchor coordinates:
    per-cell RNG streams are keyed by (seed, label, anchor id), so a cell
    whose geometry did not change reproduces its points exactly. Moving one
    anchor therefore only re-rolls the sample near the move, the optional
    ``cache`` short-cut is bit-identical to full recomputation, and the
    optimizer can pin matrix entries down one at a time.
    """
    n_labels = int(sub.anchor_label.max()) + 1
    base_counts = scale_virtual_counts(sub.sizes, geom.virtual_cap)

    blobs: list[BlobGeometry] = []
    chunks_pts = []
    chunks_anchor = []
    chunks_label = []
    for label in range(n_labels):
        ids = sub.anchor_ids_of(label)
        key = coords[ids].tobytes()
        entry = None
        if cache is not None:
            entry = cache.get(label)
            if entry is not None and entry[0] != key:
                entry = None
        if entry is None:
            mask = inlier_masks.get(label) if inlier_masks else None
            blob = build_blob(label, coords[ids], ids, sub.sizes[ids], geom,
                              counts=base_counts[ids], inlier_mask=mask)
            vp = sample_virtual(blob.cells, blob.cell_counts,
                                seed=_label_seed(geom.seed, label),
                                owner_label=label)
            if cache is not None:
                cache[label] = (key, blob, vp)
        else:
            _, blob, vp = entry
        blobs.append(blob)
        chunks_pts.append(vp.points)
        chunks_anchor.append(vp.owner_anchor)
        chunks_label.append(vp.owner_label)

    virtual = VirtualPointSet(
        points=np.concatenate(chunks_pts),
        owner_anchor=np.concatenate(chunks_anchor),
        owner_label=np.concatenate(chunks_label),
    )
    graph = relations.build_knn(virtual.points, rel.k_overlap)
    overlap = relations.anchor_overlap(graph, virtual.owner_anchor,
                                       sub.n_anchors)
    return MeasureResult(overlap=overlap, blobs=blobs, virtual=virtual)


def steppable_loss(high: np.ndarray, low: np.ndarray,
                   anchor_label: np.ndarray, inter_label_only: bool
                   ) -> tuple[float, tuple[int, int]]:
    """Loss the greedy loop actually drives: max |high - low| over the
    entries a step can act on, with its first row-major argmax.

    The diagonal is excluded because moving an anchor relative to itself is
    undefined; row sums are 1 on both sides, so any diagonal discrepancy is
    mirrored in steppable off-diagonal entries of the same row anyway.
    With `inter_label_only` all same-label pairs are skipped too.
    """
    masked = np.abs(high - low)
    np.fill_diagonal(masked, -1.0)
    if inter_label_only:
        same = anchor_label[:, None] == anchor_label[None, :]
        masked[same] = -1.0
    flat = int(np.argmax(masked))
    i, j = divmod(flat, masked.shape[1])
    return float(masked[i, j]), (i, j)


def optimize(embedding: AnchorEmbedding, overlap_high: np.ndarray,
             sub: SubClustering, params: OptimizeParams,
             geom: GeometryParams, rel: "relations.RelationParams",
             seed: int = 0) -> OptimizeResult:
    """Run the greedy loop and return the best embedding seen.

    Greedy relaxation is not monotone, so the lowest-loss coordinates are
    kept even when later iterations wander off. The loss is re-measured
    from scratch every iteration; samples of labels that did not move are
    reproduced from their per-label streams, so lazy caching changes
    nothing but wall time.
    """
    overlap_high = np.asarray(overlap_high, dtype=np.float64)
    if overlap_high.shape != (sub.n_anchors, sub.n_anchors):
        raise ValueError("high-dim overlap shape does not match anchor count")
    coords = embedding.coords.copy()
    cache: dict | None = {} if params.lazy else None
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(0x5EED,)))

    # outlier verdicts are frozen at the initial layout: re-scoring after
    # every move would drop any anchor the loop deliberately pulls toward
    # another blob, silently turning those steps into no-ops
    n_labels = int(sub.anchor_label.max()) + 1
    masks = {}
    for label in range(n_labels):
        ids = sub.anchor_ids_of(label)
        masks[label] = lof_inliers(coords[ids], geom)

    trace = OptimizationTrace()
    lr = params.learning_rate
    stall = 0
    best_coords = coords.copy()
    overlap_before = None

    for it in range(1, params.iterations + 1):
        measured = measure_lowdim(coords, sub, geom, rel, cache=cache,
                                  inlier_masks=masks)
        if overlap_before is None:
            overlap_before = measured.overlap
        loss, (i, j) = steppable_loss(overlap_high, measured.overlap,
                                      sub.anchor_label,
                                      params.inter_label_only)
        if loss < trace.best_loss:
            trace.best_loss = loss
            trace.best_iteration = it
            best_coords = coords.copy()
            stall = 0
            lr = params.learning_rate  # damping only persists while stalled
        else:
            stall += 1
        if loss <= params.delta:
            trace.records.append(TraceRecord(it, loss, (0, 0), "stop", 0.0))
            trace.status = "converged"
            break
        if stall >= params.stall_patience:
            # floor keeps the total remaining travel unbounded; without it a
            # stalled start can freeze before distant blobs ever meet
            lr = max(lr * params.damp_factor, 0.125 * params.learning_rate)
            stall = 0
        direction = PUSH if overlap_high[i, j] <= measured.overlap[i, j] \
            else PULL
        coords = step(coords, i, j, direction, lr, rng=rng)
        trace.records.append(TraceRecord(it, loss, (int(i), int(j)),
                                         direction, lr))

    # final measurement at the best coordinates, for reporting
    final = measure_lowdim(best_coords, sub, geom, rel, cache=None,
                           inlier_masks=masks)
    return OptimizeResult(
        embedding=AnchorEmbedding(coords=best_coords, frame=embedding.frame),
        trace=trace,
        overlap_before=overlap_before,
        overlap_after=final.overlap,
        blobs_after=final.blobs,
        virtual_after=final.virtual,
    )
