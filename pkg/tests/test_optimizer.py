import numpy as np
import pytest

from blobplot import relations as R
from blobplot.dataset import LabeledDataset
from blobplot.embedding import to_canonical
from blobplot.geometry import GeometryParams
from blobplot.optimizer import (OptimizeParams, measure_lowdim, optimize,
                                scale_virtual_counts, step)
from blobplot.subclustering import BirchParams, subcluster_dataset


class TestStep:
    def test_push_pull_arithmetic(self):
        coords = np.array([[1.0, 0.0], [0.0, 0.0]])
        pushed = step(coords, 0, 1, "push", 0.1)
        assert pushed[0].tolist() == [1.1, 0.0]
        assert pushed[1].tolist() == [0.0, 0.0]
        pulled = step(coords, 0, 1, "pull", 0.1)
        assert pulled[0].tolist() == [0.9, 0.0]

    @pytest.mark.parametrize("lr", [0.01, 0.05, 0.2])
    def test_distance_ratio_identity(self, lr):
        rng = np.random.default_rng(0)
        coords = rng.uniform(0, 100, (30, 2))
        for _ in range(40):
            i, j = rng.choice(30, size=2, replace=False)
            before = np.linalg.norm(coords[i] - coords[j])
            after_push = step(coords, i, j, "push", lr)
            after_pull = step(coords, i, j, "pull", lr)
            rp = np.linalg.norm(after_push[i] - after_push[j]) / before
            rl = np.linalg.norm(after_pull[i] - after_pull[j]) / before
            assert abs(rp - (1 + lr)) < 1e-12
            assert abs(rl - (1 - lr)) < 1e-12

    def test_only_one_row_moves(self):
        rng = np.random.default_rng(1)
        coords = rng.uniform(0, 100, (10, 2))
        out = step(coords, 3, 7, "push", 0.05)
        changed = np.flatnonzero(np.any(out != coords, axis=1))
        assert changed.tolist() == [3]

    def test_coincident_anchors_use_seeded_direction(self):
        coords = np.zeros((2, 2))
        rng1 = np.random.default_rng(5)
        rng2 = np.random.default_rng(5)
        a = step(coords, 0, 1, "push", 0.1, rng=rng1)
        b = step(coords, 0, 1, "push", 0.1, rng=rng2)
        assert np.array_equal(a, b)
        assert np.linalg.norm(a[0]) == pytest.approx(0.1, rel=1e-12)

    def test_self_pair_rejected(self):
        with pytest.raises(ValueError):
            step(np.zeros((3, 2)), 1, 1, "push", 0.1)


class TestScaleCounts:
    def test_no_scaling_under_cap(self):
        sizes = np.array([5, 10, 3])
        assert scale_virtual_counts(sizes, 100).tolist() == [5, 10, 3]

    def test_scaled_total_caps_and_keeps_ones(self):
        sizes = np.array([1000, 1000, 1, 1])
        out = scale_virtual_counts(sizes, 100)
        assert out.sum() <= 100
        assert out.min() >= 1

    def test_cap_below_subclusters_rejected(self):
        with pytest.raises(ValueError):
            scale_virtual_counts(np.ones(10, dtype=int), 5)


def _uniform_two_class(seed=0, n=800):
    rng = np.random.default_rng(seed)
    a = rng.uniform((0, 0), (4, 4), (n, 2))
    b = rng.uniform((3, 0), (7, 4), (n, 2))
    return LabeledDataset(np.vstack([a, b]), np.repeat([0, 1], n), ("a", "b"))


@pytest.fixture(scope="module")
def fixture_2d():
    ds = _uniform_two_class()
    sub = subcluster_dataset(ds, BirchParams(threshold=0.9))
    rel = R.RelationParams()
    graph = R.build_knn(ds.points, rel.k_overlap)
    overlap_hd = R.anchor_overlap(graph, sub.assignment, sub.n_anchors)
    emb = to_canonical(sub.anchors)
    return ds, sub, rel, overlap_hd, emb


class TestMeasureLowdim:
    def test_far_blobs_have_no_cross_edges(self):
        from conftest import knn_oracle
        rng = np.random.default_rng(2)
        pts = np.vstack([rng.uniform(0, 3, (200, 2)),
                         rng.uniform((50, 0), (53, 3), (200, 2))])
        ds = LabeledDataset(pts, np.repeat([0, 1], 200), ("a", "b"))
        sub = subcluster_dataset(ds, BirchParams(threshold=0.8))
        emb = to_canonical(sub.anchors)
        res = measure_lowdim(emb.coords, sub, GeometryParams(seed=0),
                             R.RelationParams())
        labels_of = sub.anchor_label
        cross = res.overlap[np.ix_(labels_of == 0, labels_of == 1)]
        assert cross.max() == 0.0
        # the measured matrix agrees with a brute-force recount of the
        # virtual-point KNN edges
        oi, _ = knn_oracle(res.virtual.points, 10)
        counts = np.zeros((sub.n_anchors, sub.n_anchors))
        for s in range(len(oi)):
            for t in oi[s]:
                if t >= 0:
                    counts[res.virtual.owner_anchor[s],
                           res.virtual.owner_anchor[t]] += 1
        recomputed = counts / counts.sum(axis=1, keepdims=True)
        assert np.abs(recomputed - res.overlap).max() < 1e-12

    def test_deterministic(self, fixture_2d):
        ds, sub, rel, overlap_hd, emb = fixture_2d
        geom = GeometryParams(seed=11)
        a = measure_lowdim(emb.coords, sub, geom, rel)
        b = measure_lowdim(emb.coords, sub, geom, rel)
        assert np.array_equal(a.overlap, b.overlap)
        assert np.array_equal(a.virtual.points, b.virtual.points)

    def test_single_label_single_anchor_is_identity(self):
        from blobplot.subclustering import SubClustering
        sub = SubClustering(
            assignment=np.zeros(40, dtype=np.int64),
            anchors=np.array([[50.0, 50.0]]),
            anchor_label=np.array([0]),
            sizes=np.array([40]),
            radii=np.array([0.5]),
            threshold=1.0,
        )
        coords = np.array([[50.0, 50.0]])
        res = measure_lowdim(coords, sub, GeometryParams(seed=2),
                             R.RelationParams())
        assert res.overlap.tolist() == [[1.0]]

    def test_virtual_counts_follow_sizes(self, fixture_2d):
        ds, sub, rel, overlap_hd, emb = fixture_2d
        res = measure_lowdim(emb.coords, sub, GeometryParams(seed=3), rel)
        per_anchor = np.bincount(res.virtual.owner_anchor,
                                 minlength=sub.n_anchors)
        # no outlier drops here: totals match the data point count
        assert per_anchor.sum() == ds.n

    def test_cap_scales_totals(self, fixture_2d):
        ds, sub, rel, overlap_hd, emb = fixture_2d
        res = measure_lowdim(emb.coords, sub,
                             GeometryParams(seed=3, virtual_cap=300), rel)
        assert len(res.virtual.points) <= 300


class TestOptimize:
    def test_self_consistent_2d_converges(self):
        # embedding IS the data's own plane: the loss starts at sampling
        # noise and the loop stops within a few iterations
        rng = np.random.default_rng(0)
        a = rng.uniform((0, 0), (4, 4), (800, 2))
        b = rng.uniform((4.3, 0), (8.3, 4), (800, 2))
        ds = LabeledDataset(np.vstack([a, b]), np.repeat([0, 1], 800),
                            ("a", "b"))
        sub = subcluster_dataset(ds, BirchParams(threshold=0.45))
        rel = R.RelationParams()
        graph = R.build_knn(ds.points, rel.k_overlap)
        overlap_hd = R.anchor_overlap(graph, sub.assignment, sub.n_anchors)
        emb = to_canonical(sub.anchors)
        res = optimize(emb, overlap_hd, sub,
                       OptimizeParams(iterations=40, delta=0.05),
                       GeometryParams(seed=5), rel, seed=5)
        assert res.trace.status == "converged"
        assert res.trace.best_iteration <= 10
        assert res.trace.best_loss <= 0.05

    def test_vacuous_delta_stops_immediately(self, fixture_2d):
        ds, sub, rel, overlap_hd, emb = fixture_2d
        res = optimize(emb, overlap_hd, sub,
                       OptimizeParams(iterations=50, delta=1.0),
                       GeometryParams(seed=5), rel, seed=5)
        assert res.trace.status == "converged"
        assert len(res.trace.records) == 1

    def test_zero_learning_rate_is_identity(self, fixture_2d):
        ds, sub, rel, overlap_hd, emb = fixture_2d
        res = optimize(emb, overlap_hd, sub,
                       OptimizeParams(iterations=8, delta=0.0,
                                      learning_rate=0.0),
                       GeometryParams(seed=5), rel, seed=5)
        assert np.array_equal(res.embedding.coords, emb.coords)
        losses = [r.loss for r in res.trace.records]
        assert len(set(losses)) == 1  # nothing moves, nothing changes

    def test_single_anchor_moves_per_iteration(self, fixture_2d):
        ds, sub, rel, overlap_hd, emb = fixture_2d
        # force motion with an unreachable delta
        params = OptimizeParams(iterations=6, delta=0.0)
        geom = GeometryParams(seed=7)
        res = optimize(emb, overlap_hd, sub, params, geom, rel, seed=7)
        coords = emb.coords.copy()
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=7, spawn_key=(0x5EED,)))
        for rec in res.trace.records:
            if rec.direction == "stop":
                break
            i, j = rec.pair
            nxt = step(coords, i, j, rec.direction, rec.step_size, rng=rng)
            assert np.flatnonzero(np.any(nxt != coords, axis=1)).size <= 1
            coords = nxt

    def test_trace_is_deterministic(self, fixture_2d):
        ds, sub, rel, overlap_hd, emb = fixture_2d
        params = OptimizeParams(iterations=12, delta=0.0)
        geom = GeometryParams(seed=9)
        a = optimize(emb, overlap_hd, sub, params, geom, rel, seed=9)
        b = optimize(emb, overlap_hd, sub, params, geom, rel, seed=9)
        ra = [(r.iteration, r.loss, r.pair, r.direction, r.step_size)
              for r in a.trace.records]
        rb = [(r.iteration, r.loss, r.pair, r.direction, r.step_size)
              for r in b.trace.records]
        assert ra == rb
        assert np.array_equal(a.embedding.coords, b.embedding.coords)

    def test_best_loss_is_running_minimum(self, fixture_2d):
        ds, sub, rel, overlap_hd, emb = fixture_2d
        res = optimize(emb, overlap_hd, sub,
                       OptimizeParams(iterations=30, delta=0.0),
                       GeometryParams(seed=13), rel, seed=13)
        losses = [r.loss for r in res.trace.records]
        assert res.trace.best_loss == min(losses)

    def test_lazy_equals_full(self, fixture_2d):
        ds, sub, rel, overlap_hd, emb = fixture_2d
        geom = GeometryParams(seed=15)
        full = optimize(emb, overlap_hd, sub,
                        OptimizeParams(iterations=10, delta=0.0, lazy=False),
                        geom, rel, seed=15)
        lazy = optimize(emb, overlap_hd, sub,
                        OptimizeParams(iterations=10, delta=0.0, lazy=True),
                        geom, rel, seed=15)
        assert np.array_equal(full.embedding.coords, lazy.embedding.coords)
        assert [r.loss for r in full.trace.records] == \
               [r.loss for r in lazy.trace.records]
        assert np.array_equal(full.overlap_after, lazy.overlap_after)
