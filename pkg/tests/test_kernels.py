import numpy as np
import pytest

from blobplot import _kernels as K

from conftest import knn_oracle, shoelace


def test_brute_matches_oracle_small():
    rng = np.random.default_rng(0)
    pts = rng.random((60, 3))
    idx, d2 = K.knn_brute(pts, 5)
    oi, od = knn_oracle(pts, 5)
    assert np.array_equal(idx, oi)
    assert np.array_equal(d2, od)


def test_grid_matches_brute_random():
    rng = np.random.default_rng(1)
    for trial in range(5):
        pts = rng.random((300, 2)) * 10
        for k in (1, 7, 20):
            gi, gd = K.knn_grid2d(pts, k)
            bi, bd = K.knn_brute(pts, k)
            assert np.array_equal(gi, bi)
            assert np.array_equal(gd, bd)


def test_grid_matches_brute_with_exact_ties():
    # integer lattice: massive distance ties exercise the id tie-break
    xs, ys = np.meshgrid(np.arange(12.0), np.arange(12.0))
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    for k in (1, 4, 9):
        gi, _ = K.knn_grid2d(pts, k)
        oi, _ = knn_oracle(pts, k)
        assert np.array_equal(gi, oi)


def test_knn_k_exceeds_candidates():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    idx, d2 = K.knn_brute(pts, 5)
    assert np.array_equal(idx[:, :2] >= 0, np.ones((3, 2), bool))
    assert (idx[:, 2:] == -1).all()
    assert np.isinf(d2[:, 2:]).all()


def test_knn_exclude_groups():
    pts = np.array([[0.0], [0.1], [5.0], [5.1]])
    groups = np.array([0, 0, 1, 1])
    idx, _ = K.knn_exclude(pts, groups, 1)
    assert idx.ravel().tolist() == [2, 2, 1, 1]


def test_points_in_loops_even_odd():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    hole = np.array([[0.25, 0.25], [0.25, 0.75], [0.75, 0.75], [0.75, 0.25]])
    pts = np.array([[0.5, 0.5], [0.1, 0.1], [2.0, 2.0], [0.2, 0.9]])
    got = K.points_in_loops(pts, [square, hole])
    assert got.tolist() == [False, True, False, True]


def test_clip_loop_convex_area():
    tri = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    clip = np.array([[1.0, 1.0], [3.0, 1.0], [3.0, 3.0], [1.0, 3.0]])
    out = K.clip_loop_convex(tri, clip)
    assert shoelace(out) == pytest.approx(2.0, abs=1e-12)


def test_clip_disjoint_is_empty():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    clip = np.array([[5.0, 5.0], [6.0, 5.0], [6.0, 6.0], [5.0, 6.0]])
    assert K.clip_loop_convex(tri, clip).shape[0] == 0


def test_halfplane_cell_bisector():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    cell = K.halfplane_cell(np.array([0.25, 0.5]),
                            np.array([[0.75, 0.5]]),
                            np.array([0]), square)
    assert shoelace(cell) == pytest.approx(0.5, abs=1e-12)
    assert cell[:, 0].max() == pytest.approx(0.5, abs=1e-12)


def test_numpy_fallbacks_match_active_backend():
    rng = np.random.default_rng(3)
    pts = rng.random((200, 2)) * 4
    bi, bd = K._knn_exclude_numpy(pts, np.arange(200), 8)
    ai, ad = K.knn_brute(pts, 8)
    assert np.array_equal(bi, ai)
    assert np.array_equal(bd, ad)

    loops = [np.array([[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]]),
             np.array([[1.0, 1.0], [1.0, 2.0], [2.0, 2.0], [2.0, 1.0]])]
    verts = np.concatenate(loops)
    offsets = np.array([0, 4, 8], dtype=np.int64)
    q = rng.random((500, 2)) * 5 - 0.5
    a = K._points_in_loops_numpy(q, verts, offsets)
    b = K.points_in_loops(q, loops)
    assert np.array_equal(a, b)

    subject = np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 1.0], [1.0, 1.0],
                        [1.0, 2.0], [3.0, 2.0], [3.0, 3.0], [0.0, 3.0]])
    clip = np.array([[0.5, -1.0], [3.5, -1.0], [3.5, 4.0], [0.5, 4.0]])
    out_np = np.empty((64, 2))
    m = K._clip_loop_convex_numpy(subject, clip, out_np)
    got = K.clip_loop_convex(subject, clip)
    assert m == got.shape[0]
    assert np.allclose(out_np[:m], got, atol=1e-12)
