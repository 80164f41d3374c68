import numpy as np
import pytest
from scipy.spatial.distance import pdist

from blobplot.embedding import (EmbedSpec, embed_anchors, import_coords,
                                mds_2d, pca_2d, to_canonical)
from blobplot.errors import ConfigError, DataError


class TestPca:
    def test_planar_data_distances_preserved(self):
        rng = np.random.default_rng(0)
        base = rng.normal(size=(40, 2))
        arr = np.hstack([base, np.zeros((40, 1))])
        proj = pca_2d(arr)
        assert np.abs(pdist(proj) - pdist(base)).max() < 1e-8

    def test_rank1_zeroes_second_axis_and_warns(self):
        line = np.outer(np.linspace(0, 1, 12), np.ones(5))
        with pytest.warns(RuntimeWarning, match="one-dimensional"):
            proj = pca_2d(line)
        assert np.all(proj[:, 1] == 0.0)

    def test_variance_matches_dense_eigensolver(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(80, 10)) @ np.diag(np.linspace(3, 0.3, 10))
        proj = pca_2d(x)
        lams = np.linalg.eigvalsh(np.cov(x, rowvar=False))[::-1]
        got = proj.var(axis=0, ddof=1).sum()
        assert got == pytest.approx(lams[:2].sum(), abs=1e-6)

    def test_translation_invariant(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(50, 6))
        assert np.abs(pca_2d(x + 37.5) - pca_2d(x)).max() < 1e-9

    def test_gram_mode_matches_covariance_mode(self):
        # D > N exercises the Gram-matrix route
        rng = np.random.default_rng(3)
        x = rng.normal(size=(20, 50))
        proj = pca_2d(x)
        lams = np.linalg.eigvalsh(np.cov(x, rowvar=False))[::-1]
        assert proj.var(axis=0, ddof=1).sum() == pytest.approx(
            lams[:2].sum(), rel=1e-6)

    def test_needs_three_anchors(self):
        with pytest.raises(ValueError, match="at least 3"):
            pca_2d(np.zeros((2, 3)))


class TestMds:
    def test_2d_input_reproduced_up_to_rigid_motion(self):
        rng = np.random.default_rng(4)
        base = rng.normal(size=(30, 2))
        out = mds_2d(base)
        assert np.abs(pdist(out) - pdist(base)).max() < 1e-8

    def test_tetrahedron_has_positive_stress(self):
        # 4 equidistant points cannot embed in the plane
        tetra = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]],
                         dtype=float)
        out = mds_2d(tetra)
        stress = np.abs(pdist(out) - pdist(tetra)).max()
        assert stress > 0.1

    def test_distance_correlation_on_hourglass(self):
        rng = np.random.default_rng(5)
        arr = np.vstack([rng.normal((0, 0, 3), 0.5, (30, 3)),
                         rng.normal((0, 0, -3), 0.5, (30, 3))])
        out = mds_2d(arr)
        r = np.corrcoef(pdist(out), pdist(arr))[0, 1]
        assert r >= 0.9

    def test_gram_truncation_matches_eigensolver(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(25, 5))
        out = mds_2d(x)
        # double-centered squared-distance Gram matrix
        sq = ((x[:, None] - x[None]) ** 2).sum(-1)
        j = np.eye(25) - np.ones((25, 25)) / 25
        b = -0.5 * j @ sq @ j
        lams, vecs = np.linalg.eigh(b)
        lams, vecs = lams[::-1], vecs[:, ::-1]
        truth = vecs[:, :2] * np.sqrt(np.maximum(lams[:2], 0))
        assert np.abs(out @ out.T - truth @ truth.T).max() < 1e-6


class TestImportCoords:
    def test_aligned_by_id(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("2,0.5,0.6\n0,0.1,0.2\n1,0.3,0.4\n")
        out = import_coords(str(p), 3)
        assert out.tolist() == [[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]]

    def test_count_mismatch(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("0,0,0\n1,1,1\n2,2,2\n3,3,3\n")
        with pytest.raises(DataError, match="4 rows"):
            import_coords(str(p), 5)

    def test_duplicate_id(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("0,0,0\n1,1,1\n1,2,2\n")
        with pytest.raises(DataError, match="duplicate"):
            import_coords(str(p), 3)

    def test_non_finite(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("0,0,0\n1,inf,1\n2,2,2\n")
        with pytest.raises(DataError, match="non-finite"):
            import_coords(str(p), 3)


class TestCanonical:
    def test_horizontal_pair(self):
        emb = to_canonical(np.array([[0.0, 0.0], [1.0, 0.0]]))
        assert emb.coords.tolist() == [[0.0, 50.0], [100.0, 50.0]]

    def test_vertical_pair(self):
        emb = to_canonical(np.array([[2.0, 2.0], [2.0, 4.0]]))
        assert emb.coords.tolist() == [[50.0, 0.0], [50.0, 100.0]]

    def test_already_canonical_is_identity(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(0, 100, (50, 2))
        # pin the bounding box to the canonical square exactly
        pts[0] = (0.0, 0.0)
        pts[1] = (100.0, 100.0)
        emb = to_canonical(pts)
        assert np.abs(emb.coords - pts).max() < 1e-12

    def test_distance_ratios_preserved(self):
        rng = np.random.default_rng(8)
        pts = rng.normal(size=(30, 2)) * 17 + 5
        emb = to_canonical(pts)
        d0 = pdist(pts)
        d1 = pdist(emb.coords)
        ratios = d1 / d0
        assert ratios.std() < 1e-12
        assert np.argmax(d0) == np.argmax(d1)

    def test_coincident_points_rejected(self):
        with pytest.raises(DataError, match="coincide"):
            to_canonical(np.ones((4, 2)))


def test_embed_spec_validation():
    with pytest.raises(ConfigError):
        EmbedSpec(backend="tsne")
    with pytest.raises(ConfigError):
        EmbedSpec(backend="external")  # missing path
    with pytest.raises(ConfigError):
        EmbedSpec(backend="pca", external_path="x.csv")


def test_embed_anchors_external(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("0,0,0\n1,4,0\n2,4,3\n")
    emb = embed_anchors(np.zeros((3, 7)), EmbedSpec(backend="external",
                                                    external_path=str(p)))
    assert emb.coords.shape == (3, 2)
    assert emb.coords[:, 0].max() == 100.0
