import xml.etree.ElementTree as ET

import numpy as np
import pytest

from blobplot.geometry import BlobGeometry
from blobplot.render import (PALETTE, RenderConfig, ramp_color,
                             render_blobs, render_heatmap)


def make_blob(label, offset, scale=10.0):
    loop = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    loop = loop * scale + offset
    return BlobGeometry(label=label, inlier_anchor_ids=np.array([0]),
                        boundary=[loop], cells=[], outline=[loop],
                        area=scale * scale)


def parse(svg_text):
    return ET.fromstring(svg_text)


NS = "{http://www.w3.org/2000/svg}"


class TestBlobPlot:
    def test_structure_two_blobs(self):
        blobs = [make_blob(0, (5, 5)), make_blob(1, (40, 40))]
        svg = render_blobs(blobs, ["a", "b"], RenderConfig())
        root = parse(svg)
        paths = root.findall(f"{NS}path")
        fills = [p for p in paths if p.get("fill") != "none"]
        strokes = [p for p in paths if p.get("fill") == "none"]
        assert len(fills) == 2
        assert len(strokes) == 2
        assert root.find(f"{NS}g[@id='legend']") is not None

    def test_stroke_width_arithmetic(self):
        blobs = [make_blob(0, (5, 5))]
        svg = render_blobs(blobs, ["a"], RenderConfig(
            canvas_px=1000, stroke_width_frac=0.008))
        root = parse(svg)
        strokes = [p for p in root.findall(f"{NS}path")
                   if p.get("fill") == "none"]
        assert float(strokes[0].get("stroke-width")) == pytest.approx(8.0)

    def test_byte_identical_output(self):
        blobs = [make_blob(0, (5, 5)), make_blob(1, (40, 40))]
        cfg = RenderConfig()
        assert render_blobs(blobs, ["a", "b"], cfg) == \
               render_blobs(blobs, ["a", "b"], cfg)

    def test_fills_sorted_by_area_before_strokes(self):
        blobs = [make_blob(0, (5, 5), scale=5.0),
                 make_blob(1, (30, 30), scale=20.0)]
        svg = render_blobs(blobs, ["a", "b"], RenderConfig(legend=False))
        root = parse(svg)
        kinds = []
        for p in root.findall(f"{NS}path"):
            kinds.append("fill" if p.get("fill") != "none" else "stroke")
        assert kinds == ["fill", "fill", "stroke", "stroke"]
        # bigger blob (label 1) painted first
        first = root.findall(f"{NS}path")[0]
        assert first.get("fill") == PALETTE[1]

    def test_palette_cycles(self):
        blobs = [make_blob(k, (k * 8.0, k * 8.0), scale=4.0)
                 for k in range(12)]
        names = [f"c{k}" for k in range(12)]
        svg = render_blobs(blobs, names, RenderConfig(legend=False))
        root = parse(svg)
        strokes = [p for p in root.findall(f"{NS}path")
                   if p.get("fill") == "none"]
        assert strokes[10].get("stroke") == PALETTE[0]
        assert strokes[11].get("stroke") == PALETTE[1]

    def test_absolute_path_commands_only(self):
        svg = render_blobs([make_blob(0, (5, 5))], ["a"],
                                 RenderConfig())
        root = parse(svg)
        for p in root.findall(f"{NS}path"):
            d = p.get("d")
            assert not any(c in d for c in "mlhvcsqtaz")

    def test_coordinates_finite(self):
        svg = render_blobs([make_blob(0, (5, 5))], ["a"],
                                 RenderConfig())
        assert "nan" not in svg.lower()
        assert "inf" not in svg.lower()


class TestRamp:
    def test_endpoints(self):
        assert ramp_color(0.0) == (255, 255, 255)
        assert ramp_color(1.0) == (8, 48, 107)

    def test_midpoint_is_third_stop(self):
        assert ramp_color(0.5) == (107, 174, 214)

    def test_linear_between_stops(self):
        lo = np.array(ramp_color(0.5))
        hi = np.array(ramp_color(0.75))
        mid = np.array(ramp_color(0.625))
        assert np.abs(mid - (lo + hi) / 2.0).max() <= 1.0

    def test_clipping(self):
        assert ramp_color(-3.0) == ramp_color(0.0)
        assert ramp_color(7.0) == ramp_color(1.0)


class TestHeatmap:
    def test_identity_matrix_colors(self):
        svg = render_heatmap(np.eye(3), ["a", "b", "c"], RenderConfig())
        root = parse(svg)
        rects = root.findall(f"{NS}rect")[1:]  # skip background
        fills = {r.get("fill") for r in rects}
        assert "#ffffff" in fills      # ramp(0)
        assert "#08306b" in fills      # ramp(1)

    def test_annotation_rounding(self):
        svg = render_heatmap(np.array([[0.456, 0.544], [0.0, 1.0]]),
                             ["x", "y"], RenderConfig())
        assert ">0.46<" in svg
        assert ">0.54<" in svg

    def test_contrasting_text(self):
        svg = render_heatmap(np.array([[0.0, 1.0], [1.0, 0.0]]),
                             ["x", "y"], RenderConfig())
        root = parse(svg)
        texts = root.findall(f"{NS}text")
        cell_texts = [t for t in texts if t.text in ("0.00", "1.00")]
        for t in cell_texts:
            if t.text == "1.00":
                assert t.get("fill") == "#ffffff"
            else:
                assert t.get("fill") == "#000000"

    def test_well_formed_with_odd_names(self):
        svg = render_heatmap(np.eye(2), ["a<b&c", 'd"e'], RenderConfig())
        parse(svg)  # raises on malformed XML

    def test_square_matrix_required(self):
        with pytest.raises(ValueError):
            render_heatmap(np.zeros((2, 3)), ["a", "b"], RenderConfig())
