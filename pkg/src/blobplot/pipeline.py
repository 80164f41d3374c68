"""End-to-end orchestration behind the CLI subcommands.

A run executes ingest -> sub-clustering -> high-dim relations -> embedding
-> optimization -> final geometry -> rendering, writing every artifact into
the output directory plus a manifest with content hashes. Failures surface
with their stage name and remove whatever partial artifacts were written.
"""

from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager

import numpy as np

from . import relations
from .config import (RunConfig, derive_seed, parse_target_band,
                     parse_threshold, write_config_echo)
from .dataset import IngestSpec, LabeledDataset, load
from .embedding import EmbedSpec, embed_anchors
from .errors import BlobplotError, PipelineError
from .geometry import BlobGeometry, GeometryParams
from .optimizer import OptimizeParams, optimize
from .render import PALETTE, RenderConfig, render_blobs, render_heatmap
from .subclustering import BirchParams, SubClustering, anchor_stats, \
    dump_anchors, subcluster_dataset


@contextmanager
def _stage(name: str):
    try:
        yield
    except BlobplotError as e:
        raise type(e)(f"[{name}] {e}") from e
    except Exception as e:
        raise PipelineError(f"[{name}] {e}") from e


class ArtifactWriter:
    """Tracks files written into the output directory; cleans up on failure
    and hashes everything into the manifest."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.paths: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        p = os.path.join(self.out_dir, name)
        self.paths.append(p)
        return p

    def write_text(self, name: str, text: str) -> None:
        with open(self.path(name), "w", encoding="utf-8") as f:
            f.write(text)

    def discard_all(self) -> None:
        for p in self.paths:
            if os.path.exists(p):
                os.remove(p)

    def manifest(self) -> dict:
        # the config echo carries run-local strings (output path, thread
        # count) that must not poison cross-run hash comparisons; it is
        # listed, like the manifest itself, without a content hash
        unhashed = {"resolved-config.json", "manifest.json"}
        entries = []
        for p in sorted(set(self.paths)):
            name = os.path.basename(p)
            if name in unhashed:
                continue
            with open(p, "rb") as f:
                digest = hashlib.sha256(f.read()).hexdigest()
            entries.append({
                "path": name,
                "sha256": digest,
                "bytes": os.path.getsize(p),
            })
        for name in sorted(unhashed):
            entries.append({"path": name, "sha256": None, "bytes": None})
        return {"artifacts": entries}

    def write_manifest(self) -> str:
        manifest = self.manifest()
        p = os.path.join(self.out_dir, "manifest.json")
        with open(p, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        return p


def _ingest(cfg: RunConfig) -> LabeledDataset:
    if not cfg.input:
        raise PipelineError("[dataset] no input file configured")
    spec = IngestSpec(
        path=cfg.input,
        format=cfg.format,
        label_column=cfg.label_col,
        sidecar_path=cfg.sidecar,
        labels_path=cfg.labels,
        standardize_mode=cfg.standardize,
    )
    return load(spec)


def _geometry_params(cfg: RunConfig) -> GeometryParams:
    return GeometryParams(
        alpha_radius=parse_threshold(cfg.alpha_radius, "alpha_radius"),
        lof_k=cfg.lof_k,
        lof_threshold=cfg.lof_threshold,
        smoothing_passes=cfg.smoothing_passes,
        virtual_cap=cfg.virtual_cap,
        seed=derive_seed(cfg.seed, "geometry"),
    )


def blobs_to_json(blobs: list[BlobGeometry], class_names: list[str]) -> str:
    """Geometry dump consumed by the `render` subcommand (and debuggers)."""
    doc = {"class_names": list(class_names), "blobs": []}
    for b in blobs:
        doc["blobs"].append({
            "label": b.label,
            "area": b.area,
            "inlier_anchor_ids": [int(i) for i in b.inlier_anchor_ids],
            "boundary": [loop.tolist() for loop in b.boundary],
            "outline": [loop.tolist() for loop in b.outline],
            "cells": [{
                "owner": c.owner,
                "area": c.area,
                "loops": [lp.tolist() for lp in c.loops],
            } for c in b.cells],
        })
    return json.dumps(doc, indent=1)


def blobs_from_json(text: str) -> tuple[list[BlobGeometry], list[str]]:
    from .geometry import CellGeometry
    doc = json.loads(text)
    blobs = []
    for rec in doc["blobs"]:
        cells = [CellGeometry(owner=c["owner"],
                              loops=[np.array(lp) for lp in c["loops"]],
                              area=c["area"], bbox=(0, 0, 0, 0))
                 for c in rec["cells"]]
        blobs.append(BlobGeometry(
            label=rec["label"],
            inlier_anchor_ids=np.array(rec["inlier_anchor_ids"], dtype=np.int64),
            boundary=[np.array(lp) for lp in rec["boundary"]],
            cells=cells,
            outline=[np.array(lp) for lp in rec["outline"]],
            area=rec["area"],
        ))
    return blobs, list(doc["class_names"])


def _render_config(cfg: RunConfig) -> RenderConfig:
    palette = PALETTE
    if cfg.palette:
        palette = tuple(c.strip() for c in cfg.palette.split(",") if c.strip())
    return RenderConfig(
        canvas_px=cfg.canvas,
        palette=palette,
        fill_opacity=cfg.fill_opacity,
        stroke_width_frac=cfg.stroke_frac,
        legend=cfg.legend,
    )


def _trace_csv(trace) -> str:
    lines = ["iteration,loss,i,j,direction,step"]
    for r in trace.records:
        lines.append(f"{r.iteration},{r.loss!r},{r.pair[0]},{r.pair[1]},"
                     f"{r.direction},{r.step_size!r}")
    lines.append(f"# status={trace.status} best_loss={trace.best_loss!r} "
                 f"best_iteration={trace.best_iteration}")
    return "\n".join(lines) + "\n"


def _relations_bundle(ds: LabeledDataset, sub: SubClustering,
                      rel: relations.RelationParams):
    graph = relations.build_knn(ds.points, rel.k_overlap)
    overlap_anchor = relations.anchor_overlap(graph, sub.assignment,
                                              sub.n_anchors)
    overlap_label = relations.label_overlap(graph, ds.labels, ds.m)
    prox = relations.proximity(sub.anchors, sub.anchor_label, rel.k_proximity)
    return overlap_anchor, overlap_label, prox


def run(cfg: RunConfig, dataset: LabeledDataset | None = None) -> str:
    """Execute the full pipeline; returns the manifest path.

    `dataset` short-circuits ingestion (used by tests and by gen-toy demos);
    otherwise `cfg.input` is loaded per the ingest settings.
    """
    writer = ArtifactWriter(cfg.out)
    try:
        with _stage("dataset"):
            ds = dataset if dataset is not None else _ingest(cfg)

        with _stage("subclustering"):
            lo, hi = parse_target_band(cfg.anchors_target)
            birch = BirchParams(
                threshold=parse_threshold(cfg.birch_threshold,
                                          "birch_threshold"),
                branching=cfg.birch_branching,
                auto_target=(lo, hi),
            )
            sub = subcluster_dataset(ds, birch)
            dump_anchors(sub, writer.path("anchors.txt"))
            writer.write_text("anchor_stats.json",
                              json.dumps(anchor_stats(sub), indent=2) + "\n")

        rel = relations.RelationParams(k_overlap=cfg.k_overlap,
                                       k_proximity=cfg.k_prox,
                                       k_confusion=cfg.k_confusion)
        names = list(ds.class_names)
        anchor_names = [f"a{i}" for i in range(sub.n_anchors)]

        with _stage("relations"):
            overlap_anchor_hd, overlap_label_hd, prox_hd = \
                _relations_bundle(ds, sub, rel)
            relations.write_matrix(writer.path("overlap_high.txt"),
                                   overlap_label_hd, names)
            relations.write_matrix(writer.path("proximity_high.txt"),
                                   prox_hd, names)
            relations.write_matrix(writer.path("anchor_overlap_high.txt"),
                                   overlap_anchor_hd, anchor_names)
            if cfg.confusion:
                conf = relations.knn_confusion(ds.points, ds.labels, ds.m,
                                               rel.k_confusion)
                relations.write_matrix(writer.path("confusion.txt"),
                                       conf, names)

        with _stage("embedding"):
            espec = EmbedSpec(backend=cfg.embed,
                              external_path=cfg.external_coords)
            embedding = embed_anchors(sub.anchors, espec)

        with _stage("optimize"):
            geom = _geometry_params(cfg)
            opt = OptimizeParams(
                iterations=cfg.iterations,
                learning_rate=cfg.lr,
                delta=cfg.delta,
                stall_patience=cfg.stall_patience,
                damp_factor=cfg.damp_factor,
                inter_label_only=cfg.inter_label_only,
                lazy=cfg.lazy,
            )
            result = optimize(embedding, overlap_anchor_hd, sub, opt, geom,
                              rel, seed=derive_seed(cfg.seed, "optimizer"))
            writer.write_text("trace.csv", _trace_csv(result.trace))
            relations.write_matrix(writer.path("anchor_overlap_low_before.txt"),
                                   result.overlap_before, anchor_names)
            relations.write_matrix(writer.path("anchor_overlap_low_after.txt"),
                                   result.overlap_after, anchor_names)
            diff_before = np.abs(overlap_anchor_hd - result.overlap_before)
            diff_after = np.abs(overlap_anchor_hd - result.overlap_after)
            relations.write_matrix(writer.path("diff_before.txt"),
                                   diff_before, anchor_names)
            relations.write_matrix(writer.path("diff_after.txt"),
                                   diff_after, anchor_names)

        with _stage("lowdim-relations"):
            vp = result.virtual_after
            graph2d = relations.build_knn(vp.points, rel.k_overlap)
            overlap_label_ld = relations.label_overlap(graph2d,
                                                       vp.owner_label, ds.m)
            prox_ld = relations.proximity(result.embedding.coords,
                                          sub.anchor_label, rel.k_proximity)
            relations.write_matrix(writer.path("overlap_low.txt"),
                                   overlap_label_ld, names)
            relations.write_matrix(writer.path("proximity_low.txt"),
                                   prox_ld, names)

        with _stage("render"):
            rcfg = _render_config(cfg)
            writer.write_text("blobs.json",
                              blobs_to_json(result.blobs_after, names))
            writer.write_text("plot.svg",
                              render_blobs(result.blobs_after, names, rcfg))
            heatmaps = [
                ("heatmap_overlap_high.svg", overlap_label_hd, names,
                 "overlap, original space"),
                ("heatmap_overlap_low.svg", overlap_label_ld, names,
                 "overlap, 2D"),
                ("heatmap_proximity_high.svg", prox_hd, names,
                 "proximity, original space"),
                ("heatmap_proximity_low.svg", prox_ld, names,
                 "proximity, 2D"),
                ("heatmap_diff_before.svg", diff_before, anchor_names,
                 "|overlap difference| before optimization"),
                ("heatmap_diff_after.svg", diff_after, anchor_names,
                 "|overlap difference| after optimization"),
            ]
            if cfg.confusion:
                heatmaps.append(("heatmap_confusion.svg", conf, names,
                                 "KNN-classifier confusion"))
            for fname, matrix, mnames, title in heatmaps:
                writer.write_text(fname,
                                  render_heatmap(matrix, mnames, rcfg,
                                                 title=title))

        write_config_echo(cfg, writer.path("resolved-config.json"))
        return writer.write_manifest()
    except Exception:
        writer.discard_all()
        raise


def measure(cfg: RunConfig, dataset: LabeledDataset | None = None) -> str:
    """Matrices only: ingest, sub-cluster, high-dim relations, no plot."""
    writer = ArtifactWriter(cfg.out)
    try:
        with _stage("dataset"):
            ds = dataset if dataset is not None else _ingest(cfg)
        with _stage("subclustering"):
            lo, hi = parse_target_band(cfg.anchors_target)
            birch = BirchParams(
                threshold=parse_threshold(cfg.birch_threshold,
                                          "birch_threshold"),
                branching=cfg.birch_branching,
                auto_target=(lo, hi),
            )
            sub = subcluster_dataset(ds, birch)
            dump_anchors(sub, writer.path("anchors.txt"))
            writer.write_text("anchor_stats.json",
                              json.dumps(anchor_stats(sub), indent=2) + "\n")
        rel = relations.RelationParams(k_overlap=cfg.k_overlap,
                                       k_proximity=cfg.k_prox,
                                       k_confusion=cfg.k_confusion)
        names = list(ds.class_names)
        with _stage("relations"):
            overlap_anchor_hd, overlap_label_hd, prox_hd = \
                _relations_bundle(ds, sub, rel)
            relations.write_matrix(writer.path("overlap_high.txt"),
                                   overlap_label_hd, names)
            relations.write_matrix(writer.path("proximity_high.txt"),
                                   prox_hd, names)
            relations.write_matrix(
                writer.path("anchor_overlap_high.txt"), overlap_anchor_hd,
                [f"a{i}" for i in range(sub.n_anchors)])
            if cfg.confusion:
                conf = relations.knn_confusion(ds.points, ds.labels, ds.m,
                                               rel.k_confusion)
                relations.write_matrix(writer.path("confusion.txt"),
                                       conf, names)
        write_config_echo(cfg, writer.path("resolved-config.json"))
        return writer.write_manifest()
    except Exception:
        writer.discard_all()
        raise


def render_from_geometry(geometry_path: str, cfg: RunConfig) -> str:
    """Re-render a saved blobs.json without recomputing anything."""
    writer = ArtifactWriter(cfg.out)
    try:
        with _stage("render"):
            with open(geometry_path, "r", encoding="utf-8") as f:
                blobs, names = blobs_from_json(f.read())
            writer.write_text("plot.svg",
                              render_blobs(blobs, names,
                                           _render_config(cfg)))
        write_config_echo(cfg, writer.path("resolved-config.json"))
        return writer.write_manifest()
    except Exception:
        writer.discard_all()
        raise
