"""Blob diagrams of labeled high-dimensional data.

Classes become smooth 2D blobs whose pairwise overlap and proximity are
optimized to match the same relations measured in the original feature
space: per-class BIRCH sub-clustering picks density-agnostic anchors,
directed KNN graphs quantify the relations, a greedy loop moves anchors in
2D until the measurements agree, and the result renders to SVG.
"""

from .dataset import IngestSpec, LabeledDataset, load, standardize
from .embedding import AnchorEmbedding, EmbedSpec, embed_anchors
from .errors import BlobplotError, ConfigError, DataError, PipelineError
from .geometry import BlobGeometry, GeometryParams, VirtualPointSet
from .optimizer import OptimizeParams, OptimizeResult, optimize
from .relations import KnnGraph, RelationParams
from .render import RenderConfig, render_blobs, render_heatmap
from .subclustering import BirchParams, SubClustering, subcluster_dataset
from .toydata import gen_toy

__version__ = "0.1.0"

__all__ = [
    "AnchorEmbedding", "BirchParams", "BlobGeometry", "BlobplotError",
    "ConfigError", "DataError", "EmbedSpec", "GeometryParams", "IngestSpec",
    "KnnGraph", "LabeledDataset", "OptimizeParams", "OptimizeResult",
    "PipelineError", "RelationParams", "RenderConfig", "SubClustering",
    "VirtualPointSet", "embed_anchors", "gen_toy", "load", "optimize",
    "render_blobs", "render_heatmap", "standardize",
    "subcluster_dataset",
]
