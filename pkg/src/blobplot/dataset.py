"""Labeled dataset model and disk ingestion.

Two on-disk formats are supported:

* delimited text: comma-separated rows, optional header, one label column
  addressed by header name or 0-based index;
* raw binary: little-endian row-major float payload described by a
  plain-text sidecar (``n=``, ``d=``, ``dtype=f32|f64`` lines) plus a
  separate label file with one integer or string per line.

Labels are re-encoded to dense indices 0..M-1 in first-appearance order;
the source strings are kept as class names.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class LabeledDataset:
    """N points in D dimensions with a class index per point.

    Invariants (checked on construction): points finite, labels dense in
    0..M-1 with every class non-empty, N >= M >= 2 and D >= 2.
    """

    points: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        labs = np.ascontiguousarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labs)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if pts.ndim != 2:
            raise DataError("points must be a 2D matrix")
        n, d = pts.shape
        m = len(self.class_names)
        if labs.shape != (n,):
            raise DataError(f"got {labs.shape[0] if labs.ndim == 1 else '?'} "
                            f"labels for {n} points")
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        if m < 2:
            raise DataError(f"need at least 2 classes, got {m}")
        if n < m:
            raise DataError(f"need at least as many points ({n}) as classes ({m})")
        if d < 2:
            raise DataError(f"need at least 2 feature columns, got {d}")
        if labs.min(initial=0) < 0 or labs.max(initial=0) >= m:
            raise DataError("label index out of range")
        counts = np.bincount(labs, minlength=m)
        if (counts == 0).any():
            empty = int(np.argmin(counts))
            raise DataError(f"class {self.class_names[empty]!r} has no points")
        pts.flags.writeable = False
        labs.flags.writeable = False

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def m(self) -> int:
        return len(self.class_names)


@dataclass
class IngestSpec:
    """Where and how to read a dataset from disk."""

    path: str
    format: str = "text"  # "text" | "binary"
    label_column: str | int | None = None
    sidecar_path: str | None = None
    labels_path: str | None = None  # binary format; defaults to path + ".labels"
    standardize_mode: str = "none"  # "none" | "zscore"

    def __post_init__(self):
        if self.format not in ("text", "binary"):
            raise DataError(f"unknown format {self.format!r}")
        if self.format == "text" and self.label_column is None:
            raise DataError("text format requires a label column")


def encode_labels(raw: list[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Dense first-appearance label encoding; bijective with class names."""
    seen: dict[str, int] = {}
    out = np.empty(len(raw), dtype=np.int64)
    for i, s in enumerate(raw):
        if s not in seen:
            seen[s] = len(seen)
        out[i] = seen[s]
    return out, tuple(seen)


def _parse_feature(cell: str, line_no: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(
            f"line {line_no}, column {col}: cannot parse {cell!r} as a number"
        ) from None
    if not np.isfinite(v):
        raise DataError(f"line {line_no}, column {col}: non-finite value {cell!r}")
    return v


def load_text(spec: IngestSpec) -> LabeledDataset:
    """Read a comma-separated text file per `spec`.

    With a string label column the first row must be a header. With an
    integer label column the header is auto-detected: if any non-label cell
    of the first row fails to parse as a number, the row is a header.
    """
    if not os.path.exists(spec.path):
        raise DataError(f"input file not found: {spec.path}")
    with open(spec.path, "r", encoding="utf-8") as f:
        lines = [ln.rstrip("\n").rstrip("\r") for ln in f]
    rows = [(i + 1, ln.split(",")) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise DataError(f"{spec.path}: file holds no data rows")

    first_no, first = rows[0]
    ncols = len(first)
    if isinstance(spec.label_column, str) and not spec.label_column.lstrip("-").isdigit():
        header = [c.strip() for c in first]
        if spec.label_column not in header:
            raise DataError(
                f"label column {spec.label_column!r} not in header {header}"
            )
        label_idx = header.index(spec.label_column)
        data_rows = rows[1:]
    else:
        label_idx = int(spec.label_column)
        if not -ncols <= label_idx < ncols:
            raise DataError(
                f"label column index {label_idx} out of range for {ncols} columns"
            )
        label_idx %= ncols
        is_header = False
        for c, cell in enumerate(first):
            if c == label_idx:
                continue
            try:
                float(cell)
            except ValueError:
                is_header = True
                break
        data_rows = rows[1:] if is_header else rows

    if not data_rows:
        raise DataError(f"{spec.path}: no data rows after the header")
    n = len(data_rows)
    d = ncols - 1
    points = np.empty((n, d), dtype=np.float64)
    raw_labels: list[str] = []
    for r, (line_no, cells) in enumerate(data_rows):
        if len(cells) != ncols:
            raise DataError(
                f"line {line_no}: expected {ncols} columns, got {len(cells)}"
            )
        c_out = 0
        for c, cell in enumerate(cells):
            if c == label_idx:
                raw_labels.append(cell.strip())
                continue
            points[r, c_out] = _parse_feature(cell.strip(), line_no, c)
            c_out += 1
    labels, names = encode_labels(raw_labels)
    return LabeledDataset(points, labels, names)


def _read_sidecar(path: str) -> dict[str, str]:
    if not os.path.exists(path):
        raise DataError(f"sidecar file not found: {path}")
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for ln in f:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            if "=" not in ln:
                raise DataError(f"sidecar line {ln!r} is not key=value")
            k, v = ln.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def load_binary(spec: IngestSpec) -> LabeledDataset:
    """Reinterpret a raw little-endian row-major buffer as an N x D matrix."""
    if spec.sidecar_path is None:
        raise DataError("binary format requires a sidecar path")
    side = _read_sidecar(spec.sidecar_path)
    for key in ("n", "d", "dtype"):
        if key not in side:
            raise DataError(f"sidecar is missing required key {key!r}")
    try:
        n = int(side["n"])
        d = int(side["d"])
    except ValueError:
        raise DataError("sidecar n/d must be integers") from None
    dtype = side["dtype"]
    if dtype not in ("f32", "f64"):
        raise DataError(f"sidecar dtype must be f32 or f64, got {dtype!r}")
    width = 4 if dtype == "f32" else 8

    if not os.path.exists(spec.path):
        raise DataError(f"payload file not found: {spec.path}")
    with open(spec.path, "rb") as f:
        payload = f.read()
    expected = n * d * width
    if len(payload) != expected:
        raise DataError(
            f"payload holds {len(payload)} bytes, sidecar implies {expected} "
            f"(n={n}, d={d}, {width} bytes per value)"
        )
    pts = np.frombuffer(payload, dtype="<f4" if width == 4 else "<f8")
    pts = pts.reshape(n, d).astype(np.float64)

    labels_path = spec.labels_path or side.get("labels") or spec.path + ".labels"
    if not os.path.isabs(labels_path) and "labels" in side:
        labels_path = os.path.join(os.path.dirname(spec.sidecar_path), labels_path)
    if not os.path.exists(labels_path):
        raise DataError(f"labels file not found: {labels_path}")
    with open(labels_path, "r", encoding="utf-8") as f:
        raw = [ln.strip() for ln in f if ln.strip()]
    if len(raw) != n:
        raise DataError(f"labels file holds {len(raw)} entries for n={n} points")
    labels, names = encode_labels(raw)
    return LabeledDataset(pts, labels, names)


def load(spec: IngestSpec) -> LabeledDataset:
    ds = load_text(spec) if spec.format == "text" else load_binary(spec)
    return standardize(ds, spec.standardize_mode)


def standardize(ds: LabeledDataset, mode: str) -> LabeledDataset:
    """Column-wise z-scoring (sample std); zero-variance columns pass through."""
    if mode == "none":
        return ds
    if mode != "zscore":
        raise DataError(f"unknown standardize mode {mode!r}")
    mean = ds.points.mean(axis=0)
    sd = ds.points.std(axis=0, ddof=1)
    scale = np.where(sd == 0.0, 1.0, sd)
    shift = np.where(sd == 0.0, 0.0, mean)
    pts = (ds.points - shift) / scale
    return LabeledDataset(pts, ds.labels, ds.class_names)


def write_text(ds: LabeledDataset, path: str) -> None:
    """Write the header + rows text form; floats use shortest round-trip repr."""
    for name in ds.class_names:
        if "," in name or "\n" in name:
            raise DataError(f"class name {name!r} cannot be written to the "
                            f"comma-separated format")
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(f"f{i}" for i in range(ds.d)) + ",label\n")
        for r in range(ds.n):
            cells = [repr(float(v)) for v in ds.points[r]]
            cells.append(ds.class_names[ds.labels[r]])
            f.write(",".join(cells) + "\n")
