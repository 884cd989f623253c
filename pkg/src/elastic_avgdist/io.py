"""Reading point clouds and writing curves, reports and figures."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile

import numpy as np

from .geometry import Polyline, WeightedPointCloud, as_polyline

__all__ = [
    "InputError",
    "read_csv_cloud",
    "read_json_cloud",
    "load_cloud",
    "write_curve_csv",
    "read_curve_csv",
    "to_jsonable",
    "dumps_json",
    "atomic_write",
    "write_json",
    "write_rows_csv",
    "render_svg",
]


class InputError(ValueError):
    """Malformed user input (file contents or configuration)."""


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_float(text, row):
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"row {row}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise InputError(f"row {row}: non-finite value {text!r}")
    return value


def _build_cloud(points, weights):
    if not points:
        raise InputError("no data points")
    try:
        return WeightedPointCloud(np.array(points, dtype=float), np.array(weights, dtype=float))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def read_csv_cloud(path, weight_col=None) -> WeightedPointCloud:
    """Read a comma-separated point cloud with a header row.

    Every column except ``weight_col`` (a header name or a zero-based index)
    is a coordinate. Weights default to 1. Row numbers in error messages count
    data rows from 1, not counting the header.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    if not rows:
        raise InputError("no data points")
    header = [h.strip() for h in rows[0]]
    w_idx = None
    if weight_col is not None:
        if str(weight_col) in header:
            w_idx = header.index(str(weight_col))
        else:
            try:
                w_idx = int(weight_col)
            except ValueError:
                raise InputError(f"weight column {weight_col!r} not in header {header}") from None
            if not 0 <= w_idx < len(header):
                raise InputError(f"weight column index {w_idx} out of range for {len(header)} columns")
    coord_idx = [k for k in range(len(header)) if k != w_idx]
    if not coord_idx:
        raise InputError("no coordinate columns")
    points, weights = [], []
    for row_no, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise InputError(f"row {row_no}: expected {len(header)} columns, found {len(row)}")
        points.append([_parse_float(row[k], row_no) for k in coord_idx])
        if w_idx is None:
            weights.append(1.0)
        else:
            w = _parse_float(row[w_idx], row_no)
            if w < 0:
                raise InputError(f"row {row_no}: negative weight {w!r}")
            weights.append(w)
    return _build_cloud(points, weights)


def read_json_cloud(path) -> WeightedPointCloud:
    """Read ``{"points": [[...], ...], "weights": [...]}``; weights are optional."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        raise InputError("no data points")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "points" not in doc:
        raise InputError('JSON input must be an object with a "points" array')
    raw = doc["points"]
    if not isinstance(raw, list) or not raw:
        raise InputError("no data points")
    raw_w = doc.get("weights")
    if raw_w is not None and (not isinstance(raw_w, list) or len(raw_w) != len(raw)):
        raise InputError("weights must be a list with one entry per point")
    dim = len(raw[0]) if isinstance(raw[0], list) else 0
    points, weights = [], []
    for row_no, pt in enumerate(raw, start=1):
        if not isinstance(pt, list) or len(pt) != dim:
            raise InputError(f"row {row_no}: expected {dim} coordinates")
        points.append([_parse_float(v, row_no) for v in pt])
        w = 1.0 if raw_w is None else _parse_float(raw_w[row_no - 1], row_no)
        if w < 0:
            raise InputError(f"row {row_no}: negative weight {w!r}")
        weights.append(w)
    return _build_cloud(points, weights)


def load_cloud(path, fmt=None, weight_col=None) -> WeightedPointCloud:
    """Dispatch on ``fmt`` ("csv" or "json"), or on the file extension."""
    if not os.path.exists(path):
        raise InputError(f"input file not found: {path}")
    if fmt is None:
        fmt = "json" if str(path).lower().endswith(".json") else "csv"
    if fmt == "csv":
        return read_csv_cloud(path, weight_col)
    if fmt == "json":
        return read_json_cloud(path)
    raise InputError(f"unknown input format {fmt!r}; use csv or json")


def _fmt(x):
    return format(float(x), ".17g")


def write_curve_csv(path, curve):
    """One node per row, header ``x0..x{d-1}``, 17 significant digits."""
    nodes = as_polyline(curve).nodes
    lines = [",".join(f"x{k}" for k in range(nodes.shape[1]))]
    lines += [",".join(_fmt(v) for v in row) for row in nodes]
    atomic_write(path, "\n".join(lines) + "\n")


def read_curve_csv(path) -> Polyline:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return Polyline(np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float))


def write_rows_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else _fmt(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def to_jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps_json(obj))


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


def _planar(points, basis):
    return points if basis is None else (points - basis[0]) @ basis[1]


def render_svg(cloud: WeightedPointCloud, curves, title="", node_mass=None, size=480, margin=24) -> str:
    """Static figure: data scatter, one or more polylines, optional node-mass bars.

    Data with more than two coordinates is shown in the plane of its two
    leading weighted principal components, and the title says so.
    """
    curves = [as_polyline(c) for c in curves]
    basis = None
    if cloud.dim > 2:
        mean = cloud.mean()
        w = cloud.weights / cloud.total_mass
        centered = cloud.points - mean
        cov = (centered * w[:, None]).T @ centered
        _, vecs = np.linalg.eigh(cov)
        basis = (mean, vecs[:, ::-1][:, :2])
        title = f"{title} (projected on top two principal components)".strip()
    pts = _planar(cloud.points, basis)
    cpts = [_planar(c.nodes, basis) for c in curves]
    allp = np.vstack([pts] + cpts)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-300))
    scale = (size - 2 * margin) / span

    def xy(p):
        return margin + (p[0] - lo[0]) * scale, size - margin - (p[1] - lo[1]) * scale

    wmax = float(cloud.weights.max())
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 20}" '
        f'viewBox="0 0 {size} {size + 20}">',
        f"<title>{_escape(title)}</title>",
        f'<rect width="{size}" height="{size + 20}" fill="white"/>',
        f'<text x="{margin}" y="{size + 12}" font-size="11" font-family="sans-serif">{_escape(title)}</text>',
    ]
    for p, w in zip(pts, cloud.weights):
        if w <= 0:
            continue
        x, y = xy(p)
        r = 1.0 + 2.0 * math.sqrt(w / wmax)
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" fill="#888" fill-opacity="0.6"/>')
    for k, c in enumerate(cpts):
        color = _COLORS[k % len(_COLORS)]
        if c.shape[0] == 1:
            x, y = xy(c[0])
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{color}"/>')
            continue
        path = " ".join("{:.2f},{:.2f}".format(*xy(p)) for p in c)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    if node_mass is not None and cpts:
        m = np.asarray(node_mass, dtype=float)
        top = float(m.max()) if m.size and m.max() > 0 else 1.0
        for p, v in zip(cpts[-1], m):
            x, y = xy(p)
            h = 0.1 * size * v / top
            out.append(f'<rect x="{x - 1:.2f}" y="{y - h:.2f}" width="2" height="{h:.2f}" fill="#ff7f0e"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text):
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
