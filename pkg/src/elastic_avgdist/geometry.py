"""Polylines, weighted point clouds and the geometric primitives built on them.

Curves are open polylines stored as ``(n, d)`` float arrays. A single-node
polyline is a valid curve (the degenerate "point" curve). Everything here is a
pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

__all__ = [
    "WeightedPointCloud",
    "Polyline",
    "EnergyParams",
    "ProjectionAssignment",
    "as_polyline",
    "edge_lengths",
    "length",
    "project_point",
    "project_cloud",
    "tangents",
    "turning_angles",
    "signed_curvatures",
    "discrete_curvature_term",
    "resample",
    "merge_short_edges",
    "curve_metric",
    "confinement_check",
    "unit_ball_volume",
]

# rows per block when projecting large clouds; bounds peak memory at
# CHUNK * n_segments * d floats
_CHUNK = 2048


def _pairwise_max_distance(points):
    best = 0.0
    for start in range(0, len(points), _CHUNK):
        block = points[start:start + _CHUNK]
        d2 = ((block[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
        best = max(best, float(d2.max()))
    return math.sqrt(best)


@dataclass(frozen=True, eq=False)
class WeightedPointCloud:
    """Empirical measure: points in R^d with nonnegative weights.

    Parameters
    ----------
    points : array_like, shape (N, d)
    weights : array_like, shape (N,), optional
        Defaults to unit weights.
    """

    points: np.ndarray
    weights: np.ndarray

    def __init__(self, points, weights=None):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("no data points")
        if pts.shape[1] < 2:
            raise ValueError("points must have dimension d >= 2")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if weights is None:
            w = np.ones(pts.shape[0])
        else:
            w = np.array(weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise ValueError("weights and points differ in length")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.any(w > 0):
            raise ValueError("at least one point must carry positive weight")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @cached_property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @cached_property
    def support(self) -> np.ndarray:
        """Points carrying positive weight."""
        return self.points[self.weights > 0]

    @cached_property
    def diameter(self) -> float:
        """Largest distance between two positive-weight points."""
        return _pairwise_max_distance(self.support)

    def mean(self) -> np.ndarray:
        return self.weights @ self.points / self.total_mass

    def transformed(self, scale=1.0, shift=None, rotation=None) -> "WeightedPointCloud":
        """Return ``scale * points @ rotation.T + shift`` with the same weights."""
        pts = self.points
        if rotation is not None:
            pts = pts @ np.asarray(rotation, dtype=float).T
        pts = scale * pts
        if shift is not None:
            pts = pts + np.asarray(shift, dtype=float)
        return WeightedPointCloud(pts, self.weights)


@dataclass(frozen=True, eq=False)
class Polyline:
    """Ordered nodes of an open curve, shape ``(n, d)`` with ``n >= 1``."""

    nodes: np.ndarray

    def __init__(self, nodes, check=True):
        arr = np.array(nodes, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("a polyline needs at least one node")
        if check:
            if not np.all(np.isfinite(arr)):
                raise ValueError("polyline nodes must be finite")
            if arr.shape[0] >= 2 and np.any(np.all(arr[1:] == arr[:-1], axis=1)):
                raise ValueError("consecutive polyline nodes must be distinct")
        arr.setflags(write=False)
        object.__setattr__(self, "nodes", arr)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def __len__(self) -> int:
        return self.nodes.shape[0]

    def reversed(self) -> "Polyline":
        return Polyline(self.nodes[::-1], check=False)

    def scaled(self, r: float) -> "Polyline":
        return Polyline(r * self.nodes, check=False)


def as_polyline(curve) -> Polyline:
    return curve if isinstance(curve, Polyline) else Polyline(curve)


@dataclass(frozen=True)
class EnergyParams:
    """Weights of the length and bending penalties and the distance exponent.

    ``lam`` multiplies the length, ``eps`` the integrated squared curvature and
    ``p`` is the exponent of the distance term. The constants ``D``, ``theta``
    and ``Y`` depend on the data diameter and are computed on demand.
    """

    lam: float
    eps: float
    p: float = 2.0

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("lambda must be positive")
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError("epsilon must be positive")
        if not (self.p >= 1 and math.isfinite(self.p)):
            raise ValueError("p must be >= 1")

    def D(self, diam: float) -> float:
        return 2.0 * diam

    def theta(self, diam: float) -> float:
        return self.p * self.D(diam) ** (self.p - 1.0)

    def Y(self, diam: float) -> float:
        """Lipschitz bound on the unit tangent of a minimizer."""
        return math.sqrt(2.0 * (2.0 * self.theta(diam) + self.lam) / self.eps)


@dataclass(frozen=True, eq=False)
class ProjectionAssignment:
    """Nearest-point data for a batch of query points.

    All arrays are indexed by query point: ``segment_index`` (int),
    ``t`` in [0, 1] along that segment, ``foot`` (the nearest point) and
    ``distance``.
    """

    segment_index: np.ndarray
    t: np.ndarray
    foot: np.ndarray
    distance: np.ndarray

    def __len__(self) -> int:
        return self.segment_index.shape[0]


def edge_lengths(curve) -> np.ndarray:
    nodes = as_polyline(curve).nodes
    return np.sqrt(((nodes[1:] - nodes[:-1]) ** 2).sum(axis=1))


def length(curve) -> float:
    """Total length; zero for a single node."""
    return float(np.sum(edge_lengths(curve)))


def project_cloud(points, curve) -> ProjectionAssignment:
    """Project every row of ``points`` onto the polyline.

    Ties between segments go to the smallest segment index; within one segment
    the clamped scalar projection is unique.
    """
    nodes = as_polyline(curve).nodes
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = pts.shape[0]
    if nodes.shape[0] == 1:
        foot = np.repeat(nodes, m, axis=0)
        dist = np.sqrt(((pts - foot) ** 2).sum(axis=1))
        return ProjectionAssignment(np.zeros(m, dtype=int), np.zeros(m), foot, dist)

    a = nodes[:-1]
    e = nodes[1:] - nodes[:-1]
    ee = (e ** 2).sum(axis=1)
    seg = np.empty(m, dtype=int)
    tt = np.empty(m)
    for start in range(0, m, _CHUNK):
        block = pts[start:start + _CHUNK]
        rel = block[:, None, :] - a[None, :, :]
        t = np.clip((rel * e[None, :, :]).sum(axis=-1) / ee[None, :], 0.0, 1.0)
        diff = rel - t[..., None] * e[None, :, :]
        d2 = (diff ** 2).sum(axis=-1)
        j = np.argmin(d2, axis=1)
        seg[start:start + _CHUNK] = j
        tt[start:start + _CHUNK] = t[np.arange(block.shape[0]), j]
    foot = (1.0 - tt)[:, None] * nodes[seg] + tt[:, None] * nodes[seg + 1]
    dist = np.sqrt(((pts - foot) ** 2).sum(axis=1))
    return ProjectionAssignment(seg, tt, foot, dist)


def project_point(y, curve) -> ProjectionAssignment:
    """Nearest point on ``curve`` to the single point ``y`` (a length-1 assignment)."""
    y = np.asarray(y, dtype=float).reshape(1, -1)
    if not np.all(np.isfinite(y)):
        raise ValueError("query point must be finite")
    return project_cloud(y, curve)


def tangents(curve) -> np.ndarray:
    """Unit edge directions, shape ``(n - 1, d)``."""
    nodes = as_polyline(curve).nodes
    if nodes.shape[0] < 2:
        raise ValueError("tangents need at least two nodes")
    e = nodes[1:] - nodes[:-1]
    return e / np.sqrt((e ** 2).sum(axis=1))[:, None]


def _angles_between(u, v):
    # 2*atan2(|u-v|, |u+v|) equals arccos(u.v) but keeps full precision near 0 and pi
    return 2.0 * np.arctan2(np.linalg.norm(u - v, axis=-1), np.linalg.norm(u + v, axis=-1))


def turning_angles(curve) -> np.ndarray:
    """Angle in [0, pi] between consecutive edges, one per interior node."""
    if as_polyline(curve).n_nodes < 3:
        raise ValueError("turning angles need at least three nodes")
    u = tangents(curve)
    return _angles_between(u[:-1], u[1:])


def _dual_lengths(curve):
    ell = edge_lengths(curve)
    return 0.5 * (ell[:-1] + ell[1:])


def signed_curvatures(curve) -> np.ndarray:
    """Discrete curvature ``theta_k / l_k`` at interior nodes.

    In the plane the sign is that of the cross product of consecutive tangents
    (left turns positive); in higher dimension the magnitude is returned.
    """
    curve = as_polyline(curve)
    kappa = turning_angles(curve) / _dual_lengths(curve)
    if curve.dim == 2:
        u = tangents(curve)
        cross = u[:-1, 0] * u[1:, 1] - u[:-1, 1] * u[1:, 0]
        kappa = np.where(cross < 0, -kappa, kappa)
    return kappa


def _check_loop(curve):
    if curve.n_nodes < 4 or not np.array_equal(curve.nodes[0], curve.nodes[-1]):
        raise ValueError("a closed curve repeats its first node as the last one and has at least three edges")


def discrete_curvature_term(curve, closed: bool = False) -> float:
    """Sum of ``theta_k**2 / l_k`` over interior nodes, ``l_k`` the mean adjacent edge length.

    With ``closed=True`` the curve must end where it starts and the turning
    angle at that seam node is included too.
    """
    curve = as_polyline(curve)
    if closed:
        _check_loop(curve)
        u = tangents(curve)
        ell = edge_lengths(curve)
        u = np.vstack([u, u[:1]])
        ell = np.concatenate([ell, ell[:1]])
        theta = _angles_between(u[:-1], u[1:])
        return float(np.sum(theta ** 2 / (0.5 * (ell[:-1] + ell[1:]))))
    if curve.n_nodes < 3:
        return 0.0
    theta = turning_angles(curve)
    return float(np.sum(theta ** 2 / _dual_lengths(curve)))


def resample(curve, n_nodes: int) -> Polyline:
    """Place ``n_nodes`` nodes on the polyline at equal arc-length spacing.

    Endpoints are kept bit for bit. Targets that coincide with an existing
    node's arc-length position (to 1e-12 relative) reuse that node exactly, so a
    polyline that is already uniform comes back unchanged.
    """
    curve = as_polyline(curve)
    n_nodes = int(n_nodes)
    if n_nodes < 2:
        raise ValueError("resample needs n_nodes >= 2")
    ell = edge_lengths(curve)
    total = float(np.sum(ell))
    if not total > 0:
        raise ValueError("cannot resample a curve of zero length")
    nodes = curve.nodes
    cum = np.concatenate([[0.0], np.cumsum(ell)])
    targets = total * np.arange(n_nodes) / (n_nodes - 1)

    j = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(ell) - 1)
    frac = np.clip((targets - cum[j]) / ell[j], 0.0, 1.0)
    out = nodes[j] + frac[:, None] * (nodes[j + 1] - nodes[j])

    tol = 1e-12 * total
    nearest = np.clip(np.searchsorted(cum, targets), 0, len(cum) - 1)
    for k in range(n_nodes):
        for cand in (nearest[k] - 1, nearest[k]):
            if 0 <= cand < len(cum) and abs(cum[cand] - targets[k]) <= tol:
                out[k] = nodes[cand]
                break
    out[0] = nodes[0]
    out[-1] = nodes[-1]
    return Polyline(out, check=False)


def merge_short_edges(curve, rel_tol: float = 1e-9) -> Polyline:
    """Drop nodes closer than ``rel_tol * length`` to the previously kept node.

    The last node is always kept (the node before it is dropped instead), so
    the image of the curve is unchanged up to the merge threshold.
    """
    curve = as_polyline(curve)
    nodes = curve.nodes
    if nodes.shape[0] < 2:
        return curve
    total = length(curve)
    tol = rel_tol * total
    keep = [0]
    for i in range(1, nodes.shape[0]):
        if np.linalg.norm(nodes[i] - nodes[keep[-1]]) > tol:
            keep.append(i)
    if keep[-1] != nodes.shape[0] - 1:
        if len(keep) > 1:
            keep[-1] = nodes.shape[0] - 1
        else:
            keep.append(nodes.shape[0] - 1)
    out = nodes[keep]
    if out.shape[0] == 2 and np.all(out[0] == out[1]):
        out = out[:1]
    return Polyline(out, check=False)


def _constant_speed_samples(curve, n_samples):
    curve = as_polyline(curve)
    if curve.n_nodes == 1 or length(curve) == 0.0:
        return np.repeat(curve.nodes[:1], n_samples, axis=0)
    return resample(curve, n_samples).nodes


def curve_metric(a, b, n_samples: int = 512) -> float:
    """Orientation-free sup distance of constant-speed parametrizations plus length gap.

    The sup is taken over ``n_samples`` equally spaced parameter values, so the
    result approximates the continuous metric from below.
    """
    a = as_polyline(a)
    b = as_polyline(b)
    sa = _constant_speed_samples(a, n_samples)
    sb = _constant_speed_samples(b, n_samples)
    forward = np.max(np.linalg.norm(sa - sb, axis=1))
    backward = np.max(np.linalg.norm(sa - sb[::-1], axis=1))
    return float(min(forward, backward) + abs(length(a) - length(b)))


def confinement_check(curve, cloud: WeightedPointCloud, params: EnergyParams):
    """Check that every node lies in the confinement neighbourhood of the data.

    The radius is ``diam + mass * diam**p / lam``; with unit total mass this is
    ``diam + diam**p / lam``. Distance to the support is measured to the nearest
    positive-weight point.

    Returns
    -------
    ok : bool
    violation : float
        Largest amount by which a node exceeds the radius (0 when ok).
    """
    nodes = as_polyline(curve).nodes
    diam = cloud.diameter
    radius = diam + cloud.total_mass * diam ** params.p / params.lam
    support = cloud.support
    worst = 0.0
    for start in range(0, nodes.shape[0], _CHUNK):
        block = nodes[start:start + _CHUNK]
        d2 = ((block[:, None, :] - support[None, :, :]) ** 2).sum(axis=-1)
        worst = max(worst, float(np.sqrt(d2.min(axis=1)).max()))
    violation = max(0.0, worst - radius)
    return violation == 0.0, violation


def unit_ball_volume(k: int) -> float:
    """Lebesgue measure of the unit ball in R^k."""
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)
