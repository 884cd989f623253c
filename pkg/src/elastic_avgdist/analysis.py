"""Diagnostics comparing fitted curves with the regularity and mass estimates.

Each function takes a fitted curve (or a :class:`FitReport`) and returns a
small report dataclass whose pass flags can be recomputed from its numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .energy import total_energy
from .geometry import (
    EnergyParams,
    Polyline,
    WeightedPointCloud,
    as_polyline,
    discrete_curvature_term,
    edge_lengths,
    length,
    project_cloud,
    signed_curvatures,
    tangents,
    unit_ball_volume,
)
from .optimizer import FitConfig, FitReport, init_segment, minimize

__all__ = [
    "RegularityReport",
    "BoundsReport",
    "MassProjectionReport",
    "ResidualReport",
    "CircleSegmentReport",
    "regularity_check",
    "bounds_check",
    "holder_check",
    "scaling_transform",
    "node_masses",
    "mass_projection",
    "node_mass_refinement",
    "elastica_residual",
    "circle_vs_segment",
    "crossover_radius",
]


def _curve_of(fit):
    return fit.curve if isinstance(fit, FitReport) else as_polyline(fit)


@dataclass(frozen=True)
class RegularityReport:
    discrete_lipschitz: float
    Y: float
    ratio: float
    slack: float
    passed: bool

    def as_dict(self):
        return {
            "discrete_lipschitz": self.discrete_lipschitz,
            "Y": self.Y,
            "ratio": self.ratio,
            "slack": self.slack,
            "pass": self.passed,
        }


def tangent_lipschitz(curve) -> float:
    """Largest ``|u_k - u_{k-1}| / l_k`` over interior nodes (0 for fewer than 3 nodes)."""
    curve = as_polyline(curve)
    if curve.n_nodes < 3:
        return 0.0
    u = tangents(curve)
    ell = edge_lengths(curve)
    jump = np.linalg.norm(u[1:] - u[:-1], axis=1)
    return float(np.max(jump / (0.5 * (ell[:-1] + ell[1:]))))


def regularity_check(fit, cloud: WeightedPointCloud, params: EnergyParams, slack: float = 0.1) -> RegularityReport:
    """Compare the discrete tangent Lipschitz constant with the bound ``Y``."""
    lip = tangent_lipschitz(_curve_of(fit))
    Y = params.Y(cloud.diameter)
    ratio = lip / Y
    return RegularityReport(lip, Y, ratio, slack, ratio <= 1.0 + slack)


@dataclass(frozen=True)
class BoundsReport:
    """Length, bending and confinement estimates for a fitted curve.

    The energy budget is ``mass * diam**p`` (the cost of a one-node curve is at
    most that), so ``length <= budget / lam`` and ``bending <= budget / eps``.
    """

    length: float
    length_bound: float
    curvature_term: float
    curvature_bound: float
    max_support_distance: float
    confinement_radius: float
    rel_slack: float

    @property
    def length_ok(self):
        return self.length <= self.length_bound * (1.0 + self.rel_slack)

    @property
    def curvature_ok(self):
        return self.curvature_term <= self.curvature_bound * (1.0 + self.rel_slack)

    @property
    def confinement_ok(self):
        return self.max_support_distance <= self.confinement_radius * (1.0 + self.rel_slack)

    def as_dict(self):
        return {
            "length": self.length,
            "length_bound": self.length_bound,
            "length_pass": self.length_ok,
            "curvature_term": self.curvature_term,
            "curvature_bound": self.curvature_bound,
            "curvature_pass": self.curvature_ok,
            "max_support_distance": self.max_support_distance,
            "confinement_radius": self.confinement_radius,
            "confinement_pass": self.confinement_ok,
            "rel_slack": self.rel_slack,
        }


def bounds_check(fit, cloud: WeightedPointCloud, params: EnergyParams, rel_slack: float = 1e-6) -> BoundsReport:
    curve = _curve_of(fit)
    diam = cloud.diameter
    budget = cloud.total_mass * diam ** params.p
    support = cloud.support
    worst = 0.0
    for node in curve.nodes:
        worst = max(worst, float(np.sqrt(((support - node) ** 2).sum(axis=1)).min()))
    return BoundsReport(
        length=length(curve),
        length_bound=budget / params.lam,
        curvature_term=discrete_curvature_term(curve),
        curvature_bound=budget / params.eps,
        max_support_distance=worst,
        confinement_radius=diam + budget / params.lam,
        rel_slack=rel_slack,
    )


def holder_check(fit, cloud: WeightedPointCloud, params: EnergyParams, slack: float = 0.1):
    """Worst ratio of ``|u(s) - u(t)|`` to ``sqrt(budget / eps * |s - t|)`` over edge pairs.

    ``s`` and ``t`` are arc-length positions of edge midpoints. Returns the
    ratio and whether it stays below ``1 + slack``.
    """
    curve = _curve_of(fit)
    if curve.n_nodes < 3:
        return 0.0, True
    u = tangents(curve)
    ell = edge_lengths(curve)
    mid = np.cumsum(ell) - 0.5 * ell
    budget = cloud.total_mass * cloud.diameter ** params.p
    worst = 0.0
    for k in range(len(u) - 1):
        jump = np.linalg.norm(u[k + 1:] - u[k], axis=1)
        bound = np.sqrt(budget / params.eps * (mid[k + 1:] - mid[k]))
        worst = max(worst, float(np.max(jump / bound)))
    return worst, worst <= 1.0 + slack


def scaling_transform(cloud: WeightedPointCloud, params: EnergyParams, r: float):
    """Dilate the data by ``r`` and rescale the penalties so that minimizers dilate too.

    Weights are kept, so the energy of ``r * curve`` on the new problem is
    ``r**p`` times the energy of ``curve`` on the old one.
    """
    if not r > 0:
        raise ValueError("scale factor must be positive")
    p = params.p
    scaled_params = EnergyParams(r ** (p - 1.0) * params.lam, r ** (p + 1.0) * params.eps, p)
    return cloud.transformed(scale=r), scaled_params


def _arc_positions(curve, assignment):
    ell = edge_lengths(curve)
    cum = np.concatenate([[0.0], np.cumsum(ell)])
    return cum, cum[assignment.segment_index] + assignment.t * ell[assignment.segment_index]


def node_masses(curve, cloud: WeightedPointCloud) -> np.ndarray:
    """Mass whose projection lies within half an edge of each node.

    Feet exactly halfway between two nodes go to the earlier node.
    """
    curve = as_polyline(curve)
    if curve.n_nodes == 1:
        return np.array([cloud.total_mass])
    a = project_cloud(cloud.points, curve)
    ell = edge_lengths(curve)
    nearest = a.segment_index + (a.t * ell[a.segment_index] > 0.5 * ell[a.segment_index])
    masses = np.zeros(curve.n_nodes)
    np.add.at(masses, nearest, cloud.weights)
    return masses


@dataclass(frozen=True, eq=False)
class MassProjectionReport:
    node_masses: np.ndarray
    interval: tuple
    arc_length: float
    empirical_mass: float
    bound_rhs: float
    q: float
    density_norm: float

    @property
    def passed(self):
        return self.empirical_mass <= self.bound_rhs

    def as_dict(self):
        return {
            "interval": list(self.interval),
            "arc_length": self.arc_length,
            "empirical_mass": self.empirical_mass,
            "bound_rhs": self.bound_rhs,
            "q": None if math.isinf(self.q) else self.q,
            "density_norm": self.density_norm,
            "max_node_mass": float(np.max(self.node_masses)),
            "pass": self.passed,
        }


def mass_projection(fit, cloud: WeightedPointCloud, params: EnergyParams, interval, density_norm: float,
                    q: float = math.inf) -> MassProjectionReport:
    """Mass projecting onto the sub-polyline between two node indices, and its upper bound.

    ``density_norm`` is the user's estimate of the ``L^q`` norm of the data
    density; with the default ``q = inf`` it is the sup of the density.
    """
    curve = _curve_of(fit)
    i0, i1 = int(interval[0]), int(interval[1])
    if not 0 <= i0 < i1 < curve.n_nodes:
        raise ValueError("interval must be a nonempty node index range")
    a = project_cloud(cloud.points, curve)
    cum, s = _arc_positions(curve, a)
    inside = (s >= cum[i0]) & (s <= cum[i1])
    empirical = float(np.sum(cloud.weights[inside]))
    arc = float(cum[i1] - cum[i0])
    d = cloud.dim
    D = params.D(cloud.diameter)
    Y = params.Y(cloud.diameter)
    inner = arc * unit_ball_volume(d - 1) * (D ** d / d + D ** (d + 1) / (d + 1) * Y)
    exponent = 1.0 if math.isinf(q) else 1.0 - 1.0 / q
    bound = density_norm * inner ** exponent
    return MassProjectionReport(node_masses(curve, cloud), (i0, i1), arc, empirical, bound, q, density_norm)


def node_mass_refinement(cloud: WeightedPointCloud, params: EnergyParams, node_counts,
                         config: FitConfig = FitConfig()):
    """Fit at each node count and report the largest interior-node projected mass.

    Returns a list of ``(n_nodes, max_interior_mass, FitReport)``.
    """
    out = []
    for n in node_counts:
        cfg = FitConfig(**{**config.__dict__, "n_nodes": int(n)})
        rep = minimize(cloud, params, cfg)
        masses = node_masses(rep.curve, cloud)
        interior = masses[1:-1] if masses.shape[0] > 2 else masses
        out.append((int(n), float(np.max(interior)), rep))
    return out


@dataclass(frozen=True, eq=False)
class ResidualReport:
    max_residual: float
    residual: np.ndarray
    node_index: np.ndarray
    curvature: np.ndarray
    knots: np.ndarray

    def as_dict(self):
        return {
            "max_residual": self.max_residual,
            "n_evaluated": int(self.node_index.shape[0]),
            "knots": [int(k) for k in self.knots],
        }


def elastica_residual(fit, cloud: WeightedPointCloud, params: EnergyParams, knot_tol: float = 1e-3,
                      form: str = "lam_half") -> ResidualReport:
    """Residual of the curvature ODE between knots of a planar fit.

    Knots are nodes receiving more than ``knot_tol * total_mass`` of projected
    mass. On each knot-free run of interior nodes the signed curvature
    ``kappa`` and its second arc-length derivative (three-point stencil on the
    actual node spacing) give, for ``form="lam_half"``::

        lam / 2 * kappa + 2 * eps * (kappa'' - kappa**3)

    ``form="first_variation"`` evaluates ``2 eps kappa'' + eps kappa**3 - lam kappa``
    instead, the stationarity condition obtained by varying length and
    bending energy directly. Only nodes whose whole stencil lies inside a run
    are evaluated.
    """
    curve = _curve_of(fit)
    if curve.dim != 2:
        raise ValueError("the curvature ODE residual is defined for planar curves only")
    if form not in ("lam_half", "first_variation"):
        raise ValueError(f"unknown residual form {form!r}")
    n = curve.n_nodes
    empty = np.zeros(0)
    if n < 5:
        return ResidualReport(0.0, empty, np.zeros(0, dtype=int), empty, np.zeros(0, dtype=int))
    masses = node_masses(curve, cloud)
    knot = masses > knot_tol * cloud.total_mass
    kappa = np.zeros(n)
    kappa[1:-1] = signed_curvatures(curve)
    ell = edge_lengths(curve)
    # node k can be evaluated when k-1, k, k+1 are interior non-knot nodes
    ok = np.zeros(n, dtype=bool)
    free = ~knot
    free[[0, -1]] = False
    ok[1:-1] = free[:-2] & free[1:-1] & free[2:]
    idx = np.nonzero(ok)[0]
    hl = ell[idx - 1]
    hr = ell[idx]
    k2 = 2.0 * (hl * kappa[idx + 1] - (hl + hr) * kappa[idx] + hr * kappa[idx - 1]) / (hl * hr * (hl + hr))
    kap = kappa[idx]
    if form == "lam_half":
        res = 0.5 * params.lam * kap + 2.0 * params.eps * (k2 - kap ** 3)
    else:
        res = 2.0 * params.eps * k2 + params.eps * kap ** 3 - params.lam * kap
    max_res = float(np.max(np.abs(res))) if res.size else 0.0
    return ResidualReport(max_res, res, idx, kappa, np.nonzero(knot)[0])


@dataclass(frozen=True)
class CircleSegmentReport:
    radius: float
    E_circle: float
    E_segment: float
    analytic_circle: float
    analytic_segment: float

    def as_dict(self):
        return {
            "radius": self.radius,
            "E_circle": self.E_circle,
            "E_segment": self.E_segment,
            "analytic_circle": self.analytic_circle,
            "analytic_segment": self.analytic_segment,
        }


def circle_samples(r: float, n_samples: int, total_mass: float | None = None) -> WeightedPointCloud:
    """Equal-weight points on the circle of radius ``r`` (default total mass ``2 pi r``)."""
    angle = 2.0 * np.pi * np.arange(n_samples) / n_samples
    pts = r * np.c_[np.cos(angle), np.sin(angle)]
    mass = 2.0 * np.pi * r if total_mass is None else total_mass
    return WeightedPointCloud(pts, np.full(n_samples, mass / n_samples))


def circle_vs_segment(r: float, lam: float, eps: float, n_samples: int = 2000) -> CircleSegmentReport:
    """Energies (p = 1) of the circle and of a diameter for data spread on that circle.

    The circle curve is the closed inscribed polygon through the samples,
    evaluated as a loop; the segment runs from ``(-r, 0)`` to ``(r, 0)``.
    Analytic values: circle ``2 pi lam r + 2 pi eps / r``; segment
    ``4 r**2 + 2 lam r`` (mean ``|r sin|`` times mass ``2 pi r``).
    """
    cloud = circle_samples(r, n_samples)
    params = EnergyParams(lam, eps, 1.0)
    loop = np.vstack([cloud.points, cloud.points[:1]])
    circle = Polyline(loop)
    segment = Polyline([[-r, 0.0], [r, 0.0]])
    return CircleSegmentReport(
        r,
        total_energy(cloud, circle, params, closed=True).total,
        total_energy(cloud, segment, params).total,
        2.0 * np.pi * lam * r + 2.0 * np.pi * eps / r,
        4.0 * r * r + 2.0 * lam * r,
    )


def crossover_radius(lam: float, eps: float, normalization: str = "hausdorff") -> float:
    """Smallest radius at which the circle becomes cheaper than the diameter.

    ``normalization="hausdorff"`` uses data of mass ``2 pi r`` (segment
    energy ``4 r**2 + 2 lam r``); ``"probability"`` uses unit mass (segment
    energy ``(2 / pi) r + 2 lam r``). Returns ``nan`` when there is no
    crossing.
    """
    if normalization == "hausdorff":
        # r * (E_segment - E_circle) = 4 r^3 + 2 lam (1 - pi) r^2 - 2 pi eps
        roots = np.roots([4.0, 2.0 * lam * (1.0 - np.pi), 0.0, -2.0 * np.pi * eps])
        real = roots[(np.abs(roots.imag) < 1e-12 * np.abs(roots)) & (roots.real > 0)].real
        return float(np.min(real)) if real.size else math.nan
    if normalization == "probability":
        slope = 2.0 / np.pi + 2.0 * lam - 2.0 * np.pi * lam
        return math.sqrt(2.0 * np.pi * eps / slope) if slope > 0 else math.nan
    raise ValueError(f"unknown normalization {normalization!r}")
