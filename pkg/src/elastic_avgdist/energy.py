"""Discrete fitting energy and its gradient with respect to node positions.

The energy of a polyline ``phi`` for a weighted cloud ``mu`` is::

    sum_i w_i * dist(x_i, phi)**p  +  lam * length(phi)  +  eps * sum_k theta_k**2 / l_k

where ``theta_k`` is the turning angle at interior node ``k`` and ``l_k`` the
mean of its two adjacent edge lengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    EnergyParams,
    Polyline,
    ProjectionAssignment,
    WeightedPointCloud,
    _angles_between,
    as_polyline,
    discrete_curvature_term,
    length,
    project_cloud,
)

__all__ = [
    "EnergyBreakdown",
    "distance_term",
    "total_energy",
    "energy_with_assignment",
    "gradient",
    "fd_gradient",
    "singleton_energies",
    "best_singleton",
]

# below this turning angle theta/sin(theta) is evaluated by its series
_SMALL_ANGLE = 1e-6
_MIN_EDGE = 1e-12


@dataclass(frozen=True)
class EnergyBreakdown:
    distance_term: float
    length_term: float
    curvature_term: float
    total: float

    @classmethod
    def from_terms(cls, distance, length_term, curvature):
        return cls(distance, length_term, curvature, distance + length_term + curvature)

    def as_dict(self):
        return {
            "distance_term": self.distance_term,
            "length_term": self.length_term,
            "curvature_term": self.curvature_term,
            "total": self.total,
        }


def _p_power(dist, p):
    if p == 2:
        return dist * dist
    if p == 1:
        return dist
    return dist ** p


def distance_term(cloud: WeightedPointCloud, curve, p: float):
    """Weighted sum of ``dist**p`` from the data to the curve.

    Returns
    -------
    value : float
    assignment : ProjectionAssignment
        The projections used, for reuse by the caller.
    """
    assignment = project_cloud(cloud.points, curve)
    value = float(np.sum(cloud.weights * _p_power(assignment.distance, p)))
    return value, assignment


def energy_with_assignment(cloud: WeightedPointCloud, curve, params: EnergyParams, closed: bool = False):
    """Like :func:`total_energy` but also return the projection assignment."""
    curve = as_polyline(curve)
    dist, assignment = distance_term(cloud, curve, params.p)
    if curve.n_nodes == 1:
        return EnergyBreakdown.from_terms(dist, 0.0, 0.0), assignment
    bd = EnergyBreakdown.from_terms(
        dist,
        params.lam * length(curve),
        params.eps * discrete_curvature_term(curve, closed=closed),
    )
    return bd, assignment


def total_energy(cloud: WeightedPointCloud, curve, params: EnergyParams, closed: bool = False) -> EnergyBreakdown:
    """Distance, length and bending terms of ``curve``.

    ``closed=True`` evaluates a loop (first node repeated at the end) and
    counts the bending at the seam; the fitting routines use open curves.
    """
    return energy_with_assignment(cloud, curve, params, closed)[0]


def contact_tolerance(cloud: WeightedPointCloud) -> float:
    """Distance below which a point counts as lying on the curve."""
    return 1e-9 * cloud.diameter


def _distance_gradient(cloud, nodes, params, assignment: ProjectionAssignment):
    p = params.p
    diff = assignment.foot - cloud.points
    dist = assignment.distance
    if p == 2:
        coef = 2.0 * cloud.weights
    else:
        tol = contact_tolerance(cloud)
        safe = np.where(dist < tol, 1.0, dist)
        coef = np.where(dist < tol, 0.0, p * cloud.weights * safe ** (p - 2.0))
    force = coef[:, None] * diff
    t = assignment.t[:, None]
    grad = np.zeros_like(nodes)
    np.add.at(grad, assignment.segment_index, (1.0 - t) * force)
    np.add.at(grad, assignment.segment_index + 1, t * force)
    return grad


def _length_gradient(u):
    n = u.shape[0] + 1
    grad = np.zeros((n, u.shape[1]))
    grad[1:] += u
    grad[:-1] -= u
    return grad


def _curvature_gradient(u, ell):
    """Gradient of ``sum theta_k**2 / l_k`` with respect to node positions."""
    n = u.shape[0] + 1
    grad = np.zeros((n, u.shape[1]))
    if n < 3:
        return grad
    u0, u1 = u[:-1], u[1:]
    l0, l1 = ell[:-1], ell[1:]
    c = np.clip((u0 * u1).sum(axis=1), -1.0, 1.0)
    theta = _angles_between(u0, u1)
    dual = 0.5 * (l0 + l1)
    small = theta < _SMALL_ANGLE
    sin_theta = np.sin(theta)
    ratio = np.where(small, 1.0 + theta ** 2 / 6.0, theta / np.where(small, 1.0, sin_theta))
    # d(theta^2)/dc = -2 theta / sin(theta)
    dT_dc = (-2.0 * ratio / dual)[:, None]
    dT_dl = (-(theta ** 2) / dual ** 2 * 0.5)[:, None]
    dc_de0 = (u1 - c[:, None] * u0) / l0[:, None]
    dc_de1 = (u0 - c[:, None] * u1) / l1[:, None]
    g_e0 = dT_dc * dc_de0 + dT_dl * u0
    g_e1 = dT_dc * dc_de1 + dT_dl * u1
    # e0 = x_k - x_{k-1}, e1 = x_{k+1} - x_k
    grad[:-2] -= g_e0
    grad[1:-1] += g_e0 - g_e1
    grad[2:] += g_e1
    return grad


def gradient(cloud: WeightedPointCloud, curve, params: EnergyParams, assignment=None) -> np.ndarray:
    """Analytic gradient of the discrete energy, shape ``(n, d)``.

    The projection assignment is held fixed. For ``p < 2`` points closer than
    ``1e-9 * diam`` to the curve contribute nothing (minimal-norm subgradient).
    """
    curve = as_polyline(curve)
    nodes = curve.nodes
    if curve.n_nodes < 2:
        raise ValueError("gradient needs at least two nodes")
    e = nodes[1:] - nodes[:-1]
    ell = np.sqrt((e ** 2).sum(axis=1))
    if np.any(ell < _MIN_EDGE):
        raise ValueError("gradient undefined: edge shorter than 1e-12")
    u = e / ell[:, None]
    if assignment is None:
        assignment = project_cloud(cloud.points, curve)
    grad = _distance_gradient(cloud, nodes, params, assignment)
    grad = grad + params.lam * _length_gradient(u)
    grad = grad + params.eps * _curvature_gradient(u, ell)
    return grad


def fd_gradient(cloud: WeightedPointCloud, curve, params: EnergyParams, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of ``total_energy`` with step ``h`` per coordinate."""
    nodes = np.array(as_polyline(curve).nodes)
    grad = np.zeros_like(nodes)
    for i in range(nodes.shape[0]):
        for k in range(nodes.shape[1]):
            orig = nodes[i, k]
            nodes[i, k] = orig + h
            fp = total_energy(cloud, Polyline(nodes, check=False), params).total
            nodes[i, k] = orig - h
            fm = total_energy(cloud, Polyline(nodes, check=False), params).total
            nodes[i, k] = orig
            grad[i, k] = (fp - fm) / (2.0 * h)
    return grad


def singleton_energies(cloud: WeightedPointCloud, p: float) -> np.ndarray:
    """Energy of the one-node curve placed at each positive-weight data point."""
    support = cloud.support
    mask = cloud.weights > 0
    w = cloud.weights[mask]
    out = np.empty(support.shape[0])
    for k in range(support.shape[0]):
        dist = np.sqrt(((support - support[k]) ** 2).sum(axis=1))
        out[k] = float(np.sum(w * _p_power(dist, p)))
    return out


def best_singleton(cloud: WeightedPointCloud, p: float):
    """Cheapest one-node curve located at a data point.

    Returns
    -------
    curve : Polyline
    energy : float
    """
    energies = singleton_energies(cloud, p)
    k = int(np.argmin(energies))
    curve = Polyline(cloud.support[k])
    return curve, total_energy(cloud, curve, EnergyParams(1.0, 1.0, p)).total
