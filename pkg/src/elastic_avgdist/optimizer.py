"""Energy minimization over polyline node positions.

The solver is a limited-memory quasi-Newton descent with Armijo backtracking.
Search directions are preconditioned with a banded approximation of the
energy Hessian (bending ~ fourth difference, stretching ~ second difference,
data attraction on the diagonal), which keeps the iteration count roughly
independent of the node budget. Interior nodes move only normally to the
curve; their spacing is controlled by periodic uniform resampling instead.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import logging
import math
import os

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .energy import (
    EnergyBreakdown,
    best_singleton,
    contact_tolerance,
    energy_with_assignment,
    gradient,
    total_energy,
)
from .geometry import (
    EnergyParams,
    Polyline,
    WeightedPointCloud,
    as_polyline,
    edge_lengths,
    length,
    merge_short_edges,
    project_cloud,
    resample,
    signed_curvatures,
)

__all__ = [
    "FitConfig",
    "FitReport",
    "SweepPoint",
    "init_segment",
    "minimize",
    "epsilon_sweep",
    "max_abs_curvature",
    "thread_limit",
]

logger = logging.getLogger(__name__)

THREADS_ENV = "ELASTIC_AVGDIST_THREADS"


def thread_limit() -> int:
    """Worker cap from ``ELASTIC_AVGDIST_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    n = int(raw)
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class FitConfig:
    """Solver settings.

    ``step0`` and ``grad_tol`` default to values scaled by the data
    (``0.1 * diam`` and ``1e-8 * diam**(p-1) * total_mass``) when left as None.
    ``ftol`` stops the run once a whole resampling cycle lowers the energy by
    less than ``ftol * |E|``.
    """

    n_nodes: int = 64
    max_iters: int = 5000
    step0: float | None = None
    beta: float = 0.5
    c: float = 1e-4
    resample_every: int = 25
    grad_tol: float | None = None
    ftol: float = 1e-13
    seed: int = 0
    n_starts: int = 1
    memory: int = 10
    jitter: float = 0.05

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be >= 2")
        if self.max_iters < 1 or self.resample_every < 1 or self.n_starts < 1:
            raise ValueError("iteration counts must be positive")
        if not (0 < self.beta < 1 and 0 < self.c < 1):
            raise ValueError("beta and c must lie in (0, 1)")
        for name in ("step0", "grad_tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class FitReport:
    """Result of :func:`minimize`.

    ``energy_trace[k]`` is the energy after event ``trace_kinds[k]``: the
    start, an accepted line-search ``"step"`` (never an increase) or a
    ``"resample"`` (may move the energy slightly either way).
    """

    curve: Polyline
    breakdown: EnergyBreakdown
    iterations: int
    converged: bool
    stop_reason: str = ""
    energy_trace: tuple = ()
    resample_log: tuple = ()
    trace_kinds: tuple = ()
    diagnostics: dict = field(default_factory=dict)


def init_segment(cloud: WeightedPointCloud, n_nodes: int = 64) -> Polyline:
    """Segment along the top weighted principal direction, centred at the mean.

    Half-length is the weighted standard deviation along that direction.
    A cloud without spread gives a single node at the mean.
    """
    w = cloud.weights / cloud.total_mass
    mean = w @ cloud.points
    centred = cloud.points - mean
    cov = (centred * w[:, None]).T @ centred
    vals, vecs = np.linalg.eigh(cov)
    direction = vecs[:, -1]
    # fix the eigenvector sign so results do not depend on LAPACK internals
    k = int(np.argmax(np.abs(direction)))
    if direction[k] < 0:
        direction = -direction
    half = math.sqrt(max(vals[-1], 0.0))
    if not half > 1e-12 * max(cloud.diameter, 1e-300):
        return Polyline(mean)
    s = np.linspace(-half, half, n_nodes)
    return Polyline(mean + s[:, None] * direction[None, :])


def max_abs_curvature(curve) -> float:
    curve = as_polyline(curve)
    if curve.n_nodes < 3:
        return 0.0
    return float(np.max(np.abs(signed_curvatures(curve))))


def _normal_projector(nodes):
    """Unit tangents at interior nodes (mean of adjacent edge directions)."""
    e = nodes[1:] - nodes[:-1]
    u = e / np.linalg.norm(e, axis=1)[:, None]
    tau = u[:-1] + u[1:]
    norm = np.linalg.norm(tau, axis=1)
    tau = np.where(norm[:, None] > 1e-12, tau / np.where(norm > 1e-12, norm, 1.0)[:, None], 0.0)
    return tau


def _project(vec, tau):
    out = vec.copy()
    inner = out[1:-1]
    inner -= (inner * tau).sum(axis=1)[:, None] * tau
    return out


class _Preconditioner:
    """Banded SPD model of the Hessian, shared by all coordinates."""

    def __init__(self, cloud, nodes, params):
        n = nodes.shape[0]
        h = float(np.mean(edge_lengths(Polyline(nodes, check=False))))
        bend = 2.0 * params.eps / h ** 3
        stretch = params.lam / h
        a = project_cloud(cloud.points, Polyline(nodes, check=False))
        p = params.p
        floor = np.maximum(a.distance, h)
        stiff = cloud.weights * p * max(p - 1.0, 1.0) * floor ** (p - 2.0)
        diag = np.zeros(n)
        np.add.at(diag, a.segment_index, (1.0 - a.t) * stiff)
        np.add.at(diag, np.minimum(a.segment_index + 1, n - 1), a.t * stiff)

        # upper banded storage: row 2 main diagonal, rows 1/0 first/second superdiagonal
        bands = np.zeros((3, n))
        bands[2] = diag + 1e-6 * (bend + stretch)
        if n >= 2:
            main = np.full(n, 2.0)
            main[[0, -1]] = 1.0
            bands[2] += stretch * main
            bands[1, 1:] -= stretch
        if n >= 3:
            main = np.full(n, 6.0)
            main[[0, -1]] = 1.0
            main[[1, -2]] = 5.0
            if n == 3:
                main[1] = 4.0
            off1 = np.full(n - 1, -4.0)
            off1[[0, -1]] = -2.0
            bands[2] += bend * main
            bands[1, 1:] += bend * off1
            bands[0, 2:] += bend
        self._chol = cholesky_banded(bands)

    def solve(self, vec):
        return cho_solve_banded((self._chol, False), vec)


def _two_loop(grad, pairs, precond):
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(np.sum(s * q))
        alphas.append(a)
        q = q - a * y
    r = precond.solve(q)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(np.sum(y * r))
        r = r + (a - b) * s
    return r


def _prepare(curve, n_nodes):
    curve = merge_short_edges(curve)
    if curve.n_nodes < 2 or length(curve) == 0.0:
        return curve
    return resample(curve, n_nodes)


class _Constraints:
    """Admissible search directions at the current iterate.

    Interior nodes may only move normally to the curve. When ``p == 1`` data
    points lying on the curve add constraints: the distance term has a kink
    there, and a contact "holds" when the remaining forces on it can be
    balanced by a subgradient of norm at most its weight. Held contacts are
    kept on the curve to first order, and ``grad`` is the corresponding
    minimal-norm subgradient.
    """

    def __init__(self, cloud, nodes, assignment, grad, tol, kinked):
        n, d = nodes.shape
        self.tau = _normal_projector(nodes)
        self.grad = grad.copy()
        self._released = []
        rows = []
        if kinked:
            idx = np.nonzero((assignment.distance < tol) & (cloud.weights > 0))[0]
            for i in idx:
                j = int(assignment.segment_index[i])
                t = float(assignment.t[i])
                w = float(cloud.weights[i])
                e = nodes[j + 1] - nodes[j]
                u = e / np.linalg.norm(e)
                # a contact at a node is pinned in every direction
                at_node = t == 0.0 or t == 1.0
                normal = np.eye(d) if at_node else np.eye(d) - np.outer(u, u)
                r = normal @ ((1.0 - t) * self.grad[j] + t * self.grad[j + 1])
                v = -r / (w * ((1.0 - t) ** 2 + t ** 2))
                size = float(np.linalg.norm(v))
                if size > 1.0:
                    # the atom cannot hold: it resists with its full weight
                    v = v / size
                    self.grad[j] += w * (1.0 - t) * v
                    self.grad[j + 1] += w * t * v
                    self._released.append((j, t, w, normal, v))
                    continue
                self.grad[j] += w * (1.0 - t) * v
                self.grad[j + 1] += w * t * v
                row = np.zeros((d, n * d))
                row[:, j * d:(j + 1) * d] = (1.0 - t) * normal
                row[:, (j + 1) * d:(j + 2) * d] = t * normal
                rows.append(row)
        self._rows = None
        if rows:
            rows = np.vstack(rows)
            # restrict the contact rows to the tangent-free subspace first
            projected = np.stack([_project(r.reshape(n, d), self.tau).reshape(-1) for r in rows])
            self._rows = projected
            self._gram_pinv = np.linalg.pinv(projected @ projected.T, rcond=1e-12)

    def slope(self, direction):
        """Directional derivative of the energy, including kinks of released contacts."""
        value = float(np.sum(self.grad * direction))
        for j, t, w, normal, v in self._released:
            move = normal @ ((1.0 - t) * direction[j] + t * direction[j + 1])
            value += w * (float(np.linalg.norm(move)) - float(v @ move))
        return value

    def project(self, vec):
        """Orthogonal projection onto the admissible directions."""
        out = _project(vec, self.tau)
        if self._rows is not None:
            flat = out.reshape(-1)
            flat = flat - self._rows.T @ (self._gram_pinv @ (self._rows @ flat))
            out = flat.reshape(vec.shape)
        return out


def _snap(cloud, x, assignment, energy, evaluate, tol, capture):
    """Translate single segments onto nearby atoms when that lowers the energy."""
    near = np.nonzero((assignment.distance >= tol) & (assignment.distance < capture) & (cloud.weights > 0))[0]
    for i in near:
        j = int(assignment.segment_index[i])
        shift = cloud.points[i] - assignment.foot[i]
        trial = x.copy()
        trial[j] += shift
        trial[j + 1] += shift
        e_trial, a_trial = evaluate(trial)
        if e_trial <= energy:
            x, energy, assignment = trial, e_trial, a_trial
    return x, energy, assignment


def _run_single(cloud, params, config, init, step0, grad_tol):
    curve = _prepare(init, config.n_nodes)
    if curve.n_nodes < 2:
        bd = total_energy(cloud, curve, params)
        return FitReport(curve, bd, 0, True, "singleton", (bd.total,), trace_kinds=("start",))

    kinked = params.p == 1
    tol = contact_tolerance(cloud)

    def evaluate(nodes):
        bd, a = energy_with_assignment(cloud, Polyline(nodes, check=False), params)
        return bd.total, a

    def constraints_at(nodes, assignment):
        g = gradient(cloud, Polyline(nodes, check=False), params, assignment)
        return _Constraints(cloud, nodes, assignment, g, tol, kinked)

    x = np.array(curve.nodes)
    energy, assignment = evaluate(x)
    trace = [energy]
    kinds = ["start"]
    resample_log = []
    pairs = []
    precond = _Preconditioner(cloud, x, params)
    fresh = True
    since_resample = 0
    cycle_start = energy
    converged = False
    reason = "max_iters"
    it = 0

    cons = constraints_at(x, assignment)
    forced = False
    while it < config.max_iters:
        if forced or since_resample >= config.resample_every:
            full_cycle = not forced
            cycle_drop = cycle_start - energy
            new_curve = _prepare(Polyline(x, check=False), config.n_nodes)
            if new_curve.n_nodes < 2:
                x = np.array(new_curve.nodes)
                break
            x_new = np.array(new_curve.nodes)
            e_new, a_new = evaluate(x_new)
            resample_log.append((it, energy, e_new))
            x, energy, assignment = x_new, e_new, a_new
            if kinked:
                capture = 1e-3 * float(np.mean(edge_lengths(Polyline(x, check=False))))
                x, energy, assignment = _snap(cloud, x, assignment, energy, evaluate, tol, capture)
            trace.append(energy)
            kinds.append("resample")
            pairs = []
            precond = _Preconditioner(cloud, x, params)
            cons = constraints_at(x, assignment)
            fresh = True
            forced = False
            since_resample = 0
            if full_cycle:
                if 0 <= cycle_drop <= config.ftol * max(abs(energy), 1e-300):
                    converged, reason = True, "ftol"
                    break
                cycle_start = energy

        g = cons.grad
        pg = cons.project(g)
        if float(np.max(np.linalg.norm(pg, axis=1))) < grad_tol:
            if fresh:
                converged, reason = True, "grad_tol"
                break
            forced = True
            continue

        d = -cons.project(_two_loop(pg, pairs, precond))
        slope = cons.slope(d)
        if not slope < 0:
            pairs = []
            d = -cons.project(precond.solve(pg))
            slope = cons.slope(d)
        if not slope < 0:
            d = -pg
            slope = cons.slope(d)
        if not slope < 0:
            if fresh:
                converged, reason = True, "no_descent"
                break
            forced = True
            continue

        max_move = float(np.max(np.linalg.norm(d, axis=1)))
        alpha = min(1.0, step0 / max_move) if max_move > 0 else 1.0
        accepted = False
        for _ in range(60):
            trial = x + alpha * d
            if np.all(edge_lengths(Polyline(trial, check=False)) >= 1e-12):
                e_trial, a_trial = evaluate(trial)
                if e_trial <= energy + config.c * alpha * slope:
                    accepted = e_trial < energy or alpha * max_move > 1e-15 * float(np.max(np.abs(x)))
                    break
            alpha *= config.beta
        it += 1
        since_resample += 1
        if not accepted:
            if fresh:
                converged, reason = True, "line_search_stall"
                break
            forced = True
            continue

        cons_new = constraints_at(trial, a_trial)
        pg_new = cons_new.project(cons_new.grad)
        s = trial - x
        y = pg_new - pg
        sy = float(np.sum(s * y))
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            pairs.append((s, y, 1.0 / sy))
            if len(pairs) > config.memory:
                pairs.pop(0)
        x, cons, energy, assignment = trial, cons_new, e_trial, a_trial
        trace.append(energy)
        kinds.append("step")
        fresh = False
        ell = edge_lengths(Polyline(x, check=False))
        mean_edge = float(np.mean(ell))
        if min(ell[0], ell[-1]) < 0.5 * mean_edge or max(ell[0], ell[-1]) > 2.0 * mean_edge:
            forced = True

    final = Polyline(x, check=False)
    bd = total_energy(cloud, final, params)
    return FitReport(final, bd, it, converged, reason, tuple(trace), tuple(resample_log), tuple(kinds))


def _jittered(init, rng, scale):
    nodes = init.nodes + scale * rng.standard_normal(init.nodes.shape)
    return Polyline(nodes)


def minimize(cloud: WeightedPointCloud, params: EnergyParams, config: FitConfig = FitConfig(),
             init=None) -> FitReport:
    """Minimize the discrete energy over polylines with ``config.n_nodes`` nodes.

    Start ``0`` uses ``init`` (default: :func:`init_segment`); further starts
    jitter it with seeded Gaussian noise. The lowest-energy run is returned,
    unless the best one-node curve at a data point is cheaper, in which case
    that curve is returned.
    """
    diam = cloud.diameter
    step0 = config.step0 if config.step0 is not None else 0.1 * diam
    grad_tol = config.grad_tol
    if grad_tol is None:
        grad_tol = 1e-8 * diam ** (params.p - 1.0) * cloud.total_mass

    base = as_polyline(init) if init is not None else init_segment(cloud, config.n_nodes)
    rng = np.random.default_rng(config.seed)
    jitter_scale = config.jitter * max(length(base), diam)
    starts = [base] + [_jittered(base, rng, jitter_scale) for _ in range(config.n_starts - 1)]

    if diam == 0.0:
        reports = [FitReport(Polyline(cloud.support[0]), total_energy(cloud, Polyline(cloud.support[0]), params),
                             0, True, "singleton")]
    elif len(starts) == 1:
        reports = [_run_single(cloud, params, config, starts[0], step0, grad_tol)]
    else:
        workers = min(thread_limit(), len(starts))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(lambda s: _run_single(cloud, params, config, s, step0, grad_tol), starts))

    best = min(reports, key=lambda r: r.breakdown.total)
    single, single_energy = best_singleton(cloud, params.p)
    if single_energy < best.breakdown.total:
        logger.info("one-node curve beats fitted curve (%.6g < %.6g)", single_energy, best.breakdown.total)
        best = replace(best, curve=single, breakdown=total_energy(cloud, single, params),
                       converged=True, stop_reason="singleton")
    return best


@dataclass(frozen=True, eq=False)
class SweepPoint:
    epsilon: float
    report: FitReport
    max_curvature: float
    total_energy: float
    energy_without_bending: float


def epsilon_sweep(cloud: WeightedPointCloud, lam: float, p: float, epsilons, config: FitConfig = FitConfig(),
                  init=None):
    """Fit for each bending weight in ``epsilons`` (descending), warm-starting each fit from the last.

    Returns a list of :class:`SweepPoint`.
    """
    eps_list = [float(e) for e in epsilons]
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ValueError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilons must be strictly descending")
    out = []
    warm = init
    for eps in eps_list:
        params = EnergyParams(lam, eps, p)
        rep = minimize(cloud, params, config, init=warm)
        bd = rep.breakdown
        out.append(SweepPoint(eps, rep, max_abs_curvature(rep.curve), bd.total,
                              bd.distance_term + bd.length_term))
        warm = rep.curve if rep.curve.n_nodes >= 2 else None
    return out
