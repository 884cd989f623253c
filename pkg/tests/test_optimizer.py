import math

import numpy as np
import pytest

from elastic_avgdist.datasets import corner, segment_uniform
from elastic_avgdist.energy import best_singleton, total_energy
from elastic_avgdist.geometry import EnergyParams, Polyline, WeightedPointCloud, curve_metric, length
from elastic_avgdist.optimizer import (
    FitConfig,
    epsilon_sweep,
    init_segment,
    max_abs_curvature,
    minimize,
    thread_limit,
)


class TestInitSegment:
    def test_two_atoms(self):
        curve = init_segment(WeightedPointCloud([[-1, 0], [1, 0]]), 5)
        assert np.abs(curve.nodes[:, 1]).max() < 1e-15
        assert curve.nodes.mean(axis=0) == pytest.approx([0, 0], abs=1e-15)

    def test_single_atom(self):
        curve = init_segment(WeightedPointCloud([[2.0, 3.0]]), 8)
        assert curve.n_nodes == 1
        assert curve.nodes[0] == pytest.approx([2, 3])

    def test_collinear_direction(self):
        rng = np.random.default_rng(2)
        d = np.array([3.0, 4.0]) / 5
        cloud = WeightedPointCloud(rng.uniform(0, 1, (50, 1)) * d + [1, 1])
        u = init_segment(cloud, 10)
        direction = (u.nodes[-1] - u.nodes[0]) / length(u)
        assert abs(abs(direction @ d) - 1) < 1e-6


class TestMinimize:
    def test_recovers_segment(self):
        cloud = segment_uniform()
        params = EnergyParams(1e-3, 1e-4, 2)
        rep = minimize(cloud, params)
        segment = Polyline([[0, 0], [1, 0]])
        assert rep.converged
        assert curve_metric(rep.curve, segment) < 0.02
        assert rep.breakdown.distance_term < 1e-3
        assert rep.breakdown.total <= 1.01 * total_energy(cloud, segment, params).total

    def test_single_atom_collapses(self):
        cloud = WeightedPointCloud([[1.0, 2.0]])
        rep = minimize(cloud, EnergyParams(0.1, 0.1, 2))
        assert rep.curve.n_nodes == 1
        assert rep.breakdown.total == 0

    def test_energy_trace_non_increasing(self):
        rng = np.random.default_rng(0)
        cloud = WeightedPointCloud(rng.normal(size=(200, 2)) * [2, 0.5])
        rep = minimize(cloud, EnergyParams(0.5, 0.05, 2), FitConfig(n_nodes=32))
        trace = np.array(rep.energy_trace)
        steps = np.array(rep.trace_kinds[1:]) == "step"
        assert steps.sum() > 1
        assert np.all(np.diff(trace)[steps] <= 0)

    @pytest.mark.parametrize("p", [1.0, 2.0])
    def test_never_worse_than_singleton(self, p):
        rng = np.random.default_rng(7)
        cloud = WeightedPointCloud(rng.normal(size=(30, 2)), rng.uniform(0.1, 1.0, 30))
        # a huge length penalty makes a point the best curve
        rep = minimize(cloud, EnergyParams(1e3, 1e-3, p), FitConfig(n_nodes=16))
        assert rep.breakdown.total <= best_singleton(cloud, p)[1] + 1e-12

    def test_multistart_deterministic(self):
        cloud = corner()
        cfg = FitConfig(n_nodes=32, n_starts=3, seed=4)
        a = minimize(cloud, EnergyParams(0.05, 1e-2, 1.0), cfg)
        b = minimize(cloud, EnergyParams(0.05, 1e-2, 1.0), cfg)
        assert np.array_equal(a.curve.nodes, b.curve.nodes)

    def test_thread_limit_env(self, monkeypatch):
        monkeypatch.setenv("ELASTIC_AVGDIST_THREADS", "3")
        assert thread_limit() == 3
        monkeypatch.setenv("ELASTIC_AVGDIST_THREADS", "0")
        assert thread_limit() >= 1


class TestSweep:
    def test_corner_sharpens(self):
        sweep = epsilon_sweep(corner(), 0.05, 1.0, [1e-1, 1e-2, 1e-3], FitConfig(n_nodes=128))
        kappa = [pt.max_curvature for pt in sweep]
        assert kappa[0] < kappa[1] < kappa[2]
        assert all(pt.report.converged for pt in sweep)

    def test_approaches_pure_average_distance_fit(self):
        cloud = corner()
        sweep = epsilon_sweep(cloud, 0.05, 1.0, [1e-1, 1e-2, 1e-3], FitConfig(n_nodes=128))
        plain = [pt.energy_without_bending for pt in sweep]
        assert np.all(np.diff(plain) <= 1e-9)
        # with no bending cost the best curve is the path through the three atoms
        limit = 0.05 * 2 * math.sqrt(2)
        assert plain[-1] == pytest.approx(limit, rel=0.05)

    def test_rejects_non_descending(self):
        with pytest.raises(ValueError, match="descending"):
            epsilon_sweep(corner(), 0.05, 1.0, [1e-2, 1e-1])


def test_max_abs_curvature_of_arc():
    a = np.linspace(0, 1, 50)
    arc = Polyline(2 * np.c_[np.cos(a), np.sin(a)])
    assert max_abs_curvature(arc) == pytest.approx(0.5, rel=1e-3)
