import math

import numpy as np
import pytest

from elastic_avgdist.energy import (
    best_singleton,
    distance_term,
    fd_gradient,
    gradient,
    singleton_energies,
    total_energy,
)
from elastic_avgdist.geometry import EnergyParams, Polyline, WeightedPointCloud


def random_config(rng, n_nodes=8, n_atoms=20, p=2.0):
    curve = Polyline(np.cumsum(rng.uniform(0.2, 1.0, (n_nodes, 2)) * rng.choice([-1, 1], (n_nodes, 2)), axis=0))
    cloud = WeightedPointCloud(rng.normal(size=(n_atoms, 2)) * 2, rng.uniform(0.5, 2.0, n_atoms))
    params = EnergyParams(rng.uniform(0.1, 1.0), rng.uniform(0.01, 0.5), p)
    return cloud, curve, params


class TestDistanceTerm:
    atom = WeightedPointCloud([[3.0, 4.0]])

    def test_p2(self):
        assert distance_term(self.atom, Polyline([[0, 0]]), 2)[0] == pytest.approx(25)

    def test_p1(self):
        assert distance_term(self.atom, Polyline([[0, 0]]), 1)[0] == pytest.approx(5)

    def test_two_atoms_over_segment(self):
        cloud = WeightedPointCloud([[0, 1], [0, -1]])
        assert distance_term(cloud, Polyline([[-1, 0], [1, 0]]), 2)[0] == pytest.approx(2)


class TestTotalEnergy:
    def test_singleton_within_budget(self):
        rng = np.random.default_rng(0)
        cloud = WeightedPointCloud(rng.normal(size=(40, 2)), rng.uniform(0, 1, 40))
        for p in (1.0, 1.5, 2.0):
            e = singleton_energies(cloud, p)
            assert np.all(e <= cloud.total_mass * cloud.diameter ** p)
            curve, best = best_singleton(cloud, p)
            assert best == pytest.approx(e.min())
            assert total_energy(cloud, curve, EnergyParams(1, 1, p)).total == pytest.approx(best)

    def test_segment_through_atoms(self):
        cloud = WeightedPointCloud([[0, 0], [1, 1]])
        bd = total_energy(cloud, Polyline([[0, 0], [1, 1]]), EnergyParams(1e-3, 1e-3, 2))
        assert bd.distance_term == 0
        assert bd.curvature_term == 0
        assert bd.length_term == pytest.approx(1e-3 * math.sqrt(2))

    def test_circle_length_plus_bending(self):
        n = 360
        a = 2 * np.pi * np.arange(n) / n
        pts = np.c_[np.cos(a), np.sin(a)]
        circle = Polyline(np.vstack([pts, pts[:1]]))
        # one atom on the curve, so the distance term vanishes
        cloud = WeightedPointCloud([[1.0, 0.0]])
        bd = total_energy(cloud, circle, EnergyParams(1, 1, 2), closed=True)
        assert bd.distance_term == 0
        assert bd.total == pytest.approx(4 * np.pi, rel=1e-3)

    def test_breakdown_sums(self):
        rng = np.random.default_rng(5)
        cloud, curve, params = random_config(rng)
        bd = total_energy(cloud, curve, params)
        assert bd.total == bd.distance_term + bd.length_term + bd.curvature_term
        assert set(bd.as_dict()) == {"distance_term", "length_term", "curvature_term", "total"}


class TestGradient:
    def test_straight_curve_has_no_bending_force(self):
        curve = Polyline(np.c_[np.linspace(0, 1, 6), np.zeros(6)])
        cloud = WeightedPointCloud([[0.0, 0.0]])
        g_bend = gradient(cloud, curve, EnergyParams(1e-12, 1.0, 2)) - gradient(cloud, curve, EnergyParams(1e-12, 1e-12, 2))
        assert np.abs(g_bend[1:-1]).max() < 1e-9

    def test_single_atom_pull(self):
        cloud = WeightedPointCloud([[0.0, 1.0]])
        # lam, eps are required positive; use tiny values so only the data term counts
        g = gradient(cloud, Polyline([[-1, 0], [1, 0]]), EnergyParams(1e-300, 1e-300, 2))
        assert g[0] == pytest.approx([0, -1])
        assert g[1] == pytest.approx([0, -1])

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
    def test_matches_finite_differences(self, p):
        rng = np.random.default_rng(int(10 * p))
        for _ in range(10):
            cloud, curve, params = random_config(rng, p=p)
            g = gradient(cloud, curve, params)
            fd = fd_gradient(cloud, curve, params, h=1e-6)
            assert np.max(np.abs(g - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))

    def test_nearly_straight_small_angle_branch(self):
        x = np.linspace(0, 1, 7)
        curve = Polyline(np.c_[x, 1e-9 * x ** 2])
        cloud = WeightedPointCloud([[0.55, 0.3], [0.27, -0.4]])
        params = EnergyParams(0.2, 0.7, 2)
        g = gradient(cloud, curve, params)
        assert np.all(np.isfinite(g))
        assert np.max(np.abs(g - fd_gradient(cloud, curve, params))) < 1e-6

    def test_needs_two_nodes(self):
        with pytest.raises(ValueError):
            gradient(WeightedPointCloud([[0, 0]]), Polyline([[1, 1]]), EnergyParams(1, 1, 2))
