import math

import numpy as np
import pytest

from conftest import DISK_PARAMS
from elastic_avgdist.analysis import (
    bounds_check,
    circle_vs_segment,
    crossover_radius,
    elastica_residual,
    holder_check,
    mass_projection,
    node_mass_refinement,
    node_masses,
    regularity_check,
    scaling_transform,
    tangent_lipschitz,
)
from elastic_avgdist.datasets import corner, segment_uniform
from elastic_avgdist.energy import total_energy
from elastic_avgdist.geometry import EnergyParams, Polyline, WeightedPointCloud
from elastic_avgdist.optimizer import FitConfig, minimize


@pytest.fixture(scope="module")
def corner_fit():
    params = EnergyParams(0.05, 1e-2, 1.0)
    return minimize(corner(), params, FitConfig(n_nodes=64)), params


class TestRegularity:
    def test_straight_fit(self):
        cloud = WeightedPointCloud([[0, 0], [1, 0]])
        rep = regularity_check(Polyline(np.c_[np.linspace(0, 1, 9), np.zeros(9)]), cloud, EnergyParams(1, 1, 1))
        assert rep.discrete_lipschitz == 0
        assert rep.passed
        assert rep.Y == pytest.approx(math.sqrt(6))

    def test_flag_matches_numbers(self, corner_fit):
        fit, params = corner_fit
        d = regularity_check(fit, corner(), params).as_dict()
        assert d["pass"] == (d["ratio"] <= 1 + d["slack"])
        assert d["ratio"] == pytest.approx(d["discrete_lipschitz"] / d["Y"])

    def test_lipschitz_of_arc(self):
        a = np.linspace(0, 1, 101)
        # unit-speed circle of radius 2: tangent turns at rate 1/2
        arc = Polyline(2 * np.c_[np.cos(a), np.sin(a)])
        assert tangent_lipschitz(arc) == pytest.approx(0.5, rel=1e-3)

    def test_holder(self, corner_fit):
        fit, params = corner_fit
        ratio, ok = holder_check(fit, corner(), params)
        assert ok and ratio > 0


class TestBounds:
    def test_corner_fit_within_bounds(self, corner_fit):
        fit, params = corner_fit
        rep = bounds_check(fit, corner(), params)
        assert rep.length_ok and rep.curvature_ok and rep.confinement_ok


class TestScaling:
    def test_identity(self):
        cloud = corner()
        params = EnergyParams(0.3, 0.02, 1.5)
        c2, p2 = scaling_transform(cloud, params, 1.0)
        assert np.array_equal(c2.points, cloud.points)
        assert p2 == params

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
    def test_Y_halves(self, p):
        cloud = corner()
        params = EnergyParams(0.3, 0.02, p)
        c2, p2 = scaling_transform(cloud, params, 2.0)
        assert p2.Y(c2.diameter) / params.Y(cloud.diameter) == pytest.approx(0.5, abs=1e-12)

    def test_energy_identity(self, corner_fit):
        fit, params = corner_fit
        cloud = corner()
        for r in (0.5, 2.0, 10.0):
            c2, p2 = scaling_transform(cloud, params, r)
            lhs = total_energy(c2, fit.curve.scaled(r), p2).total
            assert lhs == pytest.approx(r ** params.p * fit.breakdown.total, rel=1e-10)

    def test_pushforward_factor_is_r_to_the_p(self):
        # weights are kept, so the distance term alone scales as r**p (not r**(p-d))
        cloud = WeightedPointCloud([[0, 1], [2, -1], [1, 3]])
        curve = Polyline([[0, 0], [1, 0.5], [2, 0]])
        params = EnergyParams(1, 1, 1.5)
        c2, p2 = scaling_transform(cloud, params, 3.0)
        ratio = total_energy(c2, curve.scaled(3.0), p2).distance_term / total_energy(cloud, curve, params).distance_term
        assert ratio == pytest.approx(3.0 ** 1.5, rel=1e-12)

    def test_bad_factor(self):
        with pytest.raises(ValueError):
            scaling_transform(corner(), EnergyParams(1, 1, 1), 0.0)


class TestMassProjection:
    def test_whole_curve_gets_everything(self, corner_fit):
        fit, params = corner_fit
        rep = mass_projection(fit, corner(), params, (0, fit.curve.n_nodes - 1), density_norm=1.0)
        assert rep.empirical_mass == pytest.approx(corner().total_mass)
        assert node_masses(fit.curve, corner()).sum() == pytest.approx(3.0)

    def test_disk_middle_fifth(self, disk_cloud, disk_refinement):
        fit = disk_refinement[-1][2]
        n = fit.curve.n_nodes
        rep = mass_projection(fit, disk_cloud, DISK_PARAMS, (2 * (n - 1) // 5, 3 * (n - 1) // 5), 1 / np.pi)
        assert rep.passed
        assert 0 < rep.empirical_mass < disk_cloud.total_mass

    def test_bad_interval(self, corner_fit):
        fit, params = corner_fit
        with pytest.raises(ValueError):
            mass_projection(fit, corner(), params, (3, 3), 1.0)


class TestNodeMass:
    def test_disk_refines(self, disk_refinement):
        (_, coarse, _), (_, fine, _) = disk_refinement
        assert fine <= coarse

    def test_single_atom_keeps_all_mass(self):
        cloud = WeightedPointCloud([[0.5, 0.5]], [2.0])
        for n, m, _ in node_mass_refinement(cloud, EnergyParams(0.1, 0.1, 2), [4, 16]):
            assert m == 2.0

    def test_uniform_segment_spreads_mass(self):
        cloud = segment_uniform(2000)
        n = 17
        rep = minimize(cloud, EnergyParams(1e-3, 1e-4, 2.0), FitConfig(n_nodes=n))
        interior = node_masses(rep.curve, cloud)[1:-1]
        assert interior.mean() == pytest.approx(cloud.total_mass / (n - 1), rel=0.05)
        assert interior.max() <= 1.3 * cloud.total_mass / (n - 1)


class TestElasticaResidual:
    def test_straight_segment(self):
        cloud = WeightedPointCloud([[0, 0], [1, 0]])
        curve = Polyline(np.c_[np.linspace(0, 1, 20), np.zeros(20)])
        assert elastica_residual(curve, cloud, EnergyParams(0.1, 0.1, 1)).max_residual == 0

    def test_first_variation_residual_refines(self):
        cloud = corner()
        params = EnergyParams(0.05, 1e-2, 1.0)
        coarse, fine = (
            elastica_residual(minimize(cloud, params, FitConfig(n_nodes=n)), cloud, params, form="first_variation")
            for n in (64, 256)
        )
        assert fine.max_residual <= 0.5 * coarse.max_residual
        assert coarse.node_index.size > 0

    def test_knots_at_atoms(self, corner_fit):
        fit, params = corner_fit
        rep = elastica_residual(fit, corner(), params)
        assert len(rep.knots) >= 1
        assert not set(rep.knots) & set(rep.node_index)

    def test_planar_only(self):
        cloud = WeightedPointCloud([[0, 0, 0], [1, 1, 1]])
        with pytest.raises(ValueError):
            elastica_residual(Polyline([[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1], [2, 1, 1]]), cloud,
                              EnergyParams(1, 1, 1))


class TestCircleVsSegment:
    @pytest.mark.parametrize("r", [0.1, 0.5, 2.0])
    def test_oracles(self, r):
        rep = circle_vs_segment(r, 0.1, 1e-3)
        assert rep.E_circle == pytest.approx(rep.analytic_circle, rel=0.01)
        assert rep.E_segment == pytest.approx(rep.analytic_segment, rel=0.01)

    def test_crossover_balances(self):
        lam, eps = 0.1, 1e-3
        r0 = crossover_radius(lam, eps)
        circle = 2 * np.pi * lam * r0 + 2 * np.pi * eps / r0
        assert 4 * r0 ** 2 + 2 * lam * r0 == pytest.approx(circle, rel=1e-12)

    def test_unit_mass_crossover_scales_as_sqrt_eps(self):
        for eps in (1e-4, 4e-4, 1.6e-3):
            ratio = crossover_radius(0.1, 4 * eps, "probability") / crossover_radius(0.1, eps, "probability")
            assert ratio == pytest.approx(2.0, rel=1e-12)

    def test_unknown_normalization(self):
        with pytest.raises(ValueError):
            crossover_radius(0.1, 1e-3, "other")
