"""Tests for living domains, resources and Lotka-Volterra competition."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from src.models.errors import DegenerateSpeciesError, NonPositiveInputError
from src.models.population import DynamicsParams, Equilibrium, Species
from src.models.samples import SampleSet
from src.services.coevolution import (
    carrying_capacity,
    classify_equilibrium,
    competition_from_fitness,
    competition_matrix,
    fixed_points,
    growth_rates,
    integrate_competition,
    living_domain,
    resources,
    unit_ball_volume,
)


def _species(xy, weights=None, sid=1, fitness=1.0) -> Species:
    xy = np.asarray(xy, dtype=float)
    poses = np.column_stack([xy, np.zeros(len(xy))])
    weights = np.ones(len(xy)) if weights is None else weights
    return Species(
        id=sid,
        samples=SampleSet(poses=poses, weights=weights),
        population=float(len(xy)),
        fitness=fitness,
    )


class TestLivingDomain:
    def test_area_of_symmetric_cross(self):
        r = math.sqrt(2.0)
        sp = _species([[r, 0.0], [-r, 0.0], [0.0, r], [0.0, -r]])
        domain = living_domain(sp)
        # variances (1, 1): radii 2, area 4 * pi
        assert domain.size == pytest.approx(4.0 * math.pi)
        np.testing.assert_allclose(domain.radii, [2.0, 2.0])
        assert domain.center.x == pytest.approx(0.0)

    def test_collinear_species_has_tiny_area(self):
        sp = _species([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        assert living_domain(sp).size < 1e-4

    def test_single_sample_rejected(self):
        with pytest.raises(DegenerateSpeciesError):
            living_domain(_species([[1.0, 1.0]]))

    def test_contains_center_but_not_far_point(self):
        domain = living_domain(_species([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]))
        inside = domain.contains(np.array([[0.0, 0.0], [5.0, 5.0]]))
        assert inside.tolist() == [True, False]

    def test_unit_ball_volumes(self):
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)


class TestResources:
    def test_small_domain_gets_floor(self):
        assert resources(0.3, DynamicsParams()) == pytest.approx(40.0)

    def test_large_domain_proportional(self):
        assert resources(2.0, DynamicsParams()) == pytest.approx(160.0)

    def test_carrying_capacity(self):
        assert carrying_capacity(1.0, 100.0) == pytest.approx(100.0)
        assert carrying_capacity(0.0, 100.0) == pytest.approx(100.0 * math.e)


class TestCompetition:
    def test_coefficients_from_fitness(self):
        alpha = competition_from_fitness([0.9, 0.45])
        assert alpha[0, 1] == pytest.approx(0.5)
        assert alpha[1, 0] == pytest.approx(2.0)
        np.testing.assert_allclose(np.diag(alpha), 1.0)

    def test_matrix_from_species(self):
        xy = [[0, 0], [1, 1]]
        species = [_species(xy, fitness=0.2), _species(xy, fitness=0.4)]
        assert competition_matrix(species)[0, 1] == pytest.approx(2.0)

    def test_non_positive_fitness(self):
        with pytest.raises(NonPositiveInputError):
            competition_from_fitness([0.5, 0.0])

    def test_logistic_growth_at_capacity_is_zero(self):
        rates = growth_rates([100.0], [100.0], np.ones((1, 1)), 0.2)
        assert rates[0] == pytest.approx(0.0)

    def test_logistic_growth_below_capacity(self):
        # 0.2 * 50 * (1 - 50 / 100)
        assert growth_rates([50.0], [100.0], np.ones((1, 1)), 0.2)[0] == pytest.approx(5.0)

    def test_two_species_growth(self):
        alpha = np.array([[1.0, 0.5], [2.0, 1.0]])
        rates = growth_rates([10.0, 20.0], [100.0, 100.0], alpha, 0.5)
        assert rates[0] == pytest.approx(0.5 * 10 * (1 - (10 + 0.5 * 20) / 100))
        assert rates[1] == pytest.approx(0.5 * 20 * (1 - (20 + 2.0 * 10) / 100))


class TestClassifier:
    @pytest.mark.parametrize(
        "k1, k2, a12, a21, expected",
        [
            (100, 50, 0.5, 1.5, Equilibrium.SPECIES1_WINS),
            (50, 100, 1.5, 0.5, Equilibrium.SPECIES2_WINS),
            (100, 100, 2.0, 2.0, Equilibrium.BISTABLE),
            (100, 100, 0.5, 0.5, Equilibrium.COEXIST),
        ],
    )
    def test_regimes(self, k1, k2, a12, a21, expected):
        result = classify_equilibrium(k1, k2, a12, a21)
        assert result.outcome == expected
        assert not result.degenerate

    def test_exact_tie_is_degenerate(self):
        result = classify_equilibrium(100, 100, 1.0, 1.0)
        assert result.degenerate

    def test_rejects_non_positive(self):
        with pytest.raises(NonPositiveInputError):
            classify_equilibrium(100, 0, 1.0, 1.0)

    def test_coexistence_point(self):
        points = fixed_points(100, 100, 0.5, 0.5, Equilibrium.COEXIST)
        assert points[0] == pytest.approx((200 / 3, 200 / 3))

    def test_bistable_has_two_candidates(self):
        assert fixed_points(100, 80, 2.0, 2.0, Equilibrium.BISTABLE) == [(100, 0.0), (0.0, 80)]


def _lv(t, n, k, alpha, r):
    return growth_rates(np.maximum(n, 0.0), k, alpha, r)


def test_classifier_agrees_with_numerical_integration():
    """Long-run populations match the predicted regime for random parameter draws."""
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 200:
        k = rng.uniform(50, 200, 2)
        a12, a21 = rng.uniform(0.2, 3.0, 2)
        gaps = [abs(k[1] / a21 - k[0]) / k[0], abs(k[0] / a12 - k[1]) / k[1]]
        if min(gaps) < 0.1:
            continue
        alpha = np.array([[1.0, a12], [a21, 1.0]])
        n0 = rng.uniform(5, 50, 2)
        solution = solve_ivp(
            _lv, (0.0, 5000.0), n0, args=(k, alpha, 0.2), method="LSODA", rtol=1e-8, atol=1e-8
        )
        final = solution.y[:, -1]
        outcome = classify_equilibrium(k[0], k[1], a12, a21).outcome
        candidates = fixed_points(k[0], k[1], a12, a21, outcome)
        assert any(
            np.allclose(final, point, rtol=0.01, atol=0.01 * max(k)) for point in candidates
        ), (k, a12, a21, final, outcome)
        checked += 1


def test_euler_integration_reaches_coexistence():
    final = integrate_competition(
        [10.0, 30.0], [100.0, 100.0], np.array([[1.0, 0.5], [0.5, 1.0]]), 0.2
    )
    np.testing.assert_allclose(final, [200 / 3, 200 / 3], rtol=1e-3)


def test_two_species_growth_spot_value():
    alpha = np.array([[1.0, 0.5], [0.5, 1.0]])
    rates = growth_rates([50.0, 50.0], [100.0, 100.0], alpha, 0.2)
    np.testing.assert_allclose(rates, [2.5, 2.5], rtol=0, atol=1e-12)


def test_living_domain_recovers_gaussian_shape():
    rng = np.random.default_rng(21)
    angle = np.deg2rad(30.0)
    rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    cov = rotation @ np.diag([4.0, 1.0]) @ rotation.T
    xy = rng.multivariate_normal([3.0, -2.0], cov, size=10_000)
    domain = living_domain(_species(xy))

    np.testing.assert_allclose(np.sort(domain.radii), [2.0, 4.0], rtol=0.05)
    major = domain.axes[:, np.argmax(domain.variances)]
    assert abs(major @ rotation[:, 0]) >= np.cos(np.deg2rad(2.0))


def test_classifier_ignores_common_scale():
    rng = np.random.default_rng(4)
    for _ in range(100):
        k1, k2 = rng.uniform(10, 500, 2)
        a12, a21 = rng.uniform(0.1, 4.0, 2)
        scale = rng.uniform(0.01, 100.0)
        base = classify_equilibrium(k1, k2, a12, a21).outcome
        assert classify_equilibrium(scale * k1, scale * k2, a12, a21).outcome == base
