"""Tests for the MCL, GMCL and CEAMCL filter loops and the cost model."""

import numpy as np
import pytest

from src.models.errors import FilterDivergedError
from src.models.run import CostModel, Variant
from src.models.samples import NoiseParams
from src.models.world import Pose
from src.services.coevolution import carrying_capacity, competition_from_fitness, growth_rates
from src.services.driver import (
    init,
    init_tracking,
    next_population,
    predict_cost_ratio,
    run_filter,
    sample_target,
    step,
    step_ceamcl,
    step_gmcl,
    step_mcl,
)
from src.services.harness import generate_log
from tests.conftest import make_scan


@pytest.fixture(scope="module")
def short_log(landmark_map):
    return generate_log(
        landmark_map,
        Pose(x=4.5, y=4.0),
        Pose(x=6.0, y=5.5),
        noise=NoiseParams(),
        step_len=0.25,
        rng=np.random.default_rng(99),
        n_beams=16,
    )


def _check_species(state, settings):
    for sp in state.species:
        assert sp.size >= settings.min_species_size
        assert sp.samples.weights.sum() == pytest.approx(1.0)
    best = max(state.species, key=lambda sp: (sp.fitness, -sp.id))
    assert state.best_species_id == best.id


class TestInit:
    def test_mcl_init_draws_fixed_n(self, landmark_map, bearings, small_settings, rng):
        scan = make_scan(landmark_map, Pose(x=4.5, y=4.0), bearings)
        state = init(landmark_map, scan, small_settings, rng, Variant.MCL)
        assert len(state.species) == 1
        assert state.total_samples == small_settings.fixed_n
        assert state.species[0].samples.weights.sum() == pytest.approx(1.0)
        assert state.estimate is not None
        assert state.covariance.shape == (3, 3)

    def test_ceamcl_init_builds_species(self, symmetric_map, bearings, small_settings, rng):
        scan = make_scan(symmetric_map, Pose(x=2.5, y=2.5), bearings)
        state = init(symmetric_map, scan, small_settings, rng, Variant.CEAMCL)
        assert len(state.species) >= 1
        assert state.next_species_id > max(sp.id for sp in state.species)
        assert all(sp.growth_rate == 0.0 for sp in state.species)
        assert state.total_resources > 0
        assert state.counters.likelihood_evals == small_settings.n_test
        _check_species(state, small_settings)

    def test_tracking_init_centres_on_pose(self, landmark_map, small_settings, rng):
        pose = Pose(x=4.5, y=4.0, theta=0.3)
        state = init_tracking(landmark_map, pose, small_settings, rng, Variant.CEAMCL)
        assert state.estimate.distance_to(pose) < 0.05
        assert state.species[0].living_domain is not None


class TestSteps:
    def test_mcl_keeps_sample_count(self, landmark_map, small_settings, short_log, rng):
        steps = run_filter(short_log, landmark_map, small_settings, Variant.MCL, rng)
        states = [state for _, state, _ in steps]
        assert len(states) == len(short_log)
        assert states[-1].t == len(short_log) - 1
        assert states[-1].total_samples == small_settings.fixed_n

    def test_gmcl_without_operators_equals_mcl(self, landmark_map, small_settings, short_log):
        quiet = small_settings.model_copy(update={"p_c": 0.0, "p_m": 0.0})
        mcl = list(
            run_filter(short_log, landmark_map, quiet, Variant.MCL, np.random.default_rng(5))
        )
        gmcl = list(
            run_filter(short_log, landmark_map, quiet, Variant.GMCL, np.random.default_rng(5))
        )
        np.testing.assert_array_equal(
            mcl[-1][1].species[0].samples.poses, gmcl[-1][1].species[0].samples.poses
        )
        assert mcl[-1][1].estimate == gmcl[-1][1].estimate

    def test_ceamcl_tracking_follows_robot(self, landmark_map, small_settings, short_log, rng):
        steps = run_filter(
            short_log, landmark_map, small_settings, Variant.CEAMCL, rng, tracking=True
        )
        for record, state, elapsed in steps:
            assert elapsed >= 0.0
            _check_species(state, small_settings)
            assert state.total_samples > 0
        assert state.estimate.distance_to(short_log[-1].truth) < 0.5

    def test_runs_are_reproducible(self, landmark_map, small_settings, short_log):
        def final_estimate():
            *_, (_, state, _) = run_filter(
                short_log,
                landmark_map,
                small_settings,
                Variant.CEAMCL,
                np.random.default_rng(11),
                tracking=True,
            )
            return state.estimate

        assert final_estimate() == final_estimate()

    def test_wrong_variant_rejected(self, landmark_map, small_settings, short_log, rng):
        record = short_log[1]
        state = init_tracking(landmark_map, short_log[0].truth, small_settings, rng, Variant.MCL)
        with pytest.raises(ValueError):
            step_gmcl(state, record.control, record.scan)
        with pytest.raises(ValueError):
            step_ceamcl(state, record.control, record.scan)
        gmcl = init_tracking(landmark_map, short_log[0].truth, small_settings, rng, Variant.GMCL)
        with pytest.raises(ValueError):
            step_mcl(gmcl, record.control, record.scan)
        assert step(gmcl, record.control, record.scan).t == 1

    def test_extinction_of_every_species_diverges(
        self, landmark_map, small_settings, short_log, rng
    ):
        state = init_tracking(landmark_map, short_log[0].truth, small_settings, rng)
        state.species = [sp.model_copy(update={"growth_rate": -1e6}) for sp in state.species]
        record = short_log[1]
        with pytest.raises(FilterDivergedError):
            step_ceamcl(state, record.control, record.scan)

    def test_growth_injects_samples(self, landmark_map, small_settings, short_log, rng):
        state = init_tracking(landmark_map, short_log[0].truth, small_settings, rng, n=50)
        state.species = [sp.model_copy(update={"growth_rate": 30.0}) for sp in state.species]
        record = short_log[1]
        state = step_ceamcl(state, record.control, record.scan)
        assert state.counters.resampled == 80
        assert state.total_samples >= 80


    def test_population_below_floor_stays_real(self, landmark_map, small_settings, short_log, rng):
        state = init_tracking(landmark_map, short_log[0].truth, small_settings, rng, n=50)
        assert len(state.species) == 1
        state.species = [
            sp.model_copy(update={"population": 2.0, "growth_rate": -0.4}) for sp in state.species
        ]
        record = short_log[1]
        state = step_ceamcl(state, record.control, record.scan)
        assert sum(sp.population for sp in state.species) == pytest.approx(1.6)
        assert state.counters.resampled == small_settings.min_species_size
        assert all(sp.size >= small_settings.min_species_size for sp in state.species)

    def test_zero_growth_keeps_population(self, landmark_map, small_settings, short_log, rng):
        state = init_tracking(landmark_map, short_log[0].truth, small_settings, rng, n=50)
        state.species = [sp.model_copy(update={"growth_rate": 0.0}) for sp in state.species]
        record = short_log[1]
        state = step_ceamcl(state, record.control, record.scan)
        assert sum(sp.population for sp in state.species) == pytest.approx(50.0)
        assert state.counters.resampled == 50

class TestCostModel:
    def test_rule_of_thumb_with_equal_sizes(self):
        model = CostModel(T_f=100.0, T_s=1.0, T_r=1.0, T_m=1.0, p=1.0)
        prediction = predict_cost_ratio(model, 500, 500)
        assert prediction.approx == pytest.approx(2.0)
        assert prediction.exact == pytest.approx(204.0 / 102.0)
        assert prediction.relative_gap < 0.05

    def test_no_evolution_no_overhead(self):
        model = CostModel(T_f=2.0, T_s=0.0, T_r=1.0, T_m=0.0, p=0.0)
        assert predict_cost_ratio(model, 300, 300).exact == pytest.approx(1.0)

    def test_scales_with_sample_ratio(self):
        model = CostModel(T_f=1.0, T_s=0.0, T_r=0.0, p=0.5)
        assert predict_cost_ratio(model, 100, 400).approx == pytest.approx(0.375)

    def test_rejects_empty_mcl(self):
        with pytest.raises(ValueError):
            predict_cost_ratio(CostModel(T_f=1.0, T_s=0.0, T_r=0.0), 100, 0)


def _compete(populations, fitness, total_resources, r, steps):
    """Iterate the population update the CEAMCL step applies, dropping species at round 0."""
    alpha = competition_from_fitness(fitness)
    capacities = [carrying_capacity(f, total_resources) for f in fitness]
    history = [list(populations)]
    pops = list(populations)
    for _ in range(steps):
        rates = growth_rates(pops, capacities, alpha, r)
        pops = [next_population(n, float(dn), 1e9) for n, dn in zip(pops, rates)]
        pops = [n if round(n) > 0 else 0.0 for n in pops]
        history.append(pops)
    return np.array(history)


class TestPopulationUpdate:
    def test_next_population_clamps(self):
        assert next_population(2.0, -0.4, 2000.0) == pytest.approx(1.6)
        assert next_population(2.0, -5.0, 2000.0) == 0.0
        assert next_population(1990.0, 50.0, 2000.0) == 2000.0

    def test_sample_target_has_a_floor(self):
        assert sample_target(1.6, 3) == 3
        assert sample_target(41.4, 3) == 41
        assert sample_target(0.4, 2) == 2

    def test_equilibrium_is_unchanged(self):
        capacity = carrying_capacity(0.7, 400.0)
        history = _compete([capacity], [0.7], 400.0, 0.2, 50)
        np.testing.assert_allclose(history[:, 0], capacity)

    def test_weaker_species_dies_out(self):
        history = _compete([100.0, 100.0], [0.9, 0.45], 400.0, 0.2, 200)
        assert history[-1, 1] == 0.0
        assert history[-1, 0] == pytest.approx(carrying_capacity(0.9, 400.0), rel=0.01)

    def test_equal_fitness_species_coexist(self):
        history = _compete([100.0, 80.0, 60.0, 40.0], [0.5] * 4, 400.0, 0.2, 300)
        assert (np.round(history) > 0).all()
