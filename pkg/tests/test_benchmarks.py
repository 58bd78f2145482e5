"""End-to-end benchmarks on the full-size symmetric map.

These take minutes; run them with ``pytest -m slow``.
"""

import numpy as np
import pytest

from src.config import Settings
from src.knowledge.scenarios import benchmark_scenarios
from src.models.run import Variant
from src.services.harness import (
    generate_log,
    measure_cost,
    replica_rng,
    run_experiment,
    sweep_delta,
)
from src.services.metrics import summarize_runs
from src.services.world import build_symmetric_map

pytestmark = pytest.mark.slow

SEEDS = list(range(20))


@pytest.fixture(scope="module")
def settings() -> Settings:
    return Settings(_env_file=None, jobs=4)


@pytest.fixture(scope="module")
def grid(settings):
    return build_symmetric_map(
        settings.map_side, settings.rooms_per_side, settings.door_width, settings.resolution
    )


@pytest.fixture(scope="module")
def logs(grid, settings):
    scenarios = benchmark_scenarios(settings.map_side, settings.rooms_per_side)
    return [
        generate_log(
            grid,
            sc.start,
            sc.goal,
            settings.noise_params(),
            settings.step_len,
            replica_rng(settings.seed, 1000 + index),
            n_beams=settings.n_beams,
            max_range=settings.max_range,
            fov=settings.fov,
            clearance=settings.clearance,
        )
        for index, sc in enumerate(scenarios)
    ]


@pytest.fixture(scope="module")
def ceamcl_runs(grid, logs, settings):
    return run_experiment(grid, logs[:1], Variant.CEAMCL, settings, SEEDS)


def test_ceamcl_keeps_the_true_hypothesis(grid, logs, settings, ceamcl_runs):
    ceamcl = summarize_runs(ceamcl_runs)["ceamcl"]
    budget = int(round(ceamcl["mean_samples"]))
    matched = settings.model_copy(update={"fixed_n": budget})
    mcl = summarize_runs(run_experiment(grid, logs[:1], Variant.MCL, matched, SEEDS))["mcl"]

    assert ceamcl["success_rate"] >= 0.9
    assert ceamcl["success_rate"] > mcl["success_rate"]
    successes = [r for r in ceamcl_runs if r.success]
    assert sum(r.expired_step is None for r in successes) >= 0.9 * len(successes)


def test_ceamcl_shrinks_as_it_converges(ceamcl_runs):
    for run in ceamcl_runs:
        assert run.sample_totals[-1] < run.sample_totals[0]
    length = min(len(r.resources) for r in ceamcl_runs)
    curve = np.mean([r.resources[:length] for r in ceamcl_runs], axis=0)
    slope = np.polyfit(np.arange(length), curve, 1)[0]
    assert slope <= 0.0


def test_sample_budget_grows_with_delta(grid, logs, settings):
    deltas = [20.0, 40.0, 80.0, 160.0]
    curves = sweep_delta(grid, logs[0], deltas, settings, SEEDS[:10])
    means = [float(np.mean(curves[d])) for d in deltas]
    assert means == sorted(means)


def test_cost_ratio_matches_model(grid, logs, settings):
    assert settings.n_beams >= 32
    report = measure_cost(grid, logs[0], settings, SEEDS[:3])
    assert 1.5 <= report.measured_ratio <= 2.5
    assert report.predicted.exact == pytest.approx(report.measured_ratio, rel=0.3)
