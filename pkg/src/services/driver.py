"""Filter loops: MCL, GMCL and CEAMCL, plus the analytic cost model."""

import logging
import math
import time
from typing import Iterator, Optional

import numpy as np

from src.config import Settings
from src.models.errors import FilterDivergedError
from src.models.population import Species
from src.models.run import (
    CostModel,
    CostPrediction,
    FilterState,
    StepRecord,
    Variant,
)
from src.models.samples import OdometryControl, SampleSet, ScanObservation
from src.models.world import OccupancyGrid, Pose
from src.services.coevolution import (
    carrying_capacity,
    competition_matrix,
    growth_rates,
    living_domain,
    resources,
)
from src.services.evolution import evolve_species
from src.services.filter_core import importance_step, normalize, resample, summarize
from src.services.robot_models import likelihood_many
from src.services.species import (
    allocate_and_select,
    draw_test_set,
    initial_sample_size,
    pad_species,
    skiz_partition,
    split_merge,
    threshold_grids,
)
from src.services.world import sample_free_poses
from src.utils.angles import normalize_angle

logger = logging.getLogger(__name__)

DEFAULT_TRACKING_SPREAD = (0.1, 0.1, 0.05)


def _single_species(samples: SampleSet, population: Optional[float] = None) -> Species:
    return Species(
        id=1,
        samples=samples,
        population=float(len(samples)) if population is None else population,
        fitness=samples.mean_weight,
    )


def _normalize_species(sp: Species) -> Species:
    return sp.model_copy(update={"samples": normalize(sp.samples)})


def _summarize_best(state: FilterState) -> None:
    """Report the pose of the fittest species; normalize every species on its own."""
    best = max(state.species, key=lambda sp: (sp.fitness, -sp.id))
    state.species = [_normalize_species(sp) for sp in state.species]
    state.best_species_id = best.id
    chosen = next(sp for sp in state.species if sp.id == best.id)
    state.estimate, state.covariance = summarize(chosen.samples)


def _refresh_dynamics(state: FilterState) -> None:
    """Living domains, resources, capacities and cached growth rates from raw weights."""
    settings: Settings = state.settings
    params = settings.dynamics_params()
    refreshed = []
    for sp in state.species:
        domain = living_domain(sp)
        refreshed.append(
            sp.model_copy(update={"living_domain": domain, "fitness": sp.samples.mean_weight})
        )

    state.total_resources = float(
        sum(resources(sp.living_domain.size, params) for sp in refreshed)
    )
    capacities = [carrying_capacity(sp.fitness, state.total_resources) for sp in refreshed]
    alpha = competition_matrix(refreshed)
    rates = growth_rates([sp.population for sp in refreshed], capacities, alpha, params.r)
    state.species = [
        sp.model_copy(update={"capacity": k, "growth_rate": float(dn)})
        for sp, k, dn in zip(refreshed, capacities, rates)
    ]


def init(
    grid: OccupancyGrid,
    y0: ScanObservation,
    settings: Settings,
    rng: np.random.Generator,
    variant: Variant = Variant.CEAMCL,
) -> FilterState:
    """Global-localization start state for the given variant."""
    noise = settings.noise_params()
    state = FilterState(variant=variant, grid=grid, species=[], settings=settings, rng=rng)

    if variant != Variant.CEAMCL:
        poses = sample_free_poses(grid, settings.fixed_n, rng)
        samples = SampleSet(poses=poses, weights=likelihood_many(y0, poses, grid, noise))
        state.species = [_single_species(samples)]
        state.next_species_id = 2
        state.counters.likelihood_evals += settings.fixed_n
        _summarize_best(state)
        return state

    test = draw_test_set(grid, y0, settings.n_test, noise, rng)
    partition = threshold_grids(test, grid, settings.species_grid, settings.mu)
    n0 = initial_sample_size(partition, settings.eta)
    partition = skiz_partition(partition)
    species = allocate_and_select(partition, test, n0)
    state.counters.likelihood_evals += settings.n_test
    state.species = [pad_species(sp, settings.min_species_size, rng) for sp in species]
    state.next_species_id = max(sp.id for sp in state.species) + 1

    _refresh_dynamics(state)
    state.species = [sp.model_copy(update={"growth_rate": 0.0}) for sp in state.species]
    _summarize_best(state)
    logger.info(
        f"CEAMCL init: |V|={partition.v_size}, N0={n0}, "
        f"{len(state.species)} species, {state.total_samples} samples"
    )
    return state


def init_tracking(
    grid: OccupancyGrid,
    pose: Pose,
    settings: Settings,
    rng: np.random.Generator,
    variant: Variant = Variant.CEAMCL,
    n: Optional[int] = None,
    spread: tuple[float, float, float] = DEFAULT_TRACKING_SPREAD,
) -> FilterState:
    """Pose-tracking start: one species of n samples around a known pose."""
    n = settings.fixed_n if n is None else n
    poses = pose.as_array() + rng.standard_normal((n, 3)) * np.asarray(spread, dtype=float)
    poses[:, 2] = normalize_angle(poses[:, 2])
    samples = SampleSet(poses=poses, weights=np.full(n, 1.0 / n))
    state = FilterState(
        variant=variant,
        grid=grid,
        species=[_single_species(samples)],
        settings=settings,
        rng=rng,
        next_species_id=2,
    )
    if variant == Variant.CEAMCL:
        _refresh_dynamics(state)
        state.species = [sp.model_copy(update={"growth_rate": 0.0}) for sp in state.species]
    _summarize_best(state)
    return state


def _fixed_size_step(
    state: FilterState, u: OdometryControl, y: ScanObservation, evolve: bool
) -> FilterState:
    settings: Settings = state.settings
    noise = settings.noise_params()
    sp = state.species[0]
    n = settings.fixed_n

    started = time.perf_counter()
    samples = resample(sp.samples, n, state.rng)
    state.counters.resample_seconds += time.perf_counter() - started
    state.counters.resampled += n
    samples = importance_step(samples, u, y, state.grid, noise, state.rng)
    state.counters.motion_draws += n
    state.counters.likelihood_evals += n
    sp = sp.model_copy(update={"samples": samples})

    if evolve:
        before = state.evolution.evaluations
        sp = evolve_species(
            sp, y, state.grid, noise, settings.evolution_params(), state.rng, state.evolution
        )
        state.counters.likelihood_evals += state.evolution.evaluations - before

    state.species = [sp.model_copy(update={"fitness": sp.samples.mean_weight})]
    state.t += 1
    _summarize_best(state)
    return state


def step_mcl(state: FilterState, u: OdometryControl, y: ScanObservation) -> FilterState:
    """Resample, importance sampling, summary; N is constant."""
    if state.variant != Variant.MCL:
        raise ValueError(f"step_mcl needs an MCL state, got {state.variant.value}")
    return _fixed_size_step(state, u, y, evolve=False)


def step_gmcl(state: FilterState, u: OdometryControl, y: ScanObservation) -> FilterState:
    """MCL with intra-species evolution on its single species."""
    if state.variant != Variant.GMCL:
        raise ValueError(f"step_gmcl needs a GMCL state, got {state.variant.value}")
    return _fixed_size_step(state, u, y, evolve=True)


def _inject_growth(sp: Species, count: int, rng: np.random.Generator) -> Species:
    """Add count samples uniform inside the living-domain ellipse, weighted at the mean."""
    domain = sp.living_domain
    radius = np.sqrt(rng.random(count))
    phi = rng.uniform(-math.pi, math.pi, size=count)
    local = np.stack([radius * np.cos(phi), radius * np.sin(phi)], axis=1) * domain.radii
    poses = np.empty((count, 3))
    poses[:, :2] = local @ domain.axes.T + np.array([domain.center.x, domain.center.y])
    poses[:, 2] = rng.uniform(-math.pi, math.pi, size=count)
    born = SampleSet(poses=poses, weights=np.full(count, sp.samples.mean_weight))
    return sp.model_copy(update={"samples": sp.samples.concat(born)})


def next_population(population: float, growth_rate: float, cap: float) -> float:
    """N_t = max(N_{t-1} + dN/dt, 0), held below the per-species cap."""
    return min(max(population + growth_rate, 0.0), cap)


def sample_target(population: float, floor: int) -> int:
    """Samples materialized for a population; the floor never feeds back into N."""
    return max(int(round(population)), floor)


def step_ceamcl(state: FilterState, u: OdometryControl, y: ScanObservation) -> FilterState:
    """One coevolutionary step over every species."""
    if state.variant != Variant.CEAMCL:
        raise ValueError(f"step_ceamcl needs a CEAMCL state, got {state.variant.value}")
    settings: Settings = state.settings
    noise = settings.noise_params()
    rng = state.rng

    # Sample-size determination from the cached growth rates
    survivors = []
    for sp in state.species:
        dn = sp.growth_rate
        population = next_population(sp.population, dn, settings.population_cap)
        if round(population) == 0:
            logger.debug(f"Species {sp.id} extinct at t={state.t + 1}")
            continue
        born = int(round(dn))
        if born > 0 and sp.living_domain is not None:
            sp = _inject_growth(sp, born, rng)
        survivors.append(sp.model_copy(update={"population": population}))
    if not survivors:
        raise FilterDivergedError(f"every species went extinct at t={state.t + 1}")

    # Resampling, importance sampling and evolution, species by species
    evolved = []
    params = settings.evolution_params()
    for sp in survivors:
        target = sample_target(sp.population, settings.min_species_size)
        started = time.perf_counter()
        samples = resample(sp.samples, target, rng)
        state.counters.resample_seconds += time.perf_counter() - started
        samples = importance_step(samples, u, y, state.grid, noise, rng)
        state.counters.resampled += target
        state.counters.motion_draws += target
        state.counters.likelihood_evals += target
        before = state.evolution.evaluations
        sp = evolve_species(
            sp.model_copy(update={"samples": samples}),
            y,
            state.grid,
            noise,
            params,
            rng,
            state.evolution,
        )
        state.counters.likelihood_evals += state.evolution.evaluations - before
        evolved.append(sp)

    started = time.perf_counter()
    species = split_merge(
        evolved,
        state.grid,
        settings.split_grid_dims,
        new_id=state.take_species_id,
        dilation=settings.split_dilation,
        valley_points=settings.valley_points,
        valley_ratio=settings.valley_ratio,
    )
    state.species = [pad_species(sp, settings.min_species_size, rng) for sp in species]
    state.counters.split_merge_seconds += time.perf_counter() - started

    _refresh_dynamics(state)
    state.t += 1
    _summarize_best(state)
    return state


def step(state: FilterState, u: OdometryControl, y: ScanObservation) -> FilterState:
    """Advance any variant by one time step."""
    if state.variant == Variant.MCL:
        return step_mcl(state, u, y)
    if state.variant == Variant.GMCL:
        return step_gmcl(state, u, y)
    return step_ceamcl(state, u, y)


def run_filter(
    records: list[StepRecord],
    grid: OccupancyGrid,
    settings: Settings,
    variant: Variant,
    rng: np.random.Generator,
    tracking: bool = False,
) -> Iterator[tuple[StepRecord, FilterState, float]]:
    """Consume a log, yielding (record, state after the record, step wall time)."""
    for record in records:
        started = time.perf_counter()
        if record.t == 0:
            if tracking:
                state = init_tracking(grid, record.truth, settings, rng, variant)
            else:
                state = init(grid, record.scan, settings, rng, variant)
        else:
            state.counters.reset()
            state = step(state, record.control, record.scan)
        yield record, state, time.perf_counter() - started


def predict_cost_ratio(model: CostModel, n_c: int, n_m: int) -> CostPrediction:
    """CEAMCL/MCL iteration time: full per-sample form and the T_f-dominated rule."""
    if n_m <= 0:
        raise ValueError("n_m must be positive")
    t_m = n_m * (model.T_f + model.T_s + model.T_r)
    t_c = n_c * ((1.0 + model.p) * model.T_f + 2.0 * model.T_s + model.T_r + model.T_m)
    exact = t_c / t_m if t_m > 0 else 0.0
    return CostPrediction(exact=exact, approx=(1.0 + model.p) * n_c / n_m)
