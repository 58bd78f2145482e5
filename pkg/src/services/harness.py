"""Synthetic data logs and the experiment runners built on them."""

import asyncio
import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError
from scipy import ndimage

from src.config import Settings
from src.models.errors import ConfigError, UnknownParameterError, UnreachableGoalError
from src.models.run import CostReport, RunMetrics, StepRecord, Variant
from src.models.samples import NoiseParams, OdometryControl, ScanObservation
from src.models.world import OccupancyGrid, Pose
from src.services.driver import predict_cost_ratio, run_filter
from src.services.metrics import collect_metrics
from src.services.robot_models import perturb_control
from src.services.world import expected_scan

logger = logging.getLogger(__name__)

# Settings a sweep may vary
SWEEPABLE = frozenset(
    {"delta", "epsilon", "growth_rate", "p_c", "p_m", "mu", "eta", "fixed_n", "min_species_size"}
)

_NEIGHBOURS = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)]


def inflate(grid: OccupancyGrid, clearance: float) -> np.ndarray:
    """Occupancy grown by clearance metres (square structuring element)."""
    steps = int(math.ceil(clearance / grid.resolution - 1e-9))
    if steps <= 0:
        return grid.cells.copy()
    square = ndimage.generate_binary_structure(2, 2)
    return ndimage.binary_dilation(grid.cells, structure=square, iterations=steps)


def _bfs_cells(blocked: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> list:
    """Shortest 8-connected cell path; diagonal moves may not cut corners."""
    nx, ny = blocked.shape
    parent = {start: None}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        if cell == goal:
            break
        cx, cy = cell
        for dx, dy in _NEIGHBOURS:
            nxt = (cx + dx, cy + dy)
            if not (0 <= nxt[0] < nx and 0 <= nxt[1] < ny) or nxt in parent:
                continue
            if blocked[nxt]:
                continue
            if dx and dy and (blocked[cx + dx, cy] or blocked[cx, cy + dy]):
                continue
            parent[nxt] = cell
            queue.append(nxt)
    if goal not in parent:
        return []
    path = []
    cell = goal
    while cell is not None:
        path.append(cell)
        cell = parent[cell]
    return path[::-1]


def _visible(blocked: np.ndarray, grid: OccupancyGrid, a: np.ndarray, b: np.ndarray) -> bool:
    n = max(2, int(math.ceil(np.linalg.norm(b - a) / (grid.resolution / 4.0))) + 1)
    pts = a + np.linspace(0.0, 1.0, n)[:, None] * (b - a)
    ix = np.floor((pts[:, 0] - grid.origin_x) / grid.resolution).astype(np.int64)
    iy = np.floor((pts[:, 1] - grid.origin_y) / grid.resolution).astype(np.int64)
    nx, ny = blocked.shape
    if ix.min() < 0 or iy.min() < 0 or ix.max() >= nx or iy.max() >= ny:
        return False
    return not blocked[ix, iy].any()


def plan_path(grid: OccupancyGrid, start: Pose, goal: Pose, clearance: float) -> np.ndarray:
    """Collision-free waypoints (k, 2) from start to goal with clearance from walls."""
    blocked = inflate(grid, clearance)
    s = grid.world_to_cell(start.x, start.y)
    g = grid.world_to_cell(goal.x, goal.y)
    if s is None or g is None or blocked[s] or blocked[g]:
        raise UnreachableGoalError("start or goal lies within the wall clearance")

    cells = _bfs_cells(blocked, s, g)
    if not cells:
        raise UnreachableGoalError(f"no path from ({start.x}, {start.y}) to ({goal.x}, {goal.y})")

    points = np.array([grid.cell_center(ix, iy) for ix, iy in cells])
    points[0] = (start.x, start.y)
    points[-1] = (goal.x, goal.y)

    # Greedy string pulling
    waypoints = [points[0]]
    anchor = 0
    while anchor < len(points) - 1:
        reach = anchor + 1
        while reach + 1 < len(points) and _visible(
            blocked, grid, points[anchor], points[reach + 1]
        ):
            reach += 1
        waypoints.append(points[reach])
        anchor = reach
    return np.array(waypoints)


def resample_path(points: np.ndarray, step_len: float) -> np.ndarray:
    """Points every step_len metres along a polyline, always ending at its last point."""
    if step_len <= 0:
        raise ValueError("step_len must be positive")
    keep = np.concatenate([[True], np.any(np.diff(points, axis=0) != 0, axis=1)])
    points = points[keep]
    if len(points) == 1:
        return points.copy()
    lengths = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
    total = cumulative[-1]
    stations = np.arange(0.0, total, step_len)
    if total - stations[-1] > 1e-9:
        stations = np.append(stations, total)
    xs = np.interp(stations, cumulative, points[:, 0])
    ys = np.interp(stations, cumulative, points[:, 1])
    return np.stack([xs, ys], axis=1)


def _noisy_scan(
    grid: OccupancyGrid,
    pose: Pose,
    bearings: np.ndarray,
    max_range: float,
    sigma: float,
    rng: np.random.Generator,
) -> ScanObservation:
    ranges = expected_scan(grid, pose, bearings, max_range)
    ranges = np.clip(ranges + rng.normal(0.0, sigma, size=ranges.shape[0]), 0.0, max_range)
    return ScanObservation(bearings=bearings, ranges=ranges, max_range=max_range)


def generate_log(
    grid: OccupancyGrid,
    start: Pose,
    goal: Pose,
    noise: NoiseParams,
    step_len: float,
    rng: np.random.Generator,
    n_beams: int = 32,
    max_range: float = 10.0,
    fov: float = math.pi,
    clearance: float = 0.4,
) -> list[StepRecord]:
    """Drive from start to goal, recording noisy odometry, noisy scans and ground truth.

    Record 0 carries a zero control. Each later control is the true relative
    motion read through the odometry noise law.
    """
    bearings = ScanObservation.default_bearings(n_beams, fov)
    stations = resample_path(plan_path(grid, start, goal, clearance), step_len)

    truths = [start]
    for k in range(1, len(stations)):
        dx, dy = stations[k] - stations[k - 1]
        truths.append(Pose(x=stations[k][0], y=stations[k][1], theta=math.atan2(dy, dx)))

    records = [
        StepRecord(
            t=0,
            control=OdometryControl(),
            scan=_noisy_scan(grid, start, bearings, max_range, noise.sigma_hit, rng),
            truth=start,
        )
    ]
    for t in range(1, len(truths)):
        control = perturb_control(OdometryControl.between(truths[t - 1], truths[t]), noise, rng)
        scan = _noisy_scan(grid, truths[t], bearings, max_range, noise.sigma_hit, rng)
        records.append(StepRecord(t=t, control=control, scan=scan, truth=truths[t]))
    logger.debug(f"Generated log with {len(records)} records")
    return records


def replica_rng(seed: int, log_index: int) -> np.random.Generator:
    """Independent stream for one (seed, log) replica."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(log_index,)))


def run_replica(
    grid: OccupancyGrid,
    records: list[StepRecord],
    settings: Settings,
    variant: Variant,
    seed: int,
    log_index: int = 0,
    tracking: bool = False,
) -> RunMetrics:
    """Run one variant over one log with one seed."""
    steps = run_filter(records, grid, settings, variant, replica_rng(seed, log_index), tracking)
    metrics = collect_metrics(steps, grid, settings, variant, seed, log_index)
    logger.info(
        f"{variant.value} seed={seed} log={log_index}: success={metrics.success} "
        f"expired={metrics.expired_step} final_samples="
        f"{metrics.sample_totals[-1] if metrics.sample_totals else 0}"
    )
    return metrics


async def run_replicas_async(tasks: Sequence[tuple], jobs: int = 1) -> list[RunMetrics]:
    """Run replica tasks (run_replica argument tuples), sorted by (variant, log, seed)."""
    if jobs <= 1:
        results = [run_replica(*task) for task in tasks]
    else:
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [loop.run_in_executor(pool, run_replica, *task) for task in tasks]
            results = await asyncio.gather(*futures)
    return sorted(results, key=lambda m: (m.variant.value, m.log_index, m.seed))


def run_experiment(
    grid: OccupancyGrid,
    logs: Sequence[list[StepRecord]],
    variant: Variant | Sequence[Variant],
    settings: Settings,
    seeds: Sequence[int],
    jobs: Optional[int] = None,
    tracking: bool = False,
) -> list[RunMetrics]:
    """Every variant on every log with every seed."""
    variants = [variant] if isinstance(variant, Variant) else list(variant)
    tasks = [
        (grid, records, settings, v, seed, index, tracking)
        for v in variants
        for index, records in enumerate(logs)
        for seed in seeds
    ]
    jobs = settings.jobs if jobs is None else jobs
    return asyncio.run(run_replicas_async(tasks, jobs))


def _mean_curve(series: list[list[float]]) -> list[float]:
    if not series:
        return []
    length = min(len(s) for s in series)
    return np.mean([s[:length] for s in series], axis=0).tolist()


def sweep_parameter(
    grid: OccupancyGrid,
    records: list[StepRecord],
    param: str,
    values: Sequence[float],
    settings: Settings,
    seeds: Sequence[int],
    variant: Variant = Variant.CEAMCL,
    jobs: Optional[int] = None,
) -> dict[float, list[float]]:
    """Mean total-sample-size curve over seeds for each value of one setting."""
    if param not in SWEEPABLE:
        raise UnknownParameterError(f"cannot sweep '{param}'; choose from {sorted(SWEEPABLE)}")
    cast = type(getattr(settings, param))
    curves: dict[float, list[float]] = {}
    for value in values:
        try:
            varied = type(settings)(**{**settings.model_dump(), param: cast(value)})
        except ValidationError as exc:
            raise ConfigError(f"invalid {param}={value}: {exc}") from exc
        runs = run_experiment(grid, [records], variant, varied, seeds, jobs)
        curves[value] = _mean_curve([r.sample_totals for r in runs])
        logger.info(f"sweep {param}={value}: {len(runs)} run(s)")
    return curves


def sweep_delta(
    grid: OccupancyGrid,
    records: list[StepRecord],
    deltas: Sequence[float],
    settings: Settings,
    seeds: Sequence[int],
    jobs: Optional[int] = None,
) -> dict[float, list[float]]:
    """Total-sample-size curve per delta (resources per unit living domain)."""
    if any(d <= 0 for d in deltas):
        raise ValueError("deltas must be positive")
    return sweep_parameter(grid, records, "delta", deltas, settings, seeds, jobs=jobs)


def fit_cost_constants(
    work: Sequence[Sequence[float]],
    seconds: Sequence[float],
    resample_seconds: float,
    resampled: int,
) -> tuple[float, float, float]:
    """Per-sample T_f, T_s and T_r.

    T_r comes straight from the timed resampling calls. T_f and T_s are a least-squares
    fit of the remaining step time on (likelihood evaluations, motion draws) per step.
    The two columns are independent only when some steps evaluate more samples than
    they move (evolution); otherwise the whole remainder is charged to T_f.
    """
    t_r = resample_seconds / resampled if resampled else 0.0
    work = np.asarray(work, dtype=float).reshape(-1, 2)
    seconds = np.asarray(seconds, dtype=float)
    if np.linalg.matrix_rank(work) < 2:
        evals = work[:, 0].sum()
        t_f = float(seconds.sum() / evals) if evals > 0 else 0.0
        return max(t_f, 0.0), 0.0, t_r
    coeffs, *_ = np.linalg.lstsq(work, seconds, rcond=None)
    return float(max(coeffs[0], 0.0)), float(max(coeffs[1], 0.0)), t_r


def measure_cost(
    grid: OccupancyGrid,
    records: list[StepRecord],
    settings: Settings,
    seeds: Sequence[int],
    variants: Sequence[Variant] = (Variant.MCL, Variant.CEAMCL),
) -> CostReport:
    """Per-iteration wall time per variant and a cost model fitted on step counters.

    Runs in-process and sequentially so timings are not distorted. The
    initialization step is excluded.
    """
    series: dict[str, list[float]] = {}
    sample_series: dict[str, list[int]] = {}
    rows, times, split_share = [], [], []
    resample_seconds, resampled = 0.0, 0
    per_sample: dict[Variant, list[float]] = {}

    for variant in variants:
        timings, sizes = [], []
        for seed in seeds:
            seed_times, seed_sizes = [], []
            steps = run_filter(records, grid, settings, variant, replica_rng(seed, 0))
            for record, state, elapsed in steps:
                if record.t == 0:
                    continue
                c = state.counters
                rows.append([c.likelihood_evals, c.motion_draws])
                times.append(elapsed - c.split_merge_seconds - c.resample_seconds)
                resample_seconds += c.resample_seconds
                resampled += c.resampled
                if state.total_samples:
                    split_share.append(c.split_merge_seconds / state.total_samples)
                seed_times.append(elapsed)
                seed_sizes.append(state.total_samples)
                per_sample.setdefault(variant, []).append(elapsed / max(state.total_samples, 1))
            timings.append(seed_times)
            sizes.append(seed_sizes)
        series[variant.value] = _mean_curve(timings)
        sample_series[variant.value] = [int(round(v)) for v in _mean_curve(sizes)]

    if not rows:
        return CostReport(series=series, sample_series=sample_series)

    t_f, t_s, t_r = fit_cost_constants(rows, times, resample_seconds, resampled)
    model = settings.cost_model(t_f, t_s, t_r, float(np.mean(split_share)) if split_share else 0.0)

    measured = predicted = None
    if Variant.MCL in per_sample and Variant.CEAMCL in per_sample:
        measured = float(np.mean(per_sample[Variant.CEAMCL]) / np.mean(per_sample[Variant.MCL]))
        predicted = predict_cost_ratio(model, 1, 1)
    return CostReport(
        series=series,
        sample_series=sample_series,
        model=model,
        measured_ratio=measured,
        predicted=predicted,
    )
