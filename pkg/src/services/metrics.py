"""Per-step hypothesis bookkeeping and run-level outcome metrics."""

import logging
from typing import Iterable, Iterator, Optional

import numpy as np

from src.config import Settings
from src.models.errors import FilterDivergedError
from src.models.run import FilterState, RunMetrics, StepRecord, Variant
from src.models.world import OccupancyGrid, Pose
from src.services.species import sample_components
from src.services.world import symmetry_images

logger = logging.getLogger(__name__)


def hypotheses(state: FilterState, settings: Settings) -> np.ndarray:
    """Weighted mean (x, y) of every connected sample cluster, shape (h, 2).

    Clusters come from each species rasterized on the split grid; clusters smaller
    than ``min_hypothesis_samples`` are ignored.
    """
    means = []
    for sp in state.species:
        if sp.size == 0:
            continue
        component, count = sample_components(
            sp.samples.poses, state.grid, settings.split_grid_dims, settings.split_dilation
        )
        for label in range(1, count + 1):
            members = component == label
            if members.sum() < settings.min_hypothesis_samples:
                continue
            xy = sp.samples.poses[members, :2]
            w = sp.samples.weights[members]
            means.append(w @ xy / w.sum() if w.sum() > 0 else xy.mean(axis=0))
    return np.array(means).reshape(-1, 2)


def is_consistent(means: np.ndarray, pose: Pose, radius: float) -> bool:
    """Some hypothesis lies within radius of pose."""
    if means.shape[0] == 0:
        return False
    return bool(np.min(np.hypot(means[:, 0] - pose.x, means[:, 1] - pose.y)) <= radius)


def concentrated(state: FilterState, ghosts: list[Pose], settings: Settings) -> bool:
    """At least convergence_mass of all samples lie near one of the ghost poses."""
    xy = np.vstack([sp.samples.poses[:, :2] for sp in state.species])
    targets = np.array([[g.x, g.y] for g in ghosts])
    dist = np.linalg.norm(xy[:, None, :] - targets[None, :, :], axis=2).min(axis=1)
    return float(np.mean(dist <= settings.association_radius)) >= settings.convergence_mass


def collect_metrics(
    steps: Iterable[tuple[StepRecord, FilterState, float]],
    grid: OccupancyGrid,
    settings: Settings,
    variant: Variant,
    seed: int,
    log_index: int = 0,
) -> RunMetrics:
    """Drain a run_filter iterator into RunMetrics; divergence ends the run as a failure."""
    metrics = RunMetrics(variant=variant, seed=seed, log_index=log_index)
    radius = settings.association_radius
    tracking = False
    alive = False
    iterator: Iterator = iter(steps)

    while True:
        try:
            record, state, elapsed = next(iterator)
        except StopIteration:
            break
        except FilterDivergedError as exc:
            logger.info(f"{variant.value} seed={seed} log={log_index} diverged: {exc}")
            metrics.diverged = True
            break

        t = record.t
        ghosts = symmetry_images(record.truth, grid)
        means = hypotheses(state, settings)
        alive = is_consistent(means, record.truth, radius)

        metrics.errors.append(state.estimate.distance_to(record.truth))
        metrics.sample_totals.append(state.total_samples)
        metrics.resources.append(state.total_resources)
        metrics.species_counts.append(len(state.species))
        metrics.hypotheses.append(int(means.shape[0]))
        metrics.wall_times.append(elapsed)

        if metrics.converged_step is None and concentrated(state, ghosts, settings):
            metrics.converged_step = t
        if alive:
            tracking = True
        elif tracking and metrics.expired_step is None:
            metrics.expired_step = t
        if (
            metrics.converged_step is not None
            and metrics.ghost_expired_step is None
            and not all(is_consistent(means, g, radius) for g in ghosts)
        ):
            metrics.ghost_expired_step = t

    metrics.success = alive and metrics.expired_step is None and not metrics.diverged
    return metrics


def _mean_or_none(values: list[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def summarize_runs(runs: list[RunMetrics]) -> dict[str, dict]:
    """Per-variant aggregates: success rate, expiry, errors and sample budget."""
    summary: dict[str, dict] = {}
    for variant in sorted({r.variant.value for r in runs}):
        group = sorted(
            (r for r in runs if r.variant.value == variant), key=lambda r: (r.log_index, r.seed)
        )
        converged = [r.converged_step for r in group if r.converged_step is not None]
        expired = [r.expired_step for r in group if r.expired_step is not None]
        ghost_expired = [r.ghost_expired_step for r in group if r.ghost_expired_step is not None]
        summary[variant] = {
            "runs": len(group),
            "success_rate": float(np.mean([r.success for r in group])) if group else 0.0,
            "diverged": sum(r.diverged for r in group),
            "never_expired": sum(r.expired_step is None for r in group),
            "mean_converged_step": _mean_or_none(converged),
            "mean_expired_step": _mean_or_none(expired),
            "mean_ghost_expired_step": _mean_or_none(ghost_expired),
            "mean_final_error": _mean_or_none([r.errors[-1] for r in group if r.errors]),
            "mean_error": _mean_or_none([float(np.mean(r.errors)) for r in group if r.errors]),
            "mean_samples": _mean_or_none(
                [float(np.mean(r.sample_totals)) for r in group if r.sample_totals]
            ),
        }
    return summary
