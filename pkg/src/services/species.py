"""Species generation from a test sample set, and the splitting-merging process."""

import itertools
import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage

from src.models.errors import EmptyRegionError
from src.models.population import GridPartition, LivingDomain, Species
from src.models.samples import NoiseParams, SampleSet, ScanObservation
from src.models.world import OccupancyGrid, Pose
from src.services.coevolution import living_domain
from src.services.filter_core import systematic_indices
from src.services.robot_models import likelihood_many
from src.services.world import sample_free_poses

logger = logging.getLogger(__name__)

# 4-connectivity, matching the city-block metric
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


def draw_test_set(
    grid: OccupancyGrid,
    y0: ScanObservation,
    n_test: int,
    noise: NoiseParams,
    rng: np.random.Generator,
) -> SampleSet:
    """Uniform samples over free space, weighted against the first scan."""
    if n_test < 1:
        raise ValueError("n_test must be at least 1")
    poses = sample_free_poses(grid, n_test, rng)
    return SampleSet(poses=poses, weights=likelihood_many(y0, poses, grid, noise))


def _grid_geometry(grid: OccupancyGrid, dims: tuple[int, int]) -> dict:
    nx, ny = dims
    x_min, y_min, x_max, y_max = grid.bounds
    return {
        "nx": nx,
        "ny": ny,
        "x_min": x_min,
        "y_min": y_min,
        "cell_w": (x_max - x_min) / nx,
        "cell_h": (y_max - y_min) / ny,
    }


def _cells_of(xy: np.ndarray, geometry: dict) -> tuple[np.ndarray, np.ndarray]:
    ix = np.floor((xy[:, 0] - geometry["x_min"]) / geometry["cell_w"]).astype(np.int64)
    iy = np.floor((xy[:, 1] - geometry["y_min"]) / geometry["cell_h"]).astype(np.int64)
    return np.clip(ix, 0, geometry["nx"] - 1), np.clip(iy, 0, geometry["ny"] - 1)


def threshold_grids(
    test: SampleSet, grid: OccupancyGrid, dims: tuple[int, int], mu: float
) -> GridPartition:
    """Average test weight per (x, y) grid; V holds grids above mu * max grid weight."""
    if not 0.0 < mu < 1.0:
        raise ValueError("mu must lie in (0, 1)")
    geometry = _grid_geometry(grid, dims)
    nx, ny = dims
    ix, iy = _cells_of(test.poses[:, :2], geometry)
    flat = ix * ny + iy
    sums = np.bincount(flat, weights=test.weights, minlength=nx * ny).reshape(nx, ny)
    counts = np.bincount(flat, minlength=nx * ny).reshape(nx, ny)
    weights = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    threshold = mu * float(weights.max()) if weights.size else 0.0
    return GridPartition(
        **geometry,
        weights=weights,
        counts=counts,
        in_v=weights > threshold,
        threshold=threshold,
        labels=np.zeros((nx, ny), dtype=np.int64),
    )


def initial_sample_size(partition: GridPartition, eta: float) -> int:
    """N0 = ceil(eta * |V| / mean weight of V)."""
    if partition.v_size == 0:
        raise EmptyRegionError("no grid exceeded the threshold")
    raw = eta * partition.v_size / partition.v_mean_weight
    return max(1, math.ceil(raw - 1e-9))


def skiz_partition(partition: GridPartition) -> GridPartition:
    """Label connected regions of V and grow them by city-block distance over the grid.

    Every grid goes to the nearest seed region; equidistant grids go to the lowest id.
    """
    seeds, n_seeds = ndimage.label(partition.in_v, structure=FOUR_CONNECTED)
    if n_seeds == 0:
        raise EmptyRegionError("no seed regions to grow")

    labels = seeds.astype(np.int64)
    unset = n_seeds + 1
    while (labels == 0).any():
        current = np.where(labels > 0, labels, unset)
        padded = np.pad(current, 1, constant_values=unset)
        nearest = np.minimum.reduce(
            [padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:]]
        )
        reached = (labels == 0) & (nearest < unset)
        labels[reached] = nearest[reached]

    logger.debug(f"SKIZ partition: {n_seeds} zone(s)")
    return partition.model_copy(update={"labels": labels, "n_zones": int(n_seeds)})


def largest_remainder(total: int, shares: np.ndarray) -> np.ndarray:
    """Integer quotas proportional to shares that sum to total exactly."""
    shares = np.asarray(shares, dtype=float)
    raw = total * shares / shares.sum()
    quotas = np.floor(raw).astype(np.int64)
    leftover = total - int(quotas.sum())
    order = sorted(range(len(raw)), key=lambda k: (-(raw[k] - quotas[k]), k))
    for k in order[:leftover]:
        quotas[k] += 1
    return quotas


def allocate_and_select(
    partition: GridPartition, test: SampleSet, n0: int
) -> list[Species]:
    """Split n0 over zones by mean grid weight and keep each zone's heaviest samples.

    A zone holding fewer test samples than its quota keeps all of them; its
    population is still the quota.
    """
    ix, iy = partition.cell_of(test.poses[:, :2])
    sample_zone = partition.labels[ix, iy]

    zones, zone_weights = [], []
    for zone in range(1, partition.n_zones + 1):
        in_zone = (partition.labels == zone) & (partition.counts > 0)
        if not in_zone.any():
            continue
        zones.append(zone)
        zone_weights.append(float(partition.weights[in_zone].mean()))
    if not zones:
        raise EmptyRegionError("no zone received test samples")

    quotas = largest_remainder(n0, np.array(zone_weights))
    species: list[Species] = []
    for zone, quota in zip(zones, quotas):
        if quota == 0:
            continue
        members = np.flatnonzero(sample_zone == zone)
        order = members[np.argsort(-test.weights[members], kind="stable")]
        chosen = test.subset(order[:quota])
        species.append(
            Species(
                id=zone,
                samples=chosen,
                population=float(quota),
                fitness=chosen.mean_weight,
            )
        )
    return species


def _point_domain(sp: Species) -> LivingDomain:
    x, y, theta = sp.samples.poses[0]
    return LivingDomain(
        center=Pose(x=x, y=y, theta=theta),
        axes=np.eye(2),
        variances=np.full(2, 1e-12),
        radii=np.full(2, 2e-6),
        size=0.0,
    )


def safe_domain(sp: Species) -> LivingDomain:
    """Living domain, or a point-sized one for single-sample species."""
    if sp.size >= 2:
        return living_domain(sp)
    return _point_domain(sp)


def ellipses_intersect(a: LivingDomain, b: LivingDomain, n_points: int = 64) -> bool:
    """Overlap test on centres and sampled boundaries."""
    ca = np.array([[a.center.x, a.center.y]])
    cb = np.array([[b.center.x, b.center.y]])
    if a.contains(cb)[0] or b.contains(ca)[0]:
        return True
    return bool(a.contains(b.boundary(n_points)).any() or b.contains(a.boundary(n_points)).any())


def has_valley(a: Species, b: Species, n_points: int = 10, ratio: float = 0.5) -> bool:
    """True when some point on the line between the species means is poorly supported.

    Each point takes the weight of its nearest sample from either species; a valley
    is a weight below ratio * the smaller species fitness.
    """
    start, end = a.mean_xy(), b.mean_xy()
    points = start + np.linspace(0.0, 1.0, n_points)[:, None] * (end - start)
    xy = np.vstack([a.samples.poses[:, :2], b.samples.poses[:, :2]])
    weights = np.concatenate([a.samples.weights, b.samples.weights])
    dist = np.linalg.norm(points[:, None, :] - xy[None, :, :], axis=2)
    profile = weights[np.argmin(dist, axis=1)]
    floor = ratio * min(a.samples.mean_weight, b.samples.mean_weight)
    return bool(profile.min() < floor)


def sample_components(
    poses: np.ndarray, grid: OccupancyGrid, dims: tuple[int, int], dilation: int = 0
) -> tuple[np.ndarray, int]:
    """Component label (1..c) of every sample after rasterizing onto the split grid."""
    geometry = _grid_geometry(grid, dims)
    ix, iy = _cells_of(poses[:, :2], geometry)
    occupied = np.zeros(dims, dtype=bool)
    occupied[ix, iy] = True
    if dilation > 0:
        occupied = ndimage.binary_dilation(
            occupied, structure=FOUR_CONNECTED, iterations=dilation
        )
    labels, count = ndimage.label(occupied, structure=FOUR_CONNECTED)
    return labels[ix, iy], int(count)


def _split(
    sp: Species,
    grid: OccupancyGrid,
    dims: tuple[int, int],
    dilation: int,
    new_id: Callable[[], int],
) -> list[Species]:
    if sp.size == 0:
        return [sp]
    component, count = sample_components(sp.samples.poses, grid, dims, dilation)
    if count <= 1:
        return [sp]
    pieces = []
    for label in range(1, count + 1):
        members = np.flatnonzero(component == label)
        share = members.size / sp.size
        subset = sp.samples.subset(members)
        pieces.append(
            Species(
                id=new_id(),
                samples=subset,
                population=sp.population * share,
                growth_rate=sp.growth_rate * share,
                fitness=subset.mean_weight,
            )
        )
    logger.debug(f"Species {sp.id} split into {[p.id for p in pieces]}")
    return pieces


def _merge(a: Species, b: Species) -> Species:
    low, high = (a, b) if a.id < b.id else (b, a)
    samples = low.samples.concat(high.samples)
    return Species(
        id=low.id,
        samples=samples,
        population=low.population + high.population,
        growth_rate=low.growth_rate + high.growth_rate,
        fitness=samples.mean_weight,
    )


def should_merge(
    a: Species, b: Species, valley_points: int = 10, valley_ratio: float = 0.5
) -> bool:
    if not ellipses_intersect(safe_domain(a), safe_domain(b)):
        return False
    return not has_valley(a, b, valley_points, valley_ratio)


def split_merge(
    species_list: Sequence[Species],
    grid: OccupancyGrid,
    dims: tuple[int, int],
    new_id: Optional[Callable[[], int]] = None,
    dilation: int = 0,
    valley_points: int = 10,
    valley_ratio: float = 0.5,
) -> list[Species]:
    """Split grid-disconnected species, then merge overlapping valley-free pairs."""
    if new_id is None:
        counter = itertools.count(max((sp.id for sp in species_list), default=0) + 1)
        new_id = lambda: next(counter)  # noqa: E731

    result: list[Species] = []
    for sp in species_list:
        result.extend(_split(sp, grid, dims, dilation, new_id))

    merged = True
    while merged:
        merged = False
        result.sort(key=lambda sp: sp.id)
        for i, j in itertools.combinations(range(len(result)), 2):
            if should_merge(result[i], result[j], valley_points, valley_ratio):
                combined = _merge(result[i], result[j])
                logger.debug(f"Species {result[i].id} and {result[j].id} merged")
                result = [sp for k, sp in enumerate(result) if k not in (i, j)] + [combined]
                merged = True
                break
    result.sort(key=lambda sp: sp.id)
    return result


def pad_species(sp: Species, floor: int, rng: np.random.Generator) -> Species:
    """Duplicate samples (keeping raw weights) until the species has floor members.

    Only the materialized samples grow; the population N is left as it is.
    """
    if sp.size == 0 or sp.size >= floor:
        return sp
    if sp.samples.weights.sum() > 0:
        weights = sp.samples.weights
    else:
        weights = np.ones(sp.size)
    extra = systematic_indices(weights, floor - sp.size, rng)
    padded = sp.samples.concat(sp.samples.subset(extra))
    return sp.model_copy(update={"samples": padded})
