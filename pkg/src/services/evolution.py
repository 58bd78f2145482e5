"""Intra-species genetic search over real-valued poses."""

from typing import Optional

import numpy as np

from src.models.population import EvolutionParams, Species
from src.models.run import EvolutionStats
from src.models.samples import NoiseParams, SampleSet, ScanObservation, WeightedSample
from src.models.world import OccupancyGrid, Pose
from src.services.robot_models import likelihood_many
from src.utils.angles import blend_angles, normalize_angle

DEFAULT_SIGMA_MUT = (0.1, 0.1, 0.05)


def blend_children(p1: np.ndarray, p2: np.ndarray, xi: float) -> tuple[np.ndarray, np.ndarray]:
    """Convex pair c1 = p1 + xi (p2 - p1), c2 = p2 + xi (p1 - p2).

    Headings move along the shorter arc.
    """
    c1 = p1 + xi * (p2 - p1)
    c2 = p2 + xi * (p1 - p2)
    c1[2] = blend_angles(p1[2], p2[2], xi)
    c2[2] = blend_angles(p2[2], p1[2], xi)
    return c1, c2


def _select_two(weights: np.ndarray) -> np.ndarray:
    """Indices of the two heaviest rows; ties keep the earlier row."""
    order = sorted(range(weights.shape[0]), key=lambda k: (-weights[k], k))
    return np.array(order[:2])


def _crossover_arrays(p1, w1, p2, w2, xi, y, grid, noise):
    c1, c2 = blend_children(p1, p2, xi)
    children = np.stack([c1, c2])
    child_w = likelihood_many(y, children, grid, noise)
    family = np.stack([p1, p2, c1, c2])
    family_w = np.array([w1, w2, child_w[0], child_w[1]])
    keep = _select_two(family_w)
    return family[keep], family_w[keep]


def _mutate_arrays(p, w, tau, y, grid, noise):
    child = p + tau
    child[2] = normalize_angle(child[2])
    child_w = likelihood_many(y, child[None, :], grid, noise)[0]
    if child_w > w:
        return child, child_w
    return p, w


def crossover(
    p1: WeightedSample,
    p2: WeightedSample,
    y: ScanObservation,
    grid: OccupancyGrid,
    noise: NoiseParams,
    rng: np.random.Generator,
) -> tuple[WeightedSample, WeightedSample]:
    """Mate two samples and keep the two heaviest of parents and children."""
    xi = rng.random()
    poses, weights = _crossover_arrays(
        p1.pose.as_array(), p1.weight, p2.pose.as_array(), p2.weight, xi, y, grid, noise
    )
    return (
        WeightedSample(pose=Pose.from_array(poses[0]), weight=weights[0]),
        WeightedSample(pose=Pose.from_array(poses[1]), weight=weights[1]),
    )


def mutate(
    p: WeightedSample,
    y: ScanObservation,
    grid: OccupancyGrid,
    noise: NoiseParams,
    rng: np.random.Generator,
    sigma: tuple[float, float, float] = DEFAULT_SIGMA_MUT,
) -> WeightedSample:
    """Gaussian perturbation; the child replaces the parent only if strictly heavier.

    The child is weighted at its own pose.
    """
    tau = rng.standard_normal(3) * np.asarray(sigma, dtype=float)
    pose, weight = _mutate_arrays(p.pose.as_array(), p.weight, tau, y, grid, noise)
    if weight > p.weight:
        return WeightedSample(pose=Pose.from_array(pose), weight=weight)
    return p


def evolve_species(
    sp: Species,
    y: ScanObservation,
    grid: OccupancyGrid,
    noise: NoiseParams,
    params: EvolutionParams,
    rng: np.random.Generator,
    stats: Optional[EvolutionStats] = None,
) -> Species:
    """floor(N/2) crossover trials then N mutation trials, survivors written in place.

    An operator whose probability is zero draws nothing from rng.
    """
    poses = sp.samples.poses.copy()
    weights = sp.samples.weights.copy()
    n = poses.shape[0]

    if params.p_c > 0 and n >= 2:
        trials = n // 2
        fire = rng.random(trials) < params.p_c
        first = rng.integers(0, n, size=trials)
        second = rng.integers(0, n - 1, size=trials)
        second = second + (second >= first)
        xis = rng.random(trials)
        for k in np.flatnonzero(fire):
            i, j = first[k], second[k]
            kept, kept_w = _crossover_arrays(
                poses[i], weights[i], poses[j], weights[j], xis[k], y, grid, noise
            )
            poses[i], poses[j] = kept[0], kept[1]
            weights[i], weights[j] = kept_w[0], kept_w[1]
            if stats is not None:
                stats.crossovers += 1
                stats.evaluations += 2

    if params.p_m > 0 and n >= 1:
        fire = rng.random(n) < params.p_m
        targets = rng.integers(0, n, size=n)
        taus = rng.standard_normal((n, 3)) * np.asarray(params.sigma_mut, dtype=float)
        for k in np.flatnonzero(fire):
            i = targets[k]
            poses[i], weights[i] = _mutate_arrays(poses[i], weights[i], taus[k], y, grid, noise)
            if stats is not None:
                stats.mutations += 1
                stats.evaluations += 1

    return sp.model_copy(update={"samples": SampleSet(poses=poses, weights=weights)})
