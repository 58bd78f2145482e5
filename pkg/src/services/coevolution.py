"""Inter-species competition: living domains, resources and Lotka-Volterra growth."""

import math
from typing import Sequence

import numpy as np

from src.models.errors import DegenerateSpeciesError, NonPositiveInputError
from src.models.population import (
    DynamicsParams,
    Equilibrium,
    EquilibriumResult,
    LivingDomain,
    Species,
)
from src.models.world import Pose
from src.utils.angles import circular_mean

# Eigenvalue floor for collapsed species
MIN_VARIANCE = 1e-12


def unit_ball_volume(n: int) -> float:
    """C_n: volume of the n-dimensional unit ball (C_2 = pi, C_3 = 4*pi/3)."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def living_domain(sp: Species) -> LivingDomain:
    """Ellipse of radii 2*sqrt(d_j) along the (x, y) covariance eigenvectors.

    Size is the ellipse area 2^n * C_n * prod(sqrt(d_j)) with n = 2.
    """
    samples = sp.samples
    if len(samples) < 2:
        raise DegenerateSpeciesError(f"species {sp.id} has {len(samples)} sample(s)")

    total = samples.weights.sum()
    w = samples.weights / total if total > 0 else np.full(len(samples), 1.0 / len(samples))
    xy = samples.poses[:, :2]
    mean = w @ xy
    dev = xy - mean
    q = (dev * w[:, None]).T @ dev
    q = (q + q.T) / 2.0

    variances, axes = np.linalg.eigh(q)
    variances = np.maximum(variances, MIN_VARIANCE)
    n = variances.shape[0]
    size = (2.0**n) * unit_ball_volume(n) * float(np.prod(np.sqrt(variances)))
    return LivingDomain(
        center=Pose(x=mean[0], y=mean[1], theta=circular_mean(samples.poses[:, 2], w)),
        axes=axes,
        variances=variances,
        radii=2.0 * np.sqrt(variances),
        size=size,
    )


def resources(area: float, params: DynamicsParams) -> float:
    """Resources held by a species whose living domain has the given size."""
    if area > params.epsilon:
        return params.delta * area
    return params.delta * params.epsilon


def carrying_capacity(fitness: float, total_resources: float) -> float:
    """K = exp(1 - fitness) * R."""
    return math.exp(1.0 - fitness) * total_resources


def competition_from_fitness(fitness: Sequence[float]) -> np.ndarray:
    """alpha[i, j] = fitness_j / fitness_i."""
    f = np.asarray(fitness, dtype=float)
    if np.any(f <= 0):
        raise NonPositiveInputError("competition coefficients need positive fitness")
    return f[None, :] / f[:, None]


def competition_matrix(species_list: Sequence[Species]) -> np.ndarray:
    return competition_from_fitness([sp.fitness for sp in species_list])


def growth_rates(
    populations: Sequence[float],
    capacities: Sequence[float],
    alpha: np.ndarray,
    r: float | Sequence[float],
) -> np.ndarray:
    """dN_i/dt = r_i N_i (1 - (N_i + sum_{j != i} alpha_ij N_j) / K_i)."""
    n = np.asarray(populations, dtype=float)
    k = np.asarray(capacities, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    rates = np.broadcast_to(np.asarray(r, dtype=float), n.shape)
    others = alpha @ n - np.diag(alpha) * n
    return rates * n * (1.0 - (n + others) / k)


def _compare(lhs: float, rhs: float) -> int:
    if math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=0.0):
        return 0
    return -1 if lhs < rhs else 1


def classify_equilibrium(k1: float, k2: float, alpha12: float, alpha21: float) -> EquilibriumResult:
    """Outcome of two-species competition from the isocline intercepts."""
    if min(k1, k2, alpha12, alpha21) <= 0:
        raise NonPositiveInputError("capacities and competition coefficients must be positive")
    first = _compare(k2 / alpha21, k1)
    second = _compare(k1 / alpha12, k2)
    if first == 0 or second == 0:
        return EquilibriumResult(outcome=Equilibrium.COEXIST, degenerate=True)
    if first < 0 and second > 0:
        return EquilibriumResult(outcome=Equilibrium.SPECIES1_WINS)
    if first > 0 and second < 0:
        return EquilibriumResult(outcome=Equilibrium.SPECIES2_WINS)
    if first < 0 and second < 0:
        return EquilibriumResult(outcome=Equilibrium.BISTABLE)
    return EquilibriumResult(outcome=Equilibrium.COEXIST)


def fixed_points(
    k1: float, k2: float, alpha12: float, alpha21: float, outcome: Equilibrium
) -> list[tuple[float, float]]:
    """Stable equilibria (N1, N2) of the regime; two candidates when bistable."""
    if outcome == Equilibrium.SPECIES1_WINS:
        return [(k1, 0.0)]
    if outcome == Equilibrium.SPECIES2_WINS:
        return [(0.0, k2)]
    if outcome == Equilibrium.BISTABLE:
        return [(k1, 0.0), (0.0, k2)]
    det = 1.0 - alpha12 * alpha21
    return [((k1 - alpha12 * k2) / det, (k2 - alpha21 * k1) / det)]


def integrate_competition(
    populations: Sequence[float],
    capacities: Sequence[float],
    alpha: np.ndarray,
    r: float | Sequence[float],
    dt: float = 0.1,
    steps: int = 10_000,
) -> np.ndarray:
    """Forward-Euler integration of the competition equations; populations stay >= 0."""
    n = np.asarray(populations, dtype=float).copy()
    for _ in range(steps):
        n = np.maximum(n + dt * growth_rates(n, capacities, alpha, r), 0.0)
    return n
