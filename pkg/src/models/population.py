"""Species, grid partitions and the parameters of the population dynamics."""

from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.models.samples import SampleSet
from src.models.world import Pose


class Equilibrium(str, Enum):
    """Outcome of two-species Lotka-Volterra competition."""

    SPECIES1_WINS = "species1_wins"
    SPECIES2_WINS = "species2_wins"
    BISTABLE = "bistable"
    COEXIST = "coexist"


class EquilibriumResult(BaseModel):
    """Classifier output; ``degenerate`` marks isocline ties."""

    outcome: Equilibrium
    degenerate: bool = False


class LivingDomain(BaseModel):
    """Ellipse of radii 2*sqrt(d_j) along the covariance eigenvectors e_j."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    center: Pose
    axes: np.ndarray  # columns are e_j
    variances: np.ndarray  # d_j
    radii: np.ndarray
    size: float = Field(ge=0)

    def contains(self, xy: np.ndarray) -> np.ndarray:
        """Boolean mask of points (m, 2) inside the ellipse."""
        xy = np.atleast_2d(xy)
        local = (xy - np.array([self.center.x, self.center.y])) @ self.axes
        radii = np.maximum(self.radii, 1e-12)
        return np.sum((local / radii) ** 2, axis=1) <= 1.0

    def boundary(self, n_points: int = 64) -> np.ndarray:
        """Points (n_points, 2) on the ellipse boundary."""
        phi = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
        unit = np.stack([np.cos(phi), np.sin(phi)], axis=1) * self.radii
        return unit @ self.axes.T + np.array([self.center.x, self.center.y])


class DynamicsParams(BaseModel):
    """Lotka-Volterra growth and environment-resource constants."""

    model_config = ConfigDict(frozen=True)

    r: float = Field(default=0.2, gt=0)
    delta: float = Field(default=80.0, gt=0)
    epsilon: float = Field(default=0.5, gt=0)
    n_dims: int = Field(default=2, ge=1)


class EvolutionParams(BaseModel):
    """Genetic operator probabilities and the mutation std (x, y, theta)."""

    model_config = ConfigDict(frozen=True)

    p_c: float = Field(default=0.85, ge=0, le=1)
    p_m: float = Field(default=0.15, ge=0, le=1)
    sigma_mut: tuple[float, float, float] = (0.1, 0.1, 0.05)

    @field_validator("sigma_mut")
    @classmethod
    def _non_negative(cls, value: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(v < 0 for v in value):
            raise ValueError("mutation stds must be non-negative")
        return value


class Species(BaseModel):
    """A cluster of samples standing for one pose hypothesis."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    id: int
    samples: SampleSet
    population: float = Field(ge=0)
    growth_rate: float = 0.0
    fitness: float = 1.0
    living_domain: Optional[LivingDomain] = None
    capacity: float = 0.0

    @property
    def size(self) -> int:
        return len(self.samples)

    def mean_xy(self) -> np.ndarray:
        w = self.samples.weights
        total = w.sum()
        if total <= 0:
            return self.samples.poses[:, :2].mean(axis=0)
        return (self.samples.poses[:, :2] * w[:, None]).sum(axis=0) / total


class GridPartition(BaseModel):
    """Equal-size (x, y) grid over the map with per-grid weights and labels.

    Arrays are shaped (nx, ny) and indexed [ix, iy]. ``labels`` holds zone ids
    1..n_zones, 0 meaning unassigned.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    nx: int = Field(gt=0)
    ny: int = Field(gt=0)
    x_min: float
    y_min: float
    cell_w: float = Field(gt=0)
    cell_h: float = Field(gt=0)
    weights: np.ndarray
    counts: np.ndarray
    in_v: np.ndarray
    threshold: float = 0.0
    labels: np.ndarray
    n_zones: int = 0

    def cell_of(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Grid indices of points (m, 2), clipped onto the grid."""
        xy = np.atleast_2d(xy)
        ix = np.floor((xy[:, 0] - self.x_min) / self.cell_w).astype(np.int64)
        iy = np.floor((xy[:, 1] - self.y_min) / self.cell_h).astype(np.int64)
        return np.clip(ix, 0, self.nx - 1), np.clip(iy, 0, self.ny - 1)

    @property
    def v_size(self) -> int:
        return int(self.in_v.sum())

    @property
    def v_mean_weight(self) -> float:
        if not self.in_v.any():
            return 0.0
        return float(self.weights[self.in_v].mean())
