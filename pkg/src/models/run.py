"""Filter state, log records, run metrics and the cost model."""

from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.models.population import Species
from src.models.samples import OdometryControl, ScanObservation
from src.models.world import OccupancyGrid, Pose


class Variant(str, Enum):
    """Filter variants."""

    MCL = "mcl"
    GMCL = "gmcl"
    CEAMCL = "ceamcl"


class StepCounters(BaseModel):
    """Per-step work counters used to fit the cost model."""

    likelihood_evals: int = 0
    motion_draws: int = 0
    resampled: int = 0
    resample_seconds: float = 0.0
    split_merge_seconds: float = 0.0

    def reset(self) -> None:
        self.likelihood_evals = 0
        self.motion_draws = 0
        self.resampled = 0
        self.resample_seconds = 0.0
        self.split_merge_seconds = 0.0


class EvolutionStats(BaseModel):
    """Counts of fired genetic operators."""

    crossovers: int = 0
    mutations: int = 0
    evaluations: int = 0


class FilterState(BaseModel):
    """Everything a filter step owns between time steps."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    variant: Variant
    grid: OccupancyGrid
    species: list[Species]
    t: int = 0
    total_resources: float = 0.0
    settings: Any  # src.config.Settings
    rng: np.random.Generator
    next_species_id: int = 1
    estimate: Optional[Pose] = None
    covariance: Optional[np.ndarray] = None
    best_species_id: Optional[int] = None
    counters: StepCounters = Field(default_factory=StepCounters)
    evolution: EvolutionStats = Field(default_factory=EvolutionStats)

    @property
    def total_samples(self) -> int:
        return sum(sp.size for sp in self.species)

    def take_species_id(self) -> int:
        sid = self.next_species_id
        self.next_species_id += 1
        return sid


class CostModel(BaseModel):
    """Per-sample cost constants (seconds) of one filter iteration."""

    T_f: float = Field(ge=0)
    T_s: float = Field(ge=0)
    T_r: float = Field(ge=0)
    T_m: float = Field(default=0.0, ge=0)
    p: float = Field(default=1.0, ge=0)


class CostPrediction(BaseModel):
    """CEAMCL/MCL per-iteration time ratio: full form and the T_f-dominated rule."""

    exact: float
    approx: float

    @property
    def relative_gap(self) -> float:
        return abs(self.exact - self.approx) / self.exact if self.exact else 0.0


class StepRecord(BaseModel):
    """One log entry: the control that led here, the scan taken here, ground truth."""

    t: int = Field(ge=0)
    control: OdometryControl
    scan: ScanObservation
    truth: Pose


class RunMetrics(BaseModel):
    """Outcome of one filter run over one log."""

    variant: Variant
    seed: int
    log_index: int = 0
    errors: list[float] = Field(default_factory=list)
    sample_totals: list[int] = Field(default_factory=list)
    resources: list[float] = Field(default_factory=list)
    species_counts: list[int] = Field(default_factory=list)
    hypotheses: list[int] = Field(default_factory=list)
    wall_times: list[float] = Field(default_factory=list)
    converged_step: Optional[int] = None
    expired_step: Optional[int] = None
    ghost_expired_step: Optional[int] = None
    success: bool = False
    diverged: bool = False

    def deterministic_view(self) -> dict:
        """Everything except wall-clock fields."""
        return self.model_dump(exclude={"wall_times"})


class CostReport(BaseModel):
    """Measured per-iteration timings and the fitted cost model."""

    series: dict[str, list[float]]
    sample_series: dict[str, list[int]]
    model: Optional[CostModel] = None
    measured_ratio: Optional[float] = None
    predicted: Optional[CostPrediction] = None
