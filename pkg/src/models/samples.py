"""Controls, observations, noise parameters and weighted sample sets."""

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.world import Pose
from src.utils.angles import normalize_angle


class OdometryControl(BaseModel):
    """Relative odometry displacement as rotate-translate-rotate."""

    model_config = ConfigDict(frozen=True)

    delta_trans: float = 0.0
    delta_rot1: float = 0.0
    delta_rot2: float = 0.0

    @field_validator("delta_rot1", "delta_rot2")
    @classmethod
    def _wrap(cls, value: float) -> float:
        return normalize_angle(value)

    @classmethod
    def between(cls, a: Pose, b: Pose) -> "OdometryControl":
        """Control that carries pose a exactly onto pose b."""
        dx, dy = b.x - a.x, b.y - a.y
        trans = math.hypot(dx, dy)
        rot1 = math.atan2(dy, dx) - a.theta if trans > 1e-12 else 0.0
        rot2 = b.theta - a.theta - rot1
        return cls(delta_trans=trans, delta_rot1=rot1, delta_rot2=rot2)

    def is_zero(self) -> bool:
        return self.delta_trans == 0.0 and self.delta_rot1 == 0.0 and self.delta_rot2 == 0.0


class ScanObservation(BaseModel):
    """One range scan: fixed bearings, measured ranges, sensor max range."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bearings: np.ndarray
    ranges: np.ndarray
    max_range: float = Field(gt=0)

    @field_validator("bearings", "ranges", mode="before")
    @classmethod
    def _as_array(cls, value) -> np.ndarray:
        arr = np.ascontiguousarray(np.asarray(value, dtype=float).reshape(-1))
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def _check_ranges(self) -> "ScanObservation":
        # length mismatch is reported by the likelihood, which owns that error
        if self.ranges.size and (self.ranges.min() < 0 or self.ranges.max() > self.max_range):
            raise ValueError("ranges must lie in [0, max_range]")
        return self

    @staticmethod
    def default_bearings(n_beams: int, fov: float = math.pi) -> np.ndarray:
        """Evenly spaced bearings over [-fov/2, fov/2]."""
        if n_beams == 1:
            return np.zeros(1)
        return np.linspace(-fov / 2.0, fov / 2.0, n_beams)


class NoiseParams(BaseModel):
    """Motion and beam-sensor noise."""

    model_config = ConfigDict(frozen=True)

    alpha_trans: float = Field(default=0.05, ge=0)
    alpha_rot: float = Field(default=0.05, ge=0)
    alpha_trans_rot: float = Field(default=0.01, ge=0)
    sigma_hit: float = Field(default=0.1, gt=0)
    z_hit: float = Field(default=0.9, ge=0)
    z_rand: float = Field(default=0.1, ge=0)

    @model_validator(mode="after")
    def _check_mixture(self) -> "NoiseParams":
        if abs(self.z_hit + self.z_rand - 1.0) > 1e-12:
            raise ValueError("z_hit + z_rand must equal 1")
        return self


class WeightedSample(BaseModel):
    """A pose hypothesis with its importance factor."""

    model_config = ConfigDict(frozen=True)

    pose: Pose
    weight: float = Field(ge=0)


class SampleSet(BaseModel):
    """Array-backed set of weighted samples.

    ``poses`` has shape (n, 3) holding (x, y, theta); ``weights`` has shape (n,).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    poses: np.ndarray
    weights: np.ndarray

    @field_validator("poses", mode="before")
    @classmethod
    def _as_poses(cls, value) -> np.ndarray:
        return np.array(value, dtype=float).reshape(-1, 3)

    @field_validator("weights", mode="before")
    @classmethod
    def _as_weights(cls, value) -> np.ndarray:
        return np.array(value, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def _check(self) -> "SampleSet":
        if self.poses.shape[0] != self.weights.shape[0]:
            raise ValueError(
                f"{self.poses.shape[0]} poses but {self.weights.shape[0]} weights"
            )
        if self.weights.size and self.weights.min() < 0:
            raise ValueError("weights must be non-negative")
        return self

    def __len__(self) -> int:
        return int(self.poses.shape[0])

    @classmethod
    def empty(cls) -> "SampleSet":
        return cls(poses=np.zeros((0, 3)), weights=np.zeros(0))

    @classmethod
    def from_samples(cls, samples: list[WeightedSample]) -> "SampleSet":
        return cls(
            poses=[s.pose.as_array() for s in samples] or np.zeros((0, 3)),
            weights=[s.weight for s in samples],
        )

    def sample(self, index: int) -> WeightedSample:
        return WeightedSample(pose=Pose.from_array(self.poses[index]), weight=self.weights[index])

    def to_samples(self) -> list[WeightedSample]:
        return [self.sample(i) for i in range(len(self))]

    def subset(self, index) -> "SampleSet":
        return SampleSet(poses=self.poses[index], weights=self.weights[index])

    def concat(self, other: "SampleSet") -> "SampleSet":
        return SampleSet(
            poses=np.vstack([self.poses, other.poses]),
            weights=np.concatenate([self.weights, other.weights]),
        )

    def copy(self) -> "SampleSet":
        return SampleSet(poses=self.poses.copy(), weights=self.weights.copy())

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def mean_weight(self) -> float:
        return float(self.weights.mean()) if len(self) else 0.0
