"""Weighted-sample machinery shared by all filter variants."""

import numpy as np

from src.models.errors import ZeroWeightError
from src.models.samples import NoiseParams, OdometryControl, SampleSet, ScanObservation
from src.models.world import OccupancyGrid, Pose
from src.services.robot_models import likelihood_many, sample_motion_many
from src.utils.angles import angle_diff, circular_mean


def normalize(samples: SampleSet) -> SampleSet:
    """Scale weights to sum to one."""
    total = samples.weights.sum()
    if not total > 0:
        raise ZeroWeightError("cannot normalize a set whose weights sum to zero")
    return SampleSet(poses=samples.poses, weights=samples.weights / total)


def systematic_indices(weights: np.ndarray, n_out: int, rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling: one uniform draw, n_out evenly spaced pointers."""
    cumulative = np.cumsum(weights)
    cumulative /= cumulative[-1]
    positions = (rng.random() + np.arange(n_out)) / n_out
    indices = np.searchsorted(cumulative, positions, side="right")
    return np.minimum(indices, weights.shape[0] - 1)


def resample(samples: SampleSet, n_out: int, rng: np.random.Generator) -> SampleSet:
    """Draw n_out samples proportionally to weight; output weights are 1/n_out."""
    if n_out <= 0:
        raise ValueError("n_out must be a positive integer")
    if not samples.weights.sum() > 0:
        raise ZeroWeightError("cannot resample a set whose weights sum to zero")
    indices = systematic_indices(samples.weights, n_out, rng)
    return SampleSet(poses=samples.poses[indices], weights=np.full(n_out, 1.0 / n_out))


def importance_step(
    samples: SampleSet,
    u: OdometryControl,
    y: ScanObservation,
    grid: OccupancyGrid,
    noise: NoiseParams,
    rng: np.random.Generator,
) -> SampleSet:
    """Move every sample through the motion model and weight it by p(y | x).

    Weights are the raw bounded likelihoods; they are not normalized.
    """
    moved = sample_motion_many(samples.poses, u, noise, rng)
    return SampleSet(poses=moved, weights=likelihood_many(y, moved, grid, noise))


def summarize(samples: SampleSet) -> tuple[Pose, np.ndarray]:
    """Weighted mean pose (circular mean heading) and 3x3 weighted covariance."""
    w = samples.weights / samples.weights.sum()
    poses = samples.poses
    mean_xy = w @ poses[:, :2]
    mean_theta = circular_mean(poses[:, 2], w)
    deviations = np.empty_like(poses)
    deviations[:, :2] = poses[:, :2] - mean_xy
    deviations[:, 2] = angle_diff(poses[:, 2], mean_theta)
    covariance = (deviations * w[:, None]).T @ deviations
    covariance = (covariance + covariance.T) / 2.0
    return Pose(x=mean_xy[0], y=mean_xy[1], theta=mean_theta), covariance


def effective_sample_size(samples: SampleSet) -> float:
    """Kish effective sample size of the normalized weights."""
    w = samples.weights / samples.weights.sum()
    return float(1.0 / np.sum(w**2))
