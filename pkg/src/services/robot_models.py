"""Odometry motion model and bounded beam sensor model."""

import numpy as np

from src.models.errors import ShapeMismatchError
from src.models.samples import NoiseParams, OdometryControl, ScanObservation
from src.models.world import OccupancyGrid, Pose
from src.services.raycasting import scan_likelihoods
from src.utils.angles import normalize_angle


def _control_stds(u: OdometryControl, noise: NoiseParams) -> np.ndarray:
    """Std of (rot1, trans, rot2) noise; zero-magnitude components stay exact."""
    trans = abs(u.delta_trans)
    rot1 = abs(u.delta_rot1)
    rot2 = abs(u.delta_rot2)
    return np.array(
        [
            noise.alpha_rot * rot1 + noise.alpha_trans_rot * trans,
            noise.alpha_trans * trans + noise.alpha_trans_rot * (rot1 + rot2),
            noise.alpha_rot * rot2 + noise.alpha_trans_rot * trans,
        ]
    )


def _apply_controls(poses: np.ndarray, rot1, trans, rot2) -> np.ndarray:
    """Rigid rotate-translate-rotate composition for (n, 3) poses."""
    heading = poses[:, 2] + rot1
    out = np.empty_like(poses)
    out[:, 0] = poses[:, 0] + trans * np.cos(heading)
    out[:, 1] = poses[:, 1] + trans * np.sin(heading)
    out[:, 2] = normalize_angle(heading + rot2)
    return out


def perturb_controls(
    u: OdometryControl, noise: NoiseParams, rng: np.random.Generator, n: int
) -> np.ndarray:
    """n noisy copies of u as an (n, 3) array of (rot1, trans, rot2).

    Consumes exactly 3*n standard normals; row j uses normals [3j, 3j+3).
    """
    draws = rng.standard_normal((n, 3))
    base = np.array([u.delta_rot1, u.delta_trans, u.delta_rot2])
    return base + draws * _control_stds(u, noise)


def perturb_control(
    u: OdometryControl, noise: NoiseParams, rng: np.random.Generator
) -> OdometryControl:
    """One noisy reading of u under the motion noise law."""
    rot1, trans, rot2 = perturb_controls(u, noise, rng, 1)[0]
    return OdometryControl(delta_trans=trans, delta_rot1=rot1, delta_rot2=rot2)


def compose(pose: Pose, u: OdometryControl) -> Pose:
    """Noise-free application of u to pose."""
    out = _apply_controls(pose.as_array()[None, :], u.delta_rot1, u.delta_trans, u.delta_rot2)
    return Pose.from_array(out[0])


def sample_motion_many(
    poses: np.ndarray, u: OdometryControl, noise: NoiseParams, rng: np.random.Generator
) -> np.ndarray:
    """Draw x_t ~ p(x_t | x_{t-1}, u) independently for every row of poses."""
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    noisy = perturb_controls(u, noise, rng, poses.shape[0])
    return _apply_controls(poses, noisy[:, 0], noisy[:, 1], noisy[:, 2])


def sample_motion(
    x_prev: Pose, u: OdometryControl, noise: NoiseParams, rng: np.random.Generator
) -> Pose:
    """Draw one successor pose from the odometry motion model."""
    return Pose.from_array(sample_motion_many(x_prev.as_array()[None, :], u, noise, rng)[0])


def likelihood_many(
    y: ScanObservation, poses: np.ndarray, grid: OccupancyGrid, noise: NoiseParams
) -> np.ndarray:
    """Bounded likelihood p(y | x) in (0, 1] for every row of poses."""
    if y.bearings.shape[0] != y.ranges.shape[0]:
        raise ShapeMismatchError(
            f"{y.bearings.shape[0]} bearings but {y.ranges.shape[0]} ranges"
        )
    if y.bearings.shape[0] == 0:
        raise ShapeMismatchError("scan has no beams")
    poses = np.ascontiguousarray(np.asarray(poses, dtype=float).reshape(-1, 3))
    out = np.empty(poses.shape[0], dtype=float)
    scan_likelihoods(
        grid.cells,
        grid.origin_x,
        grid.origin_y,
        grid.resolution,
        poses,
        y.bearings,
        y.ranges,
        float(y.max_range),
        noise.sigma_hit,
        noise.z_hit,
        noise.z_rand,
        out,
    )
    return out


def likelihood(y: ScanObservation, x: Pose, grid: OccupancyGrid, noise: NoiseParams) -> float:
    """Bounded likelihood of scan y at pose x."""
    return float(likelihood_many(y, x.as_array()[None, :], grid, noise)[0])


def likelihood_floor(y: ScanObservation, noise: NoiseParams) -> float:
    """Value returned for poses inside walls (every beam at its floor)."""
    floor = noise.z_rand / y.max_range
    peak = noise.z_hit / (noise.sigma_hit * np.sqrt(2.0 * np.pi)) + floor
    return float(floor / peak)
