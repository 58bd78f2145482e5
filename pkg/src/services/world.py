"""Benchmark map construction, raycasting and map symmetry."""

import logging
import math

import numpy as np

from src.models.errors import InvalidDimensionError, OriginOccupiedError
from src.models.world import OccupancyGrid, Pose
from src.services.raycasting import cast_rays
from src.utils.angles import normalize_angle

logger = logging.getLogger(__name__)

# Tolerance, in cell units, for walls lying on cell boundaries
_EPS = 1e-6


def _span(lo: float, hi: float, n: int) -> tuple[int, int]:
    """Cells (inclusive range) whose closed extent [i, i+1] meets [lo, hi]."""
    first = max(math.ceil(lo - 1.0 - _EPS), 0)
    last = min(math.floor(hi + _EPS), n - 1)
    return first, last


def _fill_box(cells: np.ndarray, x0: float, y0: float, x1: float, y1: float) -> None:
    """Rasterize an axis-aligned segment or box given in cell units (conservative)."""
    nx, ny = cells.shape
    ix0, ix1 = _span(min(x0, x1), max(x0, x1), nx)
    iy0, iy1 = _span(min(y0, y1), max(y0, y1), ny)
    if ix0 <= ix1 and iy0 <= iy1:
        cells[ix0 : ix1 + 1, iy0 : iy1 + 1] = True


def _closed_square(side_m: float, resolution: float) -> tuple[np.ndarray, int]:
    n = int(round(side_m / resolution))
    if n < 3:
        raise InvalidDimensionError(f"map of {side_m} m at {resolution} m/cell is too small")
    cells = np.zeros((n, n), dtype=bool)
    for edge in (0.0, float(n)):
        _fill_box(cells, edge, 0.0, edge, float(n))
        _fill_box(cells, 0.0, edge, float(n), edge)
    return cells, n


def build_symmetric_map(
    side_m: float,
    rooms_per_side: int,
    door_width_m: float,
    resolution: float,
) -> OccupancyGrid:
    """Closed square hall split into rooms_per_side**2 identical square rooms.

    Every internal wall segment between two neighbouring rooms has a door gap
    centred on it, so the map is invariant under 90 degree rotations about its
    centre.
    """
    if side_m <= 0 or resolution <= 0:
        raise InvalidDimensionError("side and resolution must be positive")
    if rooms_per_side < 1:
        raise InvalidDimensionError("rooms_per_side must be at least 1")
    if door_width_m < 0 or door_width_m >= side_m / rooms_per_side:
        raise InvalidDimensionError("door must be narrower than a room")

    cells, n = _closed_square(side_m, resolution)
    room = n / rooms_per_side
    half_door = door_width_m / resolution / 2.0

    for k in range(1, rooms_per_side):
        wall = k * room
        for j in range(rooms_per_side):
            lo, hi = j * room, (j + 1) * room
            mid = (lo + hi) / 2.0
            # vertical wall x = wall, then the horizontal wall y = wall
            _fill_box(cells, wall, lo, wall, mid - half_door)
            _fill_box(cells, wall, mid + half_door, wall, hi)
            _fill_box(cells, lo, wall, mid - half_door, wall)
            _fill_box(cells, mid + half_door, wall, hi, wall)

    logger.debug(f"Built {n}x{n} symmetric map with {rooms_per_side**2} rooms")
    return OccupancyGrid(width_cells=n, height_cells=n, resolution=resolution, cells=cells)


def build_landmark_room(side_m: float, resolution: float) -> OccupancyGrid:
    """Single closed room with an L-shaped obstacle and a pillar; no symmetries."""
    if side_m <= 0 or resolution <= 0:
        raise InvalidDimensionError("side and resolution must be positive")
    cells, n = _closed_square(side_m, resolution)
    _fill_box(cells, 0.15 * n, 0.60 * n, 0.40 * n, 0.65 * n)
    _fill_box(cells, 0.15 * n, 0.65 * n, 0.20 * n, 0.85 * n)
    _fill_box(cells, 0.70 * n, 0.20 * n, 0.76 * n, 0.26 * n)
    return OccupancyGrid(width_cells=n, height_cells=n, resolution=resolution, cells=cells)


def room_centers(side_m: float, rooms_per_side: int) -> list[Pose]:
    """Geometric centres of the rooms, row by row."""
    room = side_m / rooms_per_side
    return [
        Pose(x=(i + 0.5) * room, y=(j + 0.5) * room)
        for j in range(rooms_per_side)
        for i in range(rooms_per_side)
    ]


def raycast_many(
    grid: OccupancyGrid,
    xs: np.ndarray,
    ys: np.ndarray,
    angles: np.ndarray,
    max_range: float,
) -> np.ndarray:
    """Ranges along absolute ray angles; -1 where the start cell is occupied."""
    xs = np.ascontiguousarray(xs, dtype=float)
    ys = np.ascontiguousarray(ys, dtype=float)
    angles = np.ascontiguousarray(angles, dtype=float)
    out = np.empty(xs.shape[0], dtype=float)
    cast_rays(
        grid.cells,
        grid.origin_x,
        grid.origin_y,
        grid.resolution,
        xs,
        ys,
        angles,
        float(max_range),
        out,
    )
    return out


def raycast(grid: OccupancyGrid, origin: Pose, bearing: float, max_range: float) -> float:
    """Distance from origin along origin.theta + bearing to the first occupied cell."""
    if grid.is_occupied(origin.x, origin.y):
        raise OriginOccupiedError(f"ray origin ({origin.x:.3f}, {origin.y:.3f}) is not free")
    if max_range <= 0:
        return 0.0
    value = raycast_many(
        grid,
        np.array([origin.x]),
        np.array([origin.y]),
        np.array([origin.theta + bearing]),
        max_range,
    )[0]
    return float(value)


def expected_scan(
    grid: OccupancyGrid, pose: Pose, bearings: np.ndarray, max_range: float
) -> np.ndarray:
    """Noise-free scan at a free pose."""
    if grid.is_occupied(pose.x, pose.y):
        raise OriginOccupiedError(f"scan origin ({pose.x:.3f}, {pose.y:.3f}) is not free")
    bearings = np.asarray(bearings, dtype=float)
    n = bearings.shape[0]
    return raycast_many(
        grid,
        np.full(n, pose.x),
        np.full(n, pose.y),
        pose.theta + bearings,
        max_range,
    )


def free_cells(grid: OccupancyGrid) -> np.ndarray:
    """(m, 2) array of free cell indices."""
    return np.argwhere(~grid.cells)


def sample_free_poses(grid: OccupancyGrid, n: int, rng: np.random.Generator) -> np.ndarray:
    """n poses uniform over free space x [-pi, pi)."""
    cells = free_cells(grid)
    pick = cells[rng.integers(0, cells.shape[0], size=n)]
    offsets = rng.random((n, 2))
    poses = np.empty((n, 3))
    poses[:, 0] = grid.origin_x + (pick[:, 0] + offsets[:, 0]) * grid.resolution
    poses[:, 1] = grid.origin_y + (pick[:, 1] + offsets[:, 1]) * grid.resolution
    poses[:, 2] = rng.uniform(-math.pi, math.pi, size=n)
    return poses


def _rotate_cells(cells: np.ndarray) -> np.ndarray:
    """Cells rotated by +90 degrees about the grid centre (square grids)."""
    return cells.T[::-1, :]


def rotation_orders(grid: OccupancyGrid) -> list[int]:
    """Quarter-turn counts k (0..3) that leave the map unchanged."""
    if grid.width_cells != grid.height_cells:
        return [0]
    orders = [0]
    rotated = grid.cells
    for k in range(1, 4):
        rotated = _rotate_cells(rotated)
        if np.array_equal(rotated, grid.cells):
            orders.append(k)
    return orders


def rotate_pose(grid: OccupancyGrid, pose: Pose, quarter_turns: int) -> Pose:
    """Pose rotated by quarter_turns * 90 degrees about the map centre."""
    cx = grid.origin_x + grid.width_m / 2.0
    cy = grid.origin_y + grid.height_m / 2.0
    x, y = pose.x - cx, pose.y - cy
    for _ in range(quarter_turns % 4):
        x, y = -y, x
    return Pose(x=cx + x, y=cy + y, theta=normalize_angle(pose.theta + quarter_turns * math.pi / 2))


def symmetry_images(pose: Pose, grid: OccupancyGrid) -> list[Pose]:
    """Poses indistinguishable from ``pose`` under the map's rotational symmetry."""
    return [rotate_pose(grid, pose, k) for k in rotation_orders(grid)]
