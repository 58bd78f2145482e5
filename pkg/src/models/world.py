"""World data models: robot pose and occupancy grid."""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.utils.angles import normalize_angle


class Pose(BaseModel):
    """Planar robot pose; theta is kept in [-pi, pi)."""

    model_config = ConfigDict(frozen=True)

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    @field_validator("theta")
    @classmethod
    def _wrap_theta(cls, value: float) -> float:
        return normalize_angle(value)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @classmethod
    def from_array(cls, values) -> "Pose":
        return cls(x=float(values[0]), y=float(values[1]), theta=float(values[2]))

    def distance_to(self, other: "Pose") -> float:
        """Euclidean (x, y) distance."""
        return float(np.hypot(self.x - other.x, self.y - other.y))


class OccupancyGrid(BaseModel):
    """Immutable 2D occupancy map.

    ``cells`` is a boolean array of shape (width_cells, height_cells) indexed
    ``[ix, iy]``; ``flat_cells`` gives the row-major (iy-major) vector view.
    Cell (ix, iy) covers ``[origin_x + ix*res, origin_x + (ix+1)*res)`` in x.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    width_cells: int = Field(gt=0)
    height_cells: int = Field(gt=0)
    resolution: float = Field(gt=0)
    origin_x: float = 0.0
    origin_y: float = 0.0
    cells: np.ndarray

    @field_validator("cells", mode="before")
    @classmethod
    def _as_bool_array(cls, value) -> np.ndarray:
        cells = np.ascontiguousarray(np.asarray(value, dtype=bool))
        cells.flags.writeable = False
        return cells

    @model_validator(mode="after")
    def _check_shape(self) -> "OccupancyGrid":
        if self.cells.shape != (self.width_cells, self.height_cells):
            raise ValueError(
                f"cells shape {self.cells.shape} != ({self.width_cells}, {self.height_cells})"
            )
        return self

    @property
    def flat_cells(self) -> np.ndarray:
        """Row-major vector of length width*height (row iy, column ix)."""
        return self.cells.T.reshape(-1)

    @property
    def width_m(self) -> float:
        return self.width_cells * self.resolution

    @property
    def height_m(self) -> float:
        return self.height_cells * self.resolution

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max) in meters."""
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.width_m,
            self.origin_y + self.height_m,
        )

    def world_to_cell(self, x: float, y: float) -> Optional[tuple[int, int]]:
        """Cell index containing (x, y), or None when off the map."""
        ix = int(np.floor((x - self.origin_x) / self.resolution))
        iy = int(np.floor((y - self.origin_y) / self.resolution))
        if 0 <= ix < self.width_cells and 0 <= iy < self.height_cells:
            return ix, iy
        return None

    def is_occupied(self, x: float, y: float) -> bool:
        """Occupancy at a world point; off-map points count as occupied."""
        cell = self.world_to_cell(x, y)
        if cell is None:
            return True
        return bool(self.cells[cell])

    def is_free(self, x: float, y: float) -> bool:
        return not self.is_occupied(x, y)

    def occupied_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized is_occupied."""
        ix = np.floor((np.asarray(xs) - self.origin_x) / self.resolution).astype(np.int64)
        iy = np.floor((np.asarray(ys) - self.origin_y) / self.resolution).astype(np.int64)
        inside = (ix >= 0) & (ix < self.width_cells) & (iy >= 0) & (iy < self.height_cells)
        result = np.ones(ix.shape, dtype=bool)
        result[inside] = self.cells[ix[inside], iy[inside]]
        return result

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.origin_x + (ix + 0.5) * self.resolution,
            self.origin_y + (iy + 0.5) * self.resolution,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.width_cells == other.width_cells
            and self.height_cells == other.height_cells
            and self.resolution == other.resolution
            and self.origin_x == other.origin_x
            and self.origin_y == other.origin_y
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None
