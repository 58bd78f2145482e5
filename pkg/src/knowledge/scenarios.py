"""Benchmark scenarios - where the robot starts and where it is sent."""

from pydantic import BaseModel

from src.models.world import Pose
from src.services.world import room_centers

# Distance kept between a goal corner and the room walls (m)
CORNER_INSET = 1.0


class Scenario(BaseModel):
    """One start/goal pair."""

    name: str
    start: Pose
    goal: Pose


def room_corner(side_m: float, rooms_per_side: int, room: int) -> Pose:
    """Inset corner of a room, on the side facing the outer walls."""
    size = side_m / rooms_per_side
    i, j = room % rooms_per_side, room // rooms_per_side
    x = i * size + CORNER_INSET if i == 0 else (i + 1) * size - CORNER_INSET
    y = j * size + CORNER_INSET if j == 0 else (j + 1) * size - CORNER_INSET
    return Pose(x=x, y=y)


def benchmark_scenarios(side_m: float, rooms_per_side: int) -> list[Scenario]:
    """Start at the centre of room i, go to a corner of room i + 1 (cyclic)."""
    centers = room_centers(side_m, rooms_per_side)
    n_rooms = len(centers)
    if n_rooms == 1:
        return [Scenario(name="room0-corner", start=centers[0], goal=room_corner(side_m, 1, 0))]
    return [
        Scenario(
            name=f"room{i}-to-room{(i + 1) % n_rooms}",
            start=centers[i],
            goal=room_corner(side_m, rooms_per_side, (i + 1) % n_rooms),
        )
        for i in range(n_rooms)
    ]


def landmark_scenario(side_m: float) -> Scenario:
    """Route across the landmark room, clear of its obstacles."""
    return Scenario(
        name="landmark",
        start=Pose(x=0.45 * side_m, y=0.40 * side_m),
        goal=Pose(x=0.80 * side_m, y=0.75 * side_m),
    )
