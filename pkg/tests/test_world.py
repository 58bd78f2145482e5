"""Tests for map construction, raycasting and symmetry."""

import math

import numpy as np
import pytest

from src.models.errors import InvalidDimensionError, OriginOccupiedError
from src.models.world import Pose
from src.services.world import (
    build_landmark_room,
    build_symmetric_map,
    expected_scan,
    raycast,
    room_centers,
    rotate_pose,
    rotation_orders,
    sample_free_poses,
    symmetry_images,
)


class TestBuildSymmetricMap:
    def test_benchmark_dimensions(self):
        grid = build_symmetric_map(15.0, 2, 1.0, 0.1)
        assert grid.width_cells == 150
        assert grid.height_cells == 150
        assert grid.cells[0, :].all() and grid.cells[-1, :].all()
        assert grid.cells[:, 0].all() and grid.cells[:, -1].all()

    def test_invariant_under_quarter_turns(self, symmetric_map):
        assert rotation_orders(symmetric_map) == [0, 1, 2, 3]

    def test_room_centers_are_free(self, symmetric_map):
        for center in room_centers(10.0, 2):
            assert symmetric_map.is_free(center.x, center.y)

    def test_doors_connect_rooms(self, symmetric_map):
        # door gap centred on the wall between rooms 0 and 1
        assert symmetric_map.is_free(5.0, 2.5)
        assert symmetric_map.is_occupied(5.0, 0.5)

    @pytest.mark.parametrize(
        "side, rooms, door, res",
        [(0.0, 2, 1.0, 0.1), (10.0, 0, 1.0, 0.1), (10.0, 2, 6.0, 0.1), (10.0, 2, 1.0, -0.1)],
    )
    def test_invalid_dimensions(self, side, rooms, door, res):
        with pytest.raises(InvalidDimensionError):
            build_symmetric_map(side, rooms, door, res)

    def test_landmark_room_has_no_symmetry(self, landmark_map):
        assert rotation_orders(landmark_map) == [0]
        assert len(symmetry_images(Pose(x=4.0, y=4.0), landmark_map)) == 1


class TestRaycast:
    def test_distance_to_wall(self, open_room):
        # east wall occupies the last cell column, starting at x = 4.9
        assert raycast(open_room, Pose(x=2.5, y=2.5), 0.0, 10.0) == pytest.approx(2.4, abs=1e-9)

    def test_bearing_is_relative_to_heading(self, open_room):
        pose = Pose(x=2.5, y=2.0, theta=math.pi / 2)
        assert raycast(open_room, pose, 0.0, 10.0) == pytest.approx(2.9, abs=1e-9)

    def test_capped_at_max_range(self, open_room):
        assert raycast(open_room, Pose(x=2.5, y=2.5), 0.0, 1.0) == pytest.approx(1.0)

    def test_zero_max_range(self, open_room):
        assert raycast(open_room, Pose(x=2.5, y=2.5), 0.0, 0.0) == 0.0

    def test_origin_in_wall(self, open_room):
        with pytest.raises(OriginOccupiedError):
            raycast(open_room, Pose(x=0.05, y=2.5), 0.0, 10.0)

    def test_origin_off_map(self, open_room):
        with pytest.raises(OriginOccupiedError):
            raycast(open_room, Pose(x=-1.0, y=2.5), 0.0, 10.0)


class TestSymmetry:
    def test_scans_match_at_symmetric_poses(self, symmetric_map, bearings):
        pose = Pose(x=2.13, y=3.37, theta=0.3)
        reference = expected_scan(symmetric_map, pose, bearings, 10.0)
        for k in (1, 2, 3):
            image = rotate_pose(symmetric_map, pose, k)
            scan = expected_scan(symmetric_map, image, bearings, 10.0)
            np.testing.assert_allclose(scan, reference, atol=1e-6)

    def test_images_of_room_center_are_room_centers(self, symmetric_map):
        images = symmetry_images(Pose(x=2.5, y=2.5), symmetric_map)
        points = sorted((round(p.x, 9), round(p.y, 9)) for p in images)
        assert points == [(2.5, 2.5), (2.5, 7.5), (7.5, 2.5), (7.5, 7.5)]

    def test_rotation_turns_heading(self, symmetric_map):
        image = rotate_pose(symmetric_map, Pose(x=2.5, y=2.5, theta=0.0), 1)
        assert image.theta == pytest.approx(math.pi / 2)


def test_sample_free_poses(symmetric_map, rng):
    poses = sample_free_poses(symmetric_map, 2000, rng)
    assert poses.shape == (2000, 3)
    assert not symmetric_map.occupied_many(poses[:, 0], poses[:, 1]).any()
    assert poses[:, 2].min() >= -math.pi and poses[:, 2].max() < math.pi


def test_uniform_samples_split_evenly_between_rooms(symmetric_map, rng):
    poses = sample_free_poses(symmetric_map, 40_000, rng)
    room = (poses[:, 0] >= 5.0).astype(int) + 2 * (poses[:, 1] >= 5.0).astype(int)
    fractions = np.bincount(room, minlength=4) / poses.shape[0]
    np.testing.assert_allclose(fractions, 0.25, atol=0.02)


def test_landmark_room_builds(landmark_map):
    assert landmark_map == build_landmark_room(10.0, 0.1)
    assert landmark_map.is_free(4.5, 4.0)


class TestBenchmarkMap:
    @pytest.fixture(scope="class")
    def office(self):
        return build_symmetric_map(15.0, 2, 1.0, 0.1)

    def test_partition_wall_blocks_away_from_door(self, office):
        assert office.is_occupied(7.5, 2.0)
        assert office.is_free(7.5, 3.75)

    def test_raycast_agrees_with_fine_marching(self, office):
        origin = Pose(x=2.0, y=2.0, theta=math.pi / 4)
        steps = np.arange(0.0, 10.0, 0.001)
        xs = origin.x + steps * math.cos(origin.theta)
        ys = origin.y + steps * math.sin(origin.theta)
        hit = np.flatnonzero(office.occupied_many(xs, ys))
        marched = float(steps[hit[0]]) if hit.size else 10.0
        assert raycast(office, origin, 0.0, 10.0) == pytest.approx(marched, abs=office.resolution)
