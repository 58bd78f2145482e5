"""Compiled grid-traversal kernels for the simulated range finder.

Rays are walked cell by cell (Amanatides-Woo traversal), so every cell a ray
passes through is inspected. Distances are measured in cell units inside the
kernels and converted to meters by the callers.
"""

import math

import numpy as np
from numba import njit

SQRT_2PI = math.sqrt(2.0 * math.pi)


@njit(cache=True)
def _traverse(cells, gx, gy, dx, dy, max_cells):
    """Cell-unit distance from (gx, gy) along unit (dx, dy) to the first occupied cell.

    Leaving the grid counts as a hit on its boundary. Returns -1.0 when the
    start cell itself is occupied or off the grid.
    """
    nx, ny = cells.shape
    ix = int(math.floor(gx))
    iy = int(math.floor(gy))
    if ix < 0 or ix >= nx or iy < 0 or iy >= ny or cells[ix, iy]:
        return -1.0
    if max_cells <= 0.0:
        return 0.0

    inf = math.inf
    if dx > 0.0:
        step_x = 1
        t_max_x = (ix + 1.0 - gx) / dx
        t_delta_x = 1.0 / dx
    elif dx < 0.0:
        step_x = -1
        t_max_x = (gx - ix) / -dx
        t_delta_x = -1.0 / dx
    else:
        step_x = 0
        t_max_x = inf
        t_delta_x = inf
    if dy > 0.0:
        step_y = 1
        t_max_y = (iy + 1.0 - gy) / dy
        t_delta_y = 1.0 / dy
    elif dy < 0.0:
        step_y = -1
        t_max_y = (gy - iy) / -dy
        t_delta_y = -1.0 / dy
    else:
        step_y = 0
        t_max_y = inf
        t_delta_y = inf

    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            ix += step_x
            t_max_x += t_delta_x
        else:
            t = t_max_y
            iy += step_y
            t_max_y += t_delta_y
        if t >= max_cells:
            return max_cells
        if ix < 0 or ix >= nx or iy < 0 or iy >= ny:
            return t
        if cells[ix, iy]:
            return t


@njit(cache=True)
def cast_rays(cells, origin_x, origin_y, resolution, xs, ys, angles, max_range, out):
    """Fill ``out[k]`` with the range (m) of ray k; -1 marks an occupied start."""
    max_cells = max_range / resolution
    for k in range(xs.shape[0]):
        gx = (xs[k] - origin_x) / resolution
        gy = (ys[k] - origin_y) / resolution
        t = _traverse(cells, gx, gy, math.cos(angles[k]), math.sin(angles[k]), max_cells)
        if t < 0.0:
            out[k] = -1.0
        else:
            out[k] = min(t * resolution, max_range)


@njit(cache=True)
def scan_likelihoods(
    cells,
    origin_x,
    origin_y,
    resolution,
    poses,
    bearings,
    ranges,
    max_range,
    sigma_hit,
    z_hit,
    z_rand,
    out,
):
    """Bounded beam-model likelihood of one scan for every pose in ``poses``.

    Per beam: z_hit * N(measured - expected; sigma_hit) + z_rand / max_range.
    The geometric mean over beams is divided by the per-beam peak so that the
    result lies in (0, 1]. Poses in occupied or off-map cells get the floor.
    """
    max_cells = max_range / resolution
    floor = z_rand / max_range
    norm = 1.0 / (sigma_hit * SQRT_2PI)
    peak = z_hit * norm + floor
    n_beams = bearings.shape[0]
    log_floor = math.log(floor) if floor > 0.0 else -745.0
    for i in range(poses.shape[0]):
        x = poses[i, 0]
        y = poses[i, 1]
        theta = poses[i, 2]
        gx = (x - origin_x) / resolution
        gy = (y - origin_y) / resolution
        ix = int(math.floor(gx))
        iy = int(math.floor(gy))
        if ix < 0 or ix >= cells.shape[0] or iy < 0 or iy >= cells.shape[1] or cells[ix, iy]:
            out[i] = math.exp(log_floor) / peak
            continue
        acc = 0.0
        for b in range(n_beams):
            angle = theta + bearings[b]
            t = _traverse(cells, gx, gy, math.cos(angle), math.sin(angle), max_cells)
            expected = min(t * resolution, max_range)
            err = ranges[b] - expected
            p = z_hit * norm * math.exp(-0.5 * (err / sigma_hit) ** 2) + floor
            if p > 0.0:
                acc += math.log(p)
            else:
                acc += -745.0
        value = math.exp(acc / n_beams) / peak
        if value > 1.0:
            value = 1.0
        out[i] = value
