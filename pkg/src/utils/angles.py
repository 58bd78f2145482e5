"""Angle helpers for headings on the unit circle."""

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(angle):
    """Wrap an angle (scalar or array) into [-pi, pi); in-range angles pass unchanged."""
    angle = np.asarray(angle, dtype=float)
    wrapped = np.mod(angle + math.pi, TWO_PI) - math.pi
    # mod can round up to exactly 2*pi for tiny negative inputs
    wrapped = np.where(wrapped >= math.pi, wrapped - TWO_PI, wrapped)
    wrapped = np.where((angle >= -math.pi) & (angle < math.pi), angle, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def angle_diff(a, b):
    """Signed shortest rotation taking heading b to heading a."""
    return normalize_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def circular_mean(angles: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Weighted mean direction, computed by averaging unit vectors."""
    angles = np.asarray(angles, dtype=float)
    if weights is None:
        weights = np.ones_like(angles)
    s = float(np.sum(weights * np.sin(angles)))
    c = float(np.sum(weights * np.cos(angles)))
    return normalize_angle(math.atan2(s, c))


def blend_angles(a, b, xi):
    """Move from heading a towards b by fraction xi along the shorter arc."""
    return normalize_angle(np.asarray(a, dtype=float) + xi * angle_diff(b, a))
