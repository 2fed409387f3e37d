"""Shared vector, yaw-rotation and grid-index arithmetic.

Points are plain ``numpy`` arrays of shape (3,), world frame, meters.
Yaw follows the camera convention used throughout the planner: the
world-to-body rotation about +z, with the body x-axis looking forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=float)


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    w = math.remainder(theta, TWO_PI)
    if w <= -math.pi:
        w = math.pi
    return w


def angle_diff(a: float, b: float) -> float:
    """a - b wrapped to (-pi, pi], safe across the +-pi seam."""
    return math.atan2(math.sin(a - b), math.cos(a - b))


def yaw_rotation(theta: float) -> np.ndarray:
    """World-to-body rotation for yaw ``theta``.

    Row 1 is the body forward axis, row 2 the body left axis; z is shared.
    """
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def yaw_rotation_deriv(theta: float) -> np.ndarray:
    """d/dtheta of :func:`yaw_rotation`."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[-s, c, 0.0], [-c, -s, 0.0], [0.0, 0.0, 0.0]])


def horizontal_projection(v: np.ndarray) -> np.ndarray:
    """Zero the z component, keeping x and y."""
    return np.array([v[0], v[1], 0.0])


@dataclass(frozen=True)
class YawPose:
    """A position plus yaw; yaw is normalized on construction."""

    position: np.ndarray
    yaw: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.position)) or not math.isfinite(self.yaw):
            raise ValueError("pose must be finite")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    def body_frame(self, point: np.ndarray) -> np.ndarray:
        """World point expressed in this pose's body frame."""
        return yaw_rotation(self.yaw) @ (np.asarray(point, dtype=float) - self.position)


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned voxel grid: ``origin`` is the low corner of voxel (0,0,0)."""

    origin: np.ndarray
    resolution: float
    dims: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if any(d < 1 for d in self.dims):
            raise ValueError("dims must be >= 1")

    def world_to_grid(self, p: np.ndarray) -> np.ndarray:
        """Fractional voxel coordinate of ``p``; no clamping."""
        return (np.asarray(p, dtype=float) - self.origin) / self.resolution

    def voxel_center(self, index) -> np.ndarray:
        return self.origin + (np.asarray(index, dtype=float) + 0.5) * self.resolution

    def contains_index(self, i: int, j: int, k: int) -> bool:
        nx, ny, nz = self.dims
        return 0 <= i < nx and 0 <= j < ny and 0 <= k < nz

    @property
    def max_corner(self) -> np.ndarray:
        return self.origin + self.resolution * np.asarray(self.dims, dtype=float)


def world_to_grid(spec: GridSpec, p: np.ndarray) -> np.ndarray:
    return spec.world_to_grid(p)
