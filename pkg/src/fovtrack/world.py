"""Voxelized static environment with raycast line-of-sight queries."""

from __future__ import annotations

import math

import numpy as np

from fovtrack import kernels
from fovtrack.fields import FovParams
from fovtrack.geometry import GridSpec, YawPose, yaw_rotation


class OccupancyWorld:
    """Boolean voxel map over a :class:`GridSpec`.

    Mutation is single-writer; hand a :meth:`snapshot` to planners. Space
    outside the grid is treated as free by every query.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.occupancy = np.zeros(spec.dims, dtype=np.uint8)
        self._points_cache: np.ndarray | None = None
        self._frozen = False

    # -- construction -----------------------------------------------------

    def _writable(self):
        if self._frozen:
            raise RuntimeError("snapshot worlds are immutable")
        self._points_cache = None

    def insert_box(self, min_corner, size) -> None:
        """Occupy all voxels whose centers fall inside the axis-aligned box."""
        size = np.asarray(size, dtype=float)
        if np.any(size <= 0):
            raise ValueError("box dimensions must be positive")
        self._writable()
        lo = np.asarray(min_corner, dtype=float)
        hi = lo + size
        res = self.spec.resolution
        i0 = np.maximum(np.floor((lo - self.spec.origin) / res - 0.5 + 1e-12), 0).astype(int)
        i1 = np.minimum(
            np.ceil((hi - self.spec.origin) / res - 0.5 - 1e-12),
            np.asarray(self.spec.dims) - 1,
        ).astype(int)
        if np.any(i1 < i0):
            return
        for ax, (a, b) in enumerate(zip(i0, i1)):
            centers = self.spec.origin[ax] + (np.arange(a, b + 1) + 0.5) * res
            keep = (centers >= lo[ax]) & (centers <= hi[ax])
            if not keep.all():
                idx = np.arange(a, b + 1)[keep]
                if len(idx) == 0:
                    return
                i0[ax], i1[ax] = idx[0], idx[-1]
        self.occupancy[i0[0]:i1[0] + 1, i0[1]:i1[1] + 1, i0[2]:i1[2] + 1] = 1

    def insert_cylinder(self, center_xy, radius: float, z0: float, z1: float) -> None:
        """Occupy voxels inside a vertical cylinder."""
        if radius <= 0 or z1 <= z0:
            raise ValueError("cylinder dimensions must be positive")
        self._writable()
        res = self.spec.resolution
        cx, cy = float(center_xy[0]), float(center_xy[1])
        nx, ny, nz = self.spec.dims
        xs = self.spec.origin[0] + (np.arange(nx) + 0.5) * res
        ys = self.spec.origin[1] + (np.arange(ny) + 0.5) * res
        zs = self.spec.origin[2] + (np.arange(nz) + 0.5) * res
        mask_xy = (xs[:, None] - cx) ** 2 + (ys[None, :] - cy) ** 2 <= radius * radius
        mask_z = (zs >= z0) & (zs <= z1)
        self.occupancy[mask_xy[:, :, None] & mask_z[None, None, :]] = 1

    def insert_points(self, points) -> None:
        """Occupy the voxels containing each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            return
        self._writable()
        idx = np.floor((pts - self.spec.origin) / self.spec.resolution).astype(int)
        ok = np.all((idx >= 0) & (idx < np.asarray(self.spec.dims)), axis=1)
        idx = idx[ok]
        self.occupancy[idx[:, 0], idx[:, 1], idx[:, 2]] = 1

    def copy(self) -> "OccupancyWorld":
        w = OccupancyWorld(self.spec)
        w.occupancy = self.occupancy.copy()
        return w

    def snapshot(self) -> "OccupancyWorld":
        """Frozen copy, safe to share across threads."""
        w = self.copy()
        w.occupancy.setflags(write=False)
        w._frozen = True
        return w

    # -- queries -----------------------------------------------------------

    def obstacle_points(self) -> np.ndarray:
        """Centers of all occupied voxels, cached until the next mutation."""
        if self._points_cache is None:
            idx = np.argwhere(self.occupancy)
            self._points_cache = self.spec.origin + (idx + 0.5) * self.spec.resolution
            self._points_cache.setflags(write=False)
        return self._points_cache

    def line_of_sight(self, a, b) -> bool:
        """True iff the segment a->b intersects no occupied voxel (exact walk)."""
        return bool(
            kernels.raycast_free(self.occupancy, self.spec.origin, self.spec.resolution, a, b)
        )

    def obstacle_points_near_fov(
        self, pose: YawPose, fov: FovParams, margin: float = 1.25
    ) -> np.ndarray:
        """Occupied voxel centers inside a sphere that conservatively covers
        the viewing pyramid at ``pose``.

        The sphere sits at the pyramid's mid-axis point with radius
        ``depth * margin``; exact membership is decided later by the field
        (zero outside the pyramid), so over-inclusion is harmless.
        """
        forward = yaw_rotation(pose.yaw).T @ np.array([0.5 * fov.depth, 0.0, 0.0])
        center = pose.position + forward
        pts = self.obstacle_points()
        if pts.shape[0] == 0:
            return pts.reshape(0, 3)
        rel = pts - center
        keep = np.einsum("ij,ij->i", rel, rel) <= (fov.depth * margin) ** 2
        return pts[keep]


def make_world(origin, size, resolution: float) -> OccupancyWorld:
    """Empty world covering an axis-aligned box of ``size`` meters."""
    origin = np.asarray(origin, dtype=float)
    size = np.asarray(size, dtype=float)
    dims = tuple(int(math.ceil(s / resolution)) for s in size)
    return OccupancyWorld(GridSpec(origin, resolution, dims))
