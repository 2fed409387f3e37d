"""Precomputed scalar distance fields.

Two fields are built here, both by an exact distance transform over a
voxelized boundary set and both immutable after construction:

* the view-pyramid field: distance to the nearest pyramid boundary for
  points inside the camera's viewing pyramid, zero outside, queried in the
  tracker's body frame during optimization;
* the vehicle collision field: penetration depth inside the inflated
  vehicle shape, zero outside, queried with obstacle points taken to the
  vehicle frame.

Values and gradients are stored as float32 voxel data (the on-disk payload
format), so a save/load round trip is bit exact.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from fovtrack import kernels
from fovtrack.geometry import GridSpec, yaw_rotation

MAGIC = b"FESD"
VERSION = 1
_MAX_DIM = 1 << 16
_MAX_VOXELS = 1 << 31


class FieldFormatError(Exception):
    """Raised for malformed or truncated field files."""


def choose_depth(alpha: float, beta: float, d: float) -> float:
    """Pyramid depth that puts the field maximum on the axis at x = d.

    Along the axis the distance to the slant planes grows as x*sin(half
    angle) while the distance to the far plane shrinks as depth - x; the
    crossover sits at d exactly when depth = d*(1 + sin(min(alpha,beta)/2)).
    """
    if d <= 0:
        raise ValueError("observation distance must be positive")
    half = 0.5 * min(alpha, beta)
    if not 0 < half < 0.5 * math.pi:
        raise ValueError("view angles must lie in (0, pi)")
    return d * (1.0 + math.sin(half))


@dataclass(frozen=True)
class FovParams:
    """Viewing pyramid: horizontal angle, vertical angle, preferred
    observation distance, and depth (see :func:`choose_depth`)."""

    alpha: float
    beta: float
    d: float
    depth: float

    def __post_init__(self):
        if not (0 < self.alpha < math.pi and 0 < self.beta < math.pi):
            raise ValueError("view angles must lie in (0, pi)")
        if self.d <= 0 or self.depth <= self.d:
            raise ValueError("need 0 < d < depth")

    @classmethod
    def create(cls, alpha: float, beta: float, d: float) -> "FovParams":
        return cls(alpha, beta, d, choose_depth(alpha, beta, d))

    @property
    def tan_half_alpha(self) -> float:
        return math.tan(0.5 * self.alpha)

    @property
    def tan_half_beta(self) -> float:
        return math.tan(0.5 * self.beta)

    def contains(self, v) -> bool:
        """Body-frame point inside the viewing pyramid (boundary included)."""
        x, y, z = float(v[0]), float(v[1]), float(v[2])
        if x <= 0.0 or x > self.depth:
            return False
        return abs(y) <= x * self.tan_half_alpha and abs(z) <= x * self.tan_half_beta


DEFAULT_FOV = FovParams.create(math.radians(69.4), math.radians(42.5), 2.5)


@dataclass(frozen=True)
class ScalarField3:
    """Voxel grid of scalar values with precomputed per-voxel gradients.

    ``meta`` carries four builder-specific floats (view fields store
    (alpha, beta, d, depth); collision fields store shape half-extents and
    margin). Arrays are float32 and read-only.
    """

    spec: GridSpec
    values: np.ndarray
    gradients: np.ndarray
    meta: tuple[float, float, float, float]

    def query(self, p) -> tuple[float, np.ndarray]:
        """Trilinear value and gradient at one point; (0, 0-vector) outside."""
        val, grad = kernels.trilinear_batch(
            self.values, self.gradients, self.spec.origin, self.spec.resolution,
            np.asarray(p, dtype=float).reshape(1, 3))
        return float(val[0]), grad[0]

    def query_many(self, pts) -> tuple[np.ndarray, np.ndarray]:
        return kernels.trilinear_batch(
            self.values, self.gradients, self.spec.origin, self.spec.resolution,
            np.asarray(pts, dtype=float))

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    def nbytes(self) -> int:
        return self.values.nbytes + self.gradients.nbytes


def _finalize(spec: GridSpec, inside: np.ndarray, meta) -> ScalarField3:
    """Distance transform of the 6-neighborhood boundary of ``inside``."""
    pad = np.pad(inside, 1, constant_values=False)
    exposed = (
        ~pad[:-2, 1:-1, 1:-1] | ~pad[2:, 1:-1, 1:-1]
        | ~pad[1:-1, :-2, 1:-1] | ~pad[1:-1, 2:, 1:-1]
        | ~pad[1:-1, 1:-1, :-2] | ~pad[1:-1, 1:-1, 2:]
    )
    boundary = inside & exposed
    d2 = kernels.edt_squared(boundary)
    values = (spec.resolution * np.sqrt(d2)).astype(np.float32)
    values[~inside] = 0.0
    gx, gy, gz = np.gradient(values.astype(float), spec.resolution)
    gradients = np.stack([gx, gy, gz], axis=-1).astype(np.float32)
    values.setflags(write=False)
    gradients.setflags(write=False)
    return ScalarField3(spec, values, gradients, tuple(float(x) for x in meta))


def _centered_axis(extent: float, resolution: float) -> tuple[float, int]:
    """Origin offset and count for an axis symmetric about 0 with a voxel
    center exactly at 0 and >= 2 free voxels beyond ``extent``."""
    half = math.ceil(extent / resolution + 0.5) + 2
    n = 2 * half + 1
    return -(half + 0.5) * resolution, n


def build_fov_esdf(fov: FovParams, resolution: float) -> ScalarField3:
    """Distance-to-pyramid-boundary field over the pyramid's bounding box.

    The grid is aligned so (d, 0, 0) falls on a voxel center; inside voxels
    hold the exact Euclidean distance to the nearest boundary voxel center,
    outside voxels hold zero.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if fov.depth / resolution < 20:
        raise ValueError("resolution too coarse: pyramid must span >= 20 voxels")
    res = resolution
    # x axis: voxel center at d, >= 2 free voxels below x=0 and beyond depth
    i_d = round(fov.d / res)
    ox = fov.d - (i_d + 2.5) * res
    nx = math.ceil((fov.depth - ox) / res) + 2
    oy, ny = _centered_axis(fov.depth * fov.tan_half_alpha, res)
    oz, nz = _centered_axis(fov.depth * fov.tan_half_beta, res)
    spec = GridSpec(np.array([ox, oy, oz]), res, (nx, ny, nz))

    cx = ox + (np.arange(nx) + 0.5) * res
    cy = oy + (np.arange(ny) + 0.5) * res
    cz = oz + (np.arange(nz) + 0.5) * res
    x = cx[:, None, None]
    y = cy[None, :, None]
    z = cz[None, None, :]
    inside = (
        (x > 0.0) & (x <= fov.depth)
        & (np.abs(y) <= x * fov.tan_half_alpha)
        & (np.abs(z) <= x * fov.tan_half_beta)
    )
    return _finalize(spec, inside, (fov.alpha, fov.beta, fov.d, fov.depth))


def build_robot_field(shape, margin: float, resolution: float) -> ScalarField3:
    """Penetration-depth field of the margin-inflated vehicle shape.

    ``shape`` is ``("sphere", radius)`` or ``("box", (hx, hy, hz))`` with
    half-extents in the vehicle frame. Values grow from zero at the inflated
    surface to the deepest interior point.
    """
    kind, dims = shape
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if kind == "sphere":
        r = float(dims)
        if r <= 0:
            raise ValueError("radius must be positive")
        ext = np.full(3, r)
    elif kind == "box":
        ext = np.asarray(dims, dtype=float)
        if ext.shape != (3,) or np.any(ext <= 0):
            raise ValueError("box half-extents must be three positive numbers")
    else:
        raise ValueError(f"unknown shape kind: {kind!r}")

    axes = [_centered_axis(ext[ax] + margin, resolution) for ax in range(3)]
    origin = np.array([a[0] for a in axes])
    counts = tuple(a[1] for a in axes)
    spec = GridSpec(origin, resolution, counts)
    centers = [origin[ax] + (np.arange(counts[ax]) + 0.5) * resolution for ax in range(3)]
    x = centers[0][:, None, None]
    y = centers[1][None, :, None]
    z = centers[2][None, None, :]
    if kind == "sphere":
        inside = x * x + y * y + z * z <= (ext[0] + margin) ** 2
        meta = (ext[0], ext[1], ext[2], margin)
    else:
        qx = np.abs(x) - ext[0]
        qy = np.abs(y) - ext[1]
        qz = np.abs(z) - ext[2]
        outside_d = np.sqrt(
            np.maximum(qx, 0.0) ** 2 + np.maximum(qy, 0.0) ** 2 + np.maximum(qz, 0.0) ** 2
        )
        inside_d = np.minimum(np.maximum(qx, np.maximum(qy, qz)), 0.0)
        inside = outside_d + inside_d <= margin
        meta = (ext[0], ext[1], ext[2], margin)
    return _finalize(spec, inside, meta)


def collision_cost(field: ScalarField3, position, yaw: float, points_world):
    """Sum of cubed penetration depths over obstacle points, with gradients.

    Returns (H, dH/dposition, dH/dyaw). The cube keeps the cost twice
    continuously differentiable across the contact boundary.
    """
    pose = np.concatenate([np.asarray(position, dtype=float), [float(yaw)]])
    S, gsum, dsum = kernels.field_pose_accumulate(
        field.values, field.gradients, field.spec.origin, field.spec.resolution,
        pose.reshape(1, 4), np.asarray(points_world, dtype=float), True)
    rot = yaw_rotation(yaw)
    return float(S[0]), -(rot.T @ gsum[0]), float(dsum[0])


def save_field(field: ScalarField3, path) -> None:
    """Write the binary field file (little-endian, float32 payload)."""
    nx, ny, nz = field.spec.dims
    header = MAGIC + struct.pack(
        "<IIII3dd4d", VERSION, nx, ny, nz,
        *field.spec.origin, field.spec.resolution, *field.meta)
    vals = np.ascontiguousarray(field.values.transpose(2, 1, 0), dtype="<f4")
    grads = np.ascontiguousarray(field.gradients.transpose(2, 1, 0, 3), dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(vals.tobytes())
        fh.write(grads.tobytes())


def load_field(path) -> ScalarField3:
    """Read a field file written by :func:`save_field`; validates layout."""
    with open(path, "rb") as fh:
        raw = fh.read()
    head_fmt = "<IIII3dd4d"
    head_size = len(MAGIC) + struct.calcsize(head_fmt)
    if len(raw) < head_size:
        raise FieldFormatError("truncated header")
    if raw[:4] != MAGIC:
        raise FieldFormatError("bad magic")
    fields = struct.unpack_from(head_fmt, raw, 4)
    version, nx, ny, nz = fields[:4]
    if version != VERSION:
        raise FieldFormatError(f"unsupported version {version}")
    if max(nx, ny, nz) >= _MAX_DIM or nx * ny * nz > _MAX_VOXELS or min(nx, ny, nz) < 1:
        raise FieldFormatError("dimension overflow")
    origin = np.array(fields[4:7])
    resolution = fields[7]
    meta = fields[8:12]
    if resolution <= 0:
        raise FieldFormatError("non-positive resolution")
    count = nx * ny * nz
    expected = head_size + 4 * count + 12 * count
    if len(raw) != expected:
        raise FieldFormatError("truncated or oversized payload")
    vals = np.frombuffer(raw, dtype="<f4", count=count, offset=head_size)
    grads = np.frombuffer(raw, dtype="<f4", count=3 * count, offset=head_size + 4 * count)
    values = vals.reshape(nz, ny, nx).transpose(2, 1, 0).copy()
    gradients = grads.reshape(nz, ny, nx, 3).transpose(2, 1, 0, 3).copy()
    values.setflags(write=False)
    gradients.setflags(write=False)
    spec = GridSpec(origin, resolution, (nx, ny, nz))
    return ScalarField3(spec, values, gradients, tuple(meta))
