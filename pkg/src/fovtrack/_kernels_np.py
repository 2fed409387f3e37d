"""NumPy fallback for the hot kernels.

Mirrors the API of the compiled ``fovtrack._kernels`` extension; selected at
import time by :mod:`fovtrack.kernels` when the extension is unavailable or
``FOVTRACK_PURE_PYTHON`` is set. Correctness matches the compiled path; the
benchmark in ``benchmarks/bench_kernels.py`` quantifies the speed gap.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.ndimage as ndi

COMPILED = False


def _gather_trilinear(values, grads, dims, s, inside):
    """Trilinear interpolation at node coordinates ``s`` for the rows of
    ``inside``; values/grads are cell-centered."""
    n = s.shape[0]
    val = np.zeros(n)
    grad = np.zeros((n, 3))
    if not np.any(inside):
        return val, grad
    si = s[inside]
    base = np.floor(si).astype(np.intp)
    np.clip(base, 0, np.asarray(dims) - 2, out=base)
    f = si - base
    bx, by, bz = base[:, 0], base[:, 1], base[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    v_acc = np.zeros(si.shape[0])
    g_acc = np.zeros((si.shape[0], 3))
    for dx in (0, 1):
        wx = fx if dx else 1.0 - fx
        for dy in (0, 1):
            wy = fy if dy else 1.0 - fy
            for dz in (0, 1):
                wz = fz if dz else 1.0 - fz
                w = wx * wy * wz
                v_acc += w * values[bx + dx, by + dy, bz + dz]
                g_acc += w[:, None] * grads[bx + dx, by + dy, bz + dz]
    val[inside] = v_acc
    grad[inside] = g_acc
    return val, grad


def trilinear_batch(values, grads, origin, resolution, pts):
    """Interpolated field value and gradient at each of ``pts`` (N,3).

    Values and gradients are stored at voxel centers; queries outside the
    center lattice return (0, zero vector).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    dims = values.shape
    s = (pts - origin) / resolution - 0.5
    inside = np.all((s >= 0.0) & (s <= np.asarray(dims) - 1.0), axis=1)
    return _gather_trilinear(values, grads, dims, s, inside)


def field_pose_accumulate(values, grads, origin, resolution, poses, pts, cubic):
    """Per-pose field sums over a shared world point set.

    ``poses`` is (M,4) rows of (px,py,pz,yaw); ``pts`` is (N,3) world points.
    Each point is taken to the body frame v = R(yaw)(w - p) and the field is
    queried there. Returns, per pose:

      linear: S = sum val,   gsum = sum grad,          dsum = sum vy*gx - vx*gy
      cubic:  S = sum val^3, gsum = sum 3 val^2 grad,  dsum as above scaled

    ``dsum`` is the yaw-derivative contraction (R'(yaw)(w-p))^T grad.
    """
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    m = poses.shape[0]
    S = np.zeros(m)
    gsum = np.zeros((m, 3))
    dsum = np.zeros(m)
    if pts.shape[0] == 0:
        return S, gsum, dsum
    dims = np.asarray(values.shape)
    hi = origin + values.shape * np.full(3, resolution)
    for i in range(m):
        p = poses[i, :3]
        c, sn = math.cos(poses[i, 3]), math.sin(poses[i, 3])
        rel = pts - p
        v = np.empty_like(rel)
        v[:, 0] = c * rel[:, 0] + sn * rel[:, 1]
        v[:, 1] = -sn * rel[:, 0] + c * rel[:, 1]
        v[:, 2] = rel[:, 2]
        # cheap reject against the grid box before interpolating
        near = np.all((v >= origin) & (v <= hi), axis=1)
        if not np.any(near):
            continue
        vn = v[near]
        s = (vn - origin) / resolution - 0.5
        inside = np.all((s >= 0.0) & (s <= dims - 1.0), axis=1)
        val, grad = _gather_trilinear(values, grads, values.shape, s, inside)
        if cubic:
            w = 3.0 * val * val
            S[i] = np.sum(val * val * val)
            gsum[i] = w @ grad
            dsum[i] = np.sum(w * (vn[:, 1] * grad[:, 0] - vn[:, 0] * grad[:, 1]))
        else:
            S[i] = np.sum(val)
            gsum[i] = np.sum(grad, axis=0)
            dsum[i] = np.sum(vn[:, 1] * grad[:, 0] - vn[:, 0] * grad[:, 1])
    return S, gsum, dsum


def _clip_segment(a, b, lo, hi):
    """Clip segment a->b to the box [lo, hi]; returns (t0, t1) or None."""
    t0, t1 = 0.0, 1.0
    for ax in range(3):
        d = b[ax] - a[ax]
        if abs(d) < 1e-15:
            if a[ax] < lo[ax] or a[ax] > hi[ax]:
                return None
            continue
        ta = (lo[ax] - a[ax]) / d
        tb = (hi[ax] - a[ax]) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return None
    return t0, t1


def raycast_free(occ, origin, resolution, a, b):
    """True iff the segment a->b crosses no occupied voxel.

    Exact incremental voxel walk; space outside the grid counts as free.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    nx, ny, nz = occ.shape
    lo = origin
    hi = origin + resolution * np.array([nx, ny, nz], dtype=float)
    span = _clip_segment(a, b, lo, hi)
    if span is None:
        return True
    t0, t1 = span
    if t1 <= t0:
        return True
    d = b - a
    seg_len = math.sqrt(float(d @ d))
    if seg_len < 1e-12:
        i, j, k = np.floor((a - origin) / resolution).astype(int)
        if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz:
            return not occ[i, j, k]
        return True
    # nudge off voxel faces so boundary starts walk deterministically
    eps = 1e-9
    start = a + d * (t0 + eps * resolution / seg_len)
    end_t = t1 - eps * resolution / seg_len
    g = (start - origin) / resolution
    ijk = np.floor(g).astype(int)
    ijk = np.clip(ijk, 0, np.array([nx, ny, nz]) - 1)
    step = np.where(d > 0, 1, np.where(d < 0, -1, 0))
    t_max = np.full(3, math.inf)
    t_delta = np.full(3, math.inf)
    for ax in range(3):
        if step[ax] != 0:
            nxt = origin[ax] + (ijk[ax] + (1 if step[ax] > 0 else 0)) * resolution
            t_max[ax] = (nxt - a[ax]) / d[ax]
            t_delta[ax] = resolution / abs(d[ax])
    t = t0
    while t <= end_t:
        i, j, k = ijk
        if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz and occ[i, j, k]:
            return False
        ax = int(np.argmin(t_max))
        t = t_max[ax]
        t_max[ax] += t_delta[ax]
        ijk[ax] += step[ax]
        if ijk[ax] < 0 or ijk[ax] >= occ.shape[ax]:
            return True
    return True


def edt_squared(mask):
    """Exact squared Euclidean distance (voxel units) to the nearest True voxel.

    Integer-valued float64 array; ``mask`` must contain at least one True.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("distance transform needs a non-empty feature set")
    ind = ndi.distance_transform_edt(~mask, return_distances=False, return_indices=True)
    coords = np.indices(mask.shape, dtype=np.int64)
    d2 = np.zeros(mask.shape, dtype=np.int64)
    for ax in range(mask.ndim):
        diff = ind[ax].astype(np.int64) - coords[ax]
        d2 += diff * diff
    return d2.astype(float)


def farthest_point_subsample(pts, k):
    """Indices of a greedy farthest-point subsample of size ``k``.

    Deterministic: seeded at the point closest to the centroid.
    """
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[0]
    if k >= n:
        return np.arange(n)
    centroid = pts.mean(axis=0)
    first = int(np.argmin(np.einsum("ij,ij->i", pts - centroid, pts - centroid)))
    chosen = np.empty(k, dtype=np.intp)
    chosen[0] = first
    d2 = np.einsum("ij,ij->i", pts - pts[first], pts - pts[first])
    for i in range(1, k):
        nxt = int(np.argmax(d2))
        chosen[i] = nxt
        cand = np.einsum("ij,ij->i", pts - pts[nxt], pts - pts[nxt])
        np.minimum(d2, cand, out=d2)
    return chosen
