"""Symmetry specs, dense point maps and the forward star/dash transforms.

The star transform multiplies the azimuth of each object point about the
symmetry axis by the fold count, so that one step of symmetry closes a full
loop.  The dash transform stores per pixel the object point rotated into the
camera and de-rotated by that pixel's viewing-ray rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geom import axis_angle, rotation_to_axis, wrap_angle

INFINITE = math.inf


def fold_multiplier(fold) -> float:
    """Angle multiplier for a fold count: n for finite folds, 0 for infinite."""
    if fold == INFINITE:
        return 0.0
    n = int(fold)
    if n != fold or n < 1:
        raise ValueError(f"fold must be a positive integer or INFINITE, got {fold!r}")
    return float(n)


def fold_theta(fold) -> float:
    """Symmetry angle 2*pi/n (0 for the infinite fold)."""
    if fold == INFINITE:
        return 0.0
    return 2.0 * np.pi / fold_multiplier(fold)


def _unit_axis(axis) -> np.ndarray:
    axis = np.asarray(axis, dtype=float).reshape(3)
    n = np.linalg.norm(axis)
    if n < 1e-12 or not np.all(np.isfinite(axis)):
        raise ValueError("symmetry axis must be a nonzero finite vector")
    return axis / n


@dataclass(frozen=True)
class SymmetrySpec:
    """One symmetry axis with fold count, plus an optional second axis.

    Only symmetry groups that decompose into at most two axial folds can be
    expressed (e.g. a general box as two perpendicular 2-folds); point groups
    such as the cube's cannot be constructed.  The secondary fold must be
    finite and its axis must not be parallel to the primary one.
    """

    axis: np.ndarray
    fold: float
    secondary_axis: Optional[np.ndarray] = None
    secondary_fold: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "axis", _unit_axis(self.axis))
        fold_multiplier(self.fold)  # validates
        if (self.secondary_axis is None) != (self.secondary_fold is None):
            raise ValueError("secondary axis and fold must be given together")
        if self.secondary_axis is not None:
            sec = _unit_axis(self.secondary_axis)
            object.__setattr__(self, "secondary_axis", sec)
            if self.secondary_fold == INFINITE:
                raise ValueError("secondary fold must be finite")
            fold_multiplier(self.secondary_fold)
            if abs(float(np.dot(self.axis, sec))) > 1.0 - 1e-9:
                raise ValueError("secondary axis must not be parallel to the primary axis")

    @property
    def theta(self) -> float:
        return fold_theta(self.fold)

    @property
    def has_secondary(self) -> bool:
        return self.secondary_axis is not None


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics. Pixel (i, j) = (column, row), origin top-left."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def ray(self, i: float, j: float) -> np.ndarray:
        """Unit viewing ray of pixel (i, j)."""
        d = np.array([(i - self.cx) / self.fx, (j - self.cy) / self.fy, 1.0])
        return d / np.linalg.norm(d)

    def ray_grid(self) -> np.ndarray:
        """(H, W, 3) array of unit rays for every pixel."""
        ii, jj = np.meshgrid(np.arange(self.width), np.arange(self.height))
        d = np.stack([(ii - self.cx) / self.fx, (jj - self.cy) / self.fy,
                      np.ones_like(ii, dtype=float)], axis=-1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def project(self, pts_cam: np.ndarray) -> np.ndarray:
        """Camera-frame points (..., 3) -> pixel coordinates (..., 2)."""
        pts_cam = np.asarray(pts_cam, dtype=float)
        z = pts_cam[..., 2]
        return np.stack([self.fx * pts_cam[..., 0] / z + self.cx,
                         self.fy * pts_cam[..., 1] / z + self.cy], axis=-1)


class PointMap:
    """Dense W x H grid of optional 3D object coordinates with a validity mask."""

    def __init__(self, points: np.ndarray, mask: np.ndarray):
        points = np.asarray(points, dtype=float)
        mask = np.asarray(mask, dtype=bool)
        if points.ndim != 3 or points.shape[2] != 3:
            raise ValueError(f"points must be (H, W, 3), got {points.shape}")
        if mask.shape != points.shape[:2]:
            raise ValueError("mask shape must match the point grid")
        if not np.all(np.isfinite(points[mask])):
            raise ValueError("valid entries must be finite")
        self.points = np.where(mask[..., None], points, 0.0)
        self.mask = mask

    @classmethod
    def empty(cls, width: int, height: int) -> "PointMap":
        return cls(np.zeros((height, width, 3)), np.zeros((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.points.shape[1]

    @property
    def height(self) -> int:
        return self.points.shape[0]

    @property
    def valid_count(self) -> int:
        return int(self.mask.sum())

    def valid_points(self) -> np.ndarray:
        """(N, 3) array of the valid entries, row-major order."""
        return self.points[self.mask]

    def valid_pixels(self) -> np.ndarray:
        """(N, 2) array of (i, j) pixel coordinates of the valid entries."""
        jj, ii = np.nonzero(self.mask)
        return np.stack([ii, jj], axis=-1)

    def with_points(self, points: np.ndarray) -> "PointMap":
        return PointMap(points, self.mask.copy())

    def copy(self) -> "PointMap":
        return PointMap(self.points.copy(), self.mask.copy())

    def allclose(self, other: "PointMap", atol: float = 1e-9) -> bool:
        if self.points.shape != other.points.shape:
            return False
        if not np.array_equal(self.mask, other.mask):
            return False
        return bool(np.allclose(self.points[self.mask], other.points[other.mask], atol=atol))


def symmetry_group(spec: SymmetrySpec) -> list[np.ndarray]:
    """All rotations generated by the declared folds (finite folds only).

    With a secondary axis the products of both generators' powers are
    enumerated, which covers the decomposable groups this spec can express
    (e.g. the two perpendicular 2-folds of a general box).
    """
    if spec.fold == INFINITE:
        raise ValueError("infinite fold has no finite symmetry group")
    n1 = int(fold_multiplier(spec.fold))
    theta1 = 2.0 * np.pi / n1
    group = [axis_angle(k * theta1, spec.axis) if k else np.eye(3) for k in range(n1)]
    if spec.has_secondary:
        n2 = int(spec.secondary_fold)
        theta2 = 2.0 * np.pi / n2
        group = [g1 @ axis_angle(k * theta2, spec.secondary_axis) if k else g1
                 for g1 in group for k in range(n2)]
    return group


def csl_vector(alpha: float, n: int) -> np.ndarray:
    """Unit 2-vector of the angle multiplied by the fold count.

    Periodic in alpha with period 2*pi/n, so one step of symmetry traces the
    full circle.
    """
    m = fold_multiplier(n)
    if m == 0.0:
        raise ValueError("csl_vector requires a finite fold")
    return np.array([np.cos(m * alpha), np.sin(m * alpha)])


def star_points(points: np.ndarray, axis, fold) -> np.ndarray:
    """Star transform of an (..., 3) array of points about an arbitrary axis.

    Points are rotated into a frame with the axis along Z, the azimuth is
    multiplied by the fold count (0 for the infinite fold) and the points are
    rotated back.  On-axis points keep azimuth 0 and map to themselves.
    """
    m = fold_multiplier(fold)
    A = rotation_to_axis(axis)
    q = np.asarray(points, dtype=float) @ A.T
    phi = wrap_angle(np.arctan2(q[..., 1], q[..., 0]))
    rho = np.hypot(q[..., 0], q[..., 1])
    phi2 = m * phi
    out = np.stack([rho * np.cos(phi2), rho * np.sin(phi2), q[..., 2]], axis=-1)
    return out @ A


def star_point(p, axis, fold) -> np.ndarray:
    """Star transform of a single 3D point."""
    return star_points(np.asarray(p, dtype=float).reshape(1, 3), axis, fold)[0]


def star_map(pmap: PointMap, spec: SymmetrySpec) -> PointMap:
    """Per-pixel star transform; a second axis is applied to the first result."""
    pts = star_points(pmap.points, spec.axis, spec.fold)
    if spec.has_secondary:
        pts = star_points(pts, spec.secondary_axis, spec.secondary_fold)
    pts = np.where(pmap.mask[..., None], pts, 0.0)
    return PointMap(pts, pmap.mask.copy())


def r_ray(i: float, j: float, cam: CameraModel) -> np.ndarray:
    """Rotation taking the Z axis onto the viewing ray of pixel (i, j).

    The rotation axis is Z x ray; at the principal point the ray is the Z
    axis itself and the identity is returned.
    """
    ray = cam.ray(i, j)
    z = np.array([0.0, 0.0, 1.0])
    c = np.cross(z, ray)
    s = np.linalg.norm(c)
    if s < 1e-15:
        return np.eye(3)
    return axis_angle(float(np.arctan2(s, ray[2])), c)


def _ray_rotations(rays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-ray rotation (axis, angle) pairs for rotating Z onto each ray."""
    z = np.array([0.0, 0.0, 1.0])
    c = np.cross(np.broadcast_to(z, rays.shape), rays)
    s = np.linalg.norm(c, axis=-1)
    angle = np.arctan2(s, rays[..., 2])
    safe = np.where(s[..., None] > 1e-15, s[..., None], 1.0)
    k = np.where(s[..., None] > 1e-15, c / safe, 0.0)
    return k, angle


def rotate_about_axes(v: np.ndarray, axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rodrigues rotation of (..., 3) vectors about per-entry unit axes."""
    cos_a = np.cos(angles)[..., None]
    sin_a = np.sin(angles)[..., None]
    kxv = np.cross(axes, v)
    kdv = np.sum(axes * v, axis=-1, keepdims=True)
    return v * cos_a + kxv * sin_a + axes * kdv * (1.0 - cos_a)


def dash_point(p_obj, R_co: np.ndarray, i: float, j: float, cam: CameraModel) -> np.ndarray:
    """Object point rotated into camera and de-rotated by the pixel's ray rotation."""
    return r_ray(i, j, cam).T @ (np.asarray(R_co, dtype=float) @ np.asarray(p_obj, dtype=float))


def dash_map(pmap: PointMap, pose, cam: CameraModel) -> PointMap:
    """Per-pixel dash transform of a point map (uses the pose's rotation only)."""
    if (pmap.height, pmap.width) != (cam.height, cam.width):
        raise ValueError("point map and camera dimensions differ")
    rotated = pmap.points @ pose.rotation.T
    axes, angles = _ray_rotations(cam.ray_grid())
    # R_ray^{-1} v = rotate v by -angle about the same axis
    out = rotate_about_axes(rotated, axes, -angles)
    out = np.where(pmap.mask[..., None], out, 0.0)
    return PointMap(out, pmap.mask.copy())


def undash_map(dmap: PointMap, cam: CameraModel) -> PointMap:
    """Reverse the per-pixel ray rotation, recovering R_co @ p per pixel."""
    if (dmap.height, dmap.width) != (cam.height, cam.width):
        raise ValueError("point map and camera dimensions differ")
    axes, angles = _ray_rotations(cam.ray_grid())
    out = rotate_about_axes(dmap.points, axes, angles)
    out = np.where(dmap.mask[..., None], out, 0.0)
    return PointMap(out, dmap.mask.copy())
