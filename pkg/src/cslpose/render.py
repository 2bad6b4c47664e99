"""Flat-shaded ray-cast renderer for parametric objects.

Produces a grayscale intensity image plus the ground-truth per-pixel object
coordinates (the point map that a dense pose regressor would be trained to
predict).  Shading is albedo times the cosine between face normal and viewing
ray; there is no light model, since the point maps are what drive every
experiment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import Pose
from .symmetry import CameraModel, PointMap

_EPS = 1e-9


class RenderError(ValueError):
    """Scene cannot be rendered (e.g. object fully behind the camera)."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in the object frame, centered at the origin.

    Albedo order: +x, -x, +y, -y, +z, -z.  The default gives all four side
    faces the same value, so any declared fold about Z is respected.
    """

    half_extents: tuple[float, float, float]
    albedos: tuple[float, ...] = (0.8, 0.8, 0.8, 0.8, 0.95, 0.6)

    def __post_init__(self):
        if len(self.half_extents) != 3 or min(self.half_extents) <= 0:
            raise ValueError("box half extents must be three positive lengths")
        if len(self.albedos) != 6:
            raise ValueError("box needs six face albedos")

    @property
    def diameter(self) -> float:
        return 2.0 * float(np.linalg.norm(self.half_extents))

    def intersect(self, o: np.ndarray, d: np.ndarray):
        h = np.asarray(self.half_extents, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-h - o) / d
            t2 = (h - o) / d
        tlo = np.minimum(t1, t2)
        thi = np.maximum(t1, t2)
        tlo = np.where(np.isnan(tlo), -np.inf, tlo)
        thi = np.where(np.isnan(thi), np.inf, thi)
        tmin = np.max(tlo, axis=-1)
        tmax = np.min(thi, axis=-1)
        hit = (tmax >= tmin) & (tmin > _EPS)
        t = np.where(hit, tmin, np.inf)
        enter_axis = np.argmax(tlo, axis=-1)
        sign = -np.sign(np.take_along_axis(d, enter_axis[..., None], axis=-1)[..., 0])
        normal = np.zeros(d.shape)
        np.put_along_axis(normal, enter_axis[..., None], sign[..., None], axis=-1)
        face = enter_axis * 2 + (sign < 0).astype(int)  # +x,-x,+y,-y,+z,-z
        albedo = np.asarray(self.albedos)[face]
        return t, normal, albedo, hit


@dataclass(frozen=True)
class Cylinder:
    """Cylinder with axis Z in the object frame, centered at the origin.

    Albedo order: lateral, +z cap, -z cap.
    """

    radius: float
    height: float
    albedos: tuple[float, float, float] = (0.8, 0.95, 0.6)

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ValueError("cylinder radius and height must be positive")

    @property
    def diameter(self) -> float:
        return float(np.hypot(2.0 * self.radius, self.height))

    def intersect(self, o: np.ndarray, d: np.ndarray):
        hh = self.height / 2.0
        ox, oy, oz = o[..., 0], o[..., 1], o[..., 2]
        dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]

        best_t = np.full(ox.shape, np.inf)
        normal = np.zeros(d.shape)
        albedo = np.zeros(ox.shape)

        # lateral surface: quadratic in t
        a = dx * dx + dy * dy
        b = 2.0 * (ox * dx + oy * dy)
        c = ox * ox + oy * oy - self.radius**2
        disc = b * b - 4.0 * a * c
        ok = (disc >= 0) & (a > _EPS)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = np.stack([(-b - sq) / (2 * a), (-b + sq) / (2 * a)])
        for t in roots:
            z = oz + t * dz
            valid = ok & (t > _EPS) & (np.abs(z) <= hh) & (t < best_t)
            best_t = np.where(valid, t, best_t)
            if np.any(valid):
                x, y = ox + t * dx, oy + t * dy
                n = np.stack([x, y, np.zeros_like(x)], axis=-1) / self.radius
                normal = np.where(valid[..., None], n, normal)
                albedo = np.where(valid, self.albedos[0], albedo)

        # caps
        for zcap, nz, alb in ((hh, 1.0, self.albedos[1]), (-hh, -1.0, self.albedos[2])):
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (zcap - oz) / dz
            x, y = ox + t * dx, oy + t * dy
            valid = (np.abs(dz) > _EPS) & (t > _EPS) & (x * x + y * y <= self.radius**2) & (t < best_t)
            best_t = np.where(valid, t, best_t)
            if np.any(valid):
                n = np.zeros(d.shape)
                n[..., 2] = nz
                normal = np.where(valid[..., None], n, normal)
                albedo = np.where(valid, alb, albedo)

        hit = np.isfinite(best_t)
        return best_t, normal, albedo, hit


def render_scene(pose: Pose, obj, cam: CameraModel):
    """Ray-cast an object; returns (intensity image, ground-truth PointMap).

    `obj` may be None for an empty scene.  Raises RenderError when no part of
    the object can lie in front of the camera.
    """
    if obj is None:
        return np.zeros((cam.height, cam.width)), PointMap.empty(cam.width, cam.height)

    if pose.translation[2] + obj.diameter / 2.0 <= 0:
        raise RenderError("object lies fully behind the camera")

    rays = cam.ray_grid()
    R, t = pose.rotation, pose.translation
    o_obj = -R.T @ t
    d_obj = rays @ R  # row-vector form of R^T @ d

    t_hit, normal, albedo, hit = obj.intersect(np.broadcast_to(o_obj, d_obj.shape), d_obj)
    pts = o_obj + np.where(hit[..., None], t_hit[..., None], 0.0) * d_obj
    pts = np.where(hit[..., None], pts, 0.0)

    shade = np.abs(np.sum(normal * d_obj, axis=-1))
    image = np.where(hit, albedo * shade, 0.0)
    return image, PointMap(pts, hit)
