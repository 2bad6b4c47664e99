"""Elementary coordinate conversions, rotations and angle arithmetic.

Conventions used throughout the package:

- angles are radians, normalized into the half-open interval (-pi, pi]
- polar/cylindrical tuples are ordered (phi, rho[, z])
- rotation matrices are 3x3, orthonormal, det +1
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROTATION_TOL = 1e-9


def wrap_angle(phi):
    """Normalize an angle (scalar or array) into (-pi, pi]."""
    w = np.mod(np.asarray(phi, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.isscalar(phi) or np.ndim(phi) == 0 else w


def pol2(v):
    """Cartesian 2-vector -> (phi, rho). The zero vector maps to (0, 0)."""
    x, y = float(v[0]), float(v[1])
    return wrap_angle(np.arctan2(y, x)), float(np.hypot(x, y))


def cart2(p):
    """(phi, rho) -> Cartesian 2-vector."""
    phi, rho = p
    return np.array([rho * np.cos(phi), rho * np.sin(phi)])


def cyl(v):
    """Cartesian 3-vector -> cylindrical (phi, rho, z)."""
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    return wrap_angle(np.arctan2(y, x)), float(np.hypot(x, y)), z


def cart(c):
    """Cylindrical (phi, rho, z) -> Cartesian 3-vector."""
    phi, rho, z = c
    return np.array([rho * np.cos(phi), rho * np.sin(phi), z])


def rot2(phi: float) -> np.ndarray:
    """2x2 rotation matrix."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def rot_z(phi: float) -> np.ndarray:
    """3x3 rotation about the Z axis."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle(angle: float, axis) -> np.ndarray:
    """Rodrigues rotation matrix for a rotation by `angle` about `axis`.

    The axis is normalized internally.  A zero angle yields the identity for
    any axis; a zero axis with nonzero angle is an error.
    """
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if angle == 0.0:
        return np.eye(3)
    if n < 1e-15:
        raise ValueError("axis_angle: zero axis with nonzero angle")
    k = axis / n
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)


def angle_between(u, v) -> float:
    """Angle in [0, pi] between two nonzero 3-vectors.

    The cosine is clamped to [-1, 1] so nearly (anti)parallel inputs stay
    inside arccos' domain.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < 1e-15 or nv < 1e-15:
        raise ValueError("angle_between: zero-length input")
    return float(np.arccos(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)))


def angles_between(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Vectorized angle_between over the last axis (broadcasting shapes)."""
    nu = np.linalg.norm(U, axis=-1)
    nv = np.linalg.norm(V, axis=-1)
    dot = np.sum(U * V, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = dot / (nu * nv)
    return np.arccos(np.clip(c, -1.0, 1.0))


def check_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> np.ndarray:
    """Validate an orthonormal, det +1 matrix; returns it unchanged."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise ValueError("rotation contains non-finite entries")
    if np.max(np.abs(R @ R.T - np.eye(3))) > tol:
        raise ValueError("matrix is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1")
    return R


def rotation_to_axis(axis) -> np.ndarray:
    """Rotation A with A @ axis = (0, 0, 1); used to work in an axis-aligned frame."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    z = np.array([0.0, 0.0, 1.0])
    c = np.cross(axis, z)
    s = np.linalg.norm(c)
    if s < 1e-12:
        if axis[2] > 0:
            return np.eye(3)
        # antiparallel: rotate by pi about X
        return axis_angle(np.pi, np.array([1.0, 0.0, 0.0]))
    return axis_angle(float(np.arctan2(s, axis[2])), c)


def geodesic_distance(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Rotation angle of Ra^T Rb, in [0, pi].

    Uses atan2 of the skew part against the trace, which stays exact for
    identical rotations (arccos of the trace alone bottoms out near
    sqrt(machine eps)).
    """
    Q = Ra.T @ Rb
    skew = 0.5 * np.array([Q[2, 1] - Q[1, 2], Q[0, 2] - Q[2, 0], Q[1, 0] - Q[0, 1]])
    c = (np.trace(Q) - 1.0) / 2.0
    return float(np.arctan2(np.linalg.norm(skew), c))


@dataclass
class Pose:
    """Rigid transform of the object in the camera frame: x_cam = R @ p + t."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = check_rotation(self.rotation)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(self.translation)):
            raise ValueError("translation contains non-finite entries")

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply to an (..., 3) array of points."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """self after other: (self.compose(other)).transform(p) == self.transform(other.transform(p))."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation (Shoemake's quaternion method)."""
    u1, u2, u3 = rng.uniform(size=3)
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    q = np.array([a * np.sin(2 * np.pi * u2), a * np.cos(2 * np.pi * u2),
                  b * np.sin(2 * np.pi * u3), b * np.cos(2 * np.pi * u3)])
    x, y, z, w = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
