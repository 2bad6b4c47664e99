"""Pose recovery from dense 2D-3D correspondences and symmetry-aware pose error.

`solve_pnp` initializes with a direct linear transform (falling back to a
homography decomposition when the object points are coplanar) and refines by
damped least squares on the reprojection residuals over a 6-parameter local
pose update (rotation as an exponential-map increment).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geom import Pose, axis_angle, geodesic_distance, rotation_to_axis, rot_z
from .symmetry import INFINITE, CameraModel, PointMap, SymmetrySpec, symmetry_group

LM_LAMBDA0 = 1e-3
LM_MAX_ITERS = 100
LM_STEP_TOL = 1e-10


class PnPDegenerateError(ValueError):
    """Correspondence geometry cannot constrain a pose (e.g. collinear points)."""


class PnPConvergenceError(RuntimeError):
    def __init__(self, residual_rms: float):
        super().__init__(f"refinement did not converge; reprojection RMS {residual_rms:.3e} px")
        self.residual_rms = residual_rms


@dataclass
class Correspondences:
    """Pixel (i, j) to object point pairs for one object in one image."""

    pixels: np.ndarray  # (N, 2)
    points: np.ndarray  # (N, 3)
    camera: CameraModel

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float).reshape(-1, 2)
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if self.pixels.shape[0] != self.points.shape[0]:
            raise ValueError("pixel and point counts differ")
        if self.pixels.shape[0] < 6:
            raise ValueError("need at least 6 correspondences")
        i, j = self.pixels[:, 0], self.pixels[:, 1]
        if np.any(i < 0) or np.any(i > self.camera.width - 1) or \
           np.any(j < 0) or np.any(j > self.camera.height - 1):
            raise ValueError("pixels must lie inside the image")

    def __len__(self) -> int:
        return self.pixels.shape[0]


def correspondences_from_map(pmap: PointMap, cam: CameraModel) -> Correspondences:
    return Correspondences(pmap.valid_pixels().astype(float), pmap.valid_points(), cam)


def _normalized_pixels(corr: Correspondences) -> np.ndarray:
    cam = corr.camera
    return np.stack([(corr.pixels[:, 0] - cam.cx) / cam.fx,
                     (corr.pixels[:, 1] - cam.cy) / cam.fy], axis=-1)


def _hartley(points: np.ndarray, target: float):
    """Similarity transform bringing the centroid to 0 and mean norm to target."""
    c = points.mean(axis=0)
    d = np.mean(np.linalg.norm(points - c, axis=-1))
    s = target / d if d > 0 else 1.0
    dim = points.shape[1]
    T = np.eye(dim + 1)
    T[:dim, :dim] *= s
    T[:dim, dim] = -s * c
    return (points - c) * s, T


def _shape_class(points: np.ndarray) -> str:
    """'full', 'planar' or 'degenerate' from the point scatter eigenvalues."""
    c = points - points.mean(axis=0)
    w = np.linalg.eigvalsh(c.T @ c / len(points))
    big = w[-1]
    if big <= 0:
        return "degenerate"
    if w[1] < 1e-10 * big:
        return "degenerate"
    if w[0] < 1e-10 * big:
        return "planar"
    return "full"


def _dlt_init(corr: Correspondences) -> Pose:
    xn, Timg = _hartley(_normalized_pixels(corr), np.sqrt(2.0))
    Xn, Tpts = _hartley(corr.points, np.sqrt(3.0))
    N = len(corr)
    Xh = np.concatenate([Xn, np.ones((N, 1))], axis=-1)
    A = np.zeros((2 * N, 12))
    A[0::2, 0:4] = Xh
    A[0::2, 8:12] = -xn[:, 0:1] * Xh
    A[1::2, 4:8] = Xh
    A[1::2, 8:12] = -xn[:, 1:2] * Xh
    _, _, Vt = np.linalg.svd(A)
    P = Vt[-1].reshape(3, 4)
    P = np.linalg.inv(Timg) @ P @ Tpts

    depths = corr.points @ P[2, :3].T + P[2, 3]
    if np.median(depths) < 0:
        P = -P
    M = P[:, :3]
    U, S, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt))
    R = U @ np.diag([1.0, 1.0, d]) @ Vt
    scale = float(np.mean(S)) * d
    if scale == 0:
        raise PnPDegenerateError("rank-deficient linear system")
    t = P[:, 3] / scale
    return Pose(R, t)


def _homography_init(corr: Correspondences) -> Pose:
    """Planar initialization: decompose the plane-to-image homography."""
    C = corr.points.mean(axis=0)
    centered = corr.points - C
    _, _, Vt = np.linalg.svd(centered, full_matrices=False)
    e1, e2 = Vt[0], Vt[1]
    e3 = np.cross(e1, e2)
    ab = np.stack([centered @ e1, centered @ e2], axis=-1)

    xn, Timg = _hartley(_normalized_pixels(corr), np.sqrt(2.0))
    abn, Tab = _hartley(ab, np.sqrt(2.0))
    N = len(corr)
    abh = np.concatenate([abn, np.ones((N, 1))], axis=-1)
    A = np.zeros((2 * N, 9))
    A[0::2, 0:3] = abh
    A[0::2, 6:9] = -xn[:, 0:1] * abh
    A[1::2, 3:6] = abh
    A[1::2, 6:9] = -xn[:, 1:2] * abh
    _, sv, Vt9 = np.linalg.svd(A)
    if sv[-2] < 1e-12 * sv[0]:
        raise PnPDegenerateError("homography system is rank deficient")
    H = Vt9[-1].reshape(3, 3)
    H = np.linalg.inv(Timg) @ H @ Tab

    s = 2.0 / (np.linalg.norm(H[:, 0]) + np.linalg.norm(H[:, 1]))
    if H[2, 2] * s < 0:  # plane centroid must sit in front of the camera
        s = -s
    g1, g2, v = s * H[:, 0], s * H[:, 1], s * H[:, 2]
    G = np.stack([g1, g2, np.cross(g1, g2)], axis=-1)
    U, _, Vt3 = np.linalg.svd(G)
    G = U @ np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt3))]) @ Vt3
    E = np.stack([e1, e2, e3], axis=-1)
    R = G @ E.T
    t = v - R @ C
    return Pose(R, t)


def _residuals(pose: Pose, corr: Correspondences) -> np.ndarray:
    pts_cam = corr.points @ pose.rotation.T + pose.translation
    z = pts_cam[:, 2]
    if np.any(z <= 1e-9):
        return None
    proj = corr.camera.project(pts_cam)
    return (proj - corr.pixels).reshape(-1)


def _jacobian(pose: Pose, corr: Correspondences) -> np.ndarray:
    cam = corr.camera
    pts_cam = corr.points @ pose.rotation.T + pose.translation
    x, y, z = pts_cam[:, 0], pts_cam[:, 1], pts_cam[:, 2]
    N = len(corr)

    # d(pts_cam)/d(omega) for the update R <- R expm([omega]x): -R [p]x
    P = corr.points
    px = np.zeros((N, 3, 3))
    px[:, 0, 1] = -P[:, 2]
    px[:, 0, 2] = P[:, 1]
    px[:, 1, 0] = P[:, 2]
    px[:, 1, 2] = -P[:, 0]
    px[:, 2, 0] = -P[:, 1]
    px[:, 2, 1] = P[:, 0]
    dcam_domega = -np.einsum("ab,nbc->nac", pose.rotation, px)

    dproj = np.zeros((N, 2, 3))
    dproj[:, 0, 0] = cam.fx / z
    dproj[:, 0, 2] = -cam.fx * x / z**2
    dproj[:, 1, 1] = cam.fy / z
    dproj[:, 1, 2] = -cam.fy * y / z**2

    J = np.zeros((N, 2, 6))
    J[:, :, :3] = np.einsum("nij,njk->nik", dproj, dcam_domega)
    J[:, :, 3:] = dproj
    return J.reshape(2 * N, 6)


def reprojection_rms(pose: Pose, corr: Correspondences) -> float:
    r = _residuals(pose, corr)
    if r is None:
        return float("inf")
    return float(np.sqrt(np.mean(r**2)))


def solve_pnp(corr: Correspondences, init: Optional[Pose] = None,
              max_iters: int = LM_MAX_ITERS, step_tol: float = LM_STEP_TOL) -> Pose:
    """Pose minimizing the mean squared reprojection error.

    Raises PnPDegenerateError for collinear/ill-posed geometry and
    PnPConvergenceError when refinement stalls before the step tolerance.
    """
    shape = _shape_class(corr.points)
    if init is None:
        if shape == "degenerate":
            raise PnPDegenerateError("correspondences are collinear or coincident")
        init = _homography_init(corr) if shape == "planar" else _dlt_init(corr)

    pose = init
    r = _residuals(pose, corr)
    if r is None:
        raise PnPDegenerateError("initialization puts points behind the camera")
    cost = float(r @ r)
    lam = LM_LAMBDA0
    converged = False
    for _ in range(max_iters):
        J = _jacobian(pose, corr)
        JtJ = J.T @ J
        g = J.T @ r
        try:
            step = np.linalg.solve(JtJ + lam * np.eye(6), -g)
        except np.linalg.LinAlgError as exc:
            raise PnPDegenerateError(f"normal equations are singular: {exc}") from exc
        if np.linalg.norm(step) < step_tol:
            converged = True
            break
        new_pose = Pose(pose.rotation @ axis_angle(np.linalg.norm(step[:3]), step[:3])
                        if np.linalg.norm(step[:3]) > 0 else pose.rotation,
                        pose.translation + step[3:])
        r_new = _residuals(new_pose, corr)
        if r_new is not None and float(r_new @ r_new) < cost:
            pose, r, cost = new_pose, r_new, float(r_new @ r_new)
            lam = max(lam * 0.1, 1e-12)
        else:
            lam *= 10.0
    if not converged:
        raise PnPConvergenceError(float(np.sqrt(cost / len(r))))
    return pose


def sym_pose_error(T_est: Pose, T_gt: Pose, spec: SymmetrySpec):
    """(rotation error, translation error) modulo the declared symmetry.

    Rotation error is the minimum geodesic distance between the estimate and
    the ground truth composed with any symmetry group element; the infinite
    fold minimizes over the continuous axis rotation in closed form.
    """
    trans_err = float(np.linalg.norm(T_est.translation - T_gt.translation))
    Q = T_gt.rotation.T @ T_est.rotation

    if spec.fold != INFINITE:
        rot_err = min(geodesic_distance(T_est.rotation, T_gt.rotation @ g)
                      for g in symmetry_group(spec))
        return rot_err, trans_err

    A = rotation_to_axis(spec.axis)
    if spec.has_secondary:
        seconds = [axis_angle(k * 2.0 * np.pi / spec.secondary_fold, spec.secondary_axis)
                   if k else np.eye(3) for k in range(int(spec.secondary_fold))]
    else:
        seconds = [np.eye(3)]
    best = np.pi
    for g2 in seconds:
        # closed-form best axis rotation, then the stable geodesic to it
        B = A @ (Q @ g2.T) @ A.T
        phi = float(np.arctan2(B[1, 0] - B[0, 1], B[0, 0] + B[1, 1]))
        g = A.T @ rot_z(phi) @ A @ g2
        best = min(best, geodesic_distance(T_est.rotation, T_gt.rotation @ g))
    return best, trans_err
