import numpy as np
import pytest

from cslpose.geom import Pose, axis_angle, random_rotation, rot_z
from cslpose.pipeline import default_camera, sample_pose
from cslpose.pnp import (Correspondences, PnPDegenerateError, correspondences_from_map,
                         reprojection_rms, solve_pnp, sym_pose_error)
from cslpose.render import Box, render_scene
from cslpose.symmetry import INFINITE, SymmetrySpec

Z = np.array([0.0, 0.0, 1.0])


def _rendered_correspondences(rng, cam, obj=None, pose=None):
    obj = obj or Box(half_extents=(0.2, 0.3, 0.25))
    pose = pose or sample_pose(obj, cam, rng)
    _, gt = render_scene(pose, obj, cam)
    return pose, correspondences_from_map(gt, cam)


class TestSolvePnp:
    def test_exact_render_round_trip(self, cam, rng):
        spec = SymmetrySpec(axis=Z, fold=1)
        for _ in range(5):
            pose, corr = _rendered_correspondences(rng, cam)
            est = solve_pnp(corr)
            rot_err, trans_err = sym_pose_error(est, pose, spec)
            assert rot_err < 1e-6
            assert trans_err < 1e-6
            assert reprojection_rms(est, corr) < 1e-8

    def test_planar_face_on_view(self, cam):
        # a box viewed exactly face-on yields one visible face: coplanar points
        pose = Pose(np.eye(3), [0, 0, 1.2])
        _, gt = render_scene(pose, Box(half_extents=(0.25, 0.25, 0.2)), cam)
        pts = gt.valid_points()
        assert np.allclose(pts[:, 2], -0.2)  # all on the near face
        corr = correspondences_from_map(gt, cam)
        est = solve_pnp(corr)
        assert reprojection_rms(est, corr) < 1e-8
        _, trans_err = sym_pose_error(est, pose, SymmetrySpec(axis=Z, fold=1))
        assert trans_err < 1e-6

    def test_collinear_degenerate(self, cam):
        pts = np.stack([np.linspace(-0.2, 0.2, 10), np.zeros(10), np.zeros(10)], axis=-1)
        pose = Pose(np.eye(3), [0, 0, 1.0])
        pix = cam.project(pose.transform(pts))
        with pytest.raises(PnPDegenerateError):
            solve_pnp(Correspondences(pix, pts, cam))

    def test_too_few_points(self, cam):
        pts = np.zeros((4, 3))
        pix = np.zeros((4, 2))
        with pytest.raises(ValueError):
            Correspondences(pix, pts, cam)

    def test_permutation_invariance(self, cam, rng):
        pose, corr = _rendered_correspondences(rng, cam)
        perm = rng.permutation(len(corr))
        est1 = solve_pnp(corr)
        est2 = solve_pnp(Correspondences(corr.pixels[perm], corr.points[perm], cam))
        assert np.max(np.abs(est1.rotation - est2.rotation)) < 1e-9
        rot_err, trans_err = sym_pose_error(est1, est2, SymmetrySpec(axis=Z, fold=1))
        assert rot_err < 1e-9
        assert trans_err < 1e-9

    def test_residual_not_worse_than_init(self, cam, rng):
        pose, corr = _rendered_correspondences(rng, cam)
        # perturbed initialization: refinement must not end above it
        w = rng.normal(scale=0.05, size=3)
        init = Pose(pose.rotation @ axis_angle(np.linalg.norm(w), w),
                    pose.translation + rng.normal(scale=0.02, size=3))
        est = solve_pnp(corr, init=init)
        assert reprojection_rms(est, corr) <= reprojection_rms(init, corr) + 1e-12

    def test_noise_scaling_monte_carlo(self, rng):
        # translation error should scale like sigma * z / f (order of magnitude)
        cam = default_camera(width=200, height=200, focal=250.0)
        sigma, n_pts, trials = 0.5, 500, 100
        pose = Pose(np.eye(3), [0, 0, 1.0])
        pts = rng.uniform(-0.25, 0.25, size=(n_pts, 3))
        pix_exact = cam.project(pose.transform(pts))
        scale = sigma * pose.translation[2] / cam.fx
        errs = []
        for _ in range(trials):
            pix = pix_exact + rng.normal(scale=sigma, size=pix_exact.shape)
            est = solve_pnp(Correspondences(pix, pts, cam))
            errs.append(np.linalg.norm(est.translation - pose.translation))
        mean_err = float(np.mean(errs))
        assert scale / (10 * np.sqrt(n_pts)) < mean_err < 10 * scale


class TestSymPoseError:
    def test_symmetric_equivalent_zero(self, rng):
        spec = SymmetrySpec(axis=Z, fold=4)
        R = random_rotation(rng)
        T_gt = Pose(R, [0.1, 0.2, 1.0])
        T_est = Pose(R @ rot_z(np.pi / 2), T_gt.translation)
        rot_err, trans_err = sym_pose_error(T_est, T_gt, spec)
        assert rot_err < 1e-9
        assert trans_err == 0.0

    def test_identity(self, rng):
        spec = SymmetrySpec(axis=Z, fold=4)
        T = Pose(random_rotation(rng), [0, 0, 1])
        assert sym_pose_error(T, T, spec) == (0.0, 0.0)

    def test_half_step_error(self, rng):
        # n = 2, estimate off by theta/2 about the axis (oracle: both elements)
        spec = SymmetrySpec(axis=Z, fold=2)
        R = random_rotation(rng)
        T_gt = Pose(R, [0, 0, 1])
        T_est = Pose(R @ rot_z(np.pi / 2), [0, 0, 1])
        brute = min(np.arccos(np.clip((np.trace((T_gt.rotation @ rot_z(k * np.pi)).T
                                               @ T_est.rotation) - 1) / 2, -1, 1))
                    for k in range(2))
        rot_err, _ = sym_pose_error(T_est, T_gt, spec)
        assert rot_err == pytest.approx(np.pi / 2, abs=1e-9)
        assert rot_err == pytest.approx(brute, abs=1e-9)

    def test_infinite_fold_ignores_axis_rotation(self, rng):
        spec = SymmetrySpec(axis=Z, fold=INFINITE)
        R = random_rotation(rng)
        T_gt = Pose(R, [0, 0, 1])
        T_est = Pose(R @ rot_z(rng.uniform(-np.pi, np.pi)), [0, 0, 1])
        rot_err, _ = sym_pose_error(T_est, T_gt, spec)
        assert rot_err < 1e-9

    def test_infinite_fold_keeps_tilt(self, rng):
        spec = SymmetrySpec(axis=Z, fold=INFINITE)
        R = random_rotation(rng)
        tilt = axis_angle(0.2, np.array([1.0, 0, 0]))
        T_gt = Pose(R, [0, 0, 1])
        T_est = Pose(R @ tilt, [0, 0, 1])
        rot_err, _ = sym_pose_error(T_est, T_gt, spec)
        # brute-force oracle over a dense sweep of axis rotations
        brute = min(np.arccos(np.clip((np.trace((R @ rot_z(a)).T @ T_est.rotation) - 1) / 2,
                                      -1, 1))
                    for a in np.linspace(-np.pi, np.pi, 20001))
        assert rot_err == pytest.approx(brute, abs=1e-6)
        assert rot_err > 0.1

    def test_pseudometric_symmetry(self, rng):
        spec = SymmetrySpec(axis=Z, fold=4)
        A = Pose(random_rotation(rng), [0, 0, 1])
        B = Pose(random_rotation(rng), [0.1, 0, 1.2])
        ab = sym_pose_error(A, B, spec)
        ba = sym_pose_error(B, A, spec)
        assert ab[0] == pytest.approx(ba[0], abs=1e-9)
        assert ab[1] == pytest.approx(ba[1], abs=1e-12)

    def test_two_axis_group(self, rng):
        spec = SymmetrySpec(axis=Z, fold=2, secondary_axis=(1, 0, 0), secondary_fold=2)
        R = random_rotation(rng)
        T_gt = Pose(R, [0, 0, 1])
        flip = axis_angle(np.pi, np.array([1.0, 0, 0]))
        T_est = Pose(R @ flip, [0, 0, 1])
        rot_err, _ = sym_pose_error(T_est, T_gt, spec)
        assert rot_err < 1e-9
