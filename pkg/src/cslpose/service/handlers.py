"""Service logic shared by the HTTP app and the CLI's local mode."""

from __future__ import annotations

import numpy as np

from .. import losses
from ..geom import axis_angle, rot2
from ..pipeline import default_camera, roundtrip, sample_pose
from ..pnp import correspondences_from_map, reprojection_rms, solve_pnp
from ..reverse import reverse_map_detailed
from ..symmetry import star_points
from ..toylab.study import run_study
from .schemas import (CheckResult, LossCheckRequest, LossCheckResponse, PointMapPayload,
                      PoseModel, RecoverRequest, RecoverResponse, RoundtripRequest,
                      RoundtripResponse, ToyRowModel, ToyRunRequest, ToyRunResponse)


def handle_recover(req: RecoverRequest) -> RecoverResponse:
    cam = req.camera.to_camera()
    spec = req.symmetry.to_spec()
    star = req.star_map.to_pointmap()
    dash = req.dash_map.to_pointmap()
    recovered, info = reverse_map_detailed(star, dash, spec, req.ransac.to_config(), cam)
    pose_model = None
    rms = None
    if req.solve_pose:
        corr = correspondences_from_map(recovered, cam)
        pose = solve_pnp(corr)
        pose_model = PoseModel.from_pose(pose)
        rms = reprojection_rms(pose, corr)
    return RecoverResponse(point_map=PointMapPayload.from_pointmap(recovered),
                           pose=pose_model, reprojection_rms=rms,
                           reference_total_error=info["total_error"])


def handle_roundtrip(req: RoundtripRequest) -> RoundtripResponse:
    obj = req.object.to_object()
    cam = req.camera.to_camera() if req.camera else default_camera()
    spec = req.symmetry.to_spec()
    rng = np.random.default_rng(req.seed)
    pose = req.pose.to_pose() if req.pose else sample_pose(obj, cam, rng)
    report = roundtrip(obj, pose, spec, cam, noise_sigma=req.noise_sigma,
                       seed=req.seed, ransac=req.ransac.to_config())
    return RoundtripResponse(**report.as_dict())


def handle_toy(req: ToyRunRequest) -> ToyRunResponse:
    result = run_study(req.config.to_config())
    rows = [ToyRowModel(representation=r.representation, loss=r.loss,
                        pixel_error=r.pixel_error, angle_error=r.angle_error,
                        transitions=r.transitions, seed_of_median=r.seed_of_median,
                        median_test_loss=r.median_test_loss)
            for r in result.rows]
    return ToyRunResponse(rows=rows, table_csv=result.table_csv(),
                          sweeps_csv=result.sweeps_csv())


def _random_map_pair(rng, n_px: int = 24):
    y = rng.normal(size=(n_px, 2))
    yhat = y + rng.normal(scale=rng.uniform(0.01, 1.0), size=(n_px, 2))
    return y, yhat


def _grad_check(f, grad, x, h: float = 1e-5, tol: float = 1e-4):
    num = losses.numeric_gradient(f, np.array(x, dtype=float), h)
    ana = np.asarray(grad)
    denom = max(float(np.max(np.abs(num))), float(np.max(np.abs(ana))), 1e-12)
    return float(np.max(np.abs(num - ana))) / denom < tol


def handle_losscheck(req: LossCheckRequest) -> LossCheckResponse:
    """Property battery over the representation losses."""
    rng = np.random.default_rng(req.seed)
    checks: list[CheckResult] = []

    def record(name, passed, detail=""):
        checks.append(CheckResult(name=name, passed=bool(passed), detail=detail))

    folds = [2, 3, 4, 6, 12]

    ok, worst = True, ""
    for _ in range(req.trials):
        n = folds[rng.integers(len(folds))]
        theta = 2 * np.pi / n
        y, yhat = _random_map_pair(rng)
        p = losses.pmos_mae(y, yhat, theta)
        im = losses.imos_mae(y, yhat, theta)
        if not p <= im:
            ok, worst = False, f"pmos={p!r} > imos={im!r}"
            break
    record("pmos_mae <= imos_mae", ok, worst)

    n = 6
    theta = 2 * np.pi / n
    y = rng.normal(size=(24, 2))
    k = int(rng.integers(1, n))
    yhat = y @ rot2(k * theta).T
    record("exact global equivalent: both losses zero",
           losses.pmos_mae(y, yhat, theta) == 0.0 and losses.imos_mae(y, yhat, theta) == 0.0)

    ks = rng.integers(0, n, size=24)
    ks[0], ks[1] = 0, 3  # guarantee a mix
    yhat = np.stack([y[i] @ rot2(int(ks[i]) * theta).T for i in range(24)])
    p, im = losses.pmos_mae(y, yhat, theta), losses.imos_mae(y, yhat, theta)
    record("mixed equivalents: pmos strictly below imos", p < im,
           f"pmos={p:.3e} imos={im:.3e}")

    ok = True
    for _ in range(req.trials):
        n = folds[rng.integers(len(folds))]
        theta = 2 * np.pi / n
        a, b = rng.uniform(-10, 10, size=2)
        v = losses.mos_ae(a, b, theta)
        if not (v <= theta / 2 and v == losses.mos_ae(b, a, theta)):
            ok = False
            break
    record("mos_ae bounded by theta/2 and symmetric", ok)

    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    y3 = rng.normal(size=(24, 3))
    yhat3 = y3 @ axis_angle(theta, axis).T
    sy, syh = star_points(y3, axis, n), star_points(yhat3, axis, n)
    err = losses.mae(sy, syh)
    record("star collapses global equivalents (mae < 1e-9)", err < 1e-9, f"mae={err:.2e}")

    # gradient spot checks away from min-branch boundaries
    n = 6
    theta = 2 * np.pi / n
    a, b = 0.21, 0.34
    record("ae gradient matches finite differences",
           _grad_check(lambda x: losses.ae(a, float(x)), losses.ae_grad(a, b), b))
    record("mos_ae gradient matches finite differences",
           _grad_check(lambda x: losses.mos_ae(a, float(x), theta),
                       losses.mos_ae_grad(a, b, theta), b))
    yv = np.array([0.9, 0.2])
    yhv = np.array([0.3, -0.5])
    record("vec_mos_ae gradient matches finite differences",
           _grad_check(lambda x: losses.vec_mos_ae(yv, x, theta),
                       losses.vec_mos_ae_grad(yv, yhv, theta), yhv))
    ym = rng.normal(size=(6, 2))
    yhm = ym + rng.normal(scale=0.2, size=(6, 2))
    record("pmos_mae gradient matches finite differences",
           _grad_check(lambda x: losses.pmos_mae(ym, x, theta),
                       losses.pmos_mae_grad(ym, yhm, theta), yhm))
    record("imos_mae gradient matches finite differences",
           _grad_check(lambda x: losses.imos_mae(ym, x, theta),
                       losses.imos_mae_grad(ym, yhm, theta), yhm))

    return LossCheckResponse(checks=checks, all_passed=all(c.passed for c in checks))
