"""Exercises the HTTP surface: endpoints, wire formats, error mapping."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from cslpose.geom import Pose, random_rotation
from cslpose.pipeline import default_camera
from cslpose.render import Box, render_scene
from cslpose.service.app import create_app
from cslpose.service.schemas import CameraModelModel, PointMapPayload, PoseModel
from cslpose.symmetry import SymmetrySpec, dash_map, star_map
from cslpose.reverse import best_global_alignment


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    r = client.get("/api/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_roundtrip_endpoint(client):
    r = client.post("/api/roundtrip", json={
        "object": {"kind": "box", "size": [0.25, 0.25, 0.4]},
        "symmetry": {"axis": [0, 0, 1], "fold": 4},
        "seed": 2,
    })
    assert r.status_code == 200
    body = r.json()
    assert body["rotation_error"] < 1e-6
    assert body["translation_error"] < 1e-6


def test_roundtrip_infinite_fold_wire_format(client):
    r = client.post("/api/roundtrip", json={
        "object": {"kind": "cylinder", "size": [0.25, 0.6]},
        "symmetry": {"axis": [0, 0, 1], "fold": "inf"},
        "seed": 1,
    })
    assert r.status_code == 200
    assert r.json()["rotation_error"] < 1e-6


def test_recover_endpoint_round_trips_maps(client):
    rng = np.random.default_rng(5)
    cam = default_camera()
    obj = Box(half_extents=(0.25, 0.25, 0.4))
    spec = SymmetrySpec(axis=(0, 0, 1), fold=4)
    pose = Pose(random_rotation(rng), [0.02, -0.01, 2.2])
    _, gt = render_scene(pose, obj, cam)
    smap = star_map(gt, spec)
    dmap = dash_map(gt, pose, cam)

    r = client.post("/api/recover", json={
        "star_map": PointMapPayload.from_pointmap(smap).model_dump(),
        "dash_map": PointMapPayload.from_pointmap(dmap).model_dump(),
        "camera": CameraModelModel.from_camera(cam).model_dump(),
        "symmetry": {"axis": [0, 0, 1], "fold": 4},
    })
    assert r.status_code == 200
    body = r.json()
    recovered = PointMapPayload(**body["point_map"]).to_pointmap()
    _, err = best_global_alignment(gt, recovered, spec)
    assert err < 1e-6
    assert body["pose"] is not None
    est = PoseModel(**body["pose"]).to_pose()
    assert np.allclose(est.translation, pose.translation, atol=1e-6)
    assert body["reprojection_rms"] < 1e-8


def test_recover_without_pose_solving(client):
    rng = np.random.default_rng(6)
    cam = default_camera()
    obj = Box(half_extents=(0.2, 0.3, 0.25))
    spec = SymmetrySpec(axis=(0, 0, 1), fold=2)
    pose = Pose(random_rotation(rng), [0, 0, 2.0])
    _, gt = render_scene(pose, obj, cam)
    r = client.post("/api/recover", json={
        "star_map": PointMapPayload.from_pointmap(star_map(gt, spec)).model_dump(),
        "dash_map": PointMapPayload.from_pointmap(dash_map(gt, pose, cam)).model_dump(),
        "camera": CameraModelModel.from_camera(cam).model_dump(),
        "symmetry": {"axis": [0, 0, 1], "fold": 2},
        "solve_pose": False,
    })
    assert r.status_code == 200
    assert r.json()["pose"] is None


def test_losscheck_endpoint(client):
    r = client.post("/api/losscheck", json={"trials": 50, "seed": 0})
    assert r.status_code == 200
    body = r.json()
    assert body["all_passed"] is True
    assert len(body["checks"]) >= 8


def test_toy_endpoint_small(client):
    r = client.post("/api/toy", json={"config": {
        "representation": "csl-vector/ae", "epochs": 3, "num_restarts": 1,
        "image_width": 32, "texture_samples": 32, "workers": 1,
    }})
    assert r.status_code == 200
    body = r.json()
    assert len(body["rows"]) == 1
    assert body["table_csv"].startswith("representation,loss,")


def test_invalid_symmetry_maps_to_422(client):
    r = client.post("/api/roundtrip", json={
        "object": {"kind": "box", "size": [0.2, 0.2, 0.2]},
        "symmetry": {"axis": [0, 0, 0], "fold": 4},
    })
    assert r.status_code == 422
    assert r.json()["detail"]["kind"] == "invalid_config"


def test_degenerate_scene_maps_to_422(client):
    r = client.post("/api/roundtrip", json={
        "object": {"kind": "box", "size": [0.0001, 0.0001, 0.0001]},
        "symmetry": {"axis": [0, 0, 1], "fold": 4},
        "pose": PoseModel(rotation=np.eye(3).tolist(),
                          translation=(0, 0, 3.0)).model_dump(),
    })
    assert r.status_code == 422
    assert r.json()["detail"]["kind"] == "degenerate_scene"


def test_pointmap_payload_is_binary_grid_format(client):
    import base64
    from cslpose.pointmap_io import pointmap_to_bytes
    from cslpose.symmetry import PointMap

    rng = np.random.default_rng(0)
    m = PointMap(rng.normal(size=(3, 4, 3)), rng.uniform(size=(3, 4)) > 0.5)
    payload = PointMapPayload.from_pointmap(m)
    assert base64.b64decode(payload.data) == pointmap_to_bytes(m)
