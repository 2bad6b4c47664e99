import numpy as np
import pytest

from cslpose.geom import Pose
from cslpose.pipeline import (DegenerateSceneError, make_object, roundtrip,
                              sample_pose)
from cslpose.symmetry import INFINITE, SymmetrySpec


def test_exact_box_roundtrip(cam, rng):
    obj = make_object("box", (0.25, 0.25, 0.4))
    spec = SymmetrySpec(axis=(0, 0, 1), fold=4)
    pose = sample_pose(obj, cam, rng)
    rep = roundtrip(obj, pose, spec, cam)
    assert rep.map_alignment_error < 1e-6
    assert rep.rotation_error < 1e-6
    assert rep.translation_error < 1e-6
    assert rep.reprojection_rms < 1e-8
    assert rep.valid_pixels >= 6


def test_cylinder_infinite_fold(cam, rng):
    obj = make_object("cylinder", (0.25, 0.6))
    spec = SymmetrySpec(axis=(0, 0, 1), fold=INFINITE)
    pose = sample_pose(obj, cam, rng)
    rep = roundtrip(obj, pose, spec, cam)
    assert rep.map_alignment_error < 1e-6
    assert rep.rotation_error < 1e-6


def test_noise_reported_not_fatal(cam, rng):
    obj = make_object("box", (0.25, 0.25, 0.4))
    spec = SymmetrySpec(axis=(0, 0, 1), fold=4)
    pose = sample_pose(obj, cam, rng)
    rep = roundtrip(obj, pose, spec, cam, noise_sigma=0.005, seed=1)
    assert rep.rotation_error > 0.0
    assert np.isfinite(rep.rotation_error)
    assert np.isfinite(rep.translation_error)


def test_degenerate_scene_raises(cam):
    obj = make_object("box", (0.001, 0.001, 0.001))  # renders to no pixels
    spec = SymmetrySpec(axis=(0, 0, 1), fold=4)
    pose = Pose(np.eye(3), [0, 0, 3.0])
    with pytest.raises(DegenerateSceneError):
        roundtrip(obj, pose, spec, cam)


def test_make_object_validation():
    with pytest.raises(ValueError):
        make_object("sphere", (1.0,))
