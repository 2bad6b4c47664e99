"""Request/response models for the service (and the CLI, which reuses them).

Point maps travel as base64 of the binary grid format, so the HTTP payload
and the on-disk file format are the same bytes.
"""

from __future__ import annotations

import base64
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator

from ..geom import Pose
from ..pointmap_io import pointmap_from_bytes, pointmap_to_bytes
from ..render import Box, Cylinder
from ..reverse import RansacConfig
from ..symmetry import INFINITE, CameraModel, PointMap, SymmetrySpec
from ..toylab.study import ExperimentConfig


class SymmetrySpecModel(BaseModel):
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    fold: Union[int, Literal["inf"]] = 1
    secondary_axis: Optional[tuple[float, float, float]] = None
    secondary_fold: Optional[int] = None

    def to_spec(self) -> SymmetrySpec:
        fold = INFINITE if self.fold == "inf" else self.fold
        return SymmetrySpec(axis=np.array(self.axis), fold=fold,
                            secondary_axis=None if self.secondary_axis is None
                            else np.array(self.secondary_axis),
                            secondary_fold=self.secondary_fold)


class CameraModelModel(BaseModel):
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def to_camera(self) -> CameraModel:
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.width, self.height)

    @classmethod
    def from_camera(cls, cam: CameraModel) -> "CameraModelModel":
        return cls(fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy,
                   width=cam.width, height=cam.height)


class PoseModel(BaseModel):
    rotation: list[list[float]]
    translation: tuple[float, float, float]

    @field_validator("rotation")
    @classmethod
    def _check_rotation_shape(cls, v):
        if len(v) != 3 or any(len(row) != 3 for row in v):
            raise ValueError("rotation must be a 3x3 matrix")
        return v

    def to_pose(self) -> Pose:
        return Pose(np.array(self.rotation), np.array(self.translation))

    @classmethod
    def from_pose(cls, pose: Pose) -> "PoseModel":
        return cls(rotation=pose.rotation.tolist(),
                   translation=tuple(pose.translation.tolist()))


class PointMapPayload(BaseModel):
    """Binary grid format (see pointmap_io), base64 encoded."""

    data: str

    def to_pointmap(self) -> PointMap:
        return pointmap_from_bytes(base64.b64decode(self.data))

    @classmethod
    def from_pointmap(cls, pmap: PointMap) -> "PointMapPayload":
        return cls(data=base64.b64encode(pointmap_to_bytes(pmap)).decode("ascii"))


class RansacConfigModel(BaseModel):
    num_samples: int = 16
    collinearity_epsilon: float = 1e-6
    seed: int = 0

    def to_config(self) -> RansacConfig:
        return RansacConfig(self.num_samples, self.collinearity_epsilon, self.seed)


class ObjectModel(BaseModel):
    kind: Literal["box", "cylinder"] = "box"
    size: list[float] = Field(default=[0.25, 0.25, 0.4],
                              description="box: three half extents; cylinder: radius, height")

    def to_object(self):
        if self.kind == "box":
            if len(self.size) != 3:
                raise ValueError("box size needs three half extents")
            return Box(half_extents=tuple(self.size))
        if len(self.size) != 2:
            raise ValueError("cylinder size needs radius and height")
        return Cylinder(radius=self.size[0], height=self.size[1])


class RecoverRequest(BaseModel):
    star_map: PointMapPayload
    dash_map: PointMapPayload
    camera: CameraModelModel
    symmetry: SymmetrySpecModel
    ransac: RansacConfigModel = RansacConfigModel()
    solve_pose: bool = True


class RecoverResponse(BaseModel):
    point_map: PointMapPayload
    pose: Optional[PoseModel]
    reprojection_rms: Optional[float]
    reference_total_error: float


class RoundtripRequest(BaseModel):
    object: ObjectModel = ObjectModel()
    symmetry: SymmetrySpecModel = SymmetrySpecModel(fold=4)
    camera: Optional[CameraModelModel] = None
    pose: Optional[PoseModel] = None  # sampled from the seed when omitted
    noise_sigma: float = 0.0
    seed: int = 0
    ransac: RansacConfigModel = RansacConfigModel()


class RoundtripResponse(BaseModel):
    valid_pixels: int
    map_alignment_error: float
    rotation_error: float
    translation_error: float
    reprojection_rms: float
    reference_total_error: float


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class LossCheckRequest(BaseModel):
    trials: int = 1000
    seed: int = 0


class LossCheckResponse(BaseModel):
    checks: list[CheckResult]
    all_passed: bool


class ToyConfigModel(BaseModel):
    representation: str = "all"
    epochs: int = 500
    batch_size: int = 10
    learning_rate: float = 1e-3
    num_restarts: int = 11
    base_seed: int = 0
    image_width: int = 64
    texture_folds: int = 6
    texture_samples: int = 64
    texture_seed: int = 0
    texture_smoothness: int = 12
    transition_threshold: Optional[float] = None
    workers: Optional[int] = None

    def to_config(self) -> ExperimentConfig:
        return ExperimentConfig(**self.model_dump())


class ToyRowModel(BaseModel):
    representation: str
    loss: str
    pixel_error: Optional[float]
    angle_error: float
    transitions: int
    seed_of_median: int
    median_test_loss: float


class ToyRunRequest(BaseModel):
    config: ToyConfigModel = ToyConfigModel()


class ToyRunResponse(BaseModel):
    rows: list[ToyRowModel]
    table_csv: str
    sweeps_csv: str
