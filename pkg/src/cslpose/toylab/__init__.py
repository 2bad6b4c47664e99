"""1-DOF toy laboratory: a textured disc seen by a line camera, a small
from-scratch convolutional network, and the representation comparison study."""

from .disc import DiscTexture, ToyDataset, make_datasets, render_disc, object_point_image
from .study import ExperimentConfig, StudyResult, run_study, train
from .decode import recover_angle, count_transitions, continuity_probe

__all__ = [
    "DiscTexture", "ToyDataset", "make_datasets", "render_disc", "object_point_image",
    "ExperimentConfig", "StudyResult", "run_study", "train",
    "recover_angle", "count_transitions", "continuity_probe",
]
