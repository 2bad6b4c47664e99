"""Angle recovery from network outputs and sweep diagnostics."""

from __future__ import annotations

import numpy as np

from .disc import DiscTexture
from .representations import REPRESENTATIONS


def recover_angle(output, representation: str, tex: DiscTexture, width: int = 64) -> float:
    """Decode one network output back to a disc angle.

    For the csl representations the result is one representative of the
    symmetric equivalence class.  Image outputs may be given as (2, W) or
    (W, 2); they are matched against precomputed target images on a pi/1800
    grid with sub-grid interpolation.
    """
    rep = REPRESENTATIONS[representation]
    out = np.asarray(output, dtype=float)
    if rep.kind == "image":
        if out.ndim != 2:
            raise ValueError("image output must be 2-D")
        if out.shape == (2, width):
            out = out.T  # accept channel-first layout as well
        batch = out[None, ...]
    else:
        batch = out.reshape(1, -1)
    return float(rep.decode(tex.theta, batch, tex, width)[0])


def angle_errors(pred_angles: np.ndarray, true_angles: np.ndarray, theta: float) -> np.ndarray:
    """Symmetry-aware per-sample angle errors (each bounded by theta/2)."""
    d = np.asarray(true_angles, dtype=float) - np.asarray(pred_angles, dtype=float)
    return np.abs(d - theta * np.round(d / theta))


def count_transitions(pred_angles: np.ndarray, theta: float,
                      threshold: float | None = None) -> int:
    """Count steep jumps of a predicted-angle sweep in the symmetry domain.

    Consecutive samples whose wrapped angle distance exceeds the threshold
    (default theta/16) are grouped into runs; each run counts as one
    transition, so a jump smeared over a few samples is not over-counted.
    """
    pred_angles = np.asarray(pred_angles, dtype=float)
    if threshold is None:
        threshold = theta / 16.0
    steps = angle_errors(pred_angles[1:], pred_angles[:-1], theta)
    high = steps > threshold
    starts = high & ~np.concatenate([[False], high[:-1]])
    return int(np.sum(starts))


def continuity_probe(target_sequence: np.ndarray) -> dict:
    """Adjacent-step statistics of a target sequence over a fine sweep.

    A representation that traces a closed loop keeps the max step close to the
    median; a wrapped representation shows an outlier step of half a period or
    more.
    """
    seq = np.asarray(target_sequence, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    steps = np.linalg.norm(np.diff(seq, axis=0), axis=-1)
    max_step = float(steps.max())
    median_step = float(np.median(steps))
    return {"max_step": max_step, "median_step": median_step,
            "ratio": max_step / median_step if median_step > 0 else np.inf}
