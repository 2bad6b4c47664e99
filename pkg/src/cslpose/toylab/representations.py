"""The seven output representation / loss pairings of the disc study.

Each entry knows how to build targets from ground-truth angles, evaluate its
training loss on a batch of network outputs (returning the gradient in the
same layout the network produces) and decode outputs back to an angle.

The batched losses here are vectorized re-implementations of the reference
functions in :mod:`cslpose.losses`; the test suite cross-checks them sample by
sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from ..geom import rot2
from .disc import DiscTexture, csl_point_image, object_point_image

_TINY = 1e-12


@dataclass(frozen=True)
class Representation:
    name: str
    loss_name: str
    kind: str            # "scalar", "vector" or "image"
    out_dim: int         # head units or output channels
    targets: Callable    # (alphas, tex, width) -> array in net layout
    loss: Callable       # (theta, Y, out, pre=None) -> (value, grad)
    decode: Callable     # (theta, outputs, tex, width) -> angles
    precompute: Callable | None = None  # (theta, Y) -> reusable equivalents

    @property
    def key(self) -> str:
        return f"{self.name}/{self.loss_name}"


def _norm_angle_targets(alphas, tex, width):
    theta = tex.theta
    return (np.mod(alphas, theta))[:, None]


def _angle_targets(alphas, tex, width):
    return np.asarray(alphas, dtype=float)[:, None]


def _vector_targets(alphas, tex, width):
    return np.stack([np.cos(alphas), np.sin(alphas)], axis=-1)


def _csl_vector_targets(alphas, tex, width):
    n = tex.folds
    return np.stack([np.cos(n * alphas), np.sin(n * alphas)], axis=-1)


def _po_image_targets(alphas, tex, width):
    return object_point_image(alphas, width)  # (N, W, 2)


def _csl_image_targets(alphas, tex, width):
    return csl_point_image(alphas, tex.folds, width)


def _scalar_ae(theta, Y, out, pre=None):
    r = out - Y
    return float(np.mean(np.abs(r))), np.sign(r) / r.shape[0]


def _scalar_mos_ae(theta, Y, out, pre=None):
    d = Y - out
    k0 = np.floor(-d / theta)
    e0 = np.abs(d + k0 * theta)
    e1 = np.abs(d + (k0 + 1) * theta)
    k = np.where(e0 <= e1, k0, k0 + 1)
    m = d + k * theta
    return float(np.mean(np.abs(m))), -np.sign(m) / m.shape[0]


@lru_cache(maxsize=8)
def _rot_stack(theta: float) -> np.ndarray:
    n = int(round(2.0 * np.pi / theta))
    return np.stack([rot2(k * theta) for k in range(n)])


def _vector_ae(theta, Y, out, pre=None):
    r = out - Y
    norms = np.linalg.norm(r, axis=-1, keepdims=True)
    safe = np.where(norms > _TINY, norms, 1.0)
    g = np.where(norms > _TINY, r / safe, 0.0) / r.shape[0]
    return float(np.mean(norms)), g


def _vector_equivalents(theta, Y):
    return np.einsum("kij,bj->kbi", _rot_stack(theta), Y)  # (n, B, 2)


def _vector_mos_ae(theta, Y, out, pre=None):
    ry = _vector_equivalents(theta, Y) if pre is None else pre
    e = np.linalg.norm(ry - out[None], axis=-1)  # (n, B)
    k = np.argmin(e, axis=0)
    B = Y.shape[0]
    chosen = ry[k, np.arange(B)]
    r = out - chosen
    norms = np.linalg.norm(r, axis=-1, keepdims=True)
    safe = np.where(norms > _TINY, norms, 1.0)
    g = np.where(norms > _TINY, r / safe, 0.0) / B
    return float(np.mean(e[k, np.arange(B)])), g


def _image_mae(theta, Y, out, pre=None):
    r = out - Y
    norms = np.linalg.norm(r, axis=-1, keepdims=True)
    safe = np.where(norms > _TINY, norms, 1.0)
    g = np.where(norms > _TINY, r / safe, 0.0) / (Y.shape[0] * Y.shape[1])
    return float(np.mean(norms)), g


def _image_equivalents(theta, Y):
    return np.einsum("kij,bwj->kbwi", _rot_stack(theta), Y)  # (n, B, W, 2)


def _image_pmos_mae(theta, Y, out, pre=None):
    y2 = _image_equivalents(theta, Y) if pre is None else pre
    e = np.linalg.norm(y2 - out[None], axis=-1)   # (n, B, W)
    k = np.argmin(e, axis=0)                      # (B, W)
    chosen = np.take_along_axis(y2, k[None, ..., None], axis=0)[0]
    r = out - chosen
    norms = np.linalg.norm(r, axis=-1, keepdims=True)
    safe = np.where(norms > _TINY, norms, 1.0)
    g = np.where(norms > _TINY, r / safe, 0.0) / (Y.shape[0] * Y.shape[1])
    return float(np.mean(np.min(e, axis=0))), g


def _image_imos_mae(theta, Y, out, pre=None):
    y2 = _image_equivalents(theta, Y) if pre is None else pre
    e = np.linalg.norm(y2 - out[None], axis=-1)   # (n, B, W)
    per_image = np.mean(e, axis=2)                # (n, B)
    k = np.argmin(per_image, axis=0)              # (B,)
    B = Y.shape[0]
    chosen = y2[k, np.arange(B)]
    r = out - chosen
    norms = np.linalg.norm(r, axis=-1, keepdims=True)
    safe = np.where(norms > _TINY, norms, 1.0)
    g = np.where(norms > _TINY, r / safe, 0.0) / (B * Y.shape[1])
    return float(np.mean(per_image[k, np.arange(B)])), g


def _decode_scalar(theta, outputs, tex, width):
    return np.asarray(outputs, dtype=float)[:, 0]


def _decode_vector(theta, outputs, tex, width):
    v = np.asarray(outputs, dtype=float)
    if np.any(np.linalg.norm(v, axis=-1) < _TINY):
        raise ValueError("cannot decode a zero-norm vector output")
    return np.arctan2(v[:, 1], v[:, 0])


def _decode_csl_vector(theta, outputs, tex, width):
    return _decode_vector(theta, outputs, tex, width) / tex.folds


class ImageAngleDecoder:
    """Angle lookup against precomputed target images on a pi/1800 grid.

    The nearest grid image (L2) gives a coarse angle; a parabola through the
    squared distances of its two neighbors refines below grid resolution.
    """

    GRID_STEP = np.pi / 1800.0

    def __init__(self, target_fn, tex: DiscTexture, width: int):
        self.angles = np.arange(3600) * self.GRID_STEP
        grid = target_fn(self.angles, tex, width)      # (M, 2, W)
        self.flat = grid.reshape(grid.shape[0], -1)
        self.sq = np.sum(self.flat**2, axis=1)

    def __call__(self, outputs: np.ndarray) -> np.ndarray:
        o = outputs.reshape(outputs.shape[0], -1)
        d2 = self.sq[None, :] - 2.0 * (o @ self.flat.T) + np.sum(o**2, axis=1)[:, None]
        best = np.argmin(d2, axis=1)
        m = self.flat.shape[0]
        dm = d2[np.arange(len(best)), (best - 1) % m]
        d0 = d2[np.arange(len(best)), best]
        dp = d2[np.arange(len(best)), (best + 1) % m]
        denom = dm - 2.0 * d0 + dp
        shift = np.where(np.abs(denom) > _TINY, 0.5 * (dm - dp) / np.where(denom == 0, 1, denom), 0.0)
        shift = np.clip(shift, -0.5, 0.5)
        return (best + shift) * self.GRID_STEP


_decoder_cache: dict = {}


def _image_decoder(target_fn, tex: DiscTexture, width: int) -> ImageAngleDecoder:
    key = (target_fn.__name__, tex.folds, tex.seed, width, tex.base.tobytes())
    if key not in _decoder_cache:
        _decoder_cache[key] = ImageAngleDecoder(target_fn, tex, width)
    return _decoder_cache[key]


def _decode_po_image(theta, outputs, tex, width):
    return _image_decoder(_po_image_targets, tex, width)(outputs)


def _decode_csl_image(theta, outputs, tex, width):
    return _image_decoder(_csl_image_targets, tex, width)(outputs)


REPRESENTATIONS = {
    r.key: r for r in [
        Representation("norm-angle", "ae", "scalar", 1,
                       _norm_angle_targets, _scalar_ae, _decode_scalar),
        Representation("angle", "mos-ae", "scalar", 1,
                       _angle_targets, _scalar_mos_ae, _decode_scalar),
        Representation("vector", "mos-ae", "vector", 2,
                       _vector_targets, _vector_mos_ae, _decode_vector,
                       precompute=_vector_equivalents),
        Representation("csl-vector", "ae", "vector", 2,
                       _csl_vector_targets, _vector_ae, _decode_csl_vector),
        Representation("po-img", "pmos-mae", "image", 2,
                       _po_image_targets, _image_pmos_mae, _decode_po_image,
                       precompute=_image_equivalents),
        Representation("po-img", "imos-mae", "image", 2,
                       _po_image_targets, _image_imos_mae, _decode_po_image,
                       precompute=_image_equivalents),
        Representation("csl-img", "mae", "image", 2,
                       _csl_image_targets, _image_mae, _decode_csl_image),
    ]
}

REPRESENTATION_KEYS = list(REPRESENTATIONS)
