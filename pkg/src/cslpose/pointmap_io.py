"""Point map serialization: a simple binary grid format and PNG visualization.

Binary layout (little-endian):

    uint32 W, uint32 H
    then H*W records in row-major order, each:
        float64 x, float64 y, float64 z, uint8 mask

Invalid pixels store zeros with mask 0.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

from .symmetry import PointMap

_HEADER = struct.Struct("<II")
_RECORD_DTYPE = np.dtype([("xyz", "<f8", 3), ("mask", "u1")])


def pointmap_to_bytes(pmap: PointMap) -> bytes:
    records = np.zeros(pmap.height * pmap.width, dtype=_RECORD_DTYPE)
    records["xyz"] = pmap.points.reshape(-1, 3)
    records["mask"] = pmap.mask.reshape(-1).astype(np.uint8)
    return _HEADER.pack(pmap.width, pmap.height) + records.tobytes()


def pointmap_from_bytes(data: bytes) -> PointMap:
    if len(data) < _HEADER.size:
        raise ValueError("truncated point map header")
    w, h = _HEADER.unpack_from(data)
    body = data[_HEADER.size:]
    expected = w * h * _RECORD_DTYPE.itemsize
    if len(body) != expected:
        raise ValueError(f"point map body has {len(body)} bytes, expected {expected}")
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    points = records["xyz"].reshape(h, w, 3).copy()
    mask = records["mask"].reshape(h, w).astype(bool)
    return PointMap(points, mask)


def save_pointmap(pmap: PointMap, path) -> None:
    with open(path, "wb") as f:
        f.write(pointmap_to_bytes(pmap))


def load_pointmap(path) -> PointMap:
    with open(path, "rb") as f:
        return pointmap_from_bytes(f.read())


def pointmap_to_rgb(pmap: PointMap, scale: float | None = None) -> np.ndarray:
    """XYZ -> RGB color coding: each axis mapped from [-scale, scale] to [0, 255].

    Invalid pixels are black.  `scale` defaults to the largest absolute valid
    coordinate.
    """
    if scale is None:
        scale = float(np.max(np.abs(pmap.valid_points()))) if pmap.valid_count else 1.0
        scale = scale or 1.0
    rgb = np.clip((pmap.points / scale + 1.0) / 2.0, 0.0, 1.0)
    rgb = (rgb * 255).astype(np.uint8)
    return np.where(pmap.mask[..., None], rgb, 0)


def save_pointmap_png(pmap: PointMap, path, scale: float | None = None) -> None:
    Image.fromarray(pointmap_to_rgb(pmap, scale), mode="RGB").save(path)
