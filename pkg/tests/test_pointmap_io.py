import numpy as np
import pytest

from cslpose.pointmap_io import (load_pointmap, pointmap_from_bytes, pointmap_to_bytes,
                                 pointmap_to_rgb, save_pointmap, save_pointmap_png)
from cslpose.symmetry import PointMap


def _sample_map(rng):
    pts = rng.normal(size=(6, 9, 3))
    mask = rng.uniform(size=(6, 9)) > 0.4
    return PointMap(pts, mask)


def test_bytes_round_trip(rng):
    m = _sample_map(rng)
    out = pointmap_from_bytes(pointmap_to_bytes(m))
    assert np.array_equal(out.mask, m.mask)
    assert np.array_equal(out.points, m.points)  # float64 storage is lossless


def test_header_layout(rng):
    m = _sample_map(rng)
    data = pointmap_to_bytes(m)
    w = int.from_bytes(data[0:4], "little")
    h = int.from_bytes(data[4:8], "little")
    assert (w, h) == (9, 6)
    assert len(data) == 8 + w * h * 25  # 3 float64 + mask byte per pixel


def test_truncated_errors():
    with pytest.raises(ValueError):
        pointmap_from_bytes(b"\x01")
    with pytest.raises(ValueError):
        pointmap_from_bytes(b"\x02\x00\x00\x00\x02\x00\x00\x00" + b"\x00" * 10)


def test_file_round_trip(tmp_path, rng):
    m = _sample_map(rng)
    path = tmp_path / "map.pmap"
    save_pointmap(m, path)
    out = load_pointmap(path)
    assert out.allclose(m, atol=0)


def test_rgb_coding(rng):
    m = _sample_map(rng)
    rgb = pointmap_to_rgb(m)
    assert rgb.shape == (6, 9, 3)
    assert rgb.dtype == np.uint8
    assert np.all(rgb[~m.mask] == 0)


def test_png_written(tmp_path, rng):
    from PIL import Image

    m = _sample_map(rng)
    path = tmp_path / "map.png"
    save_pointmap_png(m, path)
    img = Image.open(path)
    assert img.size == (9, 6)
    assert img.mode == "RGB"
