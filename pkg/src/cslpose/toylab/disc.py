"""Textured rotating disc viewed from the side by an orthographic line camera.

The disc has unit radius; the line camera looks along -Y, so pixel x sees the
front perimeter point (x, sqrt(1 - x^2)) in world coordinates.  The texture is
a base albedo pattern tiled `folds` times around the perimeter, which makes
the rendered image exactly periodic in the symmetry angle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_WIDTH = 64


def _divisors(n: int):
    return [d for d in range(1, n) if n % d == 0]


@dataclass
class DiscTexture:
    """Albedo pattern around the disc perimeter with an n-fold symmetry.

    `base` holds the samples of one symmetry period; it must not itself be
    periodic with a smaller period (checked by circular autocorrelation).
    """

    base: np.ndarray
    folds: int
    seed: int | None = None

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        if self.base.ndim != 1 or self.base.size < 2:
            raise ValueError("base pattern must be a 1-D array with >= 2 samples")
        if self.folds < 1:
            raise ValueError("fold count must be >= 1")
        b = self.base - self.base.mean()
        denom = float(b @ b)
        if denom == 0:
            raise ValueError("base pattern is constant")
        for d in _divisors(self.base.size):
            if float(b @ np.roll(b, d)) / denom > 0.9999:
                raise ValueError(f"base pattern repeats with smaller period {d}")

    @property
    def theta(self) -> float:
        return 2.0 * np.pi / self.folds

    @property
    def perimeter(self) -> np.ndarray:
        return np.tile(self.base, self.folds)

    @classmethod
    def random(cls, samples: int = 64, folds: int = 6, seed: int = 0,
               smoothness: int = 12) -> "DiscTexture":
        """Low-pass filtered periodic noise, normalized into [0.05, 0.95].

        `smoothness` is the number of kept harmonics per symmetry period.  It
        sets the task difficulty: very smooth textures let even wrapped
        representations train cleanly, rich ones provoke the patchwork of
        extra transitions that min-over-symmetries losses are prone to.
        """
        rng = np.random.default_rng(seed)
        noise = rng.normal(size=samples)
        spec = np.fft.rfft(noise)
        spec[smoothness + 1:] = 0.0
        base = np.fft.irfft(spec, samples)
        lo, hi = base.min(), base.max()
        base = 0.05 + 0.9 * (base - lo) / (hi - lo)
        return cls(base=base, folds=folds, seed=seed)

    def sample(self, phi) -> np.ndarray:
        """Albedo at perimeter angle(s) phi, by periodic linear interpolation."""
        pattern = self.perimeter
        m = pattern.size
        u = np.mod(np.asarray(phi, dtype=float), 2.0 * np.pi) / (2.0 * np.pi) * m
        k0 = np.floor(u).astype(int) % m
        frac = u - np.floor(u)
        return pattern[k0] * (1.0 - frac) + pattern[(k0 + 1) % m] * frac


def _pixel_angles(width: int) -> np.ndarray:
    """World angle of the front perimeter point seen by each pixel."""
    x = -1.0 + (2.0 * np.arange(width) + 1.0) / width
    return np.arctan2(np.sqrt(1.0 - x * x), x)


def render_disc(alpha: float, tex: DiscTexture, width: int = DEFAULT_WIDTH) -> np.ndarray:
    """Grayscale line image of the disc rotated by alpha, values in [0, 1]."""
    return tex.sample(_pixel_angles(width) - alpha)


def object_point_image(alpha, width: int = DEFAULT_WIDTH) -> np.ndarray:
    """Per-pixel perimeter point in disc coordinates, shape (W, 2) or (N, W, 2)."""
    psi = _pixel_angles(width)
    a = np.asarray(alpha, dtype=float)
    phi = psi[None, :] - a[..., None] if a.ndim else psi - a
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1)


def csl_point_image(alpha, folds: int, width: int = DEFAULT_WIDTH) -> np.ndarray:
    """Object point image with the azimuth multiplied by the fold count."""
    psi = _pixel_angles(width)
    a = np.asarray(alpha, dtype=float)
    phi = psi[None, :] - a[..., None] if a.ndim else psi - a
    return np.stack([np.cos(folds * phi), np.sin(folds * phi)], axis=-1)


@dataclass
class ToyDataset:
    alphas: np.ndarray
    images: np.ndarray  # (N, W)
    texture: DiscTexture
    width: int

    def __len__(self) -> int:
        return self.alphas.shape[0]


def make_datasets(tex: DiscTexture, width: int = DEFAULT_WIDTH):
    """Training set at pi/180 spaced angles, test set at pi/900 spacing."""
    train_alphas = np.arange(360) * (np.pi / 180.0)
    test_alphas = np.arange(1800) * (np.pi / 900.0)
    psi = _pixel_angles(width)
    train_imgs = tex.sample(psi[None, :] - train_alphas[:, None])
    test_imgs = tex.sample(psi[None, :] - test_alphas[:, None])
    return (ToyDataset(train_alphas, train_imgs, tex, width),
            ToyDataset(test_alphas, test_imgs, tex, width))
