import numpy as np
import pytest

from cslpose.toylab.disc import (DiscTexture, csl_point_image, make_datasets,
                                 object_point_image, render_disc)


class TestDiscTexture:
    def test_random_texture_valid(self):
        tex = DiscTexture.random(64, 6, seed=0)
        assert tex.base.size == 64
        assert tex.perimeter.size == 64 * 6
        assert tex.base.min() >= 0.0
        assert tex.base.max() <= 1.0

    def test_sample_periodic_in_theta(self):
        tex = DiscTexture.random(64, 6, seed=1)
        phis = np.linspace(0, 2 * np.pi, 321)
        assert np.allclose(tex.sample(phis), tex.sample(phis + tex.theta), atol=1e-9)
        assert np.allclose(tex.sample(phis), tex.sample(phis + 2 * np.pi), atol=1e-9)

    def test_rejects_smaller_period(self):
        base = np.tile([0.1, 0.9, 0.4, 0.6], 4)  # period 4 inside 16 samples
        with pytest.raises(ValueError):
            DiscTexture(base=base, folds=6)

    def test_rejects_constant(self):
        with pytest.raises(ValueError):
            DiscTexture(base=np.full(16, 0.5), folds=6)

    def test_accepts_aperiodic_base(self, rng):
        DiscTexture(base=rng.uniform(size=16), folds=6)


class TestRenderDisc:
    def setup_method(self):
        self.tex = DiscTexture.random(64, 6, seed=2)

    def test_periodic_in_symmetry_angle(self):
        for alpha in [0.0, 0.4, 2.2]:
            a = render_disc(alpha, self.tex)
            b = render_disc(alpha + self.tex.theta, self.tex)
            assert np.allclose(a, b, atol=1e-9)

    def test_periodic_in_two_pi(self):
        a = render_disc(0.7, self.tex)
        b = render_disc(0.7 + 2 * np.pi, self.tex)
        assert np.allclose(a, b, atol=1e-9)

    def test_values_in_unit_interval(self):
        img = render_disc(1.234, self.tex)
        assert img.shape == (64,)
        assert img.min() >= 0.0
        assert img.max() <= 1.0

    def test_small_angle_step_small_image_change(self):
        # continuity: adjacent test-sweep angles produce nearby images
        alphas = np.arange(0, 2 * np.pi, np.pi / 900)
        imgs = np.stack([render_disc(a, self.tex) for a in alphas[:400]])
        steps = np.linalg.norm(np.diff(imgs, axis=0), axis=1)
        assert steps.max() < 0.4  # calibrated for the default texture (12 harmonics)


class TestDatasets:
    def test_sizes(self):
        tex = DiscTexture.random(64, 6, seed=0)
        train, test = make_datasets(tex)
        assert len(train) == 360
        assert len(test) == 1800
        assert train.images.shape == (360, 64)
        assert test.images.shape == (1800, 64)

    def test_spacing(self):
        tex = DiscTexture.random(64, 6, seed=0)
        train, test = make_datasets(tex)
        assert np.allclose(np.diff(train.alphas), np.pi / 180)
        assert np.allclose(np.diff(test.alphas), np.pi / 900)

    def test_images_match_render(self):
        tex = DiscTexture.random(64, 6, seed=0)
        train, _ = make_datasets(tex)
        for k in (0, 100, 359):
            assert np.allclose(train.images[k], render_disc(train.alphas[k], tex))


class TestObjectPointImages:
    def test_points_on_unit_circle(self):
        p = object_point_image(0.3, width=32)
        assert p.shape == (32, 2)
        assert np.allclose(np.linalg.norm(p, axis=-1), 1.0)

    def test_csl_targets_at_theta(self):
        # at alpha = theta the csl image equals the alpha = 0 image
        n = 6
        a = csl_point_image(0.0, n, width=32)
        b = csl_point_image(2 * np.pi / n, n, width=32)
        assert np.allclose(a, b, atol=1e-12)

    def test_rotation_shifts_points(self):
        a = object_point_image(0.0, width=16)
        b = object_point_image(0.25, width=16)
        # rotating the disc by alpha rotates each seen point by -alpha
        c, s = np.cos(0.25), np.sin(0.25)
        rot = np.array([[c, s], [-s, c]])
        assert np.allclose(b, a @ rot.T, atol=1e-12)
