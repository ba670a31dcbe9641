import numpy as np
import pytest

from oracles import ssim_by_windows
from evrecover.metrics import PSNR_CAP, gaussian_window, psnr, ssim, ssim_map


def checker(n=32, cell=4, low=0.1, high=0.9):
    yy, xx = np.mgrid[0:n, 0:n]
    return np.where(((yy // cell) + (xx // cell)) % 2 == 0, high, low)


class TestPsnr:
    def test_identical_caps(self, rng):
        a = rng.uniform(size=(8, 8))
        assert psnr(a, a) == PSNR_CAP == 99.0

    def test_zeros_vs_ones(self):
        assert psnr(np.zeros((4, 4)), np.ones((4, 4))) == 0.0

    def test_uniform_error_of_a_tenth(self):
        assert psnr(np.zeros((16, 16)), np.full((16, 16), 0.1)) == 20.0

    def test_matches_definition(self, rng):
        a, b = rng.uniform(size=(2, 10, 10))
        mse = np.mean((a - b) ** 2)
        assert psnr(a, b) == pytest.approx(10 * np.log10(1.0 / mse), abs=1e-12)
        assert psnr(a, b, 255.0) == pytest.approx(10 * np.log10(255.0 ** 2 / mse), abs=1e-12)

    def test_symmetric(self, rng):
        a, b = rng.uniform(size=(2, 12, 12))
        assert psnr(a, b) == psnr(b, a)

    def test_decreases_with_noise(self):
        clean = checker()
        levels = [0.01, 0.02, 0.05, 0.1, 0.2]
        means = []
        for sigma in levels:
            vals = [psnr(clean, clean + np.random.default_rng(s).normal(0, sigma, clean.shape))
                    for s in range(10)]
            means.append(np.mean(vals))
        assert np.all(np.diff(means) < 0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((3, 3)), np.zeros((3, 4)))


class TestSsim:
    def test_identical_is_exactly_one(self, rng):
        a = rng.uniform(size=(20, 24))
        assert ssim(a, a) == 1.0
        c = np.full((16, 16), 0.3)
        assert ssim(c, c) == 1.0

    def test_inverted_pattern(self):
        a = checker()
        ref = ssim_by_windows(a, 1 - a)
        assert ref < 0.5
        assert ssim(a, 1 - a) == pytest.approx(ref, abs=1e-10)

    def test_matches_window_oracle(self, rng):
        a = rng.uniform(size=(16, 19))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(ssim_by_windows(a, b), abs=1e-10)

    def test_constants_closed_form(self):
        u, v = 0.40, 0.43
        c1 = 0.01 ** 2
        expect = (2 * u * v + c1) / (u * u + v * v + c1)
        got = ssim(np.full((12, 12), u), np.full((12, 12), v))
        assert got == pytest.approx(expect, abs=1e-12)

    def test_symmetric(self, rng):
        a, b = rng.uniform(size=(2, 14, 14))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-15)

    def test_range(self, rng):
        a, b = rng.uniform(size=(2, 20, 20))
        m = ssim_map(a, b)
        assert m.shape == (10, 10)
        assert np.all((m >= -1) & (m <= 1))

    def test_too_small(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((10, 12)), np.zeros((10, 12)))

    def test_window(self):
        w = gaussian_window()
        assert w.shape == (11, 11)
        assert w.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(w, w.T)
