"""PSNR and single-scale SSIM for intensity images in working units."""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import convolve2d

PSNR_CAP = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError(f"expected 2-D images, got shape {a.shape}")
    return a, b


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at 99 dB (identical images)."""
    a, b = _pair(a, b)
    # exactly rounded sum, so a uniform error gives the same MSE at any size
    mse = math.fsum(((a - b) ** 2).ravel()) / a.size
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 20.0 * math.log10(peak) - 10.0 * math.log10(mse)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def ssim_map(a, b, data_range: float = 1.0) -> np.ndarray:
    """Local SSIM over every fully-contained 11x11 Gaussian window."""
    a, b = _pair(a, b)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    w = gaussian_window()

    def filt(img):
        return convolve2d(img, w, mode="valid")

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, data_range: float = 1.0) -> float:
    return float(np.mean(ssim_map(a, b, data_range)))
