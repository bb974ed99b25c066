"""SSIM and PSNR between 8-bit grayscale images."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .roberts import as_gray_image, gradient_to_image

__all__ = ["PsnrResult", "SsimResult", "psnr", "ssim", "ssim_map_to_image"]

DATA_RANGE = 255.0
K1, K2 = 0.01, 0.03
GAUSS_SIZE, GAUSS_SIGMA = 11, 1.5
FALLBACK_SIZE = 3


@dataclass(frozen=True, eq=False)
class SsimResult:
    map: np.ndarray
    window: str  # "gaussian11" or "uniform3" for maps smaller than 11x11

    @property
    def mean(self) -> float:
        return float(self.map.mean())

    @property
    def fallback(self) -> bool:
        return self.window != "gaussian11"


@dataclass(frozen=True)
class PsnrResult:
    db: float  # math.inf for identical images

    @property
    def infinite(self) -> bool:
        return math.isinf(self.db)

    def to_json(self):
        return "inf" if self.infinite else self.db

    def __str__(self) -> str:
        return "inf" if self.infinite else f"{self.db:.2f} dB"


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = as_gray_image(a).astype(np.float64)
    b = as_gray_image(b).astype(np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def ssim(a, b) -> SsimResult:
    """Gaussian-window SSIM evaluated at every fully-covered window centre.

    Images smaller than 11x11 fall back to a 3x3 uniform window.
    """
    a, b = _pair(a, b)
    if min(a.shape) >= GAUSS_SIZE:
        w, kind = _gaussian_window(GAUSS_SIZE, GAUSS_SIGMA), "gaussian11"
    elif min(a.shape) >= FALLBACK_SIZE:
        w, kind = np.full((FALLBACK_SIZE, FALLBACK_SIZE), 1.0 / FALLBACK_SIZE**2), "uniform3"
    else:
        raise ValueError(f"images of shape {a.shape} are smaller than the {FALLBACK_SIZE}x{FALLBACK_SIZE} window")

    def filt(x):
        return np.einsum("ijkl,kl->ij", sliding_window_view(x, w.shape), w)

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    c1 = (K1 * DATA_RANGE) ** 2
    c2 = (K2 * DATA_RANGE) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return SsimResult(np.clip(num / den, -1.0, 1.0), kind)


def psnr(a, b) -> PsnrResult:
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PsnrResult(math.inf)
    return PsnrResult(10.0 * math.log10(DATA_RANGE**2 / mse))


def ssim_map_to_image(result: SsimResult) -> np.ndarray:
    """1 maps to 255, anything at or below 0 maps to 0."""
    return gradient_to_image(np.clip(result.map, 0.0, 1.0))
