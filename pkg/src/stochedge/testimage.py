"""Synthetic stand-in for a silhouette motion-study frame.

A dark galloping horse and rider on a light backdrop with faint vertical
track markings and a ground band, anti-aliased by supersampling. Fully
deterministic; ``bundled_frame()`` loads the pre-rendered copy shipped with
the package.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

__all__ = ["bundled_frame", "render_frame"]

BUNDLED_NAME = "horse_standin.pgm"


def _ellipse(x, y, cx, cy, rx, ry, angle=0.0):
    ca, sa = np.cos(angle), np.sin(angle)
    dx, dy = x - cx, y - cy
    u = (dx * ca + dy * sa) / rx
    v = (-dx * sa + dy * ca) / ry
    return u * u + v * v <= 1.0


def _segment(x, y, x0, y0, x1, y1, width):
    px, py = x1 - x0, y1 - y0
    t = np.clip(((x - x0) * px + (y - y0) * py) / (px * px + py * py), 0.0, 1.0)
    return (x - x0 - t * px) ** 2 + (y - y0 - t * py) ** 2 <= (width / 2.0) ** 2


def _silhouette(x, y, phase):
    """Boolean mask of horse and rider in unit coordinates (x right, y down)."""
    body = _ellipse(x, y, 0.50, 0.50, 0.22, 0.10, -0.05)
    neck = _segment(x, y, 0.66, 0.46, 0.76, 0.33, 0.09)
    head = _ellipse(x, y, 0.80, 0.33, 0.07, 0.035, 0.5)
    tail = _segment(x, y, 0.29, 0.47, 0.18, 0.56, 0.03)
    rider = _ellipse(x, y, 0.52, 0.33, 0.045, 0.085, 0.2) | _ellipse(x, y, 0.54, 0.225, 0.03, 0.03)
    leg_w = 0.035
    swing = 0.07 * np.sin(phase)
    legs = (
        _segment(x, y, 0.62, 0.55, 0.72 + swing, 0.74, leg_w)
        | _segment(x, y, 0.58, 0.56, 0.52 - swing, 0.73, leg_w)
        | _segment(x, y, 0.40, 0.56, 0.30 - swing, 0.72, leg_w)
        | _segment(x, y, 0.36, 0.54, 0.44 + swing, 0.74, leg_w)
    )
    return body | neck | head | tail | rider | legs


def render_frame(size: int = 96, phase: float = 0.0, supersample: int = 4) -> np.ndarray:
    """Render a ``size`` x ``size`` uint8 frame."""
    k = supersample
    coords = (np.arange(size * k) + 0.5) / (size * k)
    x, y = np.meshgrid(coords, coords)
    img = np.full(x.shape, 205.0)
    for stripe in np.linspace(0.08, 0.92, 8):
        img[np.abs(x - stripe) < 0.006] = 175.0
    img[y > 0.78] = 150.0
    img[np.abs(y - 0.78) < 0.008] = 120.0
    img[_silhouette(x, y, phase)] = 35.0
    img = img.reshape(size, k, size, k).mean(axis=(1, 3))
    return np.floor(img + 0.5).astype(np.uint8)


def bundled_frame() -> np.ndarray:
    from .imaging import parse_pgm

    data = resources.files("stochedge.data").joinpath(BUNDLED_NAME).read_bytes()
    return parse_pgm(data)
