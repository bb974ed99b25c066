"""Roberts cross edge detection, exact and stochastic.

For the 2x2 window with top-left corner at (row r, column c) the gradient is
``0.5 * (|p[r,c] - p[r+1,c+1]| + |p[r,c+1] - p[r+1,c]|)`` with ``p = pixel/255``.
The stochastic operator computes each diagonal difference as the XOR of a
positively correlated pair and averages the two with a half-rate MUX.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitstream import EntropySource, FlipMode, FlipSpec, flip_mask
from .device import MemristorParams, SneTransfer, v_ref_for, vmem_samples
from .logic import hold_select

__all__ = [
    "DetectorConfig",
    "RobertsStreams",
    "as_gray_image",
    "binary_reference_with_flips",
    "corrupt_binary",
    "gradient_to_image",
    "normalize",
    "reference_roberts",
    "stochastic_roberts",
    "stochastic_roberts_streams",
]

SOURCES = ("analytic", "device")


def as_gray_image(img) -> np.ndarray:
    """Validate and return a 2-D ``uint8`` grayscale raster."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"grayscale image must be 2-D, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return arr
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValueError("pixel values must be integers")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("pixel values must lie in [0, 255]")
    return arr.astype(np.uint8)


def _edge_ready(img) -> np.ndarray:
    img = as_gray_image(img)
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise ValueError(f"edge detection needs at least a 2x2 image, got {img.shape}")
    return img


def normalize(img) -> np.ndarray:
    return as_gray_image(img).astype(np.float64) / 255.0


def reference_roberts(img) -> np.ndarray:
    p = normalize(_edge_ready(img))
    gx = np.abs(p[:-1, :-1] - p[1:, 1:])
    gy = np.abs(p[:-1, 1:] - p[1:, :-1])
    return 0.5 * (gx + gy)


def gradient_to_image(g) -> np.ndarray:
    """Quantise a [0, 1] field to 0-255, rounding halves up."""
    g = np.asarray(g, dtype=np.float64)
    return np.clip(np.floor(255.0 * g + 0.5), 0, 255).astype(np.uint8)


def corrupt_binary(img, rate: float, src: EntropySource) -> np.ndarray:
    """Flip each bit of every 8-bit pixel code independently with probability ``rate``."""
    if not 0.0 <= rate <= 0.5:
        raise ValueError(f"flip rate must lie in [0, 0.5], got {rate}")
    img = as_gray_image(img)
    flips = src.generator().random(img.shape + (8,)) < rate
    weights = (1 << np.arange(8)).astype(np.uint8)
    mask = (flips * weights).sum(axis=-1, dtype=np.uint8)
    return img ^ mask


def binary_reference_with_flips(img, rate: float, src: EntropySource) -> np.ndarray:
    """Exact Roberts cross on an image whose binary pixel codes took random bit-flips."""
    return reference_roberts(corrupt_binary(_edge_ready(img), rate, src))


@dataclass(frozen=True)
class DetectorConfig:
    bits: int
    seed: int
    flip: FlipSpec | None = None
    source: str = "analytic"
    params: MemristorParams = field(default_factory=MemristorParams)
    transfer: SneTransfer = field(default_factory=SneTransfer)

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 1:
            raise ValueError(f"bit length must be a positive integer, got {self.bits}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown stream source {self.source!r}; expected one of {SOURCES}")

    def echo(self) -> dict:
        return {
            "bits": int(self.bits),
            "seed": int(self.seed),
            "flip_mode": self.flip.mode.value if self.flip else None,
            "flip_rate": self.flip.rate if self.flip else None,
            "source": self.source,
        }


@dataclass(frozen=True)
class RobertsStreams:
    """Every stream of one detector pass, batched as ``(H-1, W-1, n)``.

    ``x_pair``/``y_pair`` hold the encoded diagonals after fault injection;
    ``select`` is the half-rate MUX control before holding.
    """

    x_pair: tuple[np.ndarray, np.ndarray]
    y_pair: tuple[np.ndarray, np.ndarray]
    select: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    output: np.ndarray

    def gradient(self) -> np.ndarray:
        return self.output.mean(axis=-1, dtype=np.float64)


def stochastic_roberts_streams(img, cfg: DetectorConfig, src: EntropySource | None = None,
                               frame_index: int = 0) -> RobertsStreams:
    img = _edge_ready(img)
    p = normalize(img)
    n = int(cfg.bits)
    half = (n + 1) // 2
    if src is None:
        src = EntropySource(cfg.seed)
    frame = src.child("frame", int(frame_index))
    rows, cols = img.shape[0] - 1, img.shape[1] - 1
    device = cfg.source == "device"
    flip = cfg.flip
    n_masks = 2 if flip and flip.mode is FlipMode.SHARED_MASK else 4

    draw_x = np.empty((rows, cols, n))
    draw_y = np.empty((rows, cols, n))
    draw_s = np.empty((rows, cols, half))
    masks = np.zeros((rows, cols, n_masks, n), dtype=np.uint8) if flip else None

    # One generator per (pixel, role): results never depend on scan order.
    for r in range(rows):
        for c in range(cols):
            gx_rng = frame.substream_generator(r, c, "pairX")
            gy_rng = frame.substream_generator(r, c, "pairY")
            if device:
                draw_x[r, c] = vmem_samples(n, cfg.transfer, gx_rng)
                draw_y[r, c] = vmem_samples(n, cfg.transfer, gy_rng)
            else:
                draw_x[r, c] = gx_rng.random(n)
                draw_y[r, c] = gy_rng.random(n)
            draw_s[r, c] = frame.substream_generator(r, c, "select").random(half)
            if flip:
                masks[r, c] = flip_mask((n_masks, n), flip, frame.substream_generator(r, c, "flips"))

    def pair(draw, p1, p2):
        if device:
            return (draw > v_ref_for(p1, cfg.transfer)[..., None]).astype(np.uint8), \
                   (draw > v_ref_for(p2, cfg.transfer)[..., None]).astype(np.uint8)
        return (draw < p1[..., None]).astype(np.uint8), (draw < p2[..., None]).astype(np.uint8)

    xa, xb = pair(draw_x, p[:-1, :-1], p[1:, 1:])
    ya, yb = pair(draw_y, p[:-1, 1:], p[1:, :-1])
    if flip:
        if flip.mode is FlipMode.SHARED_MASK:
            xa, xb = xa ^ masks[:, :, 0], xb ^ masks[:, :, 0]
            ya, yb = ya ^ masks[:, :, 1], yb ^ masks[:, :, 1]
        else:
            xa, xb = xa ^ masks[:, :, 0], xb ^ masks[:, :, 1]
            ya, yb = ya ^ masks[:, :, 2], yb ^ masks[:, :, 3]
    gx = xa ^ xb
    gy = ya ^ yb
    select = (draw_s < 0.5).astype(np.uint8)
    out = np.where(hold_select(select, n) == 1, gy, gx)
    return RobertsStreams((xa, xb), (ya, yb), select, gx, gy, out)


def stochastic_roberts(img, cfg: DetectorConfig, src: EntropySource | None = None,
                       frame_index: int = 0) -> np.ndarray:
    """Gradient map from the stochastic operator, shape ``(H-1, W-1)``.

    Substreams are keyed by ``(frame_index, row, col, role)`` under ``src``
    (default ``EntropySource(cfg.seed)``).
    """
    return stochastic_roberts_streams(img, cfg, src, frame_index).gradient()
