"""Exposure fusion by weighted Laplacian-pyramid blending.

Each image gets a per-pixel quality weight built from local contrast, color
saturation and well-exposedness. Weights are normalized across the stack and
the images are blended band by band: the Laplacian pyramid of every image is
multiplied by the Gaussian pyramid of its weight map, summed, and collapsed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import StackError

logger = logging.getLogger(__name__)

BINOMIAL_5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
LAPLACE_3 = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class FusionParams:
    contrast_exp: float = 1.0
    saturation_exp: float = 1.0
    exposedness_exp: float = 1.0
    sigma: float = 0.2
    levels: int | None = None

    def __post_init__(self):
        for name in ("contrast_exp", "saturation_exp", "exposedness_exp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.levels is not None and self.levels < 1:
            raise ValueError("levels must be at least 1")


@dataclass(frozen=True)
class FusionResult:
    # weights are stored in canonical stack order (sorted by pixel bytes)
    image: np.ndarray
    weights: np.ndarray
    levels: int
    overshoot: float
    clipped_fraction: float


# -- pyramids -----------------------------------------------------------------


def _blur(img: np.ndarray, gain: float = 1.0) -> np.ndarray:
    k = BINOMIAL_5 * gain
    out = ndimage.convolve1d(img, k, axis=0, mode="mirror")
    return ndimage.convolve1d(out, k, axis=1, mode="mirror")


def pyr_down(img: np.ndarray) -> np.ndarray:
    return _blur(img)[::2, ::2]


def pyr_up(img: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Zero-insert ``img`` to ``shape`` and interpolate with the binomial kernel."""
    up = np.zeros(shape[:2] + img.shape[2:], dtype=np.float64)
    up[::2, ::2] = img
    return _blur(up, gain=2.0)


def default_levels(shape: tuple[int, ...]) -> int:
    return max(1, int(math.floor(math.log2(min(shape[0], shape[1])))))


def gaussian_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    pyr = [np.asarray(img, dtype=np.float64)]
    for _ in range(levels - 1):
        pyr.append(pyr_down(pyr[-1]))
    return pyr


def laplacian_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    gauss = gaussian_pyramid(img, levels)
    bands = [g - pyr_up(g_next, g.shape) for g, g_next in zip(gauss[:-1], gauss[1:])]
    bands.append(gauss[-1])
    return bands


def collapse(pyr: Sequence[np.ndarray]) -> np.ndarray:
    img = pyr[-1]
    for band in reversed(pyr[:-1]):
        img = band + pyr_up(img, band.shape)
    return img


# -- weights ------------------------------------------------------------------


def contrast(image: np.ndarray) -> np.ndarray:
    gray = image.mean(axis=2)
    return np.abs(ndimage.correlate(gray, LAPLACE_3, mode="mirror"))


def saturation(image: np.ndarray) -> np.ndarray:
    return image.std(axis=2)


def well_exposedness(image: np.ndarray, sigma: float = 0.2) -> np.ndarray:
    return np.prod(np.exp(-((image - 0.5) ** 2) / (2.0 * sigma**2)), axis=2)


def quality_weight(image: np.ndarray, params: FusionParams | None = None) -> np.ndarray:
    """Unnormalized Mertens weight ``C**wc * S**ws * E**we`` for one image."""
    p = params or FusionParams()
    image = np.asarray(image, dtype=np.float64)
    w = np.ones(image.shape[:2])
    if p.contrast_exp:
        w *= contrast(image) ** p.contrast_exp
    if p.saturation_exp:
        w *= saturation(image) ** p.saturation_exp
    if p.exposedness_exp:
        w *= well_exposedness(image, p.sigma) ** p.exposedness_exp
    return w


def normalized_weights(stack: Sequence[np.ndarray], params: FusionParams | None = None) -> np.ndarray:
    w = np.stack([quality_weight(img, params) for img in stack]) + WEIGHT_FLOOR
    return w / w.sum(axis=0)


# -- fusion -------------------------------------------------------------------


def _validate(stack: Sequence[np.ndarray]) -> list[np.ndarray]:
    if len(stack) == 0:
        raise StackError("cannot fuse an empty stack")
    images = [np.asarray(img, dtype=np.float64) for img in stack]
    shape = images[0].shape
    if len(shape) != 3 or shape[2] != 3:
        raise StackError(f"expected (H, W, 3) images, got {shape}")
    for img in images[1:]:
        if img.shape != shape:
            raise StackError(f"image size mismatch in stack: {img.shape} vs {shape}")
    return images


def fuse_detailed(stack: Sequence[np.ndarray], params: FusionParams | None = None) -> FusionResult:
    p = params or FusionParams()
    images = _validate(stack)
    # canonical order so that reordering the stack cannot change rounding
    images.sort(key=lambda img: img.tobytes())

    levels = p.levels or default_levels(images[0].shape)
    weights = normalized_weights(images, p)

    blended = None
    for img, w in zip(images, weights):
        lap = laplacian_pyramid(img, levels)
        gw = gaussian_pyramid(w, levels)
        bands = [band * g[..., None] for band, g in zip(lap, gw)]
        blended = bands if blended is None else [acc + b for acc, b in zip(blended, bands)]

    raw = collapse(blended)
    overshoot = float(max(raw.max() - 1.0, -raw.min(), 0.0))
    clipped = float(np.mean((raw < 0.0) | (raw > 1.0)))
    if overshoot > 0:
        logger.debug("fusion overshoot %.4g, %.3f%% of samples clipped", overshoot, 100 * clipped)
    return FusionResult(
        image=np.clip(raw, 0.0, 1.0),
        weights=weights,
        levels=levels,
        overshoot=overshoot,
        clipped_fraction=clipped,
    )


def fuse(stack: Sequence[np.ndarray], params: FusionParams | None = None) -> np.ndarray:
    """Fuse pixel-aligned LDR images into one image in ``[0, 1]``."""
    return fuse_detailed(stack, params).image
