"""Constant-hue-plane geometry in RGB.

Every pixel ``x`` in the unit cube is a convex combination of white
``w = (1, 1, 1)``, black ``k = (0, 0, 0)`` and a maximally saturated color
``c`` whose smallest channel is 0 and largest is 1::

    x = a_w * w + a_k * k + a_c * c
    a_w = min(x),  a_k = 1 - max(x),  a_c = max(x) - min(x)
    c = (x - min(x)) / (max(x) - min(x))

All pixels sharing ``c`` lie on one constant-hue plane. Hue correction keeps
the coefficients of the fused pixel and swaps in the ``c`` of a reference
pixel.

Functions broadcast over any array whose last axis holds the RGB triplet.
These operate on whatever encoding the caller hands in; the pipeline feeds
display-encoded fused images and linear HDR references.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WHITE = np.ones(3)
BLACK = np.zeros(3)

#: a_c at or below this is treated as carrying no hue
CHROMA_EPS = 1e-6


@dataclass(frozen=True)
class HueCoords:
    """Per-pixel decomposition on the constant-hue plane.

    ``a_w``, ``a_k`` and ``a_c`` have the shape of the input without its last
    axis, ``c`` keeps the full input shape.
    """

    a_w: np.ndarray
    a_k: np.ndarray
    a_c: np.ndarray
    c: np.ndarray

    @property
    def chromatic(self) -> np.ndarray:
        return self.a_c > CHROMA_EPS


def _as_rgb(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (3,):
        raise ValueError(f"expected RGB values on the last axis, got shape {x.shape}")
    return x


def decompose(x) -> HueCoords:
    """Split pixels into white/black/chroma coefficients and their hue color.

    Achromatic pixels (max == min) get ``c = (0, 0, 0)``. For HDR pixels with
    ``max(x) > 1`` the black coefficient is clamped at 0; only ``c`` is
    meaningful for those.
    """
    x = _as_rgb(x)
    lo = x.min(axis=-1)
    hi = x.max(axis=-1)
    a_c = hi - lo
    a_k = np.maximum(1.0 - hi, 0.0)
    span = a_c[..., None]
    safe = np.where(span > 0, span, 1.0)
    c = np.where(span > 0, (x - lo[..., None]) / safe, 0.0)
    return HueCoords(a_w=lo, a_k=a_k, a_c=a_c, c=c)


def recompose(h: HueCoords) -> np.ndarray:
    """Rebuild RGB from hue coordinates (``a_w * w + a_k * k + a_c * c``)."""
    a_w = np.asarray(h.a_w, dtype=np.float64)[..., None]
    a_c = np.asarray(h.a_c, dtype=np.float64)[..., None]
    # the black term contributes nothing since k = 0
    return a_w * WHITE + a_c * np.asarray(h.c, dtype=np.float64)


def transplant_hue(x, x_ref) -> np.ndarray:
    """Give ``x`` the hue of ``x_ref`` while keeping its own coefficients.

    Where the reference is achromatic it has no hue to give, and ``x`` is
    returned unchanged.
    """
    x = _as_rgb(x)
    x_ref = _as_rgb(x_ref)
    src = decompose(x)
    ref = decompose(x_ref)
    y = recompose(HueCoords(src.a_w, src.a_k, src.a_c, ref.c))
    return np.where(ref.chromatic[..., None], y, x)


def correct_image_hue(fused: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Replace the hue of every pixel in ``fused`` with that of ``reference``.

    Both images must be pixel-aligned and of identical shape ``(H, W, 3)``.
    """
    fused = _as_rgb(fused)
    reference = _as_rgb(reference)
    if fused.shape != reference.shape:
        raise ValueError(
            f"fused image {fused.shape[:2]} and reference {reference.shape[:2]} differ in size"
        )
    return transplant_hue(fused, reference)
