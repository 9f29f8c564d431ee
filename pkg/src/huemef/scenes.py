"""Procedural HDR test scenes.

Each scene is a deterministic linear radiance map with a wide dynamic range
and saturated colors, standing in for captured HDR photographs. They are
generated on demand rather than shipped as files.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import ndimage


def _grid(size: int):
    y, x = np.mgrid[0:size, 0:size] / (size - 1)
    return y, x


def _texture(size: int, seed: int, scale: float, amount: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    noise = ndimage.gaussian_filter(rng.standard_normal((size, size)), scale * size / 64)
    noise /= noise.std() + 1e-12
    return np.exp(amount * noise)


def _rgb(*channels) -> np.ndarray:
    return np.stack(np.broadcast_arrays(*channels), axis=-1)


def window(size: int = 192) -> np.ndarray:
    """Dim warm room with a bright window onto a blue sky and green field."""
    y, x = _grid(size)
    tex = _texture(size, 1, 2.0, 0.35)
    room = _rgb(0.030, 0.018, 0.010) * tex[..., None]
    room = room * (0.6 + 0.8 * x)[..., None]
    inside = (x > 0.45) & (x < 0.9) & (y > 0.15) & (y < 0.7)
    sky = _rgb(6.0 + 0 * x, 12.0 + 4 * x, 30.0 - 10 * y)
    field = _rgb(8.0, 22.0, 3.0) * _texture(size, 2, 1.0, 0.25)[..., None]
    outside = np.where((y < 0.45)[..., None], sky, field)
    return np.where(inside[..., None], outside, room)


def sunset(size: int = 192) -> np.ndarray:
    """Orange-to-violet sky with a hot sun and a dark teal foreground."""
    y, x = _grid(size)
    sky = _rgb(4.0 * (1.2 - y), 1.2 * (1.1 - y) ** 2, 0.6 + 1.5 * y)
    sun = 80.0 * np.exp(-(((x - 0.6) ** 2 + (y - 0.45) ** 2) / 0.004))
    sky = sky + _rgb(sun, 0.55 * sun, 0.15 * sun)
    ground = _rgb(0.004, 0.015, 0.012) * _texture(size, 3, 1.5, 0.5)[..., None]
    horizon = 0.62 + 0.05 * np.sin(9 * x)
    return np.where((y > horizon)[..., None], ground, sky)


def chart(size: int = 192) -> np.ndarray:
    """Color-checker patches lit by a spotlight with steep falloff."""
    y, x = _grid(size)
    colors = np.array(
        [
            [0.40, 0.20, 0.12], [0.75, 0.45, 0.35], [0.25, 0.30, 0.50], [0.20, 0.30, 0.12],
            [0.45, 0.40, 0.65], [0.30, 0.70, 0.60], [0.80, 0.40, 0.05], [0.15, 0.20, 0.55],
            [0.75, 0.20, 0.25], [0.25, 0.10, 0.30], [0.55, 0.70, 0.10], [0.85, 0.60, 0.05],
            [0.05, 0.10, 0.45], [0.15, 0.50, 0.15], [0.65, 0.08, 0.08], [0.90, 0.80, 0.05],
        ]
    )
    iy = np.minimum((y * 4).astype(int), 3)
    ix = np.minimum((x * 4).astype(int), 3)
    albedo = colors[iy * 4 + ix]
    light = 0.02 + 40.0 * np.exp(-(((x - 0.3) ** 2 + (y - 0.3) ** 2) / 0.05))
    return albedo * light[..., None]


def neon(size: int = 192) -> np.ndarray:
    """Near-black street with saturated red, cyan and magenta light strips."""
    y, x = _grid(size)
    base = _rgb(0.010, 0.008, 0.014) * _texture(size, 4, 2.0, 0.6)[..., None]
    strips = [
        (0.25, np.array([40.0, 2.0, 1.0])),
        (0.50, np.array([1.0, 25.0, 30.0])),
        (0.75, np.array([30.0, 1.5, 28.0])),
    ]
    out = base.copy()
    for yc, color in strips:
        glow = np.exp(-((y - yc) ** 2) / 0.0008) * (0.4 + 0.6 * np.sin(6 * x + yc * 10) ** 2)
        halo = 0.05 * np.exp(-((y - yc) ** 2) / 0.01)
        out += (glow + halo)[..., None] * color
    return out


def foliage(size: int = 192) -> np.ndarray:
    """Sunlit yellow-green leaves against a bright sky, deep shade below."""
    y, x = _grid(size)
    leaves = _texture(size, 5, 0.7, 0.8)
    hue = _texture(size, 6, 1.5, 0.4)
    shade = 0.01 + 3.0 * np.clip(1.0 - y * 1.4, 0.0, 1.0) ** 2
    plant = _rgb(0.25 * hue, 0.6 + 0 * x, 0.08 / hue) * (leaves * shade)[..., None]
    sky = _rgb(9.0, 14.0, 25.0) * (1.0 + 0.3 * x)[..., None]
    gaps = (leaves < 0.55) & (y < 0.5)
    return np.where(gaps[..., None], sky, plant)


def lamp(size: int = 192) -> np.ndarray:
    """Warm tungsten lamp in a cold blue-lit interior."""
    y, x = _grid(size)
    r2 = (x - 0.35) ** 2 + (y - 0.4) ** 2
    warm = 60.0 * np.exp(-r2 / 0.003) + 1.5 * np.exp(-r2 / 0.05)
    cold = 0.04 * (0.5 + x) * _texture(size, 7, 2.0, 0.3)
    return _rgb(1.0 * warm + 0.3 * cold, 0.55 * warm + 0.6 * cold, 0.15 * warm + 1.4 * cold)


SCENES: dict[str, Callable[[int], np.ndarray]] = {
    "window": window,
    "sunset": sunset,
    "chart": chart,
    "neon": neon,
    "foliage": foliage,
    "lamp": lamp,
}


def make_scene(name: str, size: int = 192) -> np.ndarray:
    try:
        fn = SCENES[name]
    except KeyError:
        raise KeyError(f"unknown scene {name!r}; available: {', '.join(SCENES)}") from None
    return np.ascontiguousarray(fn(size), dtype=np.float64)


def two_region(size: int = 128, dark: float = 0.02, bright: float = 2.0) -> np.ndarray:
    """Gray dark room (left) and bright window (right) for segmentation checks."""
    img = np.full((size, size, 3), dark)
    img[:, size // 2 :] = bright
    return img
