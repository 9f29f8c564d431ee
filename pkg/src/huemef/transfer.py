"""sRGB transfer curves and Rec.709 luminance."""

import numpy as np

LUMA_709 = np.array([0.2126, 0.7152, 0.0722])


def srgb_to_linear(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(x) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, None)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * x ** (1 / 2.4) - 0.055)


def luminance(image) -> np.ndarray:
    """Rec.709 weighted sum over the last axis."""
    return np.asarray(image, dtype=np.float64) @ LUMA_709


def log_average(lum, delta: float = 1e-6) -> float:
    return float(np.exp(np.mean(np.log(np.asarray(lum) + delta))))
