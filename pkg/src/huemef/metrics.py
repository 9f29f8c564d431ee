"""Hue-distortion and tone-mapping quality metrics.

``mean_delta_h`` averages the hue term of CIEDE2000 over all pixels.
``tmqi`` is the Tone-Mapped image Quality Index of Yeganeh and Wang: a
multi-scale structural fidelity term against the HDR luminance combined with
a statistical naturalness term on the rendered image.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, stats

from .transfer import LUMA_709, srgb_to_linear

logger = logging.getLogger(__name__)

_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = _SRGB_TO_XYZ.sum(axis=1)


def srgb_to_lab(rgb) -> np.ndarray:
    """sRGB-encoded values in [0, 1] to CIELAB under D65."""
    xyz = srgb_to_linear(rgb) @ _SRGB_TO_XYZ.T / _WHITE_D65
    eps = 216 / 24389
    kappa = 24389 / 27
    f = np.where(xyz > eps, np.cbrt(xyz), (kappa * xyz + 16) / 116)
    lab = np.empty_like(f)
    lab[..., 0] = 116 * f[..., 1] - 16
    lab[..., 1] = 500 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200 * (f[..., 1] - f[..., 2])
    return lab


def ciede2000_terms(lab1, lab2) -> dict[str, np.ndarray]:
    """Intermediate quantities of CIEDE2000 (angles in degrees).

    Follows Sharma, Wu and Dalal's implementation notes, including the
    conventions for achromatic pairs and the mean-hue wrap-around.
    """
    lab1 = np.asarray(lab1, dtype=np.float64)
    lab2 = np.asarray(lab2, dtype=np.float64)
    L1, a1, b1 = np.moveaxis(lab1, -1, 0)
    L2, a2, b2 = np.moveaxis(lab2, -1, 0)

    c_bar = (np.hypot(a1, b1) + np.hypot(a2, b2)) / 2
    c7 = c_bar**7
    G = 0.5 * (1 - np.sqrt(c7 / (c7 + 25.0**7)))
    ap1 = (1 + G) * a1
    ap2 = (1 + G) * a2
    cp1 = np.hypot(ap1, b1)
    cp2 = np.hypot(ap2, b2)
    hp1 = np.where((ap1 == 0) & (b1 == 0), 0.0, np.degrees(np.arctan2(b1, ap1)) % 360)
    hp2 = np.where((ap2 == 0) & (b2 == 0), 0.0, np.degrees(np.arctan2(b2, ap2)) % 360)

    dLp = L2 - L1
    dCp = cp2 - cp1
    prod = cp1 * cp2
    dh = hp2 - hp1
    dh = np.where(dh > 180, dh - 360, np.where(dh < -180, dh + 360, dh))
    dhp = np.where(prod == 0, 0.0, dh)
    dHp = 2 * np.sqrt(prod) * np.sin(np.radians(dhp) / 2)

    Lp_bar = (L1 + L2) / 2
    Cp_bar = (cp1 + cp2) / 2
    hsum = hp1 + hp2
    far = np.abs(hp1 - hp2) > 180
    hp_bar = np.where(far, np.where(hsum < 360, (hsum + 360) / 2, (hsum - 360) / 2), hsum / 2)
    hp_bar = np.where(prod == 0, hsum, hp_bar)

    T = (
        1
        - 0.17 * np.cos(np.radians(hp_bar - 30))
        + 0.24 * np.cos(np.radians(2 * hp_bar))
        + 0.32 * np.cos(np.radians(3 * hp_bar + 6))
        - 0.20 * np.cos(np.radians(4 * hp_bar - 63))
    )
    d_theta = 30 * np.exp(-(((hp_bar - 275) / 25) ** 2))
    cp7 = Cp_bar**7
    R_C = 2 * np.sqrt(cp7 / (cp7 + 25.0**7))
    S_L = 1 + 0.015 * (Lp_bar - 50) ** 2 / np.sqrt(20 + (Lp_bar - 50) ** 2)
    S_C = 1 + 0.045 * Cp_bar
    S_H = 1 + 0.015 * Cp_bar * T
    R_T = -np.sin(np.radians(2 * d_theta)) * R_C
    return {
        "G": G, "ap1": ap1, "ap2": ap2, "cp1": cp1, "cp2": cp2, "hp1": hp1, "hp2": hp2,
        "dLp": dLp, "dCp": dCp, "dhp": dhp, "dHp": dHp, "hp_bar": hp_bar, "T": T,
        "S_L": S_L, "S_C": S_C, "S_H": S_H, "R_C": R_C, "R_T": R_T,
    }


def delta_e_ciede2000(lab1, lab2, kL: float = 1.0, kC: float = 1.0, kH: float = 1.0) -> np.ndarray:
    t = ciede2000_terms(lab1, lab2)
    l_term = t["dLp"] / (kL * t["S_L"])
    c_term = t["dCp"] / (kC * t["S_C"])
    h_term = t["dHp"] / (kH * t["S_H"])
    return np.sqrt(l_term**2 + c_term**2 + h_term**2 + t["R_T"] * c_term * h_term)


def delta_h_ciede2000(lab1, lab2, kH: float = 1.0) -> np.ndarray:
    """Hue contribution ``|dH' / (kH * S_H)|`` of CIEDE2000."""
    t = ciede2000_terms(lab1, lab2)
    return np.abs(t["dHp"] / (kH * t["S_H"]))


def mean_delta_h(img: np.ndarray, ref: np.ndarray) -> float:
    img = np.asarray(img, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if img.shape != ref.shape:
        raise ValueError(f"image {img.shape} and reference {ref.shape} differ in size")
    return float(np.mean(delta_h_ciede2000(srgb_to_lab(img), srgb_to_lab(ref)), dtype=np.float64))


# -- TMQI ---------------------------------------------------------------------

TMQI_A = 0.8012
TMQI_ALPHA = 0.3046
TMQI_BETA = 0.7088
SCALE_WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])
WINDOW = 11
WINDOW_SIGMA = 1.5
NAT_MEAN = 115.94
NAT_STD = 27.99
NAT_BETA = (4.4, 10.1)
NAT_STD_SCALE = 64.29
HDR_RANGE = 2.0**32 - 1


@dataclass(frozen=True)
class TmqiScore:
    Q: float
    S: float
    N: float
    local: tuple[float, ...] = ()


def _gaussian_window() -> np.ndarray:
    g = np.exp(-0.5 * ((np.arange(WINDOW) - WINDOW // 2) / WINDOW_SIGMA) ** 2)
    g /= g.sum()
    return np.outer(g, g)


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    h = win.shape[0] // 2
    out = ndimage.correlate(img, win, mode="constant")
    return out[h : img.shape[0] - h, h : img.shape[1] - h]


def _local_structure(hdr: np.ndarray, ldr: np.ndarray, sf: float) -> float:
    c1, c2 = 0.01, 10.0
    win = _gaussian_window()
    # variances are shift invariant; centering keeps the 2^32-scaled HDR well conditioned
    hdr = hdr - hdr.mean()
    ldr = ldr - ldr.mean()
    mu1 = _filter_valid(hdr, win)
    mu2 = _filter_valid(ldr, win)
    s1 = np.sqrt(np.maximum(_filter_valid(hdr * hdr, win) - mu1 * mu1, 0.0))
    s2 = np.sqrt(np.maximum(_filter_valid(ldr * ldr, win) - mu2 * mu2, 0.0))
    s12 = _filter_valid(hdr * ldr, win) - mu1 * mu2

    csf = 100.0 * 2.6 * (0.0192 + 0.114 * sf) * np.exp(-((0.114 * sf) ** 1.1))
    u = 128.0 / (1.4 * csf)
    p1 = stats.norm.cdf(s1, loc=u, scale=u / 3)
    p2 = stats.norm.cdf(s2, loc=u, scale=u / 3)
    smap = (2 * p1 * p2 + c1) / (p1 * p1 + p2 * p2 + c1) * (s12 + c2) / (s1 * s2 + c2)
    return float(np.mean(smap, dtype=np.float64))


def _downsample(img: np.ndarray) -> np.ndarray:
    box = ndimage.uniform_filter(img, size=2, mode="reflect", origin=(-1, -1))
    return box[::2, ::2]


def structural_fidelity(l_hdr: np.ndarray, l_ldr: np.ndarray, levels: int = 5):
    local = []
    sf = 2.0 ** levels
    for lvl in range(levels):
        sf /= 2
        local.append(_local_structure(l_hdr, l_ldr, sf))
        if lvl < levels - 1:
            l_hdr = _downsample(l_hdr)
            l_ldr = _downsample(l_ldr)
    weights = SCALE_WEIGHTS[:levels] / SCALE_WEIGHTS[:levels].sum()
    s = float(np.prod(np.clip(local, 0.0, None) ** weights))
    return min(s, 1.0), tuple(local)


def statistical_naturalness(l_ldr: np.ndarray) -> float:
    """Naturalness of an 8-bit-scaled luminance image from global statistics."""
    mu = float(np.mean(l_ldr))
    h, w = l_ldr.shape
    bh, bw = h // WINDOW, w // WINDOW
    if bh and bw:
        blocks = l_ldr[: bh * WINDOW, : bw * WINDOW].reshape(bh, WINDOW, bw, WINDOW)
        sig = float(np.mean(blocks.std(axis=(1, 3), ddof=1)))
    else:
        sig = float(np.std(l_ldr, ddof=1))
    a, b = NAT_BETA
    mode = (a - 1) / (a + b - 2)
    pc = stats.beta.pdf(sig / NAT_STD_SCALE, a, b) / stats.beta.pdf(mode, a, b)
    pb = stats.norm.pdf(mu, NAT_MEAN, NAT_STD) / stats.norm.pdf(NAT_MEAN, NAT_MEAN, NAT_STD)
    return float(np.clip(pb * pc, 0.0, 1.0))


def max_scales(shape: tuple[int, int], wanted: int = 5) -> int:
    levels = 0
    h, w = shape
    while levels < wanted and min(h, w) >= WINDOW:
        levels += 1
        h, w = -(-h // 2), -(-w // 2)
    return levels


def tmqi(ref_hdr: np.ndarray, test: np.ndarray) -> TmqiScore:
    """Score an LDR rendering ``test`` in [0, 1] against a linear HDR image."""
    ref_hdr = np.asarray(ref_hdr, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref_hdr.shape != test.shape:
        raise ValueError(f"HDR {ref_hdr.shape} and test image {test.shape} differ in size")
    l_hdr = ref_hdr @ LUMA_709 if ref_hdr.ndim == 3 else ref_hdr
    l_ldr = 255.0 * (test @ LUMA_709 if test.ndim == 3 else test)

    levels = max_scales(l_hdr.shape)
    if levels == 0:
        raise ValueError(f"image {l_hdr.shape} is smaller than the {WINDOW}x{WINDOW} window")
    if levels < len(SCALE_WEIGHTS):
        logger.warning("image too small for %d TMQI scales; using %d", len(SCALE_WEIGHTS), levels)

    lo, hi = l_hdr.min(), l_hdr.max()
    span = hi - lo if hi > lo else 1.0
    l_hdr = HDR_RANGE * (l_hdr - lo) / span

    s, local = structural_fidelity(l_hdr, l_ldr, levels)
    n = statistical_naturalness(l_ldr)
    q = TMQI_A * s**TMQI_ALPHA + (1 - TMQI_A) * n**TMQI_BETA
    return TmqiScore(Q=float(q), S=s, N=n, local=local)
