"""Scene-segmentation-based luminance adjustment.

The input stack is turned into ``m`` luminance-adjusted images, each exposed
so that one scene area sits at middle gray:

1. luminance of every input,
2. local dodging and burning,
3. GMM clustering of the stack's (log) enhanced luminance into ``m`` areas,
4. global scaling that puts an area's geometric mean at 0.18,
5. a Reinhard curve to keep the scaled luminance out of saturation,
6. per-pixel rescaling of a base image to the tone-mapped luminance.

By default the base image for an area is the input exposure in which that
area is closest to middle gray, so every input can contribute detail.

Luminance work happens in linear light: display-encoded inputs are decoded
with the sRGB curve first and the adjusted images are re-encoded at the end.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.special import logsumexp

from .errors import StackError
from .transfer import linear_to_srgb, srgb_to_linear
from .transfer import luminance as _luma

logger = logging.getLogger(__name__)

DELTA = 1e-6
MIDDLE_GRAY = 0.18
V_MAX = 1e6
BLUR_DIVISOR = 16


@dataclass(frozen=True)
class GmmParams:
    max_iter: int = 100
    tol: float = 1e-6
    var_floor: float = 1e-8


@dataclass(frozen=True)
class SegmentMap:
    """Labels ``1..m`` per pixel, ordered by increasing component mean."""

    labels: np.ndarray
    m: int
    requested: int
    converged: bool
    iterations: int
    means: np.ndarray = field(repr=False)

    @property
    def collapsed(self) -> bool:
        return self.m < self.requested

    def mask(self, j: int) -> np.ndarray:
        return self.labels == j


@dataclass(frozen=True)
class SslaResult:
    images: list[np.ndarray]
    segments: SegmentMap
    base_indices: list[int]
    scales: list[float]
    clip_counts: list[int]


def luminance(image: np.ndarray) -> np.ndarray:
    return _luma(image)


def dodge_burn(lum: np.ndarray) -> np.ndarray:
    """Local enhancement ``L**2 / blur(L)``; the identity on constant maps."""
    lum = np.asarray(lum, dtype=np.float64)
    sigma = min(lum.shape) / BLUR_DIVISOR
    local = np.maximum(ndimage.gaussian_filter(lum, sigma, mode="reflect"), DELTA)
    return lum * lum / local


def fit_gmm_1d(x: np.ndarray, m: int, params: GmmParams | None = None):
    """EM for a 1-D Gaussian mixture.

    Returns ``(means, variances, weights, converged, iterations)``; on a
    missed tolerance the best-likelihood parameters seen are returned.
    """
    p = params or GmmParams()
    x = np.asarray(x, dtype=np.float64).ravel()
    mu = np.quantile(x, (np.arange(m) + 0.5) / m)
    var = np.full(m, max(float(x.var()), p.var_floor))
    pi = np.full(m, 1.0 / m)

    best = (-np.inf, mu, var, pi)
    prev = -np.inf
    converged = False
    it = 0
    for it in range(1, p.max_iter + 1):
        logp = _component_logpdf(x, mu, var, pi)
        norm = logsumexp(logp, axis=0)
        ll = float(norm.mean())
        if ll > best[0]:
            best = (ll, mu, var, pi)
        if abs(ll - prev) < p.tol:
            converged = True
            break
        prev = ll
        resp = np.exp(logp - norm)
        nk = resp.sum(axis=1)
        live = nk > 0
        safe = np.where(live, nk, 1.0)
        mu = np.where(live, resp @ x / safe, mu)
        var = np.where(live, (resp * (x - mu[:, None]) ** 2).sum(axis=1) / safe, var)
        var = np.maximum(var, p.var_floor)
        pi = nk / x.size
    _, mu, var, pi = best
    return mu, var, pi, converged, it


def _component_logpdf(x, mu, var, pi):
    with np.errstate(divide="ignore"):
        logpi = np.log(pi)
    return (
        logpi[:, None]
        - 0.5 * np.log(2 * np.pi * var)[:, None]
        - (x[None, :] - mu[:, None]) ** 2 / (2 * var[:, None])
    )


def segment(l_set: Sequence[np.ndarray], m: int, params: GmmParams | None = None) -> SegmentMap:
    """Cluster pixels on the log geometric mean of the enhanced luminances."""
    if m < 1:
        raise ValueError("segment count m must be at least 1")
    maps = [np.asarray(lum, dtype=np.float64) for lum in l_set]
    if not maps:
        raise StackError("no luminance maps to segment")
    shape = maps[0].shape
    if any(lum.shape != shape for lum in maps):
        raise StackError("luminance maps differ in size")

    feat = np.mean([np.log(lum + DELTA) for lum in maps], axis=0).ravel()
    # log of the geometric mean; the inner delta only guards log(0)
    feat = np.log(np.exp(feat) + DELTA)

    mu, var, pi, converged, iters = fit_gmm_1d(feat, m, params)
    if not converged:
        logger.info("GMM did not converge in %d iterations; using best fit", iters)
    raw = np.argmax(_component_logpdf(feat, mu, var, pi), axis=0)

    used = np.unique(raw)
    order = used[np.argsort(mu[used], kind="stable")]
    relabel = np.zeros(m, dtype=np.int64)
    relabel[order] = np.arange(1, order.size + 1)
    labels = relabel[raw].reshape(shape)
    if order.size < m:
        logger.info("segmentation collapsed from %d to %d areas", m, order.size)
    return SegmentMap(
        labels=labels,
        m=int(order.size),
        requested=m,
        converged=converged,
        iterations=iters,
        means=mu[order],
    )


def segment_scale(lum: np.ndarray, mask: np.ndarray) -> float:
    vals = np.asarray(lum)[mask]
    vals = vals[vals > DELTA]
    if vals.size == 0:
        warnings.warn("segment has no usable luminance; scale capped", RuntimeWarning, stacklevel=3)
        return V_MAX
    geo = float(np.exp(np.mean(np.log(vals))))
    return min(MIDDLE_GRAY / geo, V_MAX)


def scale_segment(lum: np.ndarray, segments: SegmentMap, j: int) -> np.ndarray:
    """Scale the whole map so that area ``j`` has geometric mean 0.18."""
    if not 1 <= j <= segments.m:
        raise ValueError(f"segment label {j} outside 1..{segments.m}")
    return segment_scale(lum, segments.mask(j)) * np.asarray(lum, dtype=np.float64)


def tone_map(lum) -> np.ndarray:
    lum = np.asarray(lum, dtype=np.float64)
    return lum / (1.0 + lum)


def adjust_pixels(image: np.ndarray, lum: np.ndarray, target: np.ndarray, return_clips: bool = False):
    """Rescale each pixel so its luminance becomes ``target``, then clamp."""
    ratio = np.asarray(target, dtype=np.float64) / np.maximum(lum, DELTA)
    scaled = np.asarray(image, dtype=np.float64) * ratio[..., None]
    clips = int(np.count_nonzero(scaled > 1.0))
    out = np.clip(scaled, 0.0, 1.0)
    return (out, clips) if return_clips else out


def base_index(n: int) -> int:
    """0-based index of the middle exposure (1-based ceil(n/2))."""
    return (n + 1) // 2 - 1


def best_exposed_index(enhanced: Sequence[np.ndarray], mask: np.ndarray) -> int:
    """Input whose area geometric mean is closest to middle gray in log terms."""
    dist = []
    for lum in enhanced:
        vals = lum[mask]
        vals = vals[vals > DELTA]
        if vals.size == 0:
            dist.append(np.inf)
            continue
        dist.append(abs(float(np.mean(np.log(vals))) - np.log(MIDDLE_GRAY)))
    return int(np.argmin(dist))


def run_ssla_detailed(images: Sequence[np.ndarray], m: int | None = None,
                      gmm: GmmParams | None = None, base: str = "segment") -> SslaResult:
    """Full SSLA run with its intermediate results.

    ``base`` picks the image that steps 4-6 rescale for each area:
    ``"segment"`` uses the input in which that area is closest to middle
    gray, ``"middle"`` always uses the middle exposure.
    """
    if base not in ("segment", "middle"):
        raise ValueError(f"unknown SSLA base mode {base!r}")
    images = [np.asarray(img, dtype=np.float64) for img in images]
    if not images:
        raise StackError("SSLA needs at least one image")
    if any(img.shape != images[0].shape for img in images):
        raise StackError("stack images differ in size")
    m = len(images) if m is None else m

    linear = [srgb_to_linear(img) for img in images]
    lums = [luminance(img) for img in linear]
    enhanced = [dodge_burn(lum) for lum in lums]
    segments = segment(enhanced, m, gmm)

    out, scales, clips, bases = [], [], [], []
    for j in range(1, segments.m + 1):
        mask = segments.mask(j)
        b = best_exposed_index(enhanced, mask) if base == "segment" else base_index(len(images))
        bases.append(b)
        v = segment_scale(enhanced[b], mask)
        target = tone_map(v * enhanced[b])
        adjusted, n_clip = adjust_pixels(linear[b], lums[b], target, return_clips=True)
        out.append(linear_to_srgb(adjusted))
        scales.append(v)
        clips.append(n_clip)
    return SslaResult(images=out, segments=segments, base_indices=bases, scales=scales, clip_counts=clips)


def run_ssla(stack, m: int | None = None, base: str = "segment") -> list[np.ndarray]:
    """Luminance-adjusted images, one per scene area (``m`` defaults to ``n``).

    ``stack`` is an :class:`~huemef.hdr.ExposureStack` or a sequence of
    images ordered by exposure.
    """
    images = getattr(stack, "images", stack)
    return run_ssla_detailed(images, m, base=base).images
