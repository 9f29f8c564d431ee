"""HDR reference generation from an exposure stack.

The inverse camera response is modeled as a polynomial
``f_inv(v) = sum_k c_k v**k`` normalized so that ``f_inv(1) = 1``. With the
exposure ratios known from the EV metadata, the coefficients follow from a
single linear least-squares problem over pixel pairs from neighboring
exposures (Mitsunaga and Nayar's formulation without ratio refinement).
Radiance is then a hat-weighted average of ``f_inv(v_i) / t_i``.

This module also synthesizes exposure stacks from a known radiance map,
which is how the evaluation harness builds its test data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import CalibrationError, StackError
from .transfer import log_average, luminance

logger = logging.getLogger(__name__)

ANCHOR = 0.18
SAMPLE_RANGE = (0.05, 0.95)
# merge trusts only samples here; the fitted polynomial is least reliable
# (in relative terms) near the ends of its calibrated range
MERGE_RANGE = (0.1, 0.9)
WEIGHT_FLOOR = 1e-4
MONOTONE_GRID = 1024
MONOTONE_TOL = 1e-10


@dataclass(frozen=True)
class ExposureStack:
    """Pixel-aligned LDR images ordered by strictly increasing EV."""

    images: tuple[np.ndarray, ...]
    evs: tuple[float, ...]
    t_ref: float = 1.0

    def __post_init__(self):
        images = tuple(np.asarray(img, dtype=np.float64) for img in self.images)
        evs = tuple(float(ev) for ev in self.evs)
        if not images:
            raise StackError("exposure stack is empty")
        if len(images) != len(evs):
            raise StackError(f"{len(images)} images but {len(evs)} exposure values")
        shape = images[0].shape
        if len(shape) != 3 or shape[2] != 3:
            raise StackError(f"expected (H, W, 3) images, got {shape}")
        if any(img.shape != shape for img in images):
            raise StackError("stack images differ in size")
        if any(b <= a for a, b in zip(evs, evs[1:])):
            raise StackError("exposure values must be strictly increasing")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "evs", evs)

    def __len__(self) -> int:
        return len(self.images)

    @property
    def times(self) -> np.ndarray:
        return self.t_ref * np.exp2(np.asarray(self.evs))

    @property
    def shape(self) -> tuple[int, int]:
        return self.images[0].shape[:2]


@dataclass(frozen=True)
class ResponseCurve:
    """Polynomial inverse response with coefficients in increasing power."""

    coefficients: np.ndarray
    residual: float = 0.0
    requested_degree: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=np.float64))

    @classmethod
    def identity(cls) -> ResponseCurve:
        return cls(np.array([0.0, 1.0]))

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, v) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(v, dtype=np.float64), self.coefficients)

    def is_monotone(self) -> bool:
        grid = self(np.linspace(0.0, 1.0, MONOTONE_GRID))
        return bool(np.all(np.diff(grid) >= -MONOTONE_TOL))

    def forward(self, e) -> np.ndarray:
        """Camera response ``f`` by inverting the monotone curve on a grid."""
        grid = np.linspace(0.0, 1.0, 4097)
        vals = np.maximum.accumulate(self(grid))
        return np.interp(np.asarray(e, dtype=np.float64), vals, grid)


def hat_weight(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.maximum(1.0 - (2.0 * v - 1.0) ** 2, 0.0)


def merge_weight(v, trusted: tuple[float, float] | None = MERGE_RANGE) -> np.ndarray:
    w = hat_weight(v)
    if trusted is None:
        return w
    lo, hi = trusted
    return np.where((v >= lo) & (v <= hi), w, 0.0)


def sample_positions(stack: ExposureStack, n_samples: int = 2000, seed: int = 0,
                     bins: int = 16) -> np.ndarray:
    """Flat pixel indices stratified over the middle exposure's luminance."""
    mid = stack.images[(len(stack) + 1) // 2 - 1]
    lum = luminance(mid).ravel()
    rng = np.random.default_rng(seed)
    which = np.minimum((np.clip(lum, 0.0, 1.0) * bins).astype(np.int64), bins - 1)
    groups = [np.flatnonzero(which == b) for b in range(bins)]
    groups = [g for g in groups if g.size]
    per_bin = -(-n_samples // len(groups))
    picked = [rng.choice(g, size=min(per_bin, g.size), replace=False) for g in groups]
    return np.sort(np.concatenate(picked))


def _pairs(stack: ExposureStack, channel: int, positions: np.ndarray):
    lo, hi = SAMPLE_RANGE
    times = stack.times
    rows_a, rows_b, ratios = [], [], []
    for i in range(len(stack) - 1):
        a = stack.images[i][..., channel].ravel()[positions]
        b = stack.images[i + 1][..., channel].ravel()[positions]
        ok = (a >= lo) & (a <= hi) & (b >= lo) & (b <= hi)
        rows_a.append(a[ok])
        rows_b.append(b[ok])
        ratios.append(np.full(int(ok.sum()), times[i] / times[i + 1]))
    return np.concatenate(rows_a), np.concatenate(rows_b), np.concatenate(ratios)


def _design(va, vb, ratio, degree: int):
    powers = np.arange(degree + 1)
    d = va[:, None] ** powers - ratio[:, None] * vb[:, None] ** powers
    # c_N = 1 - sum(c_0..c_{N-1}) enforces f_inv(1) = 1
    return d[:, :-1] - d[:, -1:], -d[:, -1]


def _coefficients(sol: np.ndarray) -> np.ndarray:
    return np.append(sol, 1.0 - sol.sum())


def _fit(va, vb, ratio, degree: int) -> tuple[np.ndarray, float]:
    a, rhs = _design(va, vb, ratio, degree)
    distinct = np.unique(np.stack([va, vb, ratio], axis=1), axis=0).shape[0]
    if distinct < degree or np.linalg.matrix_rank(a) < degree:
        raise CalibrationError(
            f"insufficient calibration data: {distinct} distinct samples for degree {degree}"
        )
    sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    resid = a @ sol - rhs
    return _coefficients(sol), float(np.sqrt(np.mean(resid**2)))


def _fit_monotone(va, vb, ratio, degree: int, start: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Least squares with non-decreasing steps on the monotonicity grid."""
    a, rhs = _design(va, vb, ratio, degree)
    grid = np.linspace(0.0, 1.0, MONOTONE_GRID)
    basis = grid[:, None] ** np.arange(degree + 1)
    steps = np.diff(basis[:, :-1] - basis[:, -1:], axis=0)
    offset = np.diff(basis[:, -1])
    scale = max(float(np.abs(rhs).max()), 1e-300)
    a_s, rhs_s = a / scale, rhs / scale
    res = optimize.minimize(
        lambda x: 0.5 * np.sum((a_s @ x - rhs_s) ** 2),
        start[:-1],
        jac=lambda x: a_s.T @ (a_s @ x - rhs_s),
        constraints=[{"type": "ineq", "fun": lambda x: steps @ x + offset, "jac": lambda x: steps}],
        method="SLSQP",
        options={"maxiter": 500, "ftol": 1e-16},
    )
    if not np.all(np.isfinite(res.x)):
        return None
    resid = a @ res.x - rhs
    return _coefficients(res.x), float(np.sqrt(np.mean(resid**2)))


def estimate_crf(stack: ExposureStack, degree: int = 5, *, channel: int = 1,
                 n_samples: int = 2000, seed: int = 0) -> ResponseCurve:
    """Fit the inverse response from one color channel of the stack.

    A plain least-squares fit that is not monotone on [0, 1] is refit with
    non-decreasing constraints; if that also fails the degree is lowered.
    """
    if len(stack) < 2:
        raise CalibrationError("CRF calibration needs at least two exposures")
    if degree < 1:
        raise ValueError("degree must be at least 1")
    va, vb, ratio = _pairs(stack, channel, sample_positions(stack, n_samples, seed))
    if va.size == 0:
        raise CalibrationError("insufficient calibration data: no well-exposed pixel pairs")

    for deg in range(degree, 0, -1):
        coef, resid = _fit(va, vb, ratio, deg)
        curve = ResponseCurve(coef, residual=resid, requested_degree=degree)
        if not curve.is_monotone() and deg > 1:
            fitted = _fit_monotone(va, vb, ratio, deg, coef)
            if fitted is not None:
                curve = ResponseCurve(fitted[0], residual=fitted[1], requested_degree=degree)
        if curve.is_monotone():
            if deg < degree:
                logger.info("CRF fit fell back from degree %d to %d", degree, deg)
            return curve
    raise CalibrationError("no monotone inverse response found down to degree 1")


def estimate_crfs(stack: ExposureStack, degree: int = 5, *, per_channel: bool = False,
                  n_samples: int = 2000, seed: int = 0) -> tuple[ResponseCurve, ...]:
    """One curve per channel; the green-channel fit is shared by default."""
    if not per_channel:
        return (estimate_crf(stack, degree, channel=1, n_samples=n_samples, seed=seed),) * 3
    return tuple(
        estimate_crf(stack, degree, channel=ch, n_samples=n_samples, seed=seed) for ch in range(3)
    )


def merge_hdr(stack: ExposureStack, crf: ResponseCurve | Sequence[ResponseCurve],
              anchor: bool = True,
              trusted: tuple[float, float] | None = MERGE_RANGE) -> np.ndarray:
    """Hat-weighted radiance merge, scaled to log-average luminance 0.18.

    Samples outside ``trusted`` get zero weight. A pixel with no trusted
    sample falls back to its best-exposed sample alone.
    """
    curves = (crf,) * 3 if isinstance(crf, ResponseCurve) else tuple(crf)
    if len(curves) != 3:
        raise ValueError("expected one response curve or three")
    vals = np.stack(stack.images)
    times = stack.times[:, None, None, None]
    lin = np.stack([curves[ch](vals[..., ch]) for ch in range(3)], axis=-1)

    w = merge_weight(vals, trusted)
    wsum = w.sum(axis=0)
    dead = wsum <= 0
    if np.any(dead):
        best = np.argmin(np.abs(vals - 0.5), axis=0)
        pick = np.arange(len(stack))[:, None, None, None] == best[None]
        w = np.where(dead[None] & pick, WEIGHT_FLOOR, w)
        wsum = w.sum(axis=0)
    radiance = np.maximum((w * lin / times).sum(axis=0) / wsum, 0.0)

    if anchor:
        radiance = radiance * (ANCHOR / log_average(luminance(radiance)))
    return radiance


def gamma_response(gamma: float = 2.2) -> Callable[[np.ndarray], np.ndarray]:
    def f(e):
        return np.power(np.clip(e, 0.0, None), 1.0 / gamma)

    return f


def exposure_anchor(hdr: np.ndarray) -> float:
    """Scale that puts the radiance map's log-average luminance at 0.18."""
    return ANCHOR / log_average(luminance(hdr))


def synthesize_stack(hdr: np.ndarray, evs: Sequence[float], gamma: float = 2.2,
                     crf=None, kappa: float | None = None,
                     bit_depth: int | None = None) -> ExposureStack:
    """Render ``clamp(f(2**ev * kappa * E))`` for each exposure value.

    ``crf`` may be a forward response callable or a :class:`ResponseCurve`;
    without one, ``f(E) = E**(1/gamma)``.
    """
    hdr = np.asarray(hdr, dtype=np.float64)
    if not np.all(np.isfinite(hdr)) or np.any(hdr < 0):
        raise ValueError("radiance map must be finite and non-negative")
    if isinstance(crf, ResponseCurve):
        forward = crf.forward
    elif crf is not None:
        forward = crf
    else:
        forward = gamma_response(gamma)
    k = exposure_anchor(hdr) if kappa is None else kappa

    images = []
    for ev in evs:
        img = np.clip(forward(np.exp2(ev) * k * hdr), 0.0, 1.0)
        if bit_depth:
            top = 2**bit_depth - 1
            img = np.floor(img * top + 0.5) / top
        images.append(img)
    return ExposureStack(tuple(images), tuple(evs))
