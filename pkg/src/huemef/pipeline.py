"""End-to-end processing: SSLA, fusion, HDR reference and hue correction.

Three methods are compared by the evaluation harness:

``mertens``
    plain exposure fusion of the input stack
``ssla-mertens``
    fusion of the luminance-adjusted SSLA images
``proposed``
    ``ssla-mertens`` followed by hue correction against the HDR image merged
    from the same stack
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field, fields
from typing import Any, Sequence

import numpy as np

from . import color_hue, fusion, hdr, metrics, ssla
from .hdr import ExposureStack
from .transfer import linear_to_srgb, luminance

logger = logging.getLogger(__name__)

METHODS = ("mertens", "ssla-mertens", "proposed")
DEFAULT_EVS = (-4.0, -2.0, 0.0, 2.0, 4.0)


@dataclass
class PipelineConfig:
    m: int | None = None
    ssla_base: str = "segment"
    seed: int = 0
    levels: int | None = None
    contrast_exp: float = 1.0
    saturation_exp: float = 1.0
    exposedness_exp: float = 1.0
    sigma: float = 0.2
    crf_degree: int = 5
    per_channel_crf: bool = False
    crf_samples: int = 2000
    evs: tuple[float, ...] = DEFAULT_EVS
    gamma: float = 2.2
    bit_depth: int = 16
    metrics: bool = True
    figures: bool = True
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.m is not None and self.m < 1:
            raise ValueError("m must be at least 1")
        if self.ssla_base not in ("segment", "middle"):
            raise ValueError("ssla_base must be 'segment' or 'middle'")
        if self.levels is not None and self.levels < 1:
            raise ValueError("levels must be at least 1")
        for name in ("contrast_exp", "saturation_exp", "exposedness_exp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.crf_degree < 1:
            raise ValueError("crf_degree must be at least 1")
        if self.crf_samples < 1:
            raise ValueError("crf_samples must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.bit_depth not in (8, 16):
            raise ValueError("bit_depth must be 8 or 16")
        evs = tuple(float(ev) for ev in self.evs)
        if not evs or any(b <= a for a, b in zip(evs, evs[1:])):
            raise ValueError("evs must be non-empty and strictly increasing")
        self.evs = evs

    @property
    def fusion_params(self) -> fusion.FusionParams:
        return fusion.FusionParams(
            contrast_exp=self.contrast_exp,
            saturation_exp=self.saturation_exp,
            exposedness_exp=self.exposedness_exp,
            sigma=self.sigma,
            levels=self.levels,
        )

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def updated(self, **changes: Any) -> PipelineConfig:
        unknown = set(changes) - set(self.keys())
        if unknown:
            raise KeyError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **changes)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_value(key: str, text: str):
    """Convert a config-file string to the type of field ``key``."""
    text = text.strip()
    if key == "evs":
        return tuple(float(t) for t in text.replace(",", " ").split())
    if key in ("m", "levels"):
        return None if text.lower() in ("", "none", "auto") else int(text)
    if key in ("seed", "crf_degree", "crf_samples", "bit_depth"):
        return int(text)
    if key in ("per_channel_crf", "metrics", "figures"):
        return _parse_bool(text)
    if key in ("output_dir", "ssla_base"):
        return text
    return float(text)


def read_config_file(path) -> dict[str, Any]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    known = set(PipelineConfig.keys())
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise KeyError(f"{path}:{lineno}: unknown configuration key {key!r}")
            values[key] = parse_value(key, value)
    return values


# -- stages -------------------------------------------------------------------


@dataclass
class PipelineResult:
    mef: np.ndarray
    hdr: np.ndarray
    corrected: np.ndarray
    crfs: tuple[hdr.ResponseCurve, ...]
    ssla: ssla.SslaResult
    fusion: fusion.FusionResult
    info: dict[str, Any] = field(default_factory=dict)


def calibrate_and_merge(stack: ExposureStack, cfg: PipelineConfig):
    crfs = hdr.estimate_crfs(
        stack, cfg.crf_degree, per_channel=cfg.per_channel_crf,
        n_samples=cfg.crf_samples, seed=cfg.seed,
    )
    return crfs, hdr.merge_hdr(stack, crfs)


def run_pipeline(stack: ExposureStack, cfg: PipelineConfig | None = None) -> PipelineResult:
    cfg = cfg or PipelineConfig()
    adjusted = ssla.run_ssla_detailed(stack.images, cfg.m, base=cfg.ssla_base)
    fused = fusion.fuse_detailed(adjusted.images, cfg.fusion_params)
    crfs, radiance = calibrate_and_merge(stack, cfg)
    corrected = color_hue.correct_image_hue(fused.image, radiance)
    return PipelineResult(
        mef=fused.image, hdr=radiance, corrected=corrected, crfs=crfs,
        ssla=adjusted, fusion=fused,
    )


def run_method(method: str, stack: ExposureStack, cfg: PipelineConfig | None = None) -> np.ndarray:
    cfg = cfg or PipelineConfig()
    if method == "mertens":
        return fusion.fuse(stack.images, cfg.fusion_params)
    if method == "ssla-mertens":
        return fusion.fuse(ssla.run_ssla(stack, cfg.m, cfg.ssla_base), cfg.fusion_params)
    if method == "proposed":
        return run_pipeline(stack, cfg).corrected
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def run_methods(methods: Sequence[str], stack: ExposureStack,
                cfg: PipelineConfig | None = None) -> dict[str, np.ndarray]:
    """Like :func:`run_method` for several methods, sharing intermediate work."""
    cfg = cfg or PipelineConfig()
    for name in methods:
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    out = {}
    if "mertens" in methods:
        out["mertens"] = fusion.fuse(stack.images, cfg.fusion_params)
    if "ssla-mertens" in methods or "proposed" in methods:
        res = run_pipeline(stack, cfg)
        if "ssla-mertens" in methods:
            out["ssla-mertens"] = res.mef
        if "proposed" in methods:
            out["proposed"] = res.corrected
    return {name: out[name] for name in methods}


# -- evaluation ---------------------------------------------------------------


def display_reference(radiance: np.ndarray) -> np.ndarray:
    """Hue-preserving display rendering of a radiance map.

    Luminance is Reinhard-compressed after anchoring at 0.18, the result is
    sRGB-encoded, and the maximally saturated color of every pixel is then
    replaced by that of the radiance so the reference carries its hue.
    """
    radiance = np.asarray(radiance, dtype=np.float64)
    scaled = radiance * hdr.exposure_anchor(radiance)
    lum = luminance(scaled)
    target = ssla.tone_map(lum)
    lin = np.clip(scaled * (target / np.maximum(lum, ssla.DELTA))[..., None], 0.0, 1.0)
    return color_hue.transplant_hue(linear_to_srgb(lin), radiance)


@dataclass(frozen=True)
class EvalRow:
    scene: str
    method: str
    mean_dH: float
    TMQI_Q: float
    TMQI_S: float
    TMQI_N: float

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


CSV_COLUMNS = [f.name for f in fields(EvalRow)]


def evaluate_scene(name: str, radiance: np.ndarray, stack: ExposureStack,
                   methods: Sequence[str] = METHODS,
                   cfg: PipelineConfig | None = None) -> tuple[list[EvalRow], dict[str, np.ndarray]]:
    outputs = run_methods(methods, stack, cfg)
    ref = display_reference(radiance)
    rows = []
    for method, img in outputs.items():
        score = metrics.tmqi(radiance, img)
        rows.append(
            EvalRow(name, method, metrics.mean_delta_h(img, ref), score.Q, score.S, score.N)
        )
    return rows, outputs


def aggregate(rows: Sequence[EvalRow]) -> list[EvalRow]:
    out = []
    for method in dict.fromkeys(r.method for r in rows):
        sel = [r for r in rows if r.method == method]
        out.append(
            EvalRow(
                "mean", method,
                *(float(np.mean([getattr(r, col) for r in sel])) for col in CSV_COLUMNS[2:]),
            )
        )
    return out


def format_table(rows: Sequence[EvalRow]) -> str:
    widths = [max(len(CSV_COLUMNS[0]), *(len(r.scene) for r in rows)),
              max(len(CSV_COLUMNS[1]), *(len(r.method) for r in rows))]
    head = f"{'scene':<{widths[0]}}  {'method':<{widths[1]}}  {'mean_dH':>9}  {'TMQI_Q':>7}  {'TMQI_S':>7}  {'TMQI_N':>7}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r.scene:<{widths[0]}}  {r.method:<{widths[1]}}  {r.mean_dH:9.4f}  "
            f"{r.TMQI_Q:7.4f}  {r.TMQI_S:7.4f}  {r.TMQI_N:7.4f}"
        )
    return "\n".join(lines)
