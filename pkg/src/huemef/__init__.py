"""Hue-corrected multi-exposure image fusion.

Images are ``float64`` arrays of shape ``(H, W, 3)``. LDR images hold
display-encoded values in ``[0, 1]``; HDR images hold linear, non-negative
radiance.
"""

from .color_hue import correct_image_hue, decompose, recompose, transplant_hue
from .errors import (
    CalibrationError,
    HueMefError,
    ImageFormatError,
    StackError,
)
from .fusion import fuse
from .hdr import ExposureStack, ResponseCurve, estimate_crf, merge_hdr, synthesize_stack
from .metrics import mean_delta_h, tmqi
from .ssla import run_ssla

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "ExposureStack",
    "HueMefError",
    "ImageFormatError",
    "ResponseCurve",
    "StackError",
    "correct_image_hue",
    "decompose",
    "estimate_crf",
    "fuse",
    "mean_delta_h",
    "merge_hdr",
    "recompose",
    "run_ssla",
    "synthesize_stack",
    "tmqi",
    "transplant_hue",
]
