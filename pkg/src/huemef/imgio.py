"""Reading and writing LDR and HDR rasters.

Supported formats, detected from magic bytes on read:

* PNG, 8 or 16 bit RGB (gray is expanded, alpha dropped). Values map to
  ``[0, 1]`` via ``value / (2**bits - 1)`` and are taken as sRGB-encoded.
* Radiance RGBE (``.hdr``), flat or new-style run-length encoded.
* PFM, color, either byte order.

PNG stores display-encoded values. Stages that need linear light (SSLA and
stack synthesis) decode with the sRGB or camera curve themselves; the hue
correction works directly on the display-encoded fused image.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import ImageFormatError

MAX_SIDE = 2**16
PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class ImageInfo:
    path: Path
    format: str
    width: int
    height: int
    hdr: bool
    bit_depth: int | None = None


def detect_format(head: bytes) -> str:
    if head.startswith(PNG_MAGIC):
        return "png"
    if head.startswith(b"#?"):
        return "rgbe"
    if head[:2] in (b"PF", b"Pf"):
        return "pfm"
    raise ImageFormatError("unknown image format")


def _check_dims(width: int, height: int, path) -> None:
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: invalid dimensions {width}x{height}")
    if width > MAX_SIDE or height > MAX_SIDE:
        raise ImageFormatError(f"{path}: dimensions {width}x{height} exceed {MAX_SIDE} per side")


def _check_hdr(data: np.ndarray, path) -> np.ndarray:
    if not np.all(np.isfinite(data)):
        raise ImageFormatError(f"{path}: HDR data contains NaN or Inf samples")
    if np.any(data < 0):
        raise ImageFormatError(f"{path}: HDR data contains negative samples")
    return data


def read_image(path) -> tuple[np.ndarray, ImageInfo]:
    """Decode ``path`` into a float64 ``(H, W, 3)`` array plus metadata."""
    path = Path(path)
    raw = path.read_bytes()
    fmt = detect_format(raw[:16])
    if fmt == "png":
        data, bits = _read_png(raw, path)
        h, w = data.shape[:2]
        return data, ImageInfo(path, f"png{bits}", w, h, hdr=False, bit_depth=bits)
    data = _read_rgbe(raw, path) if fmt == "rgbe" else _read_pfm(raw, path)
    data = _check_hdr(data, path)
    h, w = data.shape[:2]
    return data, ImageInfo(path, fmt, w, h, hdr=True)


def write_image(image: np.ndarray, path, fmt: str | None = None, *, hdr: bool = False,
                bit_depth: int = 16) -> None:
    """Encode ``image``; the format defaults to the file extension.

    LDR data goes to PNG (clamped, quantized round-half-up). HDR data must go
    to ``.hdr`` or ``.pfm``; asking for PNG is refused rather than clipped.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {image.shape}")
    if fmt == "png":
        if hdr:
            raise ImageFormatError("HDR to LDR format requires rendering")
        _write_png(image, path, bit_depth)
    elif fmt in ("hdr", "rgbe", "pic"):
        path.write_bytes(encode_rgbe(_check_hdr(image, path)))
    elif fmt == "pfm":
        path.write_bytes(encode_pfm(_check_hdr(image, path)))
    else:
        raise ImageFormatError(f"unsupported output format {fmt!r}")


# -- PNG ----------------------------------------------------------------------


def quantize(image: np.ndarray, bit_depth: int) -> np.ndarray:
    top = 2**bit_depth - 1
    code = np.floor(np.clip(image, 0.0, 1.0) * top + 0.5)
    return code.astype(np.uint16 if bit_depth == 16 else np.uint8)


def _write_png(image: np.ndarray, path: Path, bit_depth: int) -> None:
    if bit_depth not in (8, 16):
        raise ValueError("PNG bit depth must be 8 or 16")
    code = quantize(image, bit_depth)
    ok, buf = cv2.imencode(".png", np.ascontiguousarray(code[..., ::-1]))
    if not ok:
        raise OSError(f"PNG encoding failed for {path}")
    path.write_bytes(buf.tobytes())


def _read_png(raw: bytes, path: Path) -> tuple[np.ndarray, int]:
    if len(raw) < 24:
        raise ImageFormatError(f"{path}: truncated PNG")
    width = int.from_bytes(raw[16:20], "big")
    height = int.from_bytes(raw[20:24], "big")
    _check_dims(width, height, path)
    img = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ImageFormatError(f"{path}: corrupt or truncated PNG")
    bits = 16 if img.dtype == np.uint16 else 8
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    elif img.shape[2] == 4:
        img = img[..., :3]
    img = img[..., ::-1]
    return img.astype(np.float64) / (2**bits - 1), bits


# -- Radiance RGBE ------------------------------------------------------------


def rgbe_to_float(rgbe: np.ndarray) -> np.ndarray:
    """``m / 256 * 2**(e - 128)`` per channel; exponent 0 decodes to black."""
    rgbe = np.asarray(rgbe)
    e = rgbe[..., 3].astype(np.int64)
    scale = np.where(e > 0, np.ldexp(1.0, e - 136), 0.0)
    return rgbe[..., :3].astype(np.float64) * scale[..., None]


def float_to_rgbe(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    v = rgb.max(axis=-1)
    mant, exp = np.frexp(v)
    ok = v >= 1e-32
    scale = np.where(ok, mant * 256.0 / np.where(ok, v, 1.0), 0.0)
    out = np.zeros(rgb.shape[:-1] + (4,), dtype=np.uint8)
    out[..., :3] = np.clip(np.floor(rgb * scale[..., None]), 0, 255).astype(np.uint8)
    out[..., 3] = np.where(ok, np.clip(exp + 128, 0, 255), 0).astype(np.uint8)
    return out


_RES_RE = re.compile(rb"-Y (\d+) \+X (\d+)")


def _read_rgbe(raw: bytes, path: Path) -> np.ndarray:
    end = raw.find(b"\n\n")
    if end < 0:
        raise ImageFormatError(f"{path}: RGBE header not terminated")
    header = raw[:end]
    if b"FORMAT=" in header and b"FORMAT=32-bit_rle_rgbe" not in header:
        raise ImageFormatError(f"{path}: only 32-bit_rle_rgbe is supported")
    nl = raw.find(b"\n", end + 2)
    if nl < 0:
        raise ImageFormatError(f"{path}: missing RGBE resolution line")
    match = _RES_RE.fullmatch(raw[end + 2 : nl].strip())
    if not match:
        raise ImageFormatError(f"{path}: unsupported RGBE orientation {raw[end + 2 : nl]!r}")
    height, width = int(match.group(1)), int(match.group(2))
    _check_dims(width, height, path)
    data = np.frombuffer(raw, dtype=np.uint8, offset=nl + 1)
    return rgbe_to_float(_decode_scanlines(data, width, height, path))


def _decode_scanlines(data: np.ndarray, width: int, height: int, path) -> np.ndarray:
    out = np.empty((height, width, 4), dtype=np.uint8)
    pos = 0
    size = data.size
    for y in range(height):
        if pos + 4 > size:
            raise ImageFormatError(f"{path}: truncated RGBE data")
        b0, b1, b2, b3 = data[pos : pos + 4]
        if not (8 <= width < 32768 and b0 == 2 and b1 == 2 and not b2 & 0x80):
            # flat scanlines for the rest of the image
            need = (height - y) * width * 4
            if pos + need > size:
                raise ImageFormatError(f"{path}: truncated RGBE data")
            out[y:] = data[pos : pos + need].reshape(height - y, width, 4)
            return out
        if (int(b2) << 8 | int(b3)) != width:
            raise ImageFormatError(f"{path}: RGBE scanline width mismatch")
        pos += 4
        for ch in range(4):
            x = 0
            row = out[y, :, ch]
            while x < width:
                if pos >= size:
                    raise ImageFormatError(f"{path}: truncated RGBE data")
                count = int(data[pos])
                pos += 1
                if count > 128:
                    count -= 128
                    if count > width - x or pos >= size:
                        raise ImageFormatError(f"{path}: bad RGBE run")
                    row[x : x + count] = data[pos]
                    pos += 1
                else:
                    if count == 0 or count > width - x or pos + count > size:
                        raise ImageFormatError(f"{path}: bad RGBE run")
                    row[x : x + count] = data[pos : pos + count]
                    pos += count
                x += count
    return out


def _rle_channel(row: np.ndarray) -> bytearray:
    out = bytearray()
    n = row.size
    x = 0
    while x < n:
        run = 1
        while x + run < n and run < 127 and row[x + run] == row[x]:
            run += 1
        if run >= 4:
            out += bytes((128 + run, row[x]))
            x += run
            continue
        start = x
        x += 1
        while x < n and x - start < 128:
            if x + 3 < n and row[x] == row[x + 1] == row[x + 2] == row[x + 3]:
                break
            x += 1
        out.append(x - start)
        out += row[start:x].tobytes()
    return out


def encode_rgbe(image: np.ndarray) -> bytes:
    """Run-length encoded Radiance file (flat when the width disallows RLE)."""
    h, w = image.shape[:2]
    rgbe = float_to_rgbe(image)
    out = bytearray(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n")
    out += f"-Y {h} +X {w}\n".encode()
    if not 8 <= w < 32768:
        out += rgbe.tobytes()
        return bytes(out)
    for y in range(h):
        out += bytes((2, 2, w >> 8, w & 0xFF))
        for ch in range(4):
            out += _rle_channel(rgbe[y, :, ch])
    return bytes(out)


# -- PFM ----------------------------------------------------------------------


def _read_pfm(raw: bytes, path: Path) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PFM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte ends the header
    if tokens[0] != b"PF":
        raise ImageFormatError(f"{path}: only color PFM (PF) is supported")
    try:
        width, height, scale = int(tokens[1]), int(tokens[2]), float(tokens[3])
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PFM header") from exc
    _check_dims(width, height, path)
    if scale == 0:
        raise ImageFormatError(f"{path}: PFM scale must be non-zero")
    dtype = np.dtype("<f4" if scale < 0 else ">f4")
    count = width * height * 3
    if len(raw) - pos < count * 4:
        raise ImageFormatError(f"{path}: truncated PFM data")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    # rows are stored bottom to top
    return data.reshape(height, width, 3)[::-1].astype(np.float64)


def encode_pfm(image: np.ndarray, little_endian: bool = True) -> bytes:
    h, w = image.shape[:2]
    dtype = np.dtype("<f4" if little_endian else ">f4")
    header = f"PF\n{w} {h}\n{-1.0 if little_endian else 1.0}\n".encode()
    return header + np.ascontiguousarray(image[::-1], dtype=dtype).tobytes()


def read_evs(path) -> list[float]:
    """Exposure values from a sidecar file, one float per line."""
    evs = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            evs.append(float(line))
    return evs


def write_evs(evs, path) -> None:
    Path(path).write_text("".join(f"{float(ev):g}\n" for ev in evs))


def is_image_file(path) -> bool:
    try:
        with open(path, "rb") as fh:
            detect_format(fh.read(16))
    except (ImageFormatError, OSError):
        return False
    return os.path.isfile(path)
