"""Matrices as RGB images: green = 1, red = 0, gray = -1.

The PNG written here is the exchange format for external generators.
Reading snaps every pixel to the nearest canonical color, so approximate
colors from a neural generator still decode.
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, PngImagePlugin

from .layout import MAX_ROWS, ROW_WIDTH, VACANT
from .nprint import NprintMatrix
from .pcap_io import atomic_write

GREEN = (0, 255, 0)
RED = (255, 0, 0)
GRAY = (128, 128, 128)

# palette index order matches trit value + 1
PALETTE = np.array([GRAY, RED, GREEN], dtype=np.int32)
_TRIT_FOR_INDEX = np.array([-1, 0, 1], dtype=np.int8)

LOSSLESS_FORMATS = frozenset({"PNG", "BMP", "PPM", "TIFF"})


class ImageFormatError(ValueError):
    pass


def matrix_to_rgb(m: NprintMatrix) -> np.ndarray:
    return PALETTE[m.trits.astype(np.int64) + 1].astype(np.uint8)


def rgb_to_trits(rgb: np.ndarray) -> np.ndarray:
    """Nearest canonical color per pixel (Euclidean RGB); ties decode to -1."""
    px = rgb.astype(np.int32)[..., None, :]           # (h, w, 1, 3)
    d2 = ((px - PALETTE[None, None]) ** 2).sum(-1)    # (h, w, 3)
    best = d2.argmin(-1)
    tied = (d2 == d2.min(-1, keepdims=True)).sum(-1) > 1
    out = _TRIT_FOR_INDEX[best]
    out[tied] = VACANT
    return out


def matrix_to_png_bytes(m: NprintMatrix) -> bytes:
    img = Image.fromarray(matrix_to_rgb(m), mode="RGB")
    info = PngImagePlugin.PngInfo()
    if m.label is not None:
        info.add_text("label", m.label)
    buf = io.BytesIO()
    img.save(buf, format="PNG", pnginfo=info, optimize=False)
    return buf.getvalue()


def matrix_to_image(m: NprintMatrix, path) -> None:
    """Write ``m`` as a 1088x1024 RGB PNG (row i = packet i)."""
    atomic_write(path, matrix_to_png_bytes(m))


def image_to_matrix(path, strict: bool = True) -> NprintMatrix:
    """Read an image back into a matrix.

    ``n_real`` is one past the last non-vacant row. With ``strict`` (the
    default) lossy formats such as JPEG are rejected.
    """
    try:
        img = Image.open(Path(path))
        img.load()
    except (OSError, ValueError) as exc:
        raise ImageFormatError(f"{path}: unreadable image ({exc})") from exc
    if strict and img.format not in LOSSLESS_FORMATS:
        raise ImageFormatError(f"{path}: {img.format} is not a lossless raster format")
    if img.size != (ROW_WIDTH, MAX_ROWS):
        raise ImageFormatError(
            f"{path}: image is {img.size[0]}x{img.size[1]}, expected {ROW_WIDTH}x{MAX_ROWS}")
    label = img.info.get("label") if hasattr(img, "info") else None
    trits = rgb_to_trits(np.asarray(img.convert("RGB")))
    real = np.flatnonzero((trits != VACANT).any(axis=1))
    n_real = int(real[-1]) + 1 if real.size else 0
    return NprintMatrix(trits, n_real, label)
