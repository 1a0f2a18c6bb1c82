"""Binary PPM (P6) quick-look of a mask over its base image."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import GridMismatchError
from .raster import ChangeMap, Raster

RED_ALPHA = 0.6


def stretch_gray(band: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """2-98 percentile stretch to 0..255; a constant band renders mid-gray 128."""
    out = np.zeros(band.shape, dtype=np.float64)
    v = band[valid].astype(np.float64)
    if v.size == 0:
        return out
    lo, hi = np.percentile(v, [2.0, 98.0])
    if not hi > lo:
        out[valid] = 128.0
        return out
    out[valid] = np.clip((v - lo) / (hi - lo), 0.0, 1.0) * 255.0
    return out


def render_rgb(base: Raster, mask: ChangeMap) -> np.ndarray:
    """``(rows, cols, 3)`` uint8 image: grayscale base, mask pixels blended 60% toward pure red."""
    if (base.width, base.height) != (mask.width, mask.height):
        raise GridMismatchError(
            f"base {base.width}x{base.height} and mask {mask.width}x{mask.height} differ", stage="render")
    gray = stretch_gray(base.band(0), base.valid_mask())
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    hit = mask.values.astype(bool)
    red = np.array([255.0, 0.0, 0.0])
    rgb[hit] = (1.0 - RED_ALPHA) * rgb[hit] + RED_ALPHA * red
    return np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)


def ppm_bytes(rgb: np.ndarray) -> bytes:
    rows, cols, _ = rgb.shape
    return f"P6\n{cols} {rows}\n255\n".encode("ascii") + np.ascontiguousarray(rgb).tobytes()


def write_ppm(base: Raster, mask: ChangeMap, path) -> None:
    Path(path).write_bytes(ppm_bytes(render_rgb(base, mask)))
