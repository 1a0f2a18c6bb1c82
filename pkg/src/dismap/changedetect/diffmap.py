"""Multi-scale difference map."""

from __future__ import annotations

import math

import numpy as np

from ..errors import GridMismatchError, InputError
from ..raster import Raster

BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
LOW_PERCENTILE = 1.0
HIGH_PERCENTILE = 99.0


def _blur_axis(img: np.ndarray, axis: int) -> np.ndarray:
    pad = [(0, 0)] * img.ndim
    pad[axis] = (2, 2)
    p = np.pad(img, pad, mode="reflect") if img.shape[axis] > 2 else np.pad(img, pad, mode="edge")
    n = img.shape[axis]
    out = np.zeros_like(img)
    for i, wt in enumerate(BINOMIAL5):
        out += wt * np.take(p, np.arange(i, i + n), axis=axis)
    return out


def pyramid_down(img: np.ndarray) -> np.ndarray:
    """One pyramid step on a ``(..., rows, cols)`` array: 5-tap binomial blur, keep even indices."""
    blurred = _blur_axis(_blur_axis(img, -1), -2)
    return blurred[..., ::2, ::2]


def gaussian_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    out = [img]
    for _ in range(levels - 1):
        out.append(pyramid_down(out[-1]))
    return out


def _interp_axis(src_len: int, dst_len: int, scale: int):
    # dst pixel i sits at src coordinate i / scale (level samples keep even indices)
    pos = np.arange(dst_len, dtype=np.float64) / scale
    pos = np.clip(pos, 0.0, src_len - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, src_len - 1)
    t = pos - i0
    return i0, i1, t


def upsample_bilinear(level_map: np.ndarray, shape: tuple[int, int], scale: int) -> np.ndarray:
    """Bilinear resampling of a decimated map back to the full-resolution grid."""
    if scale == 1:
        return level_map
    r0, r1, tr = _interp_axis(level_map.shape[0], shape[0], scale)
    c0, c1, tc = _interp_axis(level_map.shape[1], shape[1], scale)
    rows = level_map[r0] * (1.0 - tr)[:, None] + level_map[r1] * tr[:, None]
    return rows[:, c0] * (1.0 - tc)[None, :] + rows[:, c1] * tc[None, :]


def magnitude(diff: np.ndarray) -> np.ndarray:
    """Per-pixel Euclidean norm across the band axis of a ``(bands, rows, cols)`` array."""
    return np.sqrt(np.sum(diff * diff, axis=0))


def percentile_rescale(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Map the 1st percentile of valid values to 0 and the 99th to 1, clamping.

    When the two percentiles coincide the upper anchor falls back to the
    valid maximum; a constant map rescales to all zeros.
    """
    out = np.zeros(values.shape, dtype=np.float64)
    v = values[valid]
    if v.size == 0:
        return out
    lo, hi = np.percentile(v, [LOW_PERCENTILE, HIGH_PERCENTILE])
    if not hi > lo:
        hi = v.max()
    if not hi > lo:
        return out
    out[valid] = np.clip((v - lo) / (hi - lo), 0.0, 1.0)
    return out


def max_levels(width: int, height: int) -> int:
    return int(math.floor(math.log2(min(width, height))))


def difference_map(pre_n: Raster, post: Raster, levels: int = 3,
                   level_weights=(0.5, 0.3, 0.2), valid: np.ndarray | None = None) -> np.ndarray:
    """Fused multi-scale change magnitude in ``[0, 1]`` (0 at nodata).

    ``level_weights`` runs fine to coarse. ``valid`` defaults to the joint
    valid mask of both rasters; invalid pixels are zero-filled before the
    pyramids are built so they contribute no difference.
    """
    if not pre_n.same_grid(post) or pre_n.bands != post.bands:
        raise GridMismatchError("difference_map: rasters do not share a grid", stage="difference_map")
    weights = [float(w) for w in level_weights]
    if levels < 1:
        raise InputError("levels must be >= 1", stage="difference_map")
    if len(weights) != levels:
        raise InputError(f"{levels} levels need {levels} weights, got {len(weights)}",
                         stage="difference_map")
    if any(w < 0 for w in weights) or not sum(weights) > 0:
        raise InputError("level weights must be >= 0 with a positive sum", stage="difference_map")
    if levels > 1 and levels > math.log2(min(pre_n.width, pre_n.height)):
        raise InputError(
            f"{levels} pyramid levels exceed log2 of the smaller grid side "
            f"({min(pre_n.width, pre_n.height)})", stage="difference_map")
    if valid is None:
        valid = pre_n.valid_mask() & post.valid_mask()

    a = np.where(valid, pre_n.data.astype(np.float64), 0.0)
    b = np.where(valid, post.data.astype(np.float64), 0.0)
    pa = gaussian_pyramid(a, levels)
    pb = gaussian_pyramid(b, levels)
    fused = np.zeros(pre_n.shape, dtype=np.float64)
    for lvl, w in enumerate(weights):
        if w == 0.0:
            continue
        mag = magnitude(pa[lvl] - pb[lvl])
        fused += w * upsample_bilinear(mag, pre_n.shape, 2 ** lvl)
    fused /= sum(weights)
    return percentile_rescale(fused, valid)
