"""Per-pixel feature vectors for the seed classifier."""

from __future__ import annotations

import numpy as np

from ..errors import GridMismatchError
from ..raster import Raster


def _window_offsets(shape, radius):
    rows, cols = shape
    for dr in range(-radius, radius + 1):
        r_lo, r_hi = max(0, -dr), min(rows, rows - dr)
        for dc in range(-radius, radius + 1):
            c_lo, c_hi = max(0, -dc), min(cols, cols - dc)
            yield (slice(r_lo, r_hi), slice(c_lo, c_hi),
                   slice(r_lo + dr, r_hi + dr), slice(c_lo + dc, c_hi + dc))


def local_stats(img: np.ndarray, radius: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population standard deviation over ``(2r+1)^2`` windows.

    Windows are clamped at the grid edge, so a corner window of radius 1
    covers 4 cells.
    """
    img = np.asarray(img, dtype=np.float64)
    s = np.zeros_like(img)
    n = np.zeros_like(img)
    for dst_r, dst_c, src_r, src_c in _window_offsets(img.shape, radius):
        s[dst_r, dst_c] += img[src_r, src_c]
        n[dst_r, dst_c] += 1.0
    mean = s / n
    ss = np.zeros_like(img)
    for dst_r, dst_c, src_r, src_c in _window_offsets(img.shape, radius):
        dev = img[src_r, src_c] - mean[dst_r, dst_c]
        ss[dst_r, dst_c] += dev * dev
    return mean, np.sqrt(ss / n)


def feature_names(bands: int) -> list[str]:
    return ([f"pre_{k}" for k in range(bands)] + [f"post_{k}" for k in range(bands)]
            + [f"diff_{k}" for k in range(bands)] + ["d_mean3", "d_std3", "d"])


def extract_features(pre_n: Raster, post: Raster, diff: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Stack per-pixel features into a ``(pixels, n_features)`` matrix (row-major pixels).

    Columns: normalized pre bands, post bands, per-band ``post - pre``,
    3x3 mean and std of the difference map, then the difference map itself.
    """
    if not pre_n.same_grid(post) or pre_n.bands != post.bands or diff.shape != post.shape:
        raise GridMismatchError("extract_features: inputs do not share a grid", stage="extract_features")
    a = pre_n.data.astype(np.float64).reshape(pre_n.bands, -1)
    b = post.data.astype(np.float64).reshape(post.bands, -1)
    d_mean, d_std = local_stats(diff, 1)
    cols = [a, b, b - a, d_mean.reshape(1, -1), d_std.reshape(1, -1),
            np.asarray(diff, dtype=np.float64).reshape(1, -1)]
    x = np.concatenate(cols, axis=0).T
    x = np.where(np.isfinite(x), x, 0.0)
    return np.ascontiguousarray(x), feature_names(pre_n.bands)
