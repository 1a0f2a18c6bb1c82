"""Change-map cleanup: majority smoothing and small-region removal."""

from __future__ import annotations

import numpy as np

from ..attrgran import label_array
from ..raster import ChangeMap
from .features import _window_offsets


def majority_filter(values: np.ndarray) -> np.ndarray:
    """One pass of a 3x3 majority vote; windows clamp at edges and ties keep the center value."""
    v = np.asarray(values, dtype=np.int32)
    ones = np.zeros_like(v)
    cells = np.zeros_like(v)
    for dst_r, dst_c, src_r, src_c in _window_offsets(v.shape, 1):
        ones[dst_r, dst_c] += v[src_r, src_c]
        cells[dst_r, dst_c] += 1
    out = np.where(2 * ones > cells, 1, np.where(2 * ones < cells, 0, v))
    return out.astype(np.uint8)


def remove_small_components(values: np.ndarray, min_area_px: int, connectivity: int = 8) -> np.ndarray:
    if min_area_px <= 1:
        return np.asarray(values, dtype=np.uint8)
    labels, n = label_array(values, connectivity)
    if n == 0:
        return np.asarray(values, dtype=np.uint8)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    keep = sizes >= min_area_px
    keep[0] = False
    return keep[labels].astype(np.uint8)


def postprocess(cm: ChangeMap, majority_radius: int = 1, min_area_px: int = 0) -> ChangeMap:
    """Optional 3x3 majority pass, then drop 8-connected regions below ``min_area_px``."""
    if majority_radius not in (0, 1):
        raise ValueError(f"majority_radius must be 0 or 1, got {majority_radius}")
    values = cm.values
    if majority_radius == 1:
        values = majority_filter(values)
    values = remove_small_components(values, min_area_px, 8)
    return cm.with_values(values)
