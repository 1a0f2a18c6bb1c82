"""Attribute granulation: connected disaster regions and their geometry.

Attributes are reported in map units of the change map's geotransform:

* area: pixel count times the pixel area ``|a*e - b*d|``;
* perimeter: exposed pixel edges, top/bottom edges weighing ``|a|`` and
  left/right edges ``|e|``; edges around interior holes count too. Only
  axis-aligned transforms are supported;
* aspect ratio: bounding-box width over height in map units, as-is (it is
  below 1 for tall regions, not folded to max/min);
* centroid: unweighted mean of member pixel centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError, UnsupportedGeometryError
from .raster import ChangeMap, GeoTransform, pixel_to_geo

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def label_array(mask: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label connected nonzero pixels; labels follow row-major order of each region's first pixel."""
    if connectivity not in _STRUCTURES:
        raise InputError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, n = ndimage.label(np.asarray(mask) != 0, structure=_STRUCTURES[connectivity])
    return labels, int(n)


@dataclass(frozen=True)
class Component:
    id: int
    pixel_runs: tuple[tuple[int, int, int], ...]   # (row, col_start, col_end_exclusive)
    bbox: tuple[int, int, int, int]                # (min_row, min_col, max_row, max_col), inclusive
    pixel_count: int

    def pixels(self) -> tuple[np.ndarray, np.ndarray]:
        """``(rows, cols)`` of every member pixel, row-major."""
        rows = [np.full(c1 - c0, r) for r, c0, c1 in self.pixel_runs]
        cols = [np.arange(c0, c1) for _, c0, c1 in self.pixel_runs]
        if not rows:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        return np.concatenate(rows), np.concatenate(cols)

    def mask(self) -> np.ndarray:
        """Boolean mask of the component cropped to its bounding box."""
        r0, c0, r1, c1 = self.bbox
        out = np.zeros((r1 - r0 + 1, c1 - c0 + 1), dtype=bool)
        for r, a, b in self.pixel_runs:
            out[r - r0, a - c0:b - c0] = True
        return out


def _runs(sub: np.ndarray, row0: int, col0: int) -> tuple[tuple[int, int, int], ...]:
    out = []
    for i, line in enumerate(sub):
        padded = np.concatenate(([False], line, [False]))
        edges = np.flatnonzero(padded[1:] != padded[:-1])
        for start, stop in zip(edges[::2], edges[1::2]):
            out.append((row0 + i, col0 + int(start), col0 + int(stop)))
    return tuple(out)


def label_components(cm: ChangeMap | np.ndarray, connectivity: int = 8) -> list[Component]:
    """Maximal connected regions of value-1 pixels, numbered from 1 in row-major first-pixel order."""
    values = cm.values if isinstance(cm, ChangeMap) else np.asarray(cm)
    labels, n = label_array(values, connectivity)
    out = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        sub = labels[sl] == i
        runs = _runs(sub, sl[0].start, sl[1].start)
        bbox = (sl[0].start, sl[1].start, sl[0].stop - 1, sl[1].stop - 1)
        out.append(Component(i, runs, bbox, int(sub.sum())))
    return out


def area(c: Component, gt: GeoTransform) -> float:
    return c.pixel_count * gt.pixel_area


def exposed_edges(c: Component) -> tuple[int, int]:
    """Counts of exposed (horizontal, vertical) pixel edges."""
    m = np.pad(c.mask(), 1)
    horizontal = int(np.count_nonzero(m[1:, :] != m[:-1, :]))
    vertical = int(np.count_nonzero(m[:, 1:] != m[:, :-1]))
    return horizontal, vertical


def perimeter(c: Component, gt: GeoTransform) -> float:
    if not gt.is_axis_aligned:
        raise UnsupportedGeometryError(
            "perimeter needs an axis-aligned geotransform (b = d = 0), got "
            f"b={gt.b}, d={gt.d}", stage="granulate")
    horizontal, vertical = exposed_edges(c)
    return horizontal * abs(gt.a) + vertical * abs(gt.e)


def aspect_ratio(c: Component, gt: GeoTransform) -> float:
    r0, c0, r1, c1 = c.bbox
    return ((c1 - c0 + 1) * abs(gt.a)) / ((r1 - r0 + 1) * abs(gt.e))


def centroid(c: Component, gt: GeoTransform) -> tuple[float, float, float, float]:
    """``(x, y, col, row)`` of the component's unweighted pixel centroid."""
    rows, cols = c.pixels()
    col = float(cols.mean())
    row = float(rows.mean())
    x, y = pixel_to_geo(gt, col, row)
    return x, y, col, row


@dataclass(frozen=True)
class DisasterRecord:
    id: int
    area_m2: float
    perimeter_m: float
    aspect_ratio: float
    centroid_x: float
    centroid_y: float
    centroid_col: float
    centroid_row: float
    pixel_count: int


def granulate(cm: ChangeMap, connectivity: int = 8, min_area_px: int = 1) -> list[DisasterRecord]:
    """One record per connected region of at least ``min_area_px`` pixels, ids dense from 1."""
    gt = cm.geo
    records = []
    for comp in label_components(cm, connectivity):
        if comp.pixel_count < min_area_px:
            continue
        x, y, col, row = centroid(comp, gt)
        records.append(DisasterRecord(
            id=len(records) + 1,
            area_m2=area(comp, gt),
            perimeter_m=perimeter(comp, gt),
            aspect_ratio=aspect_ratio(comp, gt),
            centroid_x=x,
            centroid_y=y,
            centroid_col=col,
            centroid_row=row,
            pixel_count=comp.pixel_count,
        ))
    return records
