"""Synthetic pre/post scenes with known inserted changes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import ChangeMap, GeoTransform, Raster

DEFAULT_GEO = GeoTransform(10.0, 0.0, 500000.0, 0.0, -10.0, 4000000.0)
DEFAULT_CRS = "EPSG:32648"


@dataclass(frozen=True)
class Blob:
    row: int        # top-left, inclusive
    col: int
    height: int
    width: int

    @property
    def centroid(self) -> tuple[float, float]:
        """``(col, row)`` of the blob's pixel-index centroid."""
        return self.col + (self.width - 1) / 2.0, self.row + (self.height - 1) / 2.0

    def slices(self) -> tuple[slice, slice]:
        return slice(self.row, self.row + self.height), slice(self.col, self.col + self.width)


@dataclass(frozen=True)
class SyntheticScene:
    pre: Raster
    post: Raster
    truth: ChangeMap
    blobs: tuple[Blob, ...]
    gain: float
    offset: float


def smooth_field(rng: np.random.Generator, shape: tuple[int, int], sigma: float,
                 low: float, high: float) -> np.ndarray:
    """Gaussian-smoothed white noise stretched to ``[low, high]``."""
    f = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    f = (f - f.min()) / (f.max() - f.min())
    return low + (high - low) * f


def place_blobs(rng: np.random.Generator, shape: tuple[int, int], n: int, min_side: int,
                max_side: int, gap: int = 4, max_tries: int = 10_000) -> list[Blob]:
    """Non-touching axis-aligned rectangles, at least ``gap`` pixels apart and off the border."""
    occupied = np.zeros(shape, dtype=bool)
    blobs: list[Blob] = []
    for _ in range(max_tries):
        if len(blobs) == n:
            break
        h, w = (int(v) for v in rng.integers(min_side, max_side + 1, size=2))
        r = int(rng.integers(gap, shape[0] - h - gap + 1))
        c = int(rng.integers(gap, shape[1] - w - gap + 1))
        if occupied[r - gap:r + h + gap, c - gap:c + w + gap].any():
            continue
        occupied[r:r + h, c:c + w] = True
        blobs.append(Blob(r, c, h, w))
    if len(blobs) < n:
        raise RuntimeError(f"could only place {len(blobs)} of {n} blobs")
    return blobs


def make_scene(size: int = 512, bands: int = 2, n_blobs: int = 12, gain: float = 1.2,
               offset: float = 10.0, noise_sigma: float = 2.0, amplitude: float = 30.0,
               min_side: int = 15, max_side: int = 40, seed: int = 0,
               geo: GeoTransform = DEFAULT_GEO, crs: str = DEFAULT_CRS) -> SyntheticScene:
    """Pre scene from a smoothed random field in ``[0, 200]``; post is a gain/offset copy
    plus Gaussian noise, with ``amplitude`` added inside every blob on all bands."""
    rng = np.random.default_rng(seed)
    shape = (size, size)
    pre = np.stack([smooth_field(rng, shape, 8.0, 0.0, 200.0) for _ in range(bands)])
    blobs = place_blobs(rng, shape, n_blobs, min_side, max_side)
    truth = np.zeros(shape, dtype=np.uint8)
    for b in blobs:
        truth[b.slices()] = 1
    post = gain * pre + offset + rng.normal(0.0, noise_sigma, size=pre.shape)
    post = post + amplitude * truth[None, :, :]
    return SyntheticScene(
        pre=Raster(size, size, bands, "float32", pre.astype(np.float32), geo, crs),
        post=Raster(size, size, bands, "float32", post.astype(np.float32), geo, crs),
        truth=ChangeMap(truth, geo, crs),
        blobs=tuple(blobs),
        gain=gain,
        offset=offset,
    )
