"""Cross-date radiometric alignment with change-aware affinity weights.

Each band of the post-event image is modelled as ``gain * pre + offset``.
The fit is iteratively reweighted: pixels with large residuals (likely
changed) get Gaussian weights near zero, so they barely pull the line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import GridMismatchError, InputError, PipelineError
from ..raster import Raster

MAD_SCALE = 1.4826
SIGMA_FLOOR = 1e-12
MIN_VALID_PIXELS = 10


@dataclass(frozen=True)
class NormalizationModel:
    gains: tuple[float, ...]
    offsets: tuple[float, ...]
    sigmas: tuple[float, ...]
    iterations_run: int
    degenerate: tuple[bool, ...] = field(default=())

    @property
    def bands(self) -> int:
        return len(self.gains)

    def to_dict(self) -> dict:
        return {
            "gains": list(self.gains),
            "offsets": list(self.offsets),
            "sigmas": list(self.sigmas),
            "iterations_run": self.iterations_run,
            "degenerate": list(self.degenerate),
        }


def weighted_line(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float, bool]:
    """Weighted least-squares ``y ~ gain*x + offset``; returns (gain, offset, degenerate)."""
    sw = w.sum()
    if sw <= 0:
        w = np.ones_like(x)
        sw = w.sum()
    xm = np.dot(w, x) / sw
    ym = np.dot(w, y) / sw
    dx = x - xm
    sxx = np.dot(w, dx * dx)
    if not sxx > 0:
        return 0.0, float(ym), True
    gain = np.dot(w, dx * (y - ym)) / sxx
    return float(gain), float(ym - gain * xm), False


def _trimmed(w: np.ndarray, absres: np.ndarray, trim: float) -> np.ndarray:
    if trim <= 0:
        return w
    n_drop = int(np.floor(trim * absres.size))
    if n_drop == 0:
        return w
    order = np.argsort(absres, kind="stable")
    w = w.copy()
    w[order[absres.size - n_drop:]] = 0.0
    return w


def fit_normalization(pre: Raster, post: Raster, iterations: int = 10, trim: float = 0.0):
    """Fit per-band gain/offset mapping ``pre`` onto ``post``.

    Every round solves a weighted least-squares line, estimates the residual
    scale as ``1.4826 * MAD`` and resets the weights to
    ``exp(-r**2 / (2 * (3*sigma)**2))``. With ``trim > 0`` the largest
    ``trim`` fraction of absolute residuals is additionally excluded from the
    next fit (the affinity weights themselves are not trimmed).

    Returns the model and the per-pixel affinity weights (minimum over bands,
    0 at nodata).
    """
    if not pre.same_grid(post) or pre.bands != post.bands:
        raise GridMismatchError(
            f"pre {pre.bands}x{pre.height}x{pre.width} and post "
            f"{post.bands}x{post.height}x{post.width} rasters do not share a grid",
            stage="fit_normalization")
    if iterations < 1:
        raise InputError("iterations must be >= 1", stage="fit_normalization")
    if not 0 <= trim < 0.5:
        raise InputError(f"trim must lie in [0, 0.5), got {trim}", stage="fit_normalization")

    valid = pre.valid_mask() & post.valid_mask()
    n_valid = int(valid.sum())
    if n_valid < MIN_VALID_PIXELS:
        raise PipelineError(
            f"only {n_valid} valid pixels; normalization needs at least {MIN_VALID_PIXELS}",
            stage="fit_normalization")

    gains, offsets, sigmas, flags = [], [], [], []
    affinity = np.ones(n_valid)
    rounds = 0
    for k in range(pre.bands):
        x = pre.band(k)[valid].astype(np.float64)
        y = post.band(k)[valid].astype(np.float64)
        fit_w = np.ones(n_valid)
        gain = offset = sigma = 0.0
        degenerate = False
        prev = None
        it = 0
        for it in range(1, iterations + 1):
            gain, offset, degenerate = weighted_line(x, y, fit_w)
            r = y - (gain * x + offset)
            sigma = max(MAD_SCALE * float(np.median(np.abs(r - np.median(r)))), SIGMA_FLOOR)
            w = np.exp(-(r * r) / (2.0 * (3.0 * sigma) ** 2))
            fit_w = _trimmed(w, np.abs(r), trim)
            if degenerate or prev == (gain, offset):
                break
            prev = (gain, offset)
        rounds = max(rounds, it)
        affinity = np.minimum(affinity, w)
        gains.append(gain)
        offsets.append(offset)
        sigmas.append(sigma)
        flags.append(degenerate)

    weights = np.zeros(pre.shape)
    weights[valid] = affinity
    model = NormalizationModel(tuple(gains), tuple(offsets), tuple(sigmas), rounds, tuple(flags))
    return model, weights


def apply_normalization(pre: Raster, m: NormalizationModel) -> Raster:
    """Map ``pre`` into the radiometry of the post image (float32 output)."""
    if m.bands != pre.bands:
        raise InputError(
            f"model has {m.bands} bands but raster has {pre.bands}", stage="apply_normalization")
    valid = pre.valid_mask()
    gains = np.asarray(m.gains).reshape(-1, 1, 1)
    offsets = np.asarray(m.offsets).reshape(-1, 1, 1)
    out = gains * pre.data.astype(np.float64) + offsets
    nodata = pre.nodata
    if nodata is not None:
        out = np.where(valid, out, nodata)
    return Raster(pre.width, pre.height, pre.bands, "float32", out.astype(np.float32),
                  pre.geo, pre.crs, nodata)
