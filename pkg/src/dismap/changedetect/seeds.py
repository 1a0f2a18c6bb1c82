"""Reliable changed/unchanged seed extraction from a difference map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError, NoChangeSignalError, PipelineError

UNKNOWN = -1
UNCHANGED = 0
CHANGED = 1

N_BINS = 256
MAX_HALVINGS = 6


@dataclass(frozen=True)
class SeedLabels:
    labels: np.ndarray          # int8 (rows, cols): UNKNOWN / UNCHANGED / CHANGED
    threshold: float
    margin: float               # margin actually applied, after any relaxation
    halvings: int

    @property
    def n_changed(self) -> int:
        return int(np.count_nonzero(self.labels == CHANGED))

    @property
    def n_unchanged(self) -> int:
        return int(np.count_nonzero(self.labels == UNCHANGED))

    @property
    def n_unknown(self) -> int:
        return int(np.count_nonzero(self.labels == UNKNOWN))


def between_class_variance(counts: np.ndarray) -> np.ndarray:
    """Otsu criterion for every split "bins <= k vs bins > k" of a unit-interval histogram."""
    n = counts.sum()
    centers = (np.arange(counts.size) + 0.5) / counts.size
    cum_n = np.cumsum(counts)
    cum_mu = np.cumsum(counts * centers)
    w0 = cum_n / n
    w1 = 1.0 - w0
    mu_t = cum_mu[-1] / n
    with np.errstate(divide="ignore", invalid="ignore"):
        var = (mu_t * w0 - cum_mu / n) ** 2 / (w0 * w1)
    var[(cum_n == 0) | (cum_n == n)] = 0.0
    return var


def otsu_threshold(values: np.ndarray, bins: int = N_BINS) -> float:
    """Otsu threshold of values in ``[0, 1]`` as the winning bin center (ties go low)."""
    counts, _ = np.histogram(values, bins=bins, range=(0.0, 1.0))
    var = between_class_variance(counts.astype(np.float64))
    k = int(np.argmax(var))
    if not var[k] > 0:
        raise NoChangeSignalError(
            "no change signal: difference map has no separable values", stage="extract_reliable_pixels")
    return (k + 0.5) / bins


def default_min_seeds(n_valid: int) -> int:
    return min(500, max(1, n_valid // 100))


def extract_reliable_pixels(diff: np.ndarray, margin: float = 0.10, min_seeds: int | None = None,
                            valid: np.ndarray | None = None) -> SeedLabels:
    """Label confident CHANGED/UNCHANGED pixels around the Otsu threshold.

    Pixels at or beyond ``threshold +/- margin`` become seeds; everything in
    between stays UNKNOWN. If either class ends up with fewer than
    ``min_seeds`` members, the margin is halved (up to six times).
    """
    if not 0 <= margin < 0.5:
        raise InputError(f"margin must lie in [0, 0.5), got {margin}", stage="extract_reliable_pixels")
    if valid is None:
        valid = np.ones(diff.shape, dtype=bool)
    d = diff[valid]
    if d.size == 0:
        raise NoChangeSignalError("no change signal: no valid pixels", stage="extract_reliable_pixels")
    if min_seeds is None:
        min_seeds = default_min_seeds(d.size)
    if d.min() == d.max():
        raise NoChangeSignalError(
            "no change signal: difference map is constant", stage="extract_reliable_pixels")
    tau = otsu_threshold(d)

    m = margin
    for halvings in range(MAX_HALVINGS + 1):
        changed = valid & (diff >= tau + m)
        unchanged = valid & (diff <= tau - m)
        n_c = int(changed.sum())
        n_u = int(unchanged.sum())
        if n_c >= min_seeds and n_u >= min_seeds:
            labels = np.full(diff.shape, UNKNOWN, dtype=np.int8)
            labels[unchanged] = UNCHANGED
            labels[changed] = CHANGED
            return SeedLabels(labels, tau, m, halvings)
        m /= 2.0
    raise PipelineError(
        f"cannot seed {min_seeds} pixels per class after {MAX_HALVINGS} margin halvings "
        f"(threshold {tau:.6f}, last counts changed={n_c}, unchanged={n_u})",
        stage="extract_reliable_pixels")
