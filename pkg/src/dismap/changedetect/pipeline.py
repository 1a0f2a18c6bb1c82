"""End-to-end unsupervised change detection between two co-registered rasters."""

from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from ..errors import GridMismatchError, InputError
from ..raster import ChangeMap, GeoTransform, Raster
from .diffmap import difference_map
from .features import extract_features
from .forest import ForestModel, ForestParams, train_random_forest
from .normalize import NormalizationModel, apply_normalization, fit_normalization
from .postprocess import postprocess
from .seeds import CHANGED, UNCHANGED, SeedLabels, extract_reliable_pixels

log = logging.getLogger(__name__)

STAGES = (
    "fit_normalization",
    "apply_normalization",
    "difference_map",
    "extract_reliable_pixels",
    "extract_features",
    "train_random_forest",
    "classify",
    "postprocess",
)
TRAINING_STAGE = "train_random_forest"
INFERENCE_STAGE = "classify"

_SUBSAMPLE_STREAM = 0


@dataclass(frozen=True)
class ChangeDetectConfig:
    iterations: int = 10
    trim: float = 0.0
    levels: int = 3
    level_weights: tuple[float, ...] = (0.5, 0.3, 0.2)
    margin: float = 0.10
    min_seeds: int | None = None        # None -> min(500, 1% of valid pixels)
    max_seeds: int = 200_000
    forest: ForestParams = field(default_factory=ForestParams)
    majority_radius: int = 1
    min_area_px: int = 10


@dataclass
class DiagnosticsBundle:
    """Intermediate products and per-stage wall-clock timings of one run."""

    timings_ms: dict[str, float] = field(default_factory=dict)
    total_ms: float = 0.0
    branch: str | None = None
    normalization: NormalizationModel | None = None
    difference: np.ndarray | None = None
    seeds: dict[str, int] = field(default_factory=dict)
    threshold: float | None = None
    margin_used: float | None = None
    forest: ForestModel | None = None

    def to_dict(self) -> dict:
        out = {
            "branch": self.branch,
            "timings_ms": {k: round(v, 3) for k, v in self.timings_ms.items()},
            "total_ms": round(self.total_ms, 3),
            "seeds": dict(self.seeds),
            "threshold": self.threshold,
            "margin_used": self.margin_used,
            "normalization": self.normalization.to_dict() if self.normalization else None,
        }
        if self.forest is not None:
            out["forest"] = {
                "n_trees": len(self.forest.trees),
                "n_nodes": sum(t.n_nodes for t in self.forest.trees),
                "feature_names": self.forest.feature_names,
            }
        return out


@contextmanager
def _timed(diag: DiagnosticsBundle, stage: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        diag.timings_ms[stage] = (time.perf_counter() - t0) * 1e3
        log.debug("%s: %.1f ms", stage, diag.timings_ms[stage])


def subsample_seeds(idx_changed: np.ndarray, idx_unchanged: np.ndarray, max_seeds: int,
                    rng_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform per-class subsample keeping class proportions when seeds exceed ``max_seeds``."""
    total = idx_changed.size + idx_unchanged.size
    if total <= max_seeds:
        return idx_changed, idx_unchanged
    rng = np.random.default_rng([rng_seed, _SUBSAMPLE_STREAM])
    frac = max_seeds / total
    out = []
    for idx in (idx_changed, idx_unchanged):
        k = min(idx.size, max(2, int(round(idx.size * frac))))
        out.append(np.sort(rng.choice(idx, size=k, replace=False)))
    return out[0], out[1]


def classify(model: ForestModel, features: np.ndarray, shape: tuple[int, int],
             geo: GeoTransform, crs: str = "", valid: np.ndarray | None = None,
             threads: int = 1) -> ChangeMap:
    """Forest majority vote for every pixel; invalid pixels are forced to 0."""
    if features.shape[0] != shape[0] * shape[1]:
        raise InputError(
            f"{features.shape[0]} feature rows for a {shape[0]}x{shape[1]} grid", stage="classify")
    labels = model.predict(features, threads=threads).reshape(shape)
    return ChangeMap(labels, geo, crs, valid)


def detect_changes(pre: Raster, post: Raster, config: ChangeDetectConfig | None = None,
                   threads: int = 1) -> tuple[ChangeMap, DiagnosticsBundle]:
    """Normalize, difference, seed, train, classify and clean a change map."""
    config = config or ChangeDetectConfig()
    if not pre.same_grid(post) or pre.bands != post.bands:
        raise GridMismatchError(
            f"pre ({pre.bands}x{pre.height}x{pre.width}, gt {pre.geo.to_list()}) and post "
            f"({post.bands}x{post.height}x{post.width}, gt {post.geo.to_list()}) are not co-registered",
            stage="detect_changes")
    diag = DiagnosticsBundle()
    t_start = time.perf_counter()
    valid = pre.valid_mask() & post.valid_mask()

    with _timed(diag, "fit_normalization"):
        model, _ = fit_normalization(pre, post, config.iterations, config.trim)
    diag.normalization = model
    with _timed(diag, "apply_normalization"):
        pre_n = apply_normalization(pre, model)
    with _timed(diag, "difference_map"):
        diff = difference_map(pre_n, post, config.levels, config.level_weights, valid=valid)
    diag.difference = diff
    with _timed(diag, "extract_reliable_pixels"):
        seeds: SeedLabels = extract_reliable_pixels(diff, config.margin, config.min_seeds, valid=valid)
    diag.threshold = seeds.threshold
    diag.margin_used = seeds.margin
    with _timed(diag, "extract_features"):
        feats, names = extract_features(pre_n, post, diff)

    flat = seeds.labels.ravel()
    idx_c, idx_u = subsample_seeds(np.flatnonzero(flat == CHANGED), np.flatnonzero(flat == UNCHANGED),
                                   config.max_seeds, config.forest.rng_seed)
    diag.seeds = {
        "changed": seeds.n_changed,
        "unchanged": seeds.n_unchanged,
        "unknown": seeds.n_unknown,
        "training_changed": int(idx_c.size),
        "training_unchanged": int(idx_u.size),
    }
    train_idx = np.concatenate([idx_u, idx_c])
    train_y = np.concatenate([np.zeros(idx_u.size, np.int64), np.ones(idx_c.size, np.int64)])
    order = np.argsort(train_idx, kind="stable")
    with _timed(diag, "train_random_forest"):
        forest = train_random_forest(feats[train_idx[order]], train_y[order], config.forest,
                                     feature_names=names, threads=threads)
    diag.forest = forest
    with _timed(diag, "classify"):
        cm = classify(forest, feats, pre.shape, post.geo, post.crs, valid, threads=threads)
    with _timed(diag, "postprocess"):
        cm = postprocess(cm, config.majority_radius, config.min_area_px)
    diag.total_ms = (time.perf_counter() - t_start) * 1e3
    return cm, diag
