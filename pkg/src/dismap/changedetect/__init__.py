"""Unsupervised change detection: alignment, difference map, seeds, forest."""

from .diffmap import difference_map
from .features import extract_features
from .forest import ForestModel, ForestParams, gini, train_random_forest
from .normalize import NormalizationModel, apply_normalization, fit_normalization
from .pipeline import ChangeDetectConfig, DiagnosticsBundle, classify, detect_changes
from .postprocess import postprocess
from .seeds import CHANGED, UNCHANGED, UNKNOWN, SeedLabels, extract_reliable_pixels

__all__ = [
    "CHANGED",
    "UNCHANGED",
    "UNKNOWN",
    "ChangeDetectConfig",
    "DiagnosticsBundle",
    "ForestModel",
    "ForestParams",
    "NormalizationModel",
    "SeedLabels",
    "apply_normalization",
    "classify",
    "detect_changes",
    "difference_map",
    "extract_features",
    "extract_reliable_pixels",
    "fit_normalization",
    "gini",
    "postprocess",
    "train_random_forest",
]
