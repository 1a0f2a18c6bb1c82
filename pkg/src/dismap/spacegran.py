"""Space granulation: pick a mapping branch for the available inputs and run it.

Only unsupervised change detection runs in-process. The supervised,
semi-supervised and domain-adaptation branches are served by external deep
models whose output masks are ingested and validated here.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .changedetect.pipeline import ChangeDetectConfig, DiagnosticsBundle, detect_changes
from .changedetect.postprocess import postprocess
from .errors import ConfigError, GridMismatchError, InputError, RasterFormatError
from .raster import ChangeMap, Raster, read_raster


class Branch(enum.Enum):
    SUPERVISED = "SUPERVISED"
    SEMI_SUPERVISED = "SEMI_SUPERVISED"
    UNSUPERVISED_CHANGE_DETECTION = "UNSUPERVISED_CHANGE_DETECTION"
    UDA_WITH_SOURCE = "UDA_WITH_SOURCE"
    UDA_SOURCE_FREE = "UDA_SOURCE_FREE"

    @property
    def internal(self) -> bool:
        return self is Branch.UNSUPERVISED_CHANGE_DETECTION

    @property
    def mode(self) -> str:
        return "INTERNAL" if self.internal else "EXTERNAL_MASK"


MODEL_FAMILIES = {
    Branch.SUPERVISED: "an MFFENet-style supervised segmentation model",
    Branch.SEMI_SUPERVISED: "an SSCDNet-style semi-supervised model",
    Branch.UDA_WITH_SOURCE: "an ADANet/CaGAN-style domain adaptation model",
    Branch.UDA_SOURCE_FREE: "an SDG-MA-style source-free domain adaptation model",
}


@dataclass(frozen=True)
class ScenarioInputs:
    post_image: str | Path
    pre_image: str | Path | None = None
    labels_available: bool = False
    source_dataset_available: bool = False
    external_mask: str | Path | None = None


def _missing_for(branch: Branch, inputs: ScenarioInputs) -> str | None:
    if branch in (Branch.SUPERVISED, Branch.SEMI_SUPERVISED) and not inputs.labels_available:
        return "labels_available"
    if branch is Branch.UNSUPERVISED_CHANGE_DETECTION and inputs.pre_image is None:
        return "pre_image"
    if branch is Branch.UDA_WITH_SOURCE and not inputs.source_dataset_available:
        return "source_dataset_available"
    return None


def select_branch(inputs: ScenarioInputs, override: Branch | str | None = None) -> Branch:
    """Branch for ``inputs``: labels, then pre-image, then source data, else source-free."""
    if override is not None:
        try:
            branch = Branch(override) if not isinstance(override, Branch) else override
        except ValueError:
            raise ConfigError(
                f"unknown branch {override!r}; expected one of {[b.value for b in Branch]}",
                stage="select_branch") from None
        missing = _missing_for(branch, inputs)
        if missing:
            raise ConfigError(f"branch {branch.value} requires {missing}", stage="select_branch")
        return branch
    if inputs.labels_available:
        return Branch.SUPERVISED
    if inputs.pre_image is not None:
        return Branch.UNSUPERVISED_CHANGE_DETECTION
    if inputs.source_dataset_available:
        return Branch.UDA_WITH_SOURCE
    return Branch.UDA_SOURCE_FREE


def ingest_external_mask(path, reference: Raster, tol: float = 1e-6) -> ChangeMap:
    """Validate an externally produced uint8 mask against ``reference``.

    Value sets ``{0,1}`` pass unchanged and ``{0,255}`` is rescaled to
    ``{0,1}``; anything else is rejected. Nodata pixels become invalid label 0.
    """
    mask = read_raster(path)
    if mask.dtype != "uint8" or mask.bands != 1:
        raise RasterFormatError(
            f"external mask {path} must be a single-band uint8 raster, got "
            f"{mask.bands}-band {mask.dtype}", stage="ingest_external_mask")
    if (mask.width, mask.height) != (reference.width, reference.height):
        raise GridMismatchError(
            f"external mask {path} is {mask.width}x{mask.height} but the post image is "
            f"{reference.width}x{reference.height}", stage="ingest_external_mask")
    if not mask.geo.almost_equal(reference.geo, tol):
        raise GridMismatchError(
            f"external mask {path} geotransform {mask.geo.to_list()} differs from the post image "
            f"{reference.geo.to_list()}", stage="ingest_external_mask")
    valid = mask.valid_mask()
    values = mask.band(0)
    present = set(np.unique(values[valid]).tolist())
    if present <= {0, 1}:
        labels = values
    elif present <= {0, 255}:
        labels = (values == 255).astype(np.uint8)
    else:
        raise InputError(
            f"external mask {path} holds illegal values {sorted(present - {0, 1, 255})[:5] or sorted(present)}"
            "; expected {0,1} or {0,255}", stage="ingest_external_mask")
    labels = np.where(valid, labels, 0).astype(np.uint8)
    return ChangeMap(labels, reference.geo, reference.crs, valid)


def run_space_granulation(inputs: ScenarioInputs, config: ChangeDetectConfig | None = None,
                          override: Branch | str | None = None, threads: int = 1,
                          postprocess_external: bool = True) -> tuple[ChangeMap, DiagnosticsBundle]:
    """Produce the disaster mask for ``inputs`` through the selected branch."""
    config = config or ChangeDetectConfig()
    branch = select_branch(inputs, override)
    post = read_raster(inputs.post_image)
    if branch.internal:
        pre = read_raster(inputs.pre_image)
        cm, diag = detect_changes(pre, post, config, threads=threads)
    else:
        if inputs.external_mask is None:
            raise InputError(
                f"{branch.value} expects a mask from {MODEL_FAMILIES[branch]}; "
                "set external_mask to its output", stage="run_space_granulation")
        diag = DiagnosticsBundle()
        t0 = time.perf_counter()
        cm = ingest_external_mask(inputs.external_mask, post)
        diag.timings_ms["ingest_external_mask"] = (time.perf_counter() - t0) * 1e3
        if postprocess_external:
            t1 = time.perf_counter()
            cm = postprocess(cm, config.majority_radius, config.min_area_px)
            diag.timings_ms["postprocess"] = (time.perf_counter() - t1) * 1e3
        diag.total_ms = (time.perf_counter() - t0) * 1e3
    diag.branch = branch.value
    return cm, diag
