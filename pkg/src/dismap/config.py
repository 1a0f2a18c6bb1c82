"""Pipeline configuration (JSON) with defaults and range validation.

Relative paths in a config file resolve against the file's directory.
Unknown keys are rejected so typos do not silently fall back to defaults.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .changedetect.forest import ForestParams
from .changedetect.pipeline import ChangeDetectConfig
from .errors import ConfigError, InputError
from .raster import raster_paths
from .spacegran import Branch, ScenarioInputs

DEFAULTS: dict[str, Any] = {
    "scenario": {
        "post_image": None,
        "pre_image": None,
        "labels_available": False,
        "source_dataset_available": False,
        "external_mask": None,
        "branch": None,
    },
    "changedetect": {
        "iterations": 10,
        "trim": 0.0,
        "levels": 3,
        "level_weights": [0.5, 0.3, 0.2],
        "margin": 0.1,
        "min_seeds": None,
        "max_seeds": 200000,
        "forest": {"n_trees": 50, "max_depth": 12, "min_leaf": 5, "mtry": None},
    },
    "postprocess": {"majority_radius": 1, "min_area_px": 10},
    "attrgran": {"connectivity": 8, "min_area_px": 10},
    "outputs": {"mask": None, "geojson": None, "csv": None, "report": None, "render": None},
    "rng_seed": 42,
    "provenance_timestamp": None,
}

PATH_KEYS = {
    "scenario": ("post_image", "pre_image", "external_mask"),
    "outputs": ("mask", "geojson", "csv", "report", "render"),
}


def template_text() -> str:
    return json.dumps(DEFAULTS, indent=2) + "\n"


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        name = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {name!r} must be an object")
            out[key] = _merge(base[key], value, name + ".")
        else:
            out[key] = value
    return out


def set_key(raw: dict, dotted: str, value: Any) -> None:
    """Override ``section.key`` in a raw config dict."""
    parts = dotted.split(".")
    node = raw
    ref = DEFAULTS
    for part in parts[:-1]:
        if not isinstance(ref.get(part), dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        ref = ref[part]
        node = node.setdefault(part, {})
    if parts[-1] not in ref or isinstance(ref[parts[-1]], dict):
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def _int(v, name, lo=None, hi=None, optional=False):
    if v is None and optional:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{name}={v} outside [{lo}, {hi if hi is not None else 'inf'}]")
    return v


def _float(v, name, lo=None, hi_open=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    v = float(v)
    if (lo is not None and v < lo) or (hi_open is not None and v >= hi_open):
        raise ConfigError(f"{name}={v} outside [{lo}, {hi_open})")
    return v


def _bool(v, name):
    if not isinstance(v, bool):
        raise ConfigError(f"{name} must be true or false, got {v!r}")
    return v


def _path(v, name, base: Path | None):
    if v is None:
        return None
    if not isinstance(v, str) or not v:
        raise ConfigError(f"{name} must be a path string, got {v!r}")
    p = Path(v)
    if base is not None and not p.is_absolute():
        p = base / p
    return p


@dataclass(frozen=True)
class PipelineConfig:
    scenario: ScenarioInputs | None
    branch: Branch | None
    changedetect: ChangeDetectConfig
    connectivity: int
    granulate_min_area_px: int
    outputs: dict[str, Path | None]
    rng_seed: int
    provenance_timestamp: str | None
    raw: dict

    def provenance(self) -> dict[str, str | None]:
        sc = self.raw["scenario"]
        return {
            "post_image": sc["post_image"],
            "pre_image": sc["pre_image"],
            "external_mask": sc["external_mask"],
            "branch": None,
            "timestamp": self.provenance_timestamp,
        }


def _timestamp(value) -> str | None:
    if value is not None:
        if not isinstance(value, str):
            raise ConfigError("provenance_timestamp must be a string or null")
        return value
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        try:
            return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        except ValueError:
            raise ConfigError(f"SOURCE_DATE_EPOCH is not an integer: {epoch!r}") from None
    return None


def build_config(user: dict | None = None, base_dir: Path | None = None,
                 require_scenario: bool = True, check_inputs: bool = True) -> PipelineConfig:
    """Merge ``user`` over the defaults, validate ranges and resolve paths."""
    raw = _merge(DEFAULTS, user or {})
    sc, cd, pp, ag, out = (raw[k] for k in ("scenario", "changedetect", "postprocess", "attrgran", "outputs"))
    seed = _int(raw["rng_seed"], "rng_seed", 0)

    fp = cd["forest"]
    forest = ForestParams(
        n_trees=_int(fp["n_trees"], "changedetect.forest.n_trees", 1),
        max_depth=_int(fp["max_depth"], "changedetect.forest.max_depth", 0),
        min_leaf=_int(fp["min_leaf"], "changedetect.forest.min_leaf", 1),
        mtry=_int(fp["mtry"], "changedetect.forest.mtry", 1, optional=True),
        rng_seed=seed,
    )
    levels = _int(cd["levels"], "changedetect.levels", 1)
    weights = cd["level_weights"]
    if not isinstance(weights, list) or len(weights) != levels:
        raise ConfigError(f"changedetect.level_weights must list {levels} numbers")
    weights = tuple(_float(w, "changedetect.level_weights[]", 0.0) for w in weights)
    if not sum(weights) > 0:
        raise ConfigError("changedetect.level_weights must have a positive sum")
    cdc = ChangeDetectConfig(
        iterations=_int(cd["iterations"], "changedetect.iterations", 1),
        trim=_float(cd["trim"], "changedetect.trim", 0.0, 0.5),
        levels=levels,
        level_weights=weights,
        margin=_float(cd["margin"], "changedetect.margin", 0.0, 0.5),
        min_seeds=_int(cd["min_seeds"], "changedetect.min_seeds", 1, optional=True),
        max_seeds=_int(cd["max_seeds"], "changedetect.max_seeds", 4),
        forest=forest,
        majority_radius=_int(pp["majority_radius"], "postprocess.majority_radius", 0, 1),
        min_area_px=_int(pp["min_area_px"], "postprocess.min_area_px", 0),
    )
    connectivity = _int(ag["connectivity"], "attrgran.connectivity")
    if connectivity not in (4, 8):
        raise ConfigError(f"attrgran.connectivity must be 4 or 8, got {connectivity}")

    paths = {k: _path(sc[k], f"scenario.{k}", base_dir) for k in PATH_KEYS["scenario"]}
    scenario = None
    branch = None
    if sc["branch"] is not None:
        try:
            branch = Branch(sc["branch"])
        except ValueError:
            raise ConfigError(
                f"scenario.branch {sc['branch']!r} is not one of {[b.value for b in Branch]}") from None
    if paths["post_image"] is not None:
        scenario = ScenarioInputs(
            post_image=paths["post_image"],
            pre_image=paths["pre_image"],
            labels_available=_bool(sc["labels_available"], "scenario.labels_available"),
            source_dataset_available=_bool(sc["source_dataset_available"],
                                           "scenario.source_dataset_available"),
            external_mask=paths["external_mask"],
        )
    elif require_scenario:
        raise ConfigError("scenario.post_image is required")
    if check_inputs and scenario is not None:
        for key in PATH_KEYS["scenario"]:
            p = paths[key]
            if p is not None and not _raster_exists(p):
                raise InputError(f"scenario.{key}: input raster {p} does not exist", stage="config")

    return PipelineConfig(
        scenario=scenario,
        branch=branch,
        changedetect=cdc,
        connectivity=connectivity,
        granulate_min_area_px=_int(ag["min_area_px"], "attrgran.min_area_px", 0),
        outputs={k: _path(out[k], f"outputs.{k}", base_dir) for k in PATH_KEYS["outputs"]},
        rng_seed=seed,
        provenance_timestamp=_timestamp(raw["provenance_timestamp"]),
        raw=raw,
    )


def _raster_exists(p: Path) -> bool:
    hdr, body = raster_paths(p)
    return hdr.exists() and body.exists()


def load_config_file(path) -> tuple[dict, Path]:
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {p} does not exist") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return data, p.resolve().parent
