"""Regional disaster database: GeoJSON and CSV writers.

Each record becomes a Point feature at its centroid. Coordinates stay in
the raster's native CRS; because GeoJSON assumes WGS84, the real CRS and
the run provenance travel in a top-level ``"disasternets"`` member.

Output is byte-deterministic: fixed key order, fixed number formatting,
LF line endings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .attrgran import DisasterRecord

SCHEMA_VERSION = "1"
CSV_HEADER = "id,area_m2,perimeter_m,aspect_ratio,centroid_x,centroid_y,pixel_count"


@dataclass
class DisasterDatabase:
    records: list[DisasterRecord]
    crs: str = ""
    source_scene: dict[str, str | None] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"record ids must be dense 1..N ascending, got {ids[:10]}")


def format_number(v) -> str:
    """Locale-independent number text.

    Integers print as-is. Floats with ``1e-3 <= |v| < 1e7`` (and zero) print
    in fixed notation rounded to 6 decimals with trailing zeros stripped;
    others use 6 significant digits in exponent notation.
    """
    if isinstance(v, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(v, int):
        return str(v)
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"cannot format non-finite value {v!r}")
    if v == 0.0:
        return "0"
    if 1e-3 <= abs(v) < 1e7:
        text = f"{v:.6f}".rstrip("0").rstrip(".")
        return "0" if text in ("-0", "") else text
    mantissa, exponent = f"{v:.5e}".split("e")
    mantissa = mantissa.rstrip("0").rstrip(".")
    return f"{mantissa}e{int(exponent)}"


def _encode(obj, indent: int, level: int = 0) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (int, float)):
        return format_number(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(format_number(v) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def to_feature_collection(db: DisasterDatabase) -> dict:
    features = [
        {
            "type": "Feature",
            "id": r.id,
            "geometry": {"type": "Point", "coordinates": [r.centroid_x, r.centroid_y]},
            "properties": {
                "id": r.id,
                "area_m2": r.area_m2,
                "perimeter_m": r.perimeter_m,
                "aspect_ratio": r.aspect_ratio,
                "pixel_count": r.pixel_count,
            },
        }
        for r in sorted(db.records, key=lambda r: r.id)
    ]
    return {
        "type": "FeatureCollection",
        "disasternets": {
            "schema_version": db.schema_version,
            "crs": db.crs,
            "source_scene": dict(db.source_scene),
        },
        "features": features,
    }


def geojson_text(db: DisasterDatabase) -> str:
    return _encode(to_feature_collection(db), indent=2) + "\n"


def write_geojson(db: DisasterDatabase, path) -> None:
    Path(path).write_bytes(geojson_text(db).encode("utf-8"))


def csv_text(db: DisasterDatabase) -> str:
    lines = [CSV_HEADER]
    for r in sorted(db.records, key=lambda r: r.id):
        values = (r.id, r.area_m2, r.perimeter_m, r.aspect_ratio, r.centroid_x, r.centroid_y,
                  r.pixel_count)
        lines.append(",".join(format_number(v) for v in values))
    return "\n".join(lines) + "\n"


def write_csv(db: DisasterDatabase, path) -> None:
    Path(path).write_bytes(csv_text(db).encode("utf-8"))
