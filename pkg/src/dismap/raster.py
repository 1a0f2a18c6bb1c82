"""Raster data model, flat-binary I/O and georeferencing.

On disk a raster is a pair of files sharing a stem:

``<name>.hdr.json``
    JSON object with the keys ``width``, ``height``, ``bands``, ``dtype``,
    ``nodata``, ``geotransform`` and ``crs``, always written in that order.
``<name>.bsq``
    Little-endian samples, band-sequential, each band row-major from row 0.

Pixel indices follow the pixel-center convention: integer ``(col, row)``
names a cell whose center sits at ``(col + 0.5, row + 0.5)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RasterFormatError

DTYPES = {
    "uint8": np.dtype("<u1"),
    "uint16": np.dtype("<u2"),
    "float32": np.dtype("<f4"),
}

HEADER_KEYS = ("width", "height", "bands", "dtype", "nodata", "geotransform", "crs")
HEADER_SUFFIX = ".hdr.json"
BODY_SUFFIX = ".bsq"


@dataclass(frozen=True)
class GeoTransform:
    """Affine pixel-to-map transform ``x = a*col + b*row + c``, ``y = d*col + e*row + f``."""

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    e: float = 1.0
    f: float = 0.0

    @classmethod
    def from_list(cls, values) -> GeoTransform:
        values = list(values)
        if len(values) != 6:
            raise ValueError(f"geotransform needs 6 values, got {len(values)}")
        return cls(*(float(v) for v in values))

    def to_list(self) -> list[float]:
        return [self.a, self.b, self.c, self.d, self.e, self.f]

    @property
    def determinant(self) -> float:
        return self.a * self.e - self.b * self.d

    @property
    def pixel_area(self) -> float:
        return abs(self.determinant)

    @property
    def is_axis_aligned(self) -> bool:
        return self.b == 0.0 and self.d == 0.0

    def is_invertible(self) -> bool:
        det = self.determinant
        return math.isfinite(det) and det != 0.0

    def almost_equal(self, other: GeoTransform, tol: float = 1e-6) -> bool:
        return all(abs(p - q) <= tol for p, q in zip(self.to_list(), other.to_list()))


def pixel_to_geo(gt: GeoTransform, col, row):
    """Map coordinates of the center of pixel ``(col, row)``.

    Accepts scalars or numpy arrays; fractional indices are allowed.
    """
    cc = np.add(col, 0.5)
    rr = np.add(row, 0.5)
    x = gt.a * cc + gt.b * rr + gt.c
    y = gt.d * cc + gt.e * rr + gt.f
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y


def geo_to_pixel(gt: GeoTransform, x, y):
    """Inverse of :func:`pixel_to_geo` (fractional column, row)."""
    det = gt.determinant
    if not gt.is_invertible():
        raise ValueError(f"geotransform is singular (determinant {det!r})")
    dx = np.subtract(x, gt.c)
    dy = np.subtract(y, gt.f)
    col = (gt.e * dx - gt.b * dy) / det - 0.5
    row = (gt.a * dy - gt.d * dx) / det - 0.5
    if np.ndim(col) == 0:
        return float(col), float(row)
    return col, row


@dataclass(frozen=True, eq=False)
class Raster:
    """Multi-band georeferenced pixel grid.

    ``data`` is held as a read-only ``(bands, height, width)`` array in the
    declared dtype, which is exactly the band-sequential row-major layout.
    A flat sequence of the right length is reshaped on construction.
    """

    width: int
    height: int
    bands: int
    dtype: str
    data: np.ndarray
    geo: GeoTransform = field(default_factory=GeoTransform)
    crs: str = ""
    nodata: float | None = None

    def __post_init__(self):
        if self.dtype not in DTYPES:
            raise RasterFormatError(f"unsupported dtype {self.dtype!r}")
        arr = np.asarray(self.data)
        if arr.size == self.width * self.height * self.bands:
            arr = np.ascontiguousarray(arr.reshape(self.bands, self.height, self.width),
                                       dtype=DTYPES[self.dtype].newbyteorder("="))
            arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        self.validate()

    def validate(self) -> None:
        """Raise :class:`RasterFormatError` if any invariant is violated."""
        if min(self.width, self.height, self.bands) < 1:
            raise RasterFormatError(
                f"width/height/bands must be >= 1, got {self.width}/{self.height}/{self.bands}")
        expected = self.width * self.height * self.bands
        if self.data.size != expected or self.data.shape != (self.bands, self.height, self.width):
            raise RasterFormatError(
                f"data holds {self.data.size} samples, expected {expected} "
                f"({self.bands}x{self.height}x{self.width})")
        if self.dtype not in DTYPES:
            raise RasterFormatError(f"unsupported dtype {self.dtype!r}")
        if not self.geo.is_invertible():
            raise RasterFormatError(f"non-invertible geotransform {self.geo.to_list()}")
        if self.nodata is not None and not math.isfinite(self.nodata):
            raise RasterFormatError("nodata must be a finite number or null")
        if self.dtype == "float32" and self.nodata is None and not np.isfinite(self.data).all():
            raise RasterFormatError("float32 raster holds non-finite samples but declares no nodata")

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def band(self, k: int) -> np.ndarray:
        """Read-only ``(height, width)`` view of band ``k``."""
        if not 0 <= k < self.bands:
            raise IndexError(f"band index {k} out of range for {self.bands}-band raster")
        return self.data[k]

    def valid_mask(self) -> np.ndarray:
        """Pixels that are valid in every band (not nodata, finite)."""
        ok = np.ones(self.shape, dtype=bool)
        if self.dtype == "float32":
            ok &= np.isfinite(self.data).all(axis=0)
        if self.nodata is not None:
            ok &= (self.data != self.nodata).all(axis=0)
        return ok

    def same_grid(self, other: Raster, tol: float = 0.0) -> bool:
        return (self.width == other.width and self.height == other.height
                and self.geo.almost_equal(other.geo, tol))

    def equals(self, other: Raster) -> bool:
        """Field-for-field and sample-for-sample equality."""
        return (self.width == other.width and self.height == other.height
                and self.bands == other.bands and self.dtype == other.dtype
                and self.nodata == other.nodata and self.geo == other.geo
                and self.crs == other.crs
                and np.array_equal(self.data, other.data, equal_nan=self.dtype == "float32"))


def _stem(path) -> Path:
    p = Path(path)
    if p.name.endswith(BODY_SUFFIX):
        return p.with_name(p.name[: -len(BODY_SUFFIX)])
    if p.name.endswith(HEADER_SUFFIX):
        return p.with_name(p.name[: -len(HEADER_SUFFIX)])
    return p


def raster_paths(path) -> tuple[Path, Path]:
    """``(header, body)`` paths for a raster given its stem or either file."""
    stem = _stem(path)
    return stem.with_name(stem.name + HEADER_SUFFIX), stem.with_name(stem.name + BODY_SUFFIX)


def _parse_header(hdr_path: Path) -> dict:
    try:
        header = json.loads(hdr_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise RasterFormatError(f"missing raster header {hdr_path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise RasterFormatError(f"garbled raster header {hdr_path}: {exc}") from None
    if not isinstance(header, dict):
        raise RasterFormatError(f"garbled raster header {hdr_path}: not a JSON object")
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise RasterFormatError(f"raster header {hdr_path} lacks keys {missing}")
    for key in ("width", "height", "bands"):
        if not isinstance(header[key], int) or isinstance(header[key], bool):
            raise RasterFormatError(f"raster header {hdr_path}: {key} must be an integer")
    if header["dtype"] not in DTYPES:
        raise RasterFormatError(f"raster header {hdr_path}: unsupported dtype {header['dtype']!r}")
    nodata = header["nodata"]
    if nodata is not None and (isinstance(nodata, bool) or not isinstance(nodata, (int, float))):
        raise RasterFormatError(f"raster header {hdr_path}: nodata must be a number or null")
    gt = header["geotransform"]
    if (not isinstance(gt, list) or len(gt) != 6
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in gt)):
        raise RasterFormatError(f"raster header {hdr_path}: geotransform must be 6 numbers")
    if not isinstance(header["crs"], str):
        raise RasterFormatError(f"raster header {hdr_path}: crs must be a string")
    return header


def read_raster(path) -> Raster:
    """Load a raster from its header sidecar and flat binary body."""
    hdr_path, body_path = raster_paths(path)
    header = _parse_header(hdr_path)
    dtype = DTYPES[header["dtype"]]
    count = header["width"] * header["height"] * header["bands"]
    try:
        body = body_path.read_bytes()
    except FileNotFoundError:
        raise RasterFormatError(f"missing raster body {body_path}") from None
    expected = count * dtype.itemsize
    if len(body) != expected:
        raise RasterFormatError(
            f"raster body {body_path} length mismatch: expected {expected} bytes, got {len(body)}")
    geo = GeoTransform.from_list(header["geotransform"])
    if not geo.is_invertible():
        raise RasterFormatError(f"raster header {hdr_path}: non-invertible geotransform {gt_str(geo)}")
    nodata = header["nodata"]
    return Raster(
        width=header["width"], height=header["height"], bands=header["bands"],
        dtype=header["dtype"], data=np.frombuffer(body, dtype=dtype),
        geo=geo, crs=header["crs"], nodata=None if nodata is None else float(nodata),
    )


def gt_str(gt: GeoTransform) -> str:
    return "[" + ", ".join(repr(v) for v in gt.to_list()) + "]"


def header_bytes(r: Raster) -> bytes:
    nodata = r.nodata
    if nodata is not None and float(nodata).is_integer() and r.dtype != "float32":
        nodata = int(nodata)
    header = {
        "width": r.width,
        "height": r.height,
        "bands": r.bands,
        "dtype": r.dtype,
        "nodata": nodata,
        "geotransform": r.geo.to_list(),
        "crs": r.crs,
    }
    return (json.dumps(header, indent=2) + "\n").encode("utf-8")


def write_raster(r: Raster, path) -> None:
    """Write ``r`` so that :func:`read_raster` restores it exactly."""
    r.validate()
    hdr_path, body_path = raster_paths(path)
    body = np.ascontiguousarray(r.data, dtype=DTYPES[r.dtype]).tobytes()
    try:
        body_path.write_bytes(body)
        hdr_path.write_bytes(header_bytes(r))
    except OSError as exc:
        raise OSError(f"cannot write raster to {body_path}: {exc.strerror}") from exc


@dataclass(frozen=True, eq=False)
class ChangeMap:
    """Binary disaster/change mask on a georeferenced grid.

    ``valid`` optionally marks pixels that carry data; invalid pixels always
    hold label 0 and are skipped by accuracy tallies.
    """

    values: np.ndarray
    geo: GeoTransform = field(default_factory=GeoTransform)
    crs: str = ""
    valid: np.ndarray | None = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.uint8)
        if values.ndim != 2:
            raise ValueError(f"change map values must be 2-D, got shape {values.shape}")
        if values.size and values.max() > 1:
            raise ValueError("change map values must be 0 or 1")
        valid = self.valid
        if valid is not None:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != values.shape:
                raise ValueError("valid mask shape differs from values")
            if valid.all():
                valid = None
            else:
                values = np.where(valid, values, 0).astype(np.uint8)
                valid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def valid_mask(self) -> np.ndarray:
        if self.valid is None:
            return np.ones(self.shape, dtype=bool)
        return self.valid

    def with_values(self, values) -> ChangeMap:
        return ChangeMap(values, self.geo, self.crs, self.valid)

    def to_raster(self) -> Raster:
        return Raster(self.width, self.height, 1, "uint8", self.values, self.geo, self.crs, None)


def write_change_map(cm: ChangeMap, path) -> None:
    write_raster(cm.to_raster(), path)


def change_map_from_raster(r: Raster) -> ChangeMap:
    """Interpret a single-band raster holding 0/1 labels as a change map."""
    if r.bands != 1:
        raise RasterFormatError(f"change map raster must have 1 band, got {r.bands}")
    valid = r.valid_mask()
    labels = np.where(valid, r.band(0), 0)
    if labels.size and (labels.min() < 0 or labels.max() > 1
                        or not np.array_equal(labels, np.round(labels))):
        bad = sorted(set(np.unique(labels).tolist()) - {0, 1})
        raise RasterFormatError(f"change map holds labels outside {{0,1}}: {bad[:5]}")
    return ChangeMap(labels.astype(np.uint8), r.geo, r.crs, valid)


def read_change_map(path) -> ChangeMap:
    return change_map_from_raster(read_raster(path))
