import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dismap.errors import RasterFormatError
from dismap.raster import (
    GeoTransform,
    Raster,
    geo_to_pixel,
    pixel_to_geo,
    raster_paths,
    read_change_map,
    read_raster,
    write_change_map,
    write_raster,
)
from dismap.raster import ChangeMap

IDENTITY = GeoTransform()


def write_pair(tmp_path, header, body, name="r"):
    (tmp_path / f"{name}.hdr.json").write_text(json.dumps(header))
    (tmp_path / f"{name}.bsq").write_bytes(body)
    return tmp_path / name


def header(**over):
    h = {"width": 2, "height": 2, "bands": 1, "dtype": "uint8", "nodata": None,
         "geotransform": [1, 0, 0, 0, 1, 0], "crs": "EPSG:4326"}
    h.update(over)
    return h


def test_read_direct_bytes(tmp_path):
    r = read_raster(write_pair(tmp_path, header(), bytes([1, 2, 3, 4])))
    assert (r.width, r.height, r.bands, r.dtype) == (2, 2, 1, "uint8")
    assert r.data.ravel().tolist() == [1, 2, 3, 4]
    assert r.band(0).tolist() == [[1, 2], [3, 4]]


def test_body_length_mismatch_reports_sizes(tmp_path):
    with pytest.raises(RasterFormatError, match="expected 4 bytes, got 3"):
        read_raster(write_pair(tmp_path, header(), bytes([1, 2, 3])))


@pytest.mark.parametrize("bad", [
    "{not json",
    json.dumps({"width": 2}),
    json.dumps(header(dtype="int64")),
    json.dumps(header(geotransform=[0, 0, 0, 0, 0, 0])),
    json.dumps(header(geotransform=[1, 0, 0])),
    json.dumps([1, 2]),
])
def test_bad_headers(tmp_path, bad):
    (tmp_path / "r.hdr.json").write_text(bad)
    (tmp_path / "r.bsq").write_bytes(bytes(4))
    with pytest.raises(RasterFormatError):
        read_raster(tmp_path / "r")


def test_missing_header(tmp_path):
    with pytest.raises(RasterFormatError, match="missing raster header"):
        read_raster(tmp_path / "nothing")


def test_path_forms_resolve_to_same_files(tmp_path):
    stem = tmp_path / "scene"
    assert raster_paths(stem) == raster_paths(f"{stem}.bsq") == raster_paths(f"{stem}.hdr.json")
    assert raster_paths(stem)[0].name == "scene.hdr.json"
    assert raster_paths(stem)[1].name == "scene.bsq"


def test_multiband_layout_is_band_sequential(tmp_path):
    data = np.arange(2 * 3 * 4, dtype=np.uint16).reshape(2, 3, 4) * 1000
    r = Raster(4, 3, 2, "uint16", data, IDENTITY, "x")
    write_raster(r, tmp_path / "m")
    body = (tmp_path / "m.bsq").read_bytes()
    assert body == data.astype("<u2").tobytes()
    assert np.frombuffer(body, "<u2")[12] == data[1, 0, 0]


def test_header_key_order_and_determinism(tmp_path):
    r = Raster(3, 2, 1, "float32", np.linspace(0, 1, 6), GeoTransform(10, 0, 5, 0, -10, 7), "EPSG:32648", -9999.0)
    write_raster(r, tmp_path / "a")
    write_raster(r, tmp_path / "b")
    ha = (tmp_path / "a.hdr.json").read_bytes()
    assert ha == (tmp_path / "b.hdr.json").read_bytes()
    assert (tmp_path / "a.bsq").read_bytes() == (tmp_path / "b.bsq").read_bytes()
    assert list(json.loads(ha)) == ["width", "height", "bands", "dtype", "nodata", "geotransform", "crs"]


def test_invalid_length_rejected_before_writing(tmp_path):
    r = Raster(2, 2, 1, "uint8", [1, 2, 3, 4])
    object.__setattr__(r, "data", np.zeros(3, dtype=np.uint8))
    with pytest.raises(RasterFormatError):
        write_raster(r, tmp_path / "bad")
    assert not (tmp_path / "bad.bsq").exists()
    assert not (tmp_path / "bad.hdr.json").exists()


def test_constructor_rejects_wrong_length():
    with pytest.raises(RasterFormatError):
        Raster(2, 2, 1, "uint8", [1, 2, 3])


def test_float32_without_nodata_must_be_finite():
    with pytest.raises(RasterFormatError):
        Raster(2, 1, 1, "float32", [1.0, np.nan])
    r = Raster(2, 1, 1, "float32", [1.0, np.nan], nodata=-1.0)
    assert r.valid_mask().tolist() == [[True, False]]


def test_band_views():
    data = np.arange(8, dtype=np.uint8)
    r = Raster(2, 2, 2, "uint8", data)
    assert r.band(1).ravel().tolist() == [4, 5, 6, 7]
    with pytest.raises(IndexError):
        r.band(2)
    with pytest.raises(IndexError):
        r.band(-1)
    assert np.concatenate([r.band(k).ravel() for k in range(r.bands)]).tolist() == data.tolist()
    assert not r.band(0).flags.writeable


def test_nodata_excluded_from_valid_mask():
    r = Raster(3, 1, 2, "uint8", [0, 5, 6, 1, 0, 6], nodata=0)
    assert r.valid_mask().tolist() == [[False, False, True]]


rasters = st.builds(
    lambda w, h, b, dtype, seed, nodata, gt: _random_raster(w, h, b, dtype, seed, nodata, gt),
    st.integers(1, 9), st.integers(1, 9), st.integers(1, 3),
    st.sampled_from(["uint8", "uint16", "float32"]), st.integers(0, 2**31),
    st.booleans(),
    st.tuples(*[st.floats(-1e6, 1e6, allow_nan=False)] * 6).filter(
        lambda t: abs(t[0] * t[4] - t[1] * t[3]) > 1e-3),
)


def _random_raster(w, h, b, dtype, seed, with_nodata, gt):
    rng = np.random.default_rng(seed)
    if dtype == "float32":
        data = rng.normal(0, 1000, size=(b, h, w)).astype(np.float32)
        nodata = -9999.0 if with_nodata else None
    else:
        top = 255 if dtype == "uint8" else 65535
        data = rng.integers(0, top + 1, size=(b, h, w))
        nodata = float(top) if with_nodata else None
    return Raster(w, h, b, dtype, data, GeoTransform(*gt), f"EPSG:{seed % 40000}", nodata)


@settings(max_examples=60, deadline=None)
@given(rasters)
def test_round_trip(tmp_path_factory, r):
    path = tmp_path_factory.mktemp("rt") / "r"
    write_raster(r, path)
    back = read_raster(path)
    assert back.equals(r)
    assert back.geo == r.geo


def test_pixel_to_geo_examples():
    assert pixel_to_geo(IDENTITY, 0, 0) == (0.5, 0.5)
    gt = GeoTransform(10, 0, 500000, 0, -10, 4000000)
    assert pixel_to_geo(gt, 2, 3) == (500025.0, 3999965.0)
    assert geo_to_pixel(IDENTITY, 0.5, 0.5) == (0.0, 0.0)
    assert geo_to_pixel(gt, 500025, 3999965) == (2.0, 3.0)


def test_geo_to_pixel_singular():
    with pytest.raises(ValueError):
        geo_to_pixel(GeoTransform(1, 2, 0, 2, 4, 0), 0, 0)


coords = st.floats(-1e4, 1e4, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(
    st.tuples(st.floats(0.1, 100), st.floats(-5, 5), st.floats(-1e6, 1e6),
              st.floats(-5, 5), st.floats(-100, -0.1), st.floats(-1e6, 1e6)),
    coords, coords,
)
def test_geo_pixel_round_trip(params, col, row):
    gt = GeoTransform(*params)
    if abs(gt.determinant) < 1e-2:
        return
    x, y = pixel_to_geo(gt, col, row)
    c2, r2 = geo_to_pixel(gt, x, y)
    x2, y2 = pixel_to_geo(gt, c2, r2)
    assert abs(x2 - x) <= 1e-9 * max(1.0, abs(x)) + 1e-9
    assert abs(y2 - y) <= 1e-9 * max(1.0, abs(y)) + 1e-9
    assert abs(c2 - col) < 1e-6 and abs(r2 - row) < 1e-6


def test_change_map_round_trip(tmp_path):
    cm = ChangeMap(np.array([[0, 1], [1, 0]]), GeoTransform(2, 0, 0, 0, -2, 0), "EPSG:1")
    write_change_map(cm, tmp_path / "cm")
    back = read_change_map(tmp_path / "cm")
    assert back.values.tolist() == [[0, 1], [1, 0]]
    assert back.geo == cm.geo and back.crs == "EPSG:1"


def test_change_map_rejects_other_labels():
    with pytest.raises(ValueError):
        ChangeMap(np.array([[0, 2]]))
