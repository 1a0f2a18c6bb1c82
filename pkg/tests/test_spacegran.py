import itertools

import numpy as np
import pytest

from dismap.changedetect.forest import ForestParams
from dismap.changedetect.pipeline import ChangeDetectConfig
from dismap.errors import ConfigError, GridMismatchError, InputError
from dismap.raster import GeoTransform, write_raster
from dismap.spacegran import Branch, ScenarioInputs, ingest_external_mask, run_space_granulation, select_branch
from dismap.synthetic import make_scene

from conftest import raster_from

B = Branch
COMBOS = list(itertools.product([False, True], repeat=4))   # labels, pre, source, mask


def inputs_for(labels, pre, source, mask):
    return ScenarioInputs("post", "pre" if pre else None, labels, source, "mask" if mask else None)


def expected_auto(labels, pre, source, mask):
    # priority written out by hand, independent of the implementation
    if labels:
        return B.SUPERVISED
    if pre:
        return B.UNSUPERVISED_CHANGE_DETECTION
    if source:
        return B.UDA_WITH_SOURCE
    return B.UDA_SOURCE_FREE


def override_allowed(branch, labels, pre, source, mask):
    return {
        B.SUPERVISED: labels,
        B.SEMI_SUPERVISED: labels,
        B.UNSUPERVISED_CHANGE_DETECTION: pre,
        B.UDA_WITH_SOURCE: source,
        B.UDA_SOURCE_FREE: True,
    }[branch]


@pytest.mark.parametrize("combo", COMBOS)
def test_truth_table(combo):
    inputs = inputs_for(*combo)
    assert select_branch(inputs) is expected_auto(*combo)
    for branch in Branch:
        for form in (branch, branch.value):
            if override_allowed(branch, *combo):
                assert select_branch(inputs, form) is branch
            else:
                with pytest.raises(ConfigError):
                    select_branch(inputs, form)
    with pytest.raises(ConfigError, match="unknown branch"):
        select_branch(inputs, "DEEP_MAGIC")


def test_documented_scenarios():
    assert select_branch(ScenarioInputs("p", "q", labels_available=True)) is B.SUPERVISED
    assert select_branch(ScenarioInputs("p", "q")) is B.UNSUPERVISED_CHANGE_DETECTION
    assert select_branch(ScenarioInputs("p")) is B.UDA_SOURCE_FREE
    assert select_branch(ScenarioInputs("p"), None) is B.UDA_SOURCE_FREE


def test_only_change_detection_is_internal():
    assert [b for b in Branch if b.internal] == [B.UNSUPERVISED_CHANGE_DETECTION]
    assert {b.mode for b in Branch if not b.internal} == {"EXTERNAL_MASK"}


@pytest.fixture
def post_raster(tmp_path):
    r = raster_from(np.random.default_rng(0).uniform(0, 100, (1, 16, 16)))
    write_raster(r, tmp_path / "post")
    return r


def write_mask(path, values, geo=None, dtype="uint8"):
    r = raster_from(np.asarray(values), dtype=dtype, geo=geo or raster_from(np.zeros((1, 1))).geo)
    write_raster(r, path)
    return path


def test_ingest_0_255_rescaled(tmp_path, post_raster):
    v = np.zeros((16, 16), np.uint8)
    v[2:5, 2:5] = 255
    cm = ingest_external_mask(write_mask(tmp_path / "m", v), post_raster)
    assert np.array_equal(cm.values, (v == 255).astype(np.uint8))
    assert cm.geo == post_raster.geo


def test_ingest_passes_0_1_unchanged(tmp_path, post_raster):
    v = (np.random.default_rng(1).uniform(size=(16, 16)) < 0.3).astype(np.uint8)
    assert np.array_equal(ingest_external_mask(write_mask(tmp_path / "m", v), post_raster).values, v)


def test_ingest_rejects_size_mismatch(tmp_path, post_raster):
    with pytest.raises(GridMismatchError):
        ingest_external_mask(write_mask(tmp_path / "m", np.zeros((32, 32), np.uint8)), post_raster)


def test_ingest_rejects_geo_mismatch(tmp_path, post_raster):
    shifted = GeoTransform(10.0, 0.0, 500000.001, 0.0, -10.0, 4000000.0)
    with pytest.raises(GridMismatchError):
        ingest_external_mask(write_mask(tmp_path / "m", np.zeros((16, 16), np.uint8), shifted), post_raster)
    close = GeoTransform(10.0, 0.0, 500000.0000001, 0.0, -10.0, 4000000.0)
    ingest_external_mask(write_mask(tmp_path / "m2", np.zeros((16, 16), np.uint8), close), post_raster)


def test_ingest_rejects_illegal_values(tmp_path, post_raster):
    v = np.zeros((16, 16), np.uint8)
    v[0, 0] = 7
    with pytest.raises(InputError, match="illegal"):
        ingest_external_mask(write_mask(tmp_path / "m", v), post_raster)
    with pytest.raises(InputError):
        ingest_external_mask(write_mask(tmp_path / "f", np.zeros((16, 16)), dtype="float32"), post_raster)


def test_uda_without_mask_names_model_family(tmp_path, post_raster):
    inputs = ScenarioInputs(tmp_path / "post", source_dataset_available=True)
    with pytest.raises(InputError, match="UDA_WITH_SOURCE expects a mask from an ADANet/CaGAN-style"):
        run_space_granulation(inputs)


def test_supervised_mask_is_postprocessed(tmp_path, post_raster):
    v = np.zeros((16, 16), np.uint8)
    v[3:9, 3:9] = 1
    v[13, 13] = 1                                   # speck removed by postprocessing
    inputs = ScenarioInputs(tmp_path / "post", labels_available=True,
                            external_mask=write_mask(tmp_path / "m", v))
    cm, diag = run_space_granulation(inputs, ChangeDetectConfig(min_area_px=5))
    assert diag.branch == "SUPERVISED"
    assert cm.values[13, 13] == 0 and cm.values[5, 5] == 1
    raw, _ = run_space_granulation(inputs, postprocess_external=False)
    assert np.array_equal(raw.values, v)


def test_change_detection_branch_end_to_end(tmp_path):
    s = make_scene(size=96, n_blobs=3, min_side=12, max_side=20, seed=1)
    write_raster(s.pre, tmp_path / "pre")
    write_raster(s.post, tmp_path / "post")
    inputs = ScenarioInputs(tmp_path / "post", tmp_path / "pre")
    cm, diag = run_space_granulation(inputs, ChangeDetectConfig(forest=ForestParams(n_trees=5)))
    assert diag.branch == "UNSUPERVISED_CHANGE_DETECTION"
    assert cm.shape == s.truth.shape and cm.values.sum() > 0
