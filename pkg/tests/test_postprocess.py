import numpy as np
import pytest

from dismap.changedetect.postprocess import majority_filter, postprocess
from dismap.raster import ChangeMap

from conftest import flood_fill_labels


def brute_majority(v):
    rows, cols = v.shape
    out = v.copy()
    for r in range(rows):
        for c in range(cols):
            win = [v[i, j] for i in range(r - 1, r + 2) for j in range(c - 1, c + 2)
                   if 0 <= i < rows and 0 <= j < cols]
            ones = sum(win)
            if 2 * ones > len(win):
                out[r, c] = 1
            elif 2 * ones < len(win):
                out[r, c] = 0
    return out


def brute_remove_small(v, min_area):
    labels, n = flood_fill_labels(v, 8)
    out = np.zeros_like(v)
    for i in range(1, n + 1):
        if (labels == i).sum() >= min_area:
            out[labels == i] = 1
    return out


def test_isolated_pixel_removed():
    v = np.zeros((5, 5), np.uint8)
    v[2, 2] = 1
    assert not postprocess(ChangeMap(v), 0, 2).values.any()


def test_solid_block_stable():
    v = np.zeros((20, 20), np.uint8)
    v[5:15, 5:15] = 1
    out = postprocess(ChangeMap(v), 1, 5).values
    # only the four corners lose the 3x3 vote (4 of 9 cells set)
    expected = v.copy()
    for r, c in [(5, 5), (5, 14), (14, 5), (14, 14)]:
        expected[r, c] = 0
    assert np.array_equal(out, expected)
    assert np.array_equal(postprocess(ChangeMap(v), 0, 100).values, v)


def test_full_block_is_fixed_point():
    v = np.ones((10, 10), np.uint8)
    assert np.array_equal(postprocess(ChangeMap(v), 1, 50).values, v)


@pytest.mark.parametrize("seed", range(20))
def test_random_masks_match_reference(seed):
    rng = np.random.default_rng(seed)
    v = (rng.uniform(size=(24, 30)) < rng.uniform(0.2, 0.6)).astype(np.uint8)
    assert np.array_equal(majority_filter(v), brute_majority(v))
    ref = brute_remove_small(brute_majority(v), 4)
    assert np.array_equal(postprocess(ChangeMap(v), 1, 4).values, ref)
