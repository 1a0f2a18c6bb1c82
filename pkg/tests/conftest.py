from collections import deque

import numpy as np
import pytest

from dismap.raster import ChangeMap, GeoTransform, Raster
from dismap.synthetic import make_scene

UTM_GT = GeoTransform(10.0, 0.0, 500000.0, 0.0, -10.0, 4000000.0)


def raster_from(arr, dtype="float32", geo=UTM_GT, crs="EPSG:32648", nodata=None):
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[None]
    bands, height, width = arr.shape
    return Raster(width, height, bands, dtype, arr, geo, crs, nodata)


def flood_fill_labels(mask, connectivity):
    """Reference labeling: BFS from each unvisited pixel in row-major order."""
    mask = np.asarray(mask, dtype=bool)
    rows, cols = mask.shape
    labels = np.zeros(mask.shape, dtype=int)
    if connectivity == 4:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        steps = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]
    current = 0
    for r in range(rows):
        for c in range(cols):
            if mask[r, c] and labels[r, c] == 0:
                current += 1
                labels[r, c] = current
                queue = deque([(r, c)])
                while queue:
                    pr, pc = queue.popleft()
                    for dr, dc in steps:
                        nr, nc = pr + dr, pc + dc
                        if 0 <= nr < rows and 0 <= nc < cols and mask[nr, nc] and labels[nr, nc] == 0:
                            labels[nr, nc] = current
                            queue.append((nr, nc))
    return labels, current


def labels_from_components(comps, shape):
    out = np.zeros(shape, dtype=int)
    for comp in comps:
        rows, cols = comp.pixels()
        out[rows, cols] = comp.id
    return out


@pytest.fixture(scope="session")
def scene():
    return make_scene(seed=0)


@pytest.fixture
def change_map():
    def build(values, geo=UTM_GT, crs="EPSG:32648"):
        return ChangeMap(np.asarray(values, dtype=np.uint8), geo, crs)
    return build


# (criterion number, verdict, summary) filled in by test_acceptance
ACCEPTANCE: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, text in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{verdict} criterion {number}: {text}")
