"""Binary random forest (bagged CART trees, Gini impurity).

Training is deterministic: tree ``t`` draws its bootstrap sample and its
per-node feature subsets from an RNG seeded with ``(rng_seed, t)``, so the
forest is identical whether trees are grown sequentially or on a thread
pool. A bootstrap sample is stored as multiplicities over distinct seed
rows, which gives the same splits as materialising the duplicates.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InputError

LEAF = -1
_MIN_GAIN = 1e-12
_TREE_STREAM = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    max_depth: int = 12
    min_leaf: int = 5
    mtry: int | None = None     # None -> ceil(sqrt(n_features))
    rng_seed: int = 42

    def resolved_mtry(self, n_features: int) -> int:
        return self.mtry if self.mtry is not None else max(1, math.ceil(math.sqrt(n_features)))


@dataclass
class Tree:
    """Flat node arrays; node 0 is the root, nodes are stored in pre-order."""

    feature: np.ndarray     # int, LEAF for leaves
    threshold: np.ndarray   # float, go left when x <= threshold
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray      # (n_nodes, 2) training samples per class

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature == LEAF)

    def leaf_class(self) -> np.ndarray:
        # class-vote ties go to class 0
        return (self.counts[:, 1] > self.counts[:, 0]).astype(np.uint8)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``x``."""
        node = np.zeros(x.shape[0], dtype=np.intp)
        active = np.arange(x.shape[0])
        while active.size:
            f = self.feature[node[active]]
            inner = f != LEAF
            active = active[inner]
            if not active.size:
                break
            cur = node[active]
            go_left = x[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.leaf_class()[self.apply(x)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }


@dataclass
class ForestModel:
    trees: list[Tree]
    n_features: int
    params: ForestParams
    feature_names: list[str] = field(default_factory=list)

    def votes(self, x: np.ndarray, threads: int = 1) -> np.ndarray:
        """Number of trees voting "changed" for each row."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise InputError(
                f"feature matrix has shape {x.shape}, model expects {self.n_features} columns",
                stage="classify")
        if threads <= 1 or len(self.trees) == 1:
            per_tree = [t.predict(x) for t in self.trees]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                per_tree = list(pool.map(lambda t: t.predict(x), self.trees))
        total = np.zeros(x.shape[0], dtype=np.int64)
        for p in per_tree:
            total += p
        return total

    def predict(self, x: np.ndarray, threads: int = 1) -> np.ndarray:
        # vote ties go to class 0
        return (2 * self.votes(x, threads) > len(self.trees)).astype(np.uint8)

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "params": asdict(self.params),
            "feature_names": list(self.feature_names),
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def gini(counts) -> float:
    """Gini impurity ``1 - sum(p^2)`` of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n <= 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


def best_split(x: np.ndarray, y: np.ndarray, w: np.ndarray, min_leaf: int):
    """Best Gini threshold on a single feature.

    ``y`` holds 0/1 labels and ``w`` sample multiplicities. Candidate
    thresholds are midpoints between consecutive distinct values; among equal
    gains the lowest threshold wins. Returns ``(gain, threshold)`` or ``None``.
    """
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ws = w[order]
    cw = np.cumsum(ws)
    cw1 = np.cumsum(ws * y[order])
    n, n1 = cw[-1], cw1[-1]
    cut = np.flatnonzero(xs[:-1] < xs[1:])
    if cut.size == 0:
        return None
    n_l = cw[cut]
    n_r = n - n_l
    ok = (n_l >= min_leaf) & (n_r >= min_leaf)
    if not ok.any():
        return None
    cut, n_l, n_r = cut[ok], n_l[ok], n_r[ok]
    p_l = cw1[cut] / n_l
    p_r = (n1 - cw1[cut]) / n_r
    p = n1 / n
    child = (n_l * 2.0 * p_l * (1.0 - p_l) + n_r * 2.0 * p_r * (1.0 - p_r)) / n
    gain = 2.0 * p * (1.0 - p) - child
    j = int(np.argmax(gain))
    lo, hi = xs[cut[j]], xs[cut[j] + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(gain[j]), float(thr)


def _grow_tree(x: np.ndarray, y: np.ndarray, params: ForestParams, mtry: int, t: int) -> Tree:
    rng = np.random.default_rng([params.rng_seed, _TREE_STREAM, t])
    n, n_features = x.shape
    draw = rng.integers(0, n, size=n)
    mult = np.bincount(draw, minlength=n)
    rows = np.flatnonzero(mult)
    xb = x[rows]
    yb = y[rows].astype(np.float64)
    wb = mult[rows].astype(np.float64)

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx) -> int:
        w1 = float(np.dot(wb[idx], yb[idx]))
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append((float(wb[idx].sum()) - w1, w1))
        return len(feature) - 1

    def grow(idx, depth) -> int:
        node = new_node(idx)
        n0, n1 = counts[node]
        if depth >= params.max_depth or n0 == 0 or n1 == 0 or n0 + n1 < 2 * params.min_leaf:
            return node
        feats = np.sort(rng.choice(n_features, size=mtry, replace=False))
        best = None
        for f in feats:
            res = best_split(xb[idx, f], yb[idx], wb[idx], params.min_leaf)
            # strict comparison: the lowest feature index keeps ties
            if res is not None and res[0] > _MIN_GAIN and (best is None or res[0] > best[0]):
                best = (res[0], res[1], int(f))
        if best is None:
            return node
        _, thr, f = best
        go_left = xb[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(rows.size), 0)
    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.asarray(counts, dtype=np.float64).reshape(-1, 2),
    )


def train_random_forest(features: np.ndarray, labels: np.ndarray, params: ForestParams | None = None,
                        feature_names: list[str] | None = None, threads: int = 1) -> ForestModel:
    """Fit a forest of ``params.n_trees`` trees on seed pixels."""
    params = params or ForestParams()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64).ravel()
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise InputError("train_random_forest: empty feature matrix", stage="train_random_forest")
    if y.size != x.shape[0]:
        raise InputError("train_random_forest: labels and features differ in length",
                         stage="train_random_forest")
    if not np.isin(y, (0, 1)).all():
        raise InputError("train_random_forest: labels must be 0 or 1", stage="train_random_forest")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError(
            f"train_random_forest: seeds hold a single class ({n_neg} unchanged, {n_pos} changed)",
            stage="train_random_forest")
    if n_pos < 2 or n_neg < 2:
        raise InputError("train_random_forest: need at least 2 seeds of each class",
                         stage="train_random_forest")
    n_features = x.shape[1]
    mtry = params.resolved_mtry(n_features)
    if params.n_trees < 1:
        raise InputError("n_trees must be >= 1", stage="train_random_forest")
    if not 1 <= mtry <= n_features:
        raise InputError(f"mtry must lie in [1, {n_features}], got {mtry}", stage="train_random_forest")
    if params.max_depth < 0 or params.min_leaf < 1:
        raise InputError("max_depth must be >= 0 and min_leaf >= 1", stage="train_random_forest")

    grow = lambda t: _grow_tree(x, y, params, mtry, t)  # noqa: E731
    if threads <= 1 or params.n_trees == 1:
        trees = [grow(t) for t in range(params.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, range(params.n_trees)))
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(n_features)]
    return ForestModel(trees, n_features, params, names)
