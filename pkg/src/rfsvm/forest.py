"""Bootstrap-sampled random CART trees exposing per-tree leaf assignment."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset

__all__ = [
    "ForestHyperparams",
    "Tree",
    "ForestModel",
    "bootstrap_sample",
    "fit_tree",
    "fit_forest",
    "leaf_of",
    "tree_apply",
    "forest_apply",
    "predict_tree",
    "predict_forest",
    "save_forest",
    "load_forest",
]


@dataclass(frozen=True)
class ForestHyperparams:
    """Tree-growing controls.

    ``max_features`` is a fraction of the feature count, or the string
    ``"sqrt"`` for round(sqrt(m)) candidate features per node (the default
    used when only the downstream SVM is tuned). ``max_depth=None`` grows
    trees until leaves are pure or splits run out.
    """

    n_trees: int = 500
    max_depth: int | None = None
    max_features: float | str = "sqrt"
    min_samples_leaf: int = 1
    min_samples_split: int = 2

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if isinstance(self.max_features, str):
            if self.max_features != "sqrt":
                raise ValueError(f"unknown max_features mode {self.max_features!r}")
        elif not 0.0 < self.max_features <= 1.0:
            raise ValueError("max_features fraction must be in (0, 1]")
        if self.min_samples_leaf < 1 or self.min_samples_split < 2:
            raise ValueError("min_samples_leaf >= 1 and min_samples_split >= 2 required")

    def n_candidates(self, m: int) -> int:
        if self.max_features == "sqrt":
            return max(1, min(m, int(round(np.sqrt(m)))))
        return max(1, min(m, int(round(self.max_features * m))))


@dataclass
class Tree:
    """A fitted binary tree in flat-array form.

    Node 0 is the root. Internal nodes carry ``feature``/``threshold`` and
    child indices; leaves carry a ``leaf_id`` contiguous from 0 and a class
    histogram over the bootstrap instances that reached them.
    """

    feature: np.ndarray  # (nodes,) int32, -1 at leaves
    threshold: np.ndarray  # (nodes,) float64, nan at leaves
    left: np.ndarray  # (nodes,) int32, -1 at leaves
    right: np.ndarray  # (nodes,) int32, -1 at leaves
    leaf_id: np.ndarray  # (nodes,) int32, -1 at internal nodes
    histograms: np.ndarray  # (n_leaves, c) int64
    leaf_class: np.ndarray = field(init=False)  # (n_leaves,) majority class per leaf

    def __post_init__(self):
        self.leaf_class = self.histograms.argmax(axis=1)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return len(self.histograms)

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int32)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())


@dataclass
class ForestModel:
    trees: list[Tree]
    hyperparams: ForestHyperparams
    training_seed: object  # int or tuple of ints
    n_features: int
    n_classes: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def bootstrap_sample(train, seed) -> np.ndarray:
    """Draw ``len(train)`` indices from ``train`` with replacement."""
    train = np.asarray(train)
    if len(train) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    return train[rng.integers(0, len(train), size=len(train))]


def fit_tree(data: Dataset, sample, hp: ForestHyperparams, seed) -> Tree:
    """Grow one CART tree on a bootstrap ``sample`` (row indices, with repeats).

    At each node round(max_features * m) candidate features are drawn without
    replacement and the (feature, threshold) pair minimizing the weighted Gini
    impurity of the children is taken; thresholds are midpoints between
    consecutive distinct values and ties go to the lowest feature index, then
    the lowest threshold. Instances at exactly the threshold go left.
    """
    sample = np.asarray(sample)
    if len(sample) == 0:
        raise ValueError("empty bootstrap sample")
    rng = np.random.default_rng(seed)
    X = data.features
    y = data.labels
    c = data.c
    m = data.m
    mtry = hp.n_candidates(m)

    feature, threshold, left, right, leaf_id = [], [], [], [], []
    histograms = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        leaf_id.append(-1)
        return len(feature) - 1

    def make_leaf(node: int, hist: np.ndarray):
        leaf_id[node] = len(histograms)
        histograms.append(hist)

    root = new_node()
    stack = [(root, sample, 0)]
    while stack:
        node, rows, depth = stack.pop()
        ynode = y[rows]
        hist = np.bincount(ynode, minlength=c)
        s = len(rows)
        if (
            hist.max() == s  # pure
            or s < hp.min_samples_split
            or s < 2 * hp.min_samples_leaf
            or (hp.max_depth is not None and depth >= hp.max_depth)
        ):
            make_leaf(node, hist)
            continue

        split = None
        for _ in range(2):  # one redraw if every candidate feature is constant
            cand = np.sort(rng.choice(m, size=mtry, replace=False))
            Xc = X[np.ix_(rows, cand)]
            spans = Xc.max(axis=0) > Xc.min(axis=0)
            if not spans.any():
                continue
            split = _best_split(Xc[:, spans], ynode, c, hp.min_samples_leaf)
            if split is not None:
                split = (cand[spans][split[0]], split[1])
            break
        if split is None:
            make_leaf(node, hist)
            continue

        feat, thr = split
        go_left = X[rows, feat] <= thr
        feature[node] = feat
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], rows[~go_left], depth + 1))
        stack.append((left[node], rows[go_left], depth + 1))

    return Tree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        leaf_id=np.array(leaf_id, dtype=np.int32),
        histograms=np.array(histograms, dtype=np.int64).reshape(len(histograms), c),
    )


def _best_split(Xc, ynode, c, min_leaf):
    """Best (column, threshold) by weighted children Gini, or None.

    ``Xc`` columns are the candidate features (each known non-constant);
    returns the index of the winning column within ``Xc``.
    """
    s = len(ynode)
    order = np.argsort(Xc, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(Xc, order, axis=0)
    sorted_y = ynode[order]

    onehot = sorted_y[:, :, None] == np.arange(c)
    left_counts = np.cumsum(onehot, axis=0, dtype=np.int64)  # (s, f, c)
    totals = left_counts[-1]  # (f, c)
    n_left = np.arange(1, s + 1, dtype=np.float64)[:, None]
    n_right = s - n_left

    # boundary after row i: left = rows 0..i, right = rows i+1..s-1
    gini_left = 1.0 - ((left_counts / n_left[:, :, None]) ** 2).sum(axis=2)
    right_counts = totals[None, :, :] - left_counts
    with np.errstate(divide="ignore", invalid="ignore"):
        gini_right = 1.0 - ((right_counts / np.maximum(n_right, 1.0)[:, :, None]) ** 2).sum(axis=2)
    weighted = (n_left * gini_left + n_right * gini_right) / s

    valid = sorted_vals[1:] > sorted_vals[:-1]
    valid[: min_leaf - 1] = False
    valid[s - min_leaf :] = False
    if not valid.any():
        return None
    weighted = weighted[:-1]
    weighted[~valid] = np.inf

    per_col_best = weighted.min(axis=0)
    col = int(per_col_best.argmin())  # first minimum: lowest feature index
    i = int(weighted[:, col].argmin())  # first minimum: lowest threshold
    thr = 0.5 * (sorted_vals[i, col] + sorted_vals[i + 1, col])
    # midpoint can round onto the upper value; nudge to keep "<= thr goes left" exact
    if thr >= sorted_vals[i + 1, col]:
        thr = sorted_vals[i, col]
    return col, float(thr)


def fit_forest(data: Dataset, train, hp: ForestHyperparams, seed) -> ForestModel:
    """Fit ``hp.n_trees`` trees, each on an independent bootstrap of ``train``.

    ``seed`` is an int or tuple of ints; tree k derives its bootstrap and
    growth streams from (seed, k), so the model is a pure function of
    (data, train, hp, seed).
    """
    train = np.asarray(train)
    if len(train) == 0:
        raise ValueError("empty training set")
    trees = []
    for k in range(hp.n_trees):
        boot_seed = np.random.SeedSequence(entropy=seed, spawn_key=(k, 0))
        grow_seed = np.random.SeedSequence(entropy=seed, spawn_key=(k, 1))
        sample = bootstrap_sample(train, boot_seed)
        trees.append(fit_tree(data, sample, hp, grow_seed))
    return ForestModel(
        trees=trees,
        hyperparams=hp,
        training_seed=seed,
        n_features=data.m,
        n_classes=data.c,
    )


def leaf_of(tree: Tree, x) -> int:
    """Leaf id where ``x`` lands; values at exactly a threshold go left."""
    x = np.asarray(x)
    node = 0
    while tree.feature[node] >= 0:
        if x[tree.feature[node]] <= tree.threshold[node]:
            node = tree.left[node]
        else:
            node = tree.right[node]
    return int(tree.leaf_id[node])


def tree_apply(tree: Tree, X) -> np.ndarray:
    """Leaf ids for every row of ``X`` (level-synchronous batch traversal)."""
    X = np.asarray(X)
    cur = np.zeros(len(X), dtype=np.int32)
    active = np.flatnonzero(tree.feature[cur] >= 0)
    while len(active):
        nodes = cur[active]
        go_left = X[active, tree.feature[nodes]] <= tree.threshold[nodes]
        cur[active] = np.where(go_left, tree.left[nodes], tree.right[nodes])
        active = active[tree.feature[cur[active]] >= 0]
    return tree.leaf_id[cur].astype(np.int64)


def forest_apply(model: ForestModel, X) -> np.ndarray:
    """(n, M) leaf-id matrix: column k holds tree k's leaf assignments."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected (n, {model.n_features}) inputs, got {X.shape}")
    out = np.empty((len(X), model.n_trees), dtype=np.int64)
    for k, tree in enumerate(model.trees):
        out[:, k] = tree_apply(tree, X)
    return out


def predict_tree(tree: Tree, x) -> int:
    return int(tree.leaf_class[leaf_of(tree, x)])


def predict_forest(model: ForestModel, x):
    """Majority vote over per-tree leaf-majority classes.

    Accepts a single feature vector or an (n, m) matrix. Vote ties and
    per-leaf histogram ties both resolve to the smaller class id.
    """
    x = np.asarray(x)
    single = x.ndim == 1
    X = x[None, :] if single else x
    leaves = forest_apply(model, X)
    votes = np.zeros((len(X), model.n_classes), dtype=np.int64)
    for k, tree in enumerate(model.trees):
        pred_k = tree.leaf_class[leaves[:, k]]
        votes[np.arange(len(X)), pred_k] += 1
    pred = votes.argmax(axis=1)
    return int(pred[0]) if single else pred


def save_forest(model: ForestModel, path):
    """Serialize to .npz: concatenated flat node arrays plus per-tree offsets."""
    node_offsets = np.zeros(model.n_trees + 1, dtype=np.int64)
    leaf_offsets = np.zeros(model.n_trees + 1, dtype=np.int64)
    for k, tree in enumerate(model.trees):
        node_offsets[k + 1] = node_offsets[k] + tree.n_nodes
        leaf_offsets[k + 1] = leaf_offsets[k] + tree.n_leaves
    meta = json.dumps(
        {
            "n_trees": model.n_trees,
            "max_depth": model.hyperparams.max_depth,
            "max_features": model.hyperparams.max_features,
            "min_samples_leaf": model.hyperparams.min_samples_leaf,
            "min_samples_split": model.hyperparams.min_samples_split,
            "training_seed": model.training_seed,
            "n_features": model.n_features,
            "n_classes": model.n_classes,
        }
    )
    np.savez_compressed(
        path,
        meta=np.frombuffer(meta.encode(), dtype=np.uint8),
        node_offsets=node_offsets,
        leaf_offsets=leaf_offsets,
        feature=np.concatenate([t.feature for t in model.trees]),
        threshold=np.concatenate([t.threshold for t in model.trees]),
        left=np.concatenate([t.left for t in model.trees]),
        right=np.concatenate([t.right for t in model.trees]),
        leaf_id=np.concatenate([t.leaf_id for t in model.trees]),
        histograms=np.concatenate([t.histograms for t in model.trees]),
    )


def load_forest(path) -> ForestModel:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        node_off = z["node_offsets"]
        leaf_off = z["leaf_offsets"]
        trees = []
        for k in range(meta["n_trees"]):
            a, b = node_off[k], node_off[k + 1]
            la, lb = leaf_off[k], leaf_off[k + 1]
            trees.append(
                Tree(
                    feature=z["feature"][a:b],
                    threshold=z["threshold"][a:b],
                    left=z["left"][a:b],
                    right=z["right"][a:b],
                    leaf_id=z["leaf_id"][a:b],
                    histograms=z["histograms"][la:lb],
                )
            )
    hp = ForestHyperparams(
        n_trees=meta["n_trees"],
        max_depth=meta["max_depth"],
        max_features=meta["max_features"],
        min_samples_leaf=meta["min_samples_leaf"],
        min_samples_split=meta["min_samples_split"],
    )
    seed = meta["training_seed"]
    return ForestModel(
        trees=trees,
        hyperparams=hp,
        training_seed=tuple(seed) if isinstance(seed, list) else seed,
        n_features=meta["n_features"],
        n_classes=meta["n_classes"],
    )
