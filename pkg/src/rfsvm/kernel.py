"""Forest-similarity, cosine, and RBF kernel matrices plus Gram-matrix validation."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .forest import ForestModel, forest_apply, leaf_of

__all__ = [
    "KernelMatrix",
    "KernelValidation",
    "rf_similarity",
    "rf_kernel_train",
    "rf_kernel_test",
    "cosine_kernel",
    "rbf_kernel",
    "validate_kernel",
    "save_kernel",
    "load_kernel",
]


@dataclass
class KernelMatrix:
    values: np.ndarray  # (p, q) float64
    kind: str  # rf | cosine | rbf
    row_ids: np.ndarray
    col_ids: np.ndarray
    symmetric: bool

    @property
    def shape(self):
        return self.values.shape


@dataclass
class KernelValidation:
    max_asymmetry: float
    min_eigenvalue: float
    max_diagonal_deviation: float
    is_psd: bool


def rf_similarity(model: ForestModel, a, b) -> float:
    """Fraction of trees in which ``a`` and ``b`` land in the same leaf."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != (model.n_features,) or b.shape != (model.n_features,):
        raise ValueError(f"expected vectors of length {model.n_features}")
    matches = sum(1 for tree in model.trees if leaf_of(tree, a) == leaf_of(tree, b))
    return matches / model.n_trees


def rf_kernel_train(model: ForestModel, data: Dataset, train) -> KernelMatrix:
    """Symmetric train-by-train forest-similarity matrix.

    Assembled by leaf-bucket inversion: per tree, instances are grouped by
    leaf and every within-bucket pair gets one co-occurrence count, which is
    O(sum of squared bucket sizes) instead of walking every pair down every
    tree. Counts are integers, so dividing by the tree count once at the end
    reproduces the pairwise definition bit for bit.
    """
    train = np.asarray(train)
    leaves = forest_apply(model, data.features[train])  # (n, M)
    n = len(train)
    counts = np.zeros((n, n), dtype=np.int64)
    for k in range(model.n_trees):
        column = leaves[:, k]
        order = np.argsort(column, kind="stable")
        sorted_leaves = column[order]
        boundaries = np.flatnonzero(np.diff(sorted_leaves)) + 1
        for bucket in np.split(order, boundaries):
            counts[np.ix_(bucket, bucket)] += 1
    values = counts / model.n_trees
    return KernelMatrix(values=values, kind="rf", row_ids=train, col_ids=train.copy(), symmetric=True)


def rf_kernel_test(model: ForestModel, data: Dataset, test, train) -> KernelMatrix:
    """Rectangular test-by-train forest-similarity matrix."""
    test = np.asarray(test)
    train = np.asarray(train)
    train_leaves = forest_apply(model, data.features[train])
    test_leaves = forest_apply(model, data.features[test])
    counts = np.zeros((len(test), len(train)), dtype=np.int64)
    for k in range(model.n_trees):
        counts += test_leaves[:, k, None] == train_leaves[None, :, k]
    values = counts / model.n_trees
    return KernelMatrix(values=values, kind="rf", row_ids=test, col_ids=train, symmetric=False)


def cosine_kernel(data: Dataset, rows, cols) -> KernelMatrix:
    """Cosine similarity shifted to [0, 1] via (1 + cos)/2.

    The shift keeps the Gram matrix positive semi-definite (raw cosine plus a
    rank-one all-ones term, halved) and aligns the value range with the forest
    kernel. Zero-norm vectors are rejected.
    """
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    a = data.features[rows]
    b = data.features[cols]
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if (na == 0).any() or (nb == 0).any():
        raise ValueError("zero-norm feature vector: cosine kernel undefined")
    cos = (a / na[:, None]) @ (b / nb[:, None]).T
    np.clip(cos, -1.0, 1.0, out=cos)
    values = (1.0 + cos) / 2.0
    symmetric = rows.shape == cols.shape and bool(np.all(rows == cols))
    if symmetric:
        values = (values + values.T) / 2.0
        np.fill_diagonal(values, 1.0)
    return KernelMatrix(values=values, kind="cosine", row_ids=rows, col_ids=cols, symmetric=symmetric)


def rbf_kernel(data: Dataset, rows, cols, gamma: float) -> KernelMatrix:
    """Gaussian kernel exp(-gamma * squared distance)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    a = data.features[rows]
    b = data.features[cols]
    sq = np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    symmetric = rows.shape == cols.shape and bool(np.all(rows == cols))
    if symmetric:
        np.fill_diagonal(sq, 0.0)
    values = np.exp(-gamma * sq)
    if symmetric:
        values = (values + values.T) / 2.0
    return KernelMatrix(values=values, kind="rbf", row_ids=rows, col_ids=cols, symmetric=symmetric)


def validate_kernel(k: KernelMatrix, tolerance: float = 1e-8) -> KernelValidation:
    """Check symmetry, spectrum, and unit diagonal of a square kernel."""
    v = k.values
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError("kernel validation needs a square matrix")
    max_asym = float(np.abs(v - v.T).max()) if v.size else 0.0
    eigenvalues = np.linalg.eigvalsh((v + v.T) / 2.0)
    min_eig = float(eigenvalues.min())
    diag_dev = float(np.abs(np.diag(v) - 1.0).max())
    return KernelValidation(
        max_asymmetry=max_asym,
        min_eigenvalue=min_eig,
        max_diagonal_deviation=diag_dev,
        is_psd=min_eig >= -tolerance,
    )


def save_kernel(k: KernelMatrix, path):
    header = json.dumps({"kind": k.kind, "p": int(k.shape[0]), "q": int(k.shape[1]), "symmetric": k.symmetric})
    np.savez_compressed(
        path,
        header=np.frombuffer(header.encode(), dtype=np.uint8),
        values=k.values,
        row_ids=np.asarray(k.row_ids),
        col_ids=np.asarray(k.col_ids),
    )


def load_kernel(path) -> KernelMatrix:
    with np.load(path) as z:
        header = json.loads(bytes(z["header"]).decode())
        return KernelMatrix(
            values=z["values"],
            kind=header["kind"],
            row_ids=z["row_ids"],
            col_ids=z["col_ids"],
            symmetric=header["symmetric"],
        )
