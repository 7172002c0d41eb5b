"""Soft-margin SVM in the dual, solved by SMO on precomputed kernels."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .kernel import KernelMatrix

__all__ = [
    "SvmHyperparams",
    "BinarySvmModel",
    "SvmModel",
    "solve_binary_smo",
    "decision_value",
    "fit_multiclass",
    "predict",
    "save_svm",
    "load_svm",
]


@dataclass(frozen=True)
class SvmHyperparams:
    c: float
    kkt_tolerance: float = 1e-3
    max_passes: int | None = None  # sweep budget (n pair updates each); None = 10*n sweeps

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if not 0.0 < self.kkt_tolerance <= 0.1:
            raise ValueError("kkt_tolerance must be in (0, 0.1]")


@dataclass
class BinarySvmModel:
    """One trained binary subproblem.

    ``dual_coefs[i]`` is ``alpha_i * y_i`` over the training columns of the
    kernel this model was fit against (zero outside the pair's instances when
    trained inside a one-vs-one composition).
    """

    dual_coefs: np.ndarray
    bias: float
    support_indices: np.ndarray
    label_pair: tuple[int, int]
    converged: bool
    dual_objective: float
    iterations: int


@dataclass
class SvmModel:
    binary_models: list[BinarySvmModel]
    classes: np.ndarray


def _as_matrix(kernel) -> np.ndarray:
    values = kernel.values if isinstance(kernel, KernelMatrix) else np.asarray(kernel)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError("training kernel must be square")
    return values


def solve_binary_smo(kernel, labels, hp: SvmHyperparams, seed=None) -> BinarySvmModel:
    """Maximize the dual objective sum(a) - 0.5 aQa under box and equality constraints.

    Pair selection is the most-violating-pair rule: the first index maximizes
    the KKT violation, the second maximizes the analytic objective decrease.
    The algorithm is deterministic; ``seed`` is accepted for interface
    uniformity. Hitting the sweep budget returns a best-so-far model with
    ``converged=False`` instead of raising.
    """
    K = _as_matrix(kernel)
    y = np.asarray(labels, dtype=np.float64)
    n = len(y)
    if K.shape != (n, n):
        raise ValueError("kernel size does not match labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1/+1")
    if np.all(y == y[0]):
        raise ValueError("labels contain a single class")

    C = float(hp.c)
    tol = hp.kkt_tolerance
    sweeps = hp.max_passes if hp.max_passes is not None else 10 * n
    max_iter = max(1, sweeps * n)

    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 0.5 aQa - e'a
    positive = y > 0

    converged = False
    it = 0
    while it < max_iter:
        yG = -y * G
        up = np.where(positive, alpha < C, alpha > 0)
        low = np.where(positive, alpha > 0, alpha < C)
        if not up.any() or not low.any():
            converged = True
            break
        up_idx = np.flatnonzero(up)
        i = up_idx[np.argmax(yG[up_idx])]
        m_up = yG[i]
        low_idx = np.flatnonzero(low)
        M_low = yG[low_idx].min()
        if m_up - M_low <= tol:
            converged = True
            break

        # second choice: maximal decrease b^2 / a along the pair direction
        cand = low_idx[yG[low_idx] < m_up]
        b_gap = m_up - yG[cand]
        a_curv = np.maximum(diag[i] + diag[cand] - 2.0 * y[i] * y[cand] * K[i, cand], 1e-12)
        j = cand[np.argmax(b_gap * b_gap / a_curv)]

        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * Q[i, j], 1e-12)
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * Q[i, j], 1e-12)
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        d_i = alpha[i] - old_i
        d_j = alpha[j] - old_j
        G += Q[:, i] * d_i + Q[:, j] * d_j
        it += 1

    if not converged:
        warnings.warn(f"SMO hit the sweep budget ({max_iter} pair updates)", stacklevel=2)

    yG = -y * G  # equals y_i - u_i where u_i is the biasless decision value
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(yG[free].mean())
    else:
        up = np.where(positive, alpha < C, alpha > 0)
        low = np.where(positive, alpha > 0, alpha < C)
        hi = yG[up].max() if up.any() else 0.0
        lo = yG[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)

    objective = 0.5 * (alpha.sum() - alpha @ G)
    return BinarySvmModel(
        dual_coefs=alpha * y,
        bias=bias,
        support_indices=np.flatnonzero(alpha > 0),
        label_pair=(1, -1),
        converged=converged,
        dual_objective=float(objective),
        iterations=it,
    )


def decision_value(model: BinarySvmModel, kernel_row) -> float:
    """sum_i dual_coefs[i] * K(x, x_i) + bias for one query row."""
    row = np.asarray(kernel_row, dtype=np.float64)
    if row.shape != model.dual_coefs.shape:
        raise ValueError("kernel row length does not match training size")
    return float(model.dual_coefs @ row + model.bias)


def fit_multiclass(kernel, labels, hp: SvmHyperparams, seed=None) -> SvmModel:
    """One-vs-one composition: one SMO solve per unordered class pair.

    For the pair (a, b) with a < b, class a maps to +1. Dual coefficients are
    scattered back to full training length so prediction is a single matrix
    product against test kernel rows.
    """
    K = _as_matrix(kernel)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("need at least two classes")

    models = []
    for ai in range(len(classes)):
        for bi in range(ai + 1, len(classes)):
            a, b = int(classes[ai]), int(classes[bi])
            subset = np.flatnonzero((labels == a) | (labels == b))
            y = np.where(labels[subset] == a, 1.0, -1.0)
            sub = solve_binary_smo(K[np.ix_(subset, subset)], y, hp, seed)
            dual = np.zeros(len(labels))
            dual[subset] = sub.dual_coefs
            models.append(
                BinarySvmModel(
                    dual_coefs=dual,
                    bias=sub.bias,
                    support_indices=subset[sub.support_indices],
                    label_pair=(a, b),
                    converged=sub.converged,
                    dual_objective=sub.dual_objective,
                    iterations=sub.iterations,
                )
            )
    return SvmModel(binary_models=models, classes=classes)


def predict(model: SvmModel, kernel_rows) -> np.ndarray:
    """Vote over binary decisions; ties fall to the larger summed |decision|,
    then to the smaller class id."""
    rows = kernel_rows.values if isinstance(kernel_rows, KernelMatrix) else np.asarray(kernel_rows)
    if rows.ndim != 2:
        raise ValueError("expected a test-by-train kernel matrix")
    n_train = len(model.binary_models[0].dual_coefs)
    if rows.shape[1] != n_train:
        raise ValueError(f"kernel columns ({rows.shape[1]}) do not match training size ({n_train})")

    class_pos = {int(cls): k for k, cls in enumerate(model.classes)}
    n_cls = len(model.classes)
    votes = np.zeros((len(rows), n_cls), dtype=np.int64)
    magnitude = np.zeros((len(rows), n_cls))
    for bm in model.binary_models:
        d = rows @ bm.dual_coefs + bm.bias
        a, b = class_pos[bm.label_pair[0]], class_pos[bm.label_pair[1]]
        towards_a = d >= 0
        votes[towards_a, a] += 1
        votes[~towards_a, b] += 1
        magnitude[:, a] += np.abs(d)
        magnitude[:, b] += np.abs(d)

    tied = votes == votes.max(axis=1, keepdims=True)
    scores = np.where(tied, magnitude, -np.inf)
    winners = scores.argmax(axis=1)  # first maximum: smaller class id on full ties
    return model.classes[winners]


def save_svm(model: SvmModel, path):
    """Serialize dual coefficients, biases, supports, and label pairs to .npz."""
    supports = [bm.support_indices for bm in model.binary_models]
    offsets = np.zeros(len(supports) + 1, dtype=np.int64)
    for k, s in enumerate(supports):
        offsets[k + 1] = offsets[k] + len(s)
    meta = json.dumps(
        {
            "n_models": len(model.binary_models),
            "converged": [bool(bm.converged) for bm in model.binary_models],
            "dual_objectives": [bm.dual_objective for bm in model.binary_models],
        }
    )
    np.savez_compressed(
        path,
        meta=np.frombuffer(meta.encode(), dtype=np.uint8),
        classes=np.asarray(model.classes),
        dual_coefs=np.vstack([bm.dual_coefs for bm in model.binary_models]),
        biases=np.array([bm.bias for bm in model.binary_models]),
        label_pairs=np.array([bm.label_pair for bm in model.binary_models], dtype=np.int64),
        support_offsets=offsets,
        support_indices=np.concatenate(supports) if supports else np.array([], dtype=np.int64),
    )


def load_svm(path) -> SvmModel:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        offsets = z["support_offsets"]
        models = []
        for k in range(meta["n_models"]):
            models.append(
                BinarySvmModel(
                    dual_coefs=z["dual_coefs"][k],
                    bias=float(z["biases"][k]),
                    support_indices=z["support_indices"][offsets[k] : offsets[k + 1]],
                    label_pair=tuple(int(v) for v in z["label_pairs"][k]),
                    converged=meta["converged"][k],
                    dual_objective=meta["dual_objectives"][k],
                    iterations=-1,
                )
            )
        return SvmModel(binary_models=models, classes=z["classes"])
