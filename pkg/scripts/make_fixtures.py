"""Regenerate the CSV fixtures under data/.

wdbc is the standard 569x30 Wisconsin Diagnostic Breast Cancer table (via the
copy bundled with scikit-learn, which is only needed to run this script). The
three HDLSS sets are synthetic: class-dependent shifts on small blocks of
low-scale features, buried in noise whose per-feature scales span several
orders of magnitude (trees are scale-invariant; raw-distance kernels are not),
sized to land in the very-HDLSS and mid-HDLSS bands.
"""

import csv
import os

import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "data")


def write_csv(name, X, labels):
    path = os.path.join(OUT, f"{name}.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(X.shape[1])] + ["label"])
        for row, lab in zip(X, labels):
            writer.writerow([repr(float(v)) for v in row] + [lab])
    print(f"wrote {path}: {X.shape[0]} rows, {X.shape[1]} features")


def make_wdbc():
    from sklearn.datasets import load_breast_cancer

    bunch = load_breast_cancer()
    names = ["malignant", "benign"]
    write_csv("wdbc", bunch.data, [names[t] for t in bunch.target])


def make_micro_expr_a():
    # 4 classes x 15, m=1100 -> omega = 60 / (4 * 1100) ~ 0.0136 (very HDLSS)
    rng = np.random.default_rng(20240601)
    n_per, c, m, block = 15, 4, 1100, 90
    scales = rng.lognormal(mean=0.0, sigma=2.0, size=m)
    order = np.argsort(scales)  # informative blocks sit on the smallest scales
    X = rng.normal(size=(n_per * c, m))
    labels = np.repeat(np.arange(c), n_per)
    for j in range(c):
        cols = order[j * block : (j + 1) * block]
        X[np.ix_(labels == j, cols)] += 0.75
    X *= scales
    flip = rng.random(len(labels)) < 0.05
    labels[flip] = rng.integers(0, c, size=flip.sum())
    write_csv("micro_expr_a", X, [f"type{t}" for t in labels])


def make_micro_expr_b():
    # 3 classes x 30, m=700 -> omega = 90 / (3 * 700) ~ 0.043 (mid HDLSS)
    rng = np.random.default_rng(20240602)
    n_per, c, m, block = 30, 3, 700, 70
    scales = rng.lognormal(mean=0.0, sigma=2.2, size=m)
    order = np.argsort(scales)
    X = rng.normal(size=(n_per * c, m))
    labels = np.repeat(np.arange(c), n_per)
    for j in range(c):
        cols = order[j * block : (j + 1) * block]
        X[np.ix_(labels == j, cols)] += 0.65
    X *= scales
    flip = rng.random(len(labels)) < 0.06
    labels[flip] = rng.integers(0, c, size=flip.sum())
    write_csv("micro_expr_b", X, [f"grp{t}" for t in labels])


def make_text_sparse():
    # 2 classes x 55, m=900 -> omega = 110 / (2 * 900) ~ 0.061 (mid HDLSS)
    rng = np.random.default_rng(20240603)
    n_per, m, informative = 55, 900, 150
    n = 2 * n_per
    labels = np.repeat([0, 1], n_per)
    scales = rng.lognormal(mean=0.5, sigma=1.8, size=m)
    X = (rng.random((n, m)) < 0.10) * np.abs(rng.normal(1.0, 0.5, size=(n, m)))
    boost = (rng.random((n_per, informative)) < 0.13) * np.abs(
        rng.normal(1.0, 0.4, size=(n_per, informative))
    )
    X[labels == 1, :informative] += boost
    X *= scales
    X[:, 0] += 0.05  # keep every row off the cosine zero-vector edge case
    write_csv("text_sparse", X, ["neg" if t == 0 else "pos" for t in labels])


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    make_wdbc()
    make_micro_expr_a()
    make_micro_expr_b()
    make_text_sparse()
