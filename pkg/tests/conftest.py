import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))  # make oracles importable

from rfsvm.data import Dataset

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "data")


def synthetic_dataset(n=40, m=6, c=2, seed=0, name="synthetic"):
    """Separable-ish Gaussian blobs, small enough for exhaustive checks."""
    rng = np.random.default_rng(seed)
    n_per = n // c
    X = rng.normal(size=(n_per * c, m))
    labels = np.repeat(np.arange(c), n_per)
    for j in range(c):
        X[labels == j, : max(1, m // 2)] += 1.5 * j
    return Dataset(name, X, labels.astype(np.int64), tuple(f"c{j}" for j in range(c)))


@pytest.fixture
def tiny_binary():
    return synthetic_dataset(n=40, m=6, c=2, seed=1)


@pytest.fixture
def tiny_multiclass():
    return synthetic_dataset(n=45, m=5, c=3, seed=2)


@pytest.fixture
def data_dir():
    return DATA_DIR
