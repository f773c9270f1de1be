import os
from pathlib import Path

import numpy as np
import pytest

from cdfeat.model import Dataset

GAUSS_SEED = 1234


def gaussian_blobs(n_per_class: int, seed: int = GAUSS_SEED, dims: int = 20,
                   classes: int = 3, shift: float = 10.0):
    """Well-separated non-negative Gaussian classes: one high-mean block each."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c in range(classes):
        mean = np.ones(dims)
        block = dims // classes
        mean[c * block : (c + 1) * block] = shift
        x = np.clip(rng.normal(mean, 1.0, size=(n_per_class, dims)), 0.0, None)
        xs.append(x)
        ys.extend([c] * n_per_class)
    return np.vstack(xs), ys


def gaussian_split(n_train: int = 100, n_test: int = 100, seed: int = GAUSS_SEED):
    """The synthetic 3-class fixture: (train Dataset, test Dataset)."""
    x_tr, y_tr = gaussian_blobs(n_train, seed=seed)
    x_te, y_te = gaussian_blobs(n_test, seed=seed + 1)
    return Dataset.from_arrays(x_tr, y_tr), Dataset.from_arrays(x_te, y_te)


@pytest.fixture(scope="session")
def gauss3():
    return gaussian_split()


def _find_idx_file(root: Path, stem: str):
    for name in (stem, f"{stem}.gz", stem.replace("-idx", ".idx")):
        p = root / name
        if p.is_file():
            return p
    return None


def mnist_files():
    """The four official MNIST files under CDF_MNIST_DIR, or None."""
    root = os.environ.get("CDF_MNIST_DIR")
    if not root:
        return None
    root = Path(root)
    files = {
        "train_images": _find_idx_file(root, "train-images-idx3-ubyte"),
        "train_labels": _find_idx_file(root, "train-labels-idx1-ubyte"),
        "test_images": _find_idx_file(root, "t10k-images-idx3-ubyte"),
        "test_labels": _find_idx_file(root, "t10k-labels-idx1-ubyte"),
    }
    if any(v is None for v in files.values()):
        return None
    return files


def reuters_dir():
    """The Reuters-21578 SGML directory from CDF_REUTERS_DIR, or None."""
    root = os.environ.get("CDF_REUTERS_DIR")
    if not root:
        return None
    root = Path(root)
    if not sorted(root.glob("reut2-*.sgm")):
        return None
    return root


needs_mnist = pytest.mark.skipif(
    mnist_files() is None,
    reason="official MNIST IDX files not available; set CDF_MNIST_DIR",
)

needs_reuters = pytest.mark.skipif(
    reuters_dir() is None,
    reason="Reuters-21578 SGML corpus not available; set CDF_REUTERS_DIR",
)
