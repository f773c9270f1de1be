"""TF-IDF weighting baseline: smoothed idf fit plus L2-normalized transform.

The baseline classification path feeds the weighted vectors into the same
one-vs-one SVM stack used elsewhere, with no masking or KL extraction, so
comparisons against the class-dependent pipeline are apples to apples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .multiclass import resolve_winner
from .svm import KernelSpec, decision, smo_train


@dataclass(frozen=True)
class TfIdfModel:
    """Per-term inverse document frequencies fit on a training corpus."""

    idf: np.ndarray
    vocab_size: int
    doc_count: int

    def __post_init__(self):
        idf = np.asarray(self.idf, dtype=float)
        idf.setflags(write=False)
        object.__setattr__(self, "idf", idf)
        if idf.shape != (self.vocab_size,):
            raise ValueError("idf length must equal vocab_size")
        if np.any(idf < 0):
            raise ValueError("idf values must be >= 0")

    def __eq__(self, other) -> bool:
        if not isinstance(other, TfIdfModel):
            return NotImplemented
        return (
            self.vocab_size == other.vocab_size
            and self.doc_count == other.doc_count
            and np.array_equal(self.idf, other.idf)
        )


def fit_idf(train_vectors) -> TfIdfModel:
    """idf[t] = ln((1 + D) / (1 + df_t)) + 1 over the training count vectors."""
    mat = np.asarray(train_vectors, dtype=float)
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise ValueError("fit_idf needs a non-empty 2-D count matrix")
    d = mat.shape[0]
    df = np.sum(mat > 0, axis=0)
    idf = np.log((1.0 + d) / (1.0 + df)) + 1.0
    return TfIdfModel(idf=idf, vocab_size=mat.shape[1], doc_count=d)


def transform(model: TfIdfModel, vectors) -> np.ndarray:
    """Weight counts by idf, then L2-normalize each row; zero rows stay zero."""
    mat = np.asarray(vectors, dtype=float)
    if mat.ndim != 2 or mat.shape[1] != model.vocab_size:
        raise ValueError(
            f"vector length {mat.shape[-1] if mat.ndim else '?'} does not match "
            f"vocab_size {model.vocab_size}"
        )
    weighted = mat * model.idf
    norms = np.linalg.norm(weighted, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return weighted / safe[:, None]


@dataclass(frozen=True)
class OvoSvmModel:
    """One-vs-one SVMs trained directly on (weighted) feature vectors."""

    pairs: tuple  # ((class_x, class_y, SvmModel), ...)
    num_classes: int
    dim: int


def train_ovo(
    x,
    y,
    num_classes: int,
    kernel: KernelSpec,
    c: float = 10.0,
    tol: float = 1e-3,
    max_passes: int = 10,
    seed: int = 0,
) -> OvoSvmModel:
    """Fit one SVM per class pair on the raw feature rows."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    pairs = []
    for cx in range(num_classes):
        for cy in range(cx + 1, num_classes):
            rows = np.flatnonzero((y == cx) | (y == cy))
            labels = np.where(y[rows] == cx, 1.0, -1.0)
            svm = smo_train(
                x[rows], labels, c, kernel.resolve(x.shape[1]),
                tol=tol, max_passes=max_passes, seed=seed,
            )
            pairs.append((cx, cy, svm))
    return OvoSvmModel(pairs=tuple(pairs), num_classes=num_classes, dim=x.shape[1])


def predict_ovo(model: OvoSvmModel, sample) -> int:
    """Majority vote over the pair SVMs with the shared tie-break rule."""
    votes = [0] * model.num_classes
    margins = [0.0] * model.num_classes
    for cx, cy, svm in model.pairs:
        d = decision(svm, sample)
        voted = cx if d > 0 else cy
        votes[voted] += 1
        margins[voted] += abs(d)
    return resolve_winner(votes, margins)
