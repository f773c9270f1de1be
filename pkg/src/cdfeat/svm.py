"""Binary soft-margin SVM: kernels, an SMO dual solver, and cross-validation.

The solver optimizes the standard dual
    min 1/2 a'Qa - sum(a)   s.t.  0 <= a_i <= C,  sum(a_i y_i) = 0
with maximal-violating-pair working-set selection, so the stopping measure is
the largest KKT violation. Everything is deterministic: argmax ties resolve
to the lowest index and no randomness enters the solve.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, replace

import numpy as np

KERNEL_KINDS = ("linear", "polynomial", "rbf")

# Full Gram matrix below this sample count, LRU row cache above it.
FULL_GRAM_LIMIT = 8192
DEFAULT_CACHE_BYTES = 256 * 2**20


@dataclass(frozen=True)
class KernelSpec:
    """Kernel function selector. gamma=None means 1/dim, resolved at training."""

    kind: str
    degree: int = 2
    gamma: float | None = None
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 1:
            raise ValueError("polynomial kernel requires degree >= 1")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be > 0 when given")
        if self.kind == "rbf" and self.gamma is not None and self.gamma <= 0:
            raise ValueError("rbf kernel requires gamma > 0")

    def resolve(self, dim: int) -> "KernelSpec":
        """Fill in gamma = 1/dim when left unset."""
        if self.kind == "linear" or self.gamma is not None:
            return self
        return replace(self, gamma=1.0 / dim)


def kernel_eval(spec: KernelSpec, u, v) -> float:
    """Evaluate the kernel on a single vector pair."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"kernel arguments differ in length: {u.shape} vs {v.shape}")
    if spec.kind == "linear":
        return float(u @ v)
    if spec.gamma is None:
        raise ValueError("gamma unresolved; call KernelSpec.resolve(dim) first")
    if spec.kind == "polynomial":
        return float((spec.gamma * (u @ v) + spec.coef0) ** spec.degree)
    return float(np.exp(-spec.gamma * np.sum((u - v) ** 2)))


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel values for every row of `a` against every row of `b`."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"kernel arguments differ in length: {a.shape[1]} vs {b.shape[1]}")
    if spec.kind == "linear":
        return a @ b.T
    if spec.gamma is None:
        raise ValueError("gamma unresolved; call KernelSpec.resolve(dim) first")
    if spec.kind == "polynomial":
        return (spec.gamma * (a @ b.T) + spec.coef0) ** spec.degree
    sq = (
        np.sum(a * a, axis=1)[:, None]
        - 2.0 * (a @ b.T)
        + np.sum(b * b, axis=1)[None, :]
    )
    return np.exp(-spec.gamma * np.maximum(sq, 0.0))


class _KernelRows:
    """Row access to the training Gram matrix, dense or LRU-cached."""

    def __init__(self, spec: KernelSpec, x: np.ndarray, cache_bytes: int):
        self.spec = spec
        self.x = x
        n = x.shape[0]
        if n <= FULL_GRAM_LIMIT:
            self.full = kernel_matrix(spec, x, x)
            self.rows = None
        else:
            self.full = None
            self.rows: OrderedDict[int, np.ndarray] = OrderedDict()
            self.max_rows = max(2, cache_bytes // (8 * n))

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        cached = self.rows.get(i)
        if cached is not None:
            self.rows.move_to_end(i)
            return cached
        r = kernel_matrix(self.spec, self.x[i : i + 1], self.x)[0]
        self.rows[i] = r
        if len(self.rows) > self.max_rows:
            self.rows.popitem(last=False)
        return r


@dataclass(frozen=True)
class SvmModel:
    """Trained binary SVM: support vectors, alpha_i*y_i coefficients, bias."""

    support_vectors: np.ndarray
    coef: np.ndarray
    bias: float
    kernel: KernelSpec
    c: float
    iterations: int
    kkt_violation_max: float

    def __post_init__(self):
        sv = np.asarray(self.support_vectors, dtype=float)
        co = np.asarray(self.coef, dtype=float)
        sv.setflags(write=False)
        co.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "coef", co)
        if sv.shape[0] != co.shape[0]:
            raise ValueError("one coefficient per support vector required")
        if np.any(np.abs(co) > self.c * (1 + 1e-9) + 1e-12):
            raise ValueError("coefficients violate the box constraint |alpha| <= C")
        if abs(float(np.sum(co))) > 1e-6:
            raise ValueError("dual equality constraint sum(alpha_i y_i) = 0 violated")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SvmModel):
            return NotImplemented
        return (
            self.kernel == other.kernel
            and (self.bias, self.c) == (other.bias, other.c)
            and (self.iterations, self.kkt_violation_max)
            == (other.iterations, other.kkt_violation_max)
            and self.support_vectors.shape == other.support_vectors.shape
            and np.array_equal(self.support_vectors, other.support_vectors)
            and np.array_equal(self.coef, other.coef)
        )


def smo_train(
    x,
    y,
    c: float,
    spec: KernelSpec,
    tol: float = 1e-3,
    max_passes: int = 10,
    seed: int = 0,
    cache_bytes: int = DEFAULT_CACHE_BYTES,
) -> SvmModel:
    """Train a binary SVM by SMO.

    `y` holds +/-1 labels; `max_passes` bounds the work at max_passes * n
    pair updates. The solve is deterministic for any seed (the parameter is
    kept for interface stability).
    """
    del seed
    x = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] != yv.shape[0]:
        raise ValueError("x must be 2-D with one label per row")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature values")
    if not np.all(np.isin(yv, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if np.all(yv == yv[0]):
        raise ValueError("training needs at least one sample of each label")
    if c <= 0:
        raise ValueError("C must be > 0")

    n = x.shape[0]
    spec = spec.resolve(x.shape[1])
    kern = _KernelRows(spec, x, cache_bytes)

    alpha = np.zeros(n)
    grad = np.full(n, -1.0)  # gradient of the dual objective at alpha = 0
    max_iter = max(1, max_passes * n)
    iterations = 0
    neg_inf = -np.inf

    while iterations < max_iter:
        up = ((yv > 0) & (alpha < c)) | ((yv < 0) & (alpha > 0))
        low = ((yv > 0) & (alpha > 0)) | ((yv < 0) & (alpha < c))
        s = -yv * grad
        m_up = np.where(up, s, neg_inf)
        m_low = np.where(low, s, -neg_inf)
        i = int(np.argmax(m_up))
        j = int(np.argmin(m_low))
        gap = m_up[i] - m_low[j]
        if gap <= tol:
            break

        ki = kern.row(i)
        kj = kern.row(j)
        quad = ki[i] + kj[j] - 2.0 * ki[j]
        if quad <= 0:
            quad = 1e-12

        old_i, old_j = alpha[i], alpha[j]
        if yv[i] != yv[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0 and aj < 0:
                ai, aj = diff, 0.0
            elif diff <= 0 and ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0 and ai > c:
                ai, aj = c, c - diff
            elif diff <= 0 and aj > c:
                ai, aj = c + diff, c
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > c and ai > c:
                ai, aj = c, total - c
            elif total <= c and aj < 0:
                ai, aj = total, 0.0
            if total > c and aj > c:
                ai, aj = total - c, c
            elif total <= c and ai < 0:
                ai, aj = 0.0, total

        alpha[i], alpha[j] = ai, aj
        d_i, d_j = ai - old_i, aj - old_j
        grad += (yv * yv[i] * d_i) * ki + (yv * yv[j] * d_j) * kj
        iterations += 1

    # Final KKT gap and bias from the converged multipliers.
    up = ((yv > 0) & (alpha < c)) | ((yv < 0) & (alpha > 0))
    low = ((yv > 0) & (alpha > 0)) | ((yv < 0) & (alpha < c))
    s = -yv * grad
    m = float(np.max(np.where(up, s, neg_inf)))
    mm = float(np.min(np.where(low, s, -neg_inf)))
    kkt_gap = max(m - mm, 0.0)
    free = (alpha > 0) & (alpha < c)
    bias = float(np.mean(s[free])) if np.any(free) else (m + mm) / 2.0

    keep = alpha > 0
    return SvmModel(
        support_vectors=x[keep],
        coef=alpha[keep] * yv[keep],
        bias=bias,
        kernel=spec,
        c=c,
        iterations=iterations,
        kkt_violation_max=kkt_gap,
    )


def decision(model: SvmModel, x) -> float:
    """Signed decision value for one sample; sign is class, magnitude margin."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.support_vectors.shape[1],):
        raise ValueError(
            f"sample length {x.size} does not match support vectors "
            f"({model.support_vectors.shape[1]})"
        )
    k = kernel_matrix(model.kernel, model.support_vectors, x[None, :])[:, 0]
    return float(model.coef @ k + model.bias)


def decision_batch(model: SvmModel, x) -> np.ndarray:
    """Decision values for a sample matrix, one per row."""
    x = np.asarray(x, dtype=float)
    if x.shape[1] != model.support_vectors.shape[1]:
        raise ValueError(
            f"sample length {x.shape[1]} does not match support vectors "
            f"({model.support_vectors.shape[1]})"
        )
    k = kernel_matrix(model.kernel, x, model.support_vectors)
    return k @ model.coef + model.bias


# --- cross-validation -------------------------------------------------------

@dataclass(frozen=True)
class GridCell:
    """One hyperparameter combination evaluated by cross-validation."""

    c: float
    kernel: KernelSpec
    b: float = 1.0
    b_prime: float = 1.0


@dataclass(frozen=True)
class CvResult:
    best: GridCell
    table: tuple  # ((GridCell, mean_accuracy), ...) in grid order


def stratified_folds(y, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded stratified split: per-class round-robin after a shuffle.

    Returns one index array per fold (the validation sets).
    """
    y = np.asarray(y)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    classes = np.unique(y)
    counts = [int(np.sum(y == cls)) for cls in classes]
    smallest = min(counts)
    if folds > smallest:
        raise ValueError(
            f"folds={folds} exceeds the smallest class size {smallest}"
        )
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(folds)]
    for cls in classes:
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for k, sample in enumerate(idx):
            buckets[k % folds].append(int(sample))
    return [np.asarray(sorted(b), dtype=np.int64) for b in buckets]


def cross_validate(x, y, grid, folds: int, seed: int, trainer) -> CvResult:
    """Mean validation accuracy per grid cell; best cell wins, first on ties.

    `trainer(x_train, y_train, cell)` must return a callable mapping a sample
    matrix to predicted labels. Evaluation is deterministic given the seed.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("parameter grid must be non-empty")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    val_sets = stratified_folds(y, folds, seed)
    all_idx = np.arange(len(y))

    table = []
    best_cell = None
    best_acc = -1.0
    for cell in grid:
        accs = []
        for val in val_sets:
            train_mask = np.ones(len(y), dtype=bool)
            train_mask[val] = False
            tr = all_idx[train_mask]
            predict = trainer(x[tr], y[tr], cell)
            pred = np.asarray(predict(x[val]))
            accs.append(float(np.mean(pred == y[val])))
        mean_acc = float(np.mean(accs))
        table.append((cell, mean_acc))
        if mean_acc > best_acc:
            best_acc = mean_acc
            best_cell = cell
    return CvResult(best=best_cell, table=tuple(table))


def binary_svm_trainer(tol: float = 1e-3, max_passes: int = 10, seed: int = 0):
    """Plain two-class SVM trainer for cross_validate; ignores b/b_prime."""

    def trainer(x_train, y_train, cell: GridCell):
        classes = np.unique(y_train)
        if classes.size != 2:
            raise ValueError("binary_svm_trainer needs exactly two classes")
        pm = np.where(y_train == classes[1], 1.0, -1.0)
        model = smo_train(x_train, pm, cell.c, cell.kernel, tol=tol,
                          max_passes=max_passes, seed=seed)

        def predict(x_eval):
            d = decision_batch(model, x_eval)
            return np.where(d > 0, classes[1], classes[0])

        return predict

    return trainer
