"""One-vs-one orchestration: train a model per class pair, predict by voting.

Ties in the vote count break on accumulated |decision| margin, then on the
lower class id, so prediction is fully deterministic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import core
from .model import CdfConfig, CdfModel, ClassProfile, Dataset, validate_dataset
from .svm import GridCell, KernelSpec, decision, smo_train


@dataclass(frozen=True)
class VoteRecord:
    """Pairwise voting outcome for one sample."""

    votes: tuple
    margin_sums: tuple
    winner: int

    def __post_init__(self):
        m = len(self.votes)
        if len(self.margin_sums) != m:
            raise ValueError("votes and margin_sums must have one entry per class")
        if sum(self.votes) != m * (m - 1) // 2:
            raise ValueError("vote total must equal the number of class pairs")
        if self.winner != resolve_winner(self.votes, self.margin_sums):
            raise ValueError("winner does not follow the tie-break rule")


def resolve_winner(votes, margin_sums) -> int:
    """Most votes wins; ties break on margin sum, then on the lower class id."""
    best = 0
    for c in range(1, len(votes)):
        if votes[c] > votes[best] or (
            votes[c] == votes[best] and margin_sums[c] > margin_sums[best]
        ):
            best = c
    return best


def _train_pair(profiles, class_matrices, x, y, cfg, kernel, c, tol, max_passes, seed):
    ctx = core.build_pair_context(profiles[x], profiles[y], cfg)
    feats = core.extract_pair_features(
        class_matrices[x], class_matrices[y], ctx, profiles[x], profiles[y], cfg
    )
    svm = smo_train(
        feats.features,
        feats.labels.astype(float),
        c,
        kernel.resolve(feats.features.shape[1]),
        tol=tol,
        max_passes=max_passes,
        seed=seed,
    )
    return ctx, svm


def train(
    dataset: Dataset,
    cfg: CdfConfig = CdfConfig(),
    kernel: KernelSpec = KernelSpec(kind="polynomial", degree=2),
    c: float = 10.0,
    tol: float = 1e-3,
    max_passes: int = 10,
    seed: int = 0,
    jobs: int = 1,
) -> CdfModel:
    """Fit profiles, pair contexts, features and one SVM per class pair."""
    problems = validate_dataset(dataset)
    if problems:
        raise ValueError("invalid dataset: " + "; ".join(problems))
    m = dataset.num_classes
    if m < 2:
        raise ValueError("training needs at least two classes")

    class_matrices = [dataset.class_matrix(cid) for cid in range(m)]
    profiles = []
    for cid in range(m):
        sums = core.class_sum(class_matrices[cid])
        card = class_matrices[cid].shape[0]
        profiles.append(
            ClassProfile(
                class_id=cid,
                sum_vec=sums,
                mean_vec=core.class_mean(sums, card),
                cardinality=card,
            )
        )

    pair_ids = [(x, y) for x in range(m) for y in range(x + 1, m)]

    def run(pair):
        x, y = pair
        try:
            return _train_pair(
                profiles, class_matrices, x, y, cfg, kernel, c, tol, max_passes, seed
            )
        except Exception as exc:
            raise RuntimeError(f"training failed for pair ({x},{y}): {exc}") from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pairs = tuple(pool.map(run, pair_ids))
    else:
        pairs = tuple(run(p) for p in pair_ids)

    return CdfModel(
        config=cfg,
        kernel=kernel,
        c=c,
        tol=tol,
        max_passes=max_passes,
        seed=seed,
        num_classes=m,
        dim=dataset.dim,
        label_names=dataset.label_names,
        profiles=tuple(profiles),
        pairs=pairs,
    )


def predict(model: CdfModel, sample) -> tuple[int, VoteRecord]:
    """Vote every pair SVM on one sample and return the winning class."""
    sample = np.asarray(sample, dtype=float)
    if sample.shape != (model.dim,):
        raise ValueError(f"sample length {sample.size} does not match model dim {model.dim}")
    m = model.num_classes
    votes = [0] * m
    margins = [0.0] * m
    mode = model.config.feature_mode
    eps = model.config.smoothing_eps
    for ctx, svm in model.pairs:
        feat = core.sample_feature(sample, ctx.mask, ctx.ref_x, ctx.ref_y, mode, eps)
        d = decision(svm, feat)
        voted = ctx.class_x if d > 0 else ctx.class_y
        votes[voted] += 1
        margins[voted] += abs(d)
    record = VoteRecord(
        votes=tuple(votes),
        margin_sums=tuple(margins),
        winner=resolve_winner(votes, margins),
    )
    return record.winner, record


def predict_batch(model: CdfModel, samples) -> list[tuple[int, VoteRecord]]:
    """Element-wise predict over a sample sequence, order preserved."""
    out = []
    for i, sample in enumerate(samples):
        vec = np.asarray(sample, dtype=float)
        if vec.shape != (model.dim,):
            raise ValueError(
                f"sample {i}: length {vec.size} does not match model dim {model.dim}"
            )
        out.append(predict(model, vec))
    return out


def pipeline_trainer(
    cfg: CdfConfig,
    tol: float = 1e-3,
    max_passes: int = 10,
    seed: int = 0,
    jobs: int = 1,
):
    """cross_validate trainer running the full pipeline per grid cell.

    The cell's b/b_prime replace the config's global multipliers and the
    cell's C and kernel drive the pair SVMs.
    """

    def trainer(x_train, y_train, cell: GridCell):
        cell_cfg = replace(cfg, b=cell.b, b_prime=cell.b_prime)
        ds = Dataset.from_arrays(x_train, y_train)
        model = train(
            ds, cell_cfg, kernel=cell.kernel, c=cell.c, tol=tol,
            max_passes=max_passes, seed=seed, jobs=jobs,
        )

        def predict_labels(x_eval):
            return np.asarray([predict(model, row)[0] for row in x_eval])

        return predict_labels

    return trainer
