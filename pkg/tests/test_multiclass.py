import numpy as np
import pytest

from cdfeat import core
from cdfeat.model import CdfConfig, Dataset
from cdfeat.multiclass import (
    VoteRecord,
    predict,
    predict_batch,
    resolve_winner,
    train,
)
from cdfeat.svm import KernelSpec, decision

from conftest import gaussian_blobs

POLY2 = KernelSpec(kind="polynomial", degree=2)


def two_class_dataset(seed=0):
    x, y = gaussian_blobs(20, seed=seed, dims=10, classes=2)
    return Dataset.from_arrays(x, y)


class TestTrain:
    def test_two_classes_single_pair(self):
        model = train(two_class_dataset(), CdfConfig(), kernel=POLY2)
        assert len(model.pairs) == 1

    def test_pair_count_formula(self):
        x, y = gaussian_blobs(8, seed=2, dims=15, classes=5)
        model = train(Dataset.from_arrays(x, y), CdfConfig(), kernel=POLY2)
        assert len(model.pairs) == 10  # 5*4/2

    def test_identical_classes_degenerate_no_crash(self):
        rng = np.random.default_rng(5)
        base = rng.uniform(0, 4, size=(12, 6))
        x = np.vstack([base, base])
        y = [0] * 12 + [1] * 12
        model = train(Dataset.from_arrays(x, y), CdfConfig(), kernel=POLY2)
        ctx, _ = model.pairs[0]
        assert ctx.fallback
        preds = [predict(model, row)[0] for row in base]
        assert set(preds) <= {0, 1}

    def test_invalid_dataset_rejected(self):
        ds = two_class_dataset()
        bad = Dataset(
            samples=ds.samples,
            labels=tuple([9] + list(ds.labels[1:])),
            num_classes=ds.num_classes,
            dim=ds.dim,
            class_index=ds.class_index,
            label_names=ds.label_names,
        )
        with pytest.raises(ValueError, match="invalid dataset"):
            train(bad, CdfConfig(), kernel=POLY2)

    def test_single_class_rejected(self):
        x = np.abs(np.random.default_rng(0).normal(size=(5, 3)))
        ds = Dataset.from_arrays(x, [0] * 5)
        with pytest.raises(ValueError, match="two classes"):
            train(ds, CdfConfig(), kernel=POLY2)

    def test_jobs_match_sequential(self):
        x, y = gaussian_blobs(10, seed=3, dims=12, classes=3)
        ds = Dataset.from_arrays(x, y)
        sequential = train(ds, CdfConfig(), kernel=POLY2, seed=1, jobs=1)
        threaded = train(ds, CdfConfig(), kernel=POLY2, seed=1, jobs=4)
        assert sequential == threaded

    def test_train_then_predict_separable_zero_errors(self):
        x, y = gaussian_blobs(30, seed=4, dims=20, classes=3)
        ds = Dataset.from_arrays(x, y)
        model = train(ds, CdfConfig(), kernel=POLY2)
        preds = [predict(model, s)[0] for s in ds.samples]
        assert preds == list(ds.labels)

    def test_literal_selection_mode_trains(self):
        x, y = gaussian_blobs(30, seed=14, dims=20, classes=3)
        ds = Dataset.from_arrays(x, y)
        model = train(ds, CdfConfig(selection_mode="literal"), kernel=POLY2)
        for ctx, _ in model.pairs:
            assert ctx.selection_mode == "literal"
        preds = [predict(model, s)[0] for s in ds.samples]
        assert preds == list(ds.labels)

    def test_pair_override_reaches_contexts(self):
        x, y = gaussian_blobs(15, seed=15, dims=12, classes=3)
        ds = Dataset.from_arrays(x, y)
        cfg = CdfConfig(b=1.0, b_prime=1.0, pair_overrides={(0, 2): (1.5, 0.5)})
        model = train(ds, cfg, kernel=POLY2)
        ctx_01, _ = model.pair(0, 1)
        ctx_02, _ = model.pair(0, 2)
        assert (ctx_01.b, ctx_01.b_prime) == (1.0, 1.0)
        assert (ctx_02.b, ctx_02.b_prime) == (1.5, 0.5)


class TestPredict:
    def test_two_votes_beat_one(self):
        x, y = gaussian_blobs(25, seed=6, dims=15, classes=3)
        ds = Dataset.from_arrays(x, y)
        model = train(ds, CdfConfig(), kernel=POLY2)
        sample = ds.class_matrix(0)[0]
        winner, record = predict(model, sample)
        assert sum(record.votes) == 3
        # A clean class-0 sample wins both its pairs; (1,2) cannot outvote it.
        assert record.votes[0] == 2
        assert winner == 0

    def test_m2_winner_is_decision_sign(self):
        ds = two_class_dataset(seed=7)
        model = train(ds, CdfConfig(), kernel=POLY2)
        ctx, svm = model.pairs[0]
        for sample in list(ds.samples)[:20]:
            feat = core.sample_feature(
                np.asarray(sample), ctx.mask, ctx.ref_x, ctx.ref_y,
                model.config.feature_mode, model.config.smoothing_eps,
            )
            d = decision(svm, feat)
            expected = 0 if d > 0 else 1
            assert predict(model, sample)[0] == expected

    def test_vote_conservation(self):
        x, y = gaussian_blobs(10, seed=8, dims=16, classes=4)
        ds = Dataset.from_arrays(x, y)
        model = train(ds, CdfConfig(), kernel=POLY2)
        rng = np.random.default_rng(9)
        for _ in range(25):
            sample = rng.uniform(0, 10, size=16)
            _, record = predict(model, sample)
            assert sum(record.votes) == 6  # 4*3/2

    def test_repeated_calls_bit_identical(self):
        ds = two_class_dataset(seed=10)
        model = train(ds, CdfConfig(), kernel=POLY2)
        sample = ds.samples[3]
        first = predict(model, sample)
        for _ in range(5):
            assert predict(model, sample) == first

    def test_dimension_mismatch(self):
        model = train(two_class_dataset(), CdfConfig(), kernel=POLY2)
        with pytest.raises(ValueError, match="does not match model dim"):
            predict(model, np.ones(3))


class TestWinnerResolution:
    def test_margin_breaks_vote_tie(self):
        assert resolve_winner([1, 1, 1], [2.0, 3.0, 5.0]) == 2
        assert resolve_winner([1, 1, 1], [2.0, 5.0, 3.0]) == 1

    def test_class_id_breaks_full_tie(self):
        assert resolve_winner([1, 1, 1], [2.0, 2.0, 2.0]) == 0

    def test_vote_record_checks_winner(self):
        with pytest.raises(ValueError, match="tie-break"):
            VoteRecord(votes=(1, 1, 1), margin_sums=(0.0, 1.0, 5.0), winner=1)

    def test_vote_record_checks_total(self):
        with pytest.raises(ValueError, match="vote total"):
            VoteRecord(votes=(4, 1, 1), margin_sums=(0.0, 0.0, 0.0), winner=0)


class TestPipelineTrainer:
    def test_grid_b_values_reach_the_masks(self):
        from cdfeat.multiclass import pipeline_trainer
        from cdfeat.svm import GridCell, cross_validate

        x, y = gaussian_blobs(12, seed=21, dims=18, classes=3)
        trainer = pipeline_trainer(CdfConfig(), seed=0)
        grid = [
            GridCell(c=10.0, kernel=POLY2, b=0.5, b_prime=0.5),
            GridCell(c=10.0, kernel=POLY2, b=2.0, b_prime=2.0),
        ]
        result = cross_validate(x, np.asarray(y), grid, folds=3, seed=0, trainer=trainer)
        assert len(result.table) == 2
        for cell, acc in result.table:
            assert 0.0 <= acc <= 1.0
        # Separable blobs: the winning cell classifies the held-out folds.
        assert dict(result.table)[result.best] == 1.0


class TestPredictBatch:
    def test_empty_batch(self):
        model = train(two_class_dataset(), CdfConfig(), kernel=POLY2)
        assert predict_batch(model, []) == []

    def test_batch_of_one_equals_predict(self):
        ds = two_class_dataset(seed=11)
        model = train(ds, CdfConfig(), kernel=POLY2)
        sample = ds.samples[0]
        assert predict_batch(model, [sample]) == [predict(model, sample)]

    def test_permutation_permutes_output(self):
        ds = two_class_dataset(seed=12)
        model = train(ds, CdfConfig(), kernel=POLY2)
        batch = list(ds.samples)[:8]
        out = predict_batch(model, batch)
        perm = [5, 2, 7, 0, 1, 6, 3, 4]
        permuted = predict_batch(model, [batch[i] for i in perm])
        assert permuted == [out[i] for i in perm]

    def test_mismatch_reports_sample_index(self):
        ds = two_class_dataset(seed=13)
        model = train(ds, CdfConfig(), kernel=POLY2)
        batch = [ds.samples[0], np.ones(2)]
        with pytest.raises(ValueError, match="sample 1"):
            predict_batch(model, batch)
