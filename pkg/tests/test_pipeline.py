import json

import numpy as np
import pytest

from rffsvm import (
    Dataset,
    EvalReport,
    ExperimentConfig,
    KernelSpec,
    SvmConfig,
    apply_normalizer,
    experiment_record,
    fit_normalizer,
    grid_search,
    make_synthetic,
    render_class_table,
    render_m_table,
    run_experiment,
    storage_report,
    sweep_m,
)

GAUSS = KernelSpec("gaussian", 0.1)


def exact_config(spec=GAUSS, **kw):
    return ExperimentConfig(spec=spec, mode="exact_kernel", **kw)


def rff_config(target_dim, spec=GAUSS, **kw):
    return ExperimentConfig(spec=spec, mode="random_features", target_dim=target_dim, **kw)


class TestNormalizer:
    def test_two_point_column(self):
        norm = fit_normalizer(np.array([[1.0], [3.0]]))
        assert norm.mean[0] == 2.0
        assert norm.std[0] == 1.0  # population std

    def test_constant_column_flagged(self):
        norm = fit_normalizer(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]))
        assert norm.std[0] == 0.0
        assert norm.degenerate.tolist() == [True, False]

    def test_train_rows_standardize_back(self):
        rng = np.random.default_rng(3)
        X = np.hstack([rng.normal(5.0, 3.0, size=(40, 3)), np.full((40, 1), 7.0)])
        norm = fit_normalizer(X)
        Z = apply_normalizer(norm, X)
        assert np.abs(Z.mean(axis=0)).max() <= 1e-12
        stds = Z.std(axis=0)
        assert np.allclose(stds[:3], 1.0)
        assert stds[3] == 0.0

    def test_single_row_rejected(self):
        with pytest.raises(ValueError, match="at least 2 rows"):
            fit_normalizer(np.ones((1, 4)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            fit_normalizer(np.array([[1.0], [np.nan]]))

    def test_apply_examples(self):
        norm = fit_normalizer(np.array([[1.0, 5.0], [3.0, 5.0]]))
        out = apply_normalizer(norm, np.array([[3.0, 5.0]]))
        assert out[0, 0] == 1.0  # (3 - 2) / 1
        assert out[0, 1] == 0.0  # degenerate column, mean subtraction only

    def test_test_rows_keep_their_own_mean(self):
        norm = fit_normalizer(np.array([[0.0], [2.0]]))
        shifted = apply_normalizer(norm, np.array([[10.0], [12.0]]))
        assert shifted.mean() == 10.0  # statistics come from train only

    def test_dimension_mismatch(self):
        norm = fit_normalizer(np.ones((3, 2)) * np.arange(3)[:, None])
        with pytest.raises(ValueError, match="dimension mismatch"):
            apply_normalizer(norm, np.ones((2, 5)))

    def test_statistics_ignore_other_rows(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(30, 4))
        before = fit_normalizer(X[:20])
        X[20:] = 1e9  # mutate would-be test rows
        after = fit_normalizer(X[:20])
        assert np.array_equal(before.mean, after.mean)
        assert np.array_equal(before.std, after.std)

    def test_statistics_frozen(self):
        norm = fit_normalizer(np.arange(6.0).reshape(3, 2))
        with pytest.raises(ValueError):
            norm.mean[0] = 0.0


class TestExperimentConfig:
    def test_bad_mode(self):
        with pytest.raises(ValueError, match="mode"):
            ExperimentConfig(spec=GAUSS, mode="kernelized")

    def test_rff_needs_target_dim(self):
        with pytest.raises(ValueError, match="target_dim"):
            ExperimentConfig(spec=GAUSS, mode="random_features")

    def test_exact_forbids_target_dim(self):
        with pytest.raises(ValueError, match="target_dim"):
            ExperimentConfig(spec=GAUSS, mode="exact_kernel", target_dim=8)

    def test_linear_has_no_random_features(self):
        with pytest.raises(ValueError, match="linear kernel needs no random features"):
            ExperimentConfig(spec=KernelSpec("linear"), mode="random_features", target_dim=8)

    def test_threads_positive(self):
        with pytest.raises(ValueError, match="threads"):
            ExperimentConfig(spec=GAUSS, mode="exact_kernel", threads=0)


class TestRunExperiment:
    def test_three_blob_exact_kernel(self):
        ds = make_synthetic(3, 100, 8, 6.0, seed=5, folds=3)
        report = run_experiment(ds, exact_config(KernelSpec("gaussian", 0.05)))
        assert report.overall_accuracy >= 0.95
        assert len(report.per_fold) == 3
        assert report.dims == {"input_dim": 8, "effective_dim": 8}

    def test_accuracy_accounting(self):
        ds = make_synthetic(3, 40, 8, 2.5, seed=12, folds=2)
        report = run_experiment(ds, exact_config())
        conf = report.confusion
        assert report.overall_accuracy == pytest.approx(
            np.trace(conf) / conf.sum(), abs=1e-12
        )
        counts = {label: 0 for label in report.class_labels}
        for label in ds.labels:
            counts[label] += 1
        for i, label in enumerate(report.class_labels):
            assert conf[i].sum() == counts[label]
            assert report.per_class_accuracy[label] == conf[i, i] / conf[i].sum()

    def test_overall_is_micro_average(self):
        # fold sizes 60/40/20 make micro and macro averages differ
        ds = make_synthetic(3, 40, 8, 2.5, seed=12, folds=1)
        sizes = [60, 40, 20]
        assign = tuple(1 if i < 60 else (2 if i < 100 else 3) for i in range(120))
        report = run_experiment(ds.with_folds(assign), exact_config())
        micro = sum(a * s for a, s in zip(report.per_fold, sizes)) / sum(sizes)
        macro = sum(report.per_fold) / len(sizes)
        assert report.overall_accuracy == pytest.approx(micro, abs=1e-12)
        assert abs(report.overall_accuracy - macro) > 0.01

    @pytest.mark.filterwarnings("ignore:target_dim")
    def test_more_features_do_not_hurt(self):
        ds = make_synthetic(3, 40, 16, 3.0, seed=9, folds=3)
        small = run_experiment(ds, rff_config(4, map_seed=2))
        big = run_experiment(ds, rff_config(256, map_seed=2))
        assert big.overall_accuracy >= small.overall_accuracy

    def test_rff_dims(self):
        ds = make_synthetic(2, 20, 32, 6.0, seed=6, folds=2)
        report = run_experiment(ds, rff_config(8, map_seed=1))
        assert report.dims == {"input_dim": 32, "effective_dim": 8}

    def test_compression_warning(self):
        ds = make_synthetic(2, 10, 4, 6.0, seed=6, folds=2)
        with pytest.warns(RuntimeWarning, match="does not compress"):
            run_experiment(ds, rff_config(8, map_seed=1))

    def test_single_class_training_complement(self):
        X = np.vstack([np.zeros((4, 2)), np.ones((4, 2))])
        ds = Dataset(
            X,
            ("a",) * 4 + ("b",) * 4,
            tuple("s%d" % i for i in range(8)),
            (1,) * 4 + (2,) * 4,
        )
        with pytest.raises(ValueError, match="fewer than two classes"):
            run_experiment(ds, exact_config())

    def test_missing_fold_assignment(self):
        ds = make_synthetic(2, 10, 4, 6.0, seed=6, folds=2)
        bare = Dataset(ds.features, ds.labels, ds.segment_ids)
        with pytest.raises(ValueError, match="no fold assignment"):
            run_experiment(bare, exact_config())

    def test_bad_fold_order(self):
        ds = make_synthetic(2, 10, 4, 6.0, seed=6, folds=2)
        with pytest.raises(ValueError, match="permute"):
            run_experiment(ds, exact_config(), fold_order=[1, 2, 3])

    @pytest.mark.parametrize("reseed", [False, True])
    def test_fold_order_invariance(self, reseed):
        ds = make_synthetic(3, 30, 8, 3.0, seed=7, folds=3)
        config = rff_config(6, map_seed=4, reseed_per_fold=reseed)
        a = run_experiment(ds, config)
        b = run_experiment(ds, config, fold_order=[3, 1, 2])
        assert a.overall_accuracy == b.overall_accuracy
        assert a.per_fold == b.per_fold
        assert np.array_equal(a.confusion, b.confusion)

    def test_timing_reported(self):
        ds = make_synthetic(2, 10, 4, 6.0, seed=6, folds=2)
        report = run_experiment(ds, exact_config())
        assert report.timing["train_seconds"] >= 0.0
        assert report.timing["test_seconds"] >= 0.0

    def test_paper_scale_dims(self):
        # a 6,553-dim dataset mapped to M=2^10 reports both dimensions
        rng = np.random.default_rng(15)
        X = rng.normal(size=(12, 6553))
        X[6:] += 3.0
        ds = Dataset(
            X,
            ("a",) * 6 + ("b",) * 6,
            tuple("s%02d" % i for i in range(12)),
            tuple(i % 2 + 1 for i in range(12)),
        )
        report = run_experiment(ds, rff_config(1024, spec=KernelSpec("gaussian", 2.0**-18)))
        assert report.dims == {"input_dim": 6553, "effective_dim": 1024}


class TestEvalReport:
    def test_accounting_mismatch_rejected(self):
        with pytest.raises(ValueError, match="disagrees"):
            EvalReport(
                class_labels=("a", "b"),
                overall_accuracy=0.9,
                per_class_accuracy={"a": 1.0, "b": 0.5},
                confusion=np.array([[2, 0], [1, 1]]),
                per_fold=(0.75,),
                dims={"input_dim": 2, "effective_dim": 2},
                timing={"train_seconds": 0.0, "test_seconds": 0.0},
            )

    def test_confusion_must_be_square(self):
        with pytest.raises(ValueError, match="confusion"):
            EvalReport(
                class_labels=("a", "b"),
                overall_accuracy=1.0,
                per_class_accuracy={"a": 1.0, "b": 1.0},
                confusion=np.ones((2, 3), dtype=int),
                per_fold=(1.0,),
                dims={},
                timing={},
            )


class TestSweepM:
    @pytest.mark.filterwarnings("ignore:target_dim")
    def test_trend_and_shape(self):
        ds = make_synthetic(3, 40, 16, 3.0, seed=9, folds=3)
        sweeps = sweep_m(ds, rff_config(4, map_seed=2), [4, 8, 16, 64, 256])
        assert [m for m, _ in sweeps] == [4, 8, 16, 64, 256]
        accs = [rep.overall_accuracy for _, rep in sweeps]
        assert accs[-1] >= accs[0]
        # consecutive dips stay inside the 2-point Monte Carlo slack
        assert all(b >= a - 0.02 for a, b in zip(accs, accs[1:]))

    def test_single_m_matches_run_experiment(self):
        ds = make_synthetic(2, 20, 16, 5.0, seed=8, folds=2)
        config = rff_config(8, map_seed=3)
        [(m, swept)] = sweep_m(ds, config, [8])
        direct = run_experiment(ds, config)
        assert m == 8
        assert swept.overall_accuracy == direct.overall_accuracy
        assert np.array_equal(swept.confusion, direct.confusion)

    def test_requires_rff_mode(self):
        ds = make_synthetic(2, 10, 4, 6.0, seed=6, folds=2)
        with pytest.raises(ValueError, match="random_features"):
            sweep_m(ds, exact_config(), [4])

    def test_empty_values_rejected(self):
        ds = make_synthetic(2, 10, 4, 6.0, seed=6, folds=2)
        with pytest.raises(ValueError, match="non-empty"):
            sweep_m(ds, rff_config(2), [])


def checkerboard_dataset():
    # XOR geometry: diagonal blob pairs share a class, so the kernel
    # bandwidth has to resolve blob-scale structure
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(31)))
    blocks, labels = [], []
    for label, cs in (("a", [(0, 0), (4, 4)]), ("b", [(0, 4), (4, 0)])):
        for c in cs:
            blocks.append(rng.normal(size=(40, 2)) + np.asarray(c, dtype=float))
            labels += [label] * 40
    X = np.vstack(blocks)
    return Dataset(
        X,
        tuple(labels),
        tuple("s%03d" % i for i in range(len(labels))),
        tuple(i % 2 + 1 for i in range(len(labels))),
    )


class TestGridSearch:
    def test_single_cell(self):
        ds = make_synthetic(2, 20, 4, 8.0, seed=10, folds=2)
        result = grid_search(ds, "gaussian", [0.25], [10.0])
        assert (result.best_gamma, result.best_c) == (0.25, 10.0)
        assert len(result.rows) == 1

    def test_tie_breaks_to_smaller_gamma_then_c(self):
        # wide separation: every cell scores 1.0
        ds = make_synthetic(2, 20, 4, 20.0, seed=10, folds=2)
        result = grid_search(ds, "gaussian", [1.0, 0.25], [100.0, 10.0])
        assert all(acc == 1.0 for _, _, acc in result.rows)
        assert (result.best_gamma, result.best_c) == (0.25, 10.0)

    def test_grid_order_does_not_matter(self):
        ds = checkerboard_dataset()
        gammas = [2.0**k for k in (-4, -1, -6, 1)]
        a = grid_search(ds, "gaussian", gammas, [10.0])
        b = grid_search(ds, "gaussian", list(reversed(gammas)), [10.0])
        assert a.rows == b.rows
        assert (a.best_gamma, a.best_c) == (b.best_gamma, b.best_c)

    def test_recovers_characteristic_bandwidth(self):
        # after z-scoring, within-blob squared distances average about
        # 2 * dim / (1 + center variance) = 0.8, so the matching gamma
        # is near 1.25; the winner must land within two powers of two
        ds = checkerboard_dataset()
        result = grid_search(ds, "gaussian", [2.0**k for k in range(-6, 3)], [10.0])
        assert abs(np.log2(result.best_gamma) - np.log2(1.25)) <= 2.0

    def test_empty_grid_rejected(self):
        ds = make_synthetic(2, 10, 4, 6.0, seed=6, folds=2)
        with pytest.raises(ValueError, match="non-empty"):
            grid_search(ds, "gaussian", [], [10.0])

    def test_table_covers_all_cells(self):
        ds = make_synthetic(2, 15, 4, 6.0, seed=11, folds=2)
        result = grid_search(ds, "laplacian", [0.1, 0.3], [1.0, 10.0, 100.0])
        assert len(result.rows) == 6
        assert all(0.0 <= acc <= 1.0 for _, _, acc in result.rows)


class TestStorageReport:
    def test_paper_scale_ratios(self):
        assert storage_report(6553, 1024, 1)["ratio"] >= 6.0
        assert storage_report(6553, 2048, 1)["ratio"] >= 3.0

    def test_byte_accounting(self):
        report = storage_report(4, 2, 10)
        assert report["input_bytes"] == 10 * 4 * 8
        assert report["rff_bytes"] == 10 * 2 * 8 + 48
        assert report["ratio"] == 2.0

    def test_equal_dims(self):
        assert storage_report(64, 64, 5)["ratio"] == 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError, match="target_dim"):
            storage_report(4, 0, 10)


class TestRendering:
    @staticmethod
    def reports():
        ds = make_synthetic(3, 20, 8, 6.0, seed=5, folds=2)
        exact = run_experiment(ds, exact_config(KernelSpec("gaussian", 0.05)))
        rff = run_experiment(ds, rff_config(4, spec=KernelSpec("gaussian", 0.05)))
        return ds, exact, rff

    def test_class_table_layout(self):
        _, exact, rff = self.reports()
        text = render_class_table({"gaussian": exact, "rff": rff})
        lines = text.strip().split("\n")
        assert len(lines) == 1 + 3 + 1  # header, classes, overall
        assert lines[0].split() == ["class", "gaussian", "rff"]
        assert lines[-1].startswith("overall")
        assert "%.1f" % (100 * exact.overall_accuracy) in lines[-1]

    def test_m_table_layout(self):
        ds = make_synthetic(2, 20, 16, 5.0, seed=8, folds=2)
        sweeps = {"gaussian": sweep_m(ds, rff_config(8, map_seed=3), [4, 8])}
        text = render_m_table(sweeps, input_dim=16)
        lines = text.strip().split("\n")
        assert lines[0].split() == ["M", "gaussian", "ratio"]
        assert len(lines) == 3
        assert lines[1].endswith("4.0x")
        assert lines[2].endswith("2.0x")

    def test_record_is_json_ready(self):
        ds, exact, _ = self.reports()
        config = exact_config(KernelSpec("gaussian", 0.05))
        record = experiment_record(config, exact, storage_report(8, 4, ds.row_count))
        text = json.dumps(record, sort_keys=True)
        parsed = json.loads(text)
        assert parsed["config"]["kernel"] == "gaussian"
        assert parsed["overall_accuracy"] == exact.overall_accuracy
        assert parsed["storage"]["ratio"] == 2.0
        assert len(parsed["confusion"]) == 3
