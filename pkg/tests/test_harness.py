import filecmp
import json
import os

import numpy as np
import pytest

from rfsvm.harness import (
    ExperimentConfig,
    MethodResult,
    accuracy,
    assemble_report,
    micro_f1,
    predict_with,
    run_experiment,
    run_method_on_dataset,
    tune_and_fit,
    write_outputs,
)

from conftest import synthetic_dataset


def write_dataset_csv(d, path):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(d.m)] + ["label"])
        for row, lab in zip(d.features, d.labels):
            writer.writerow([repr(float(v)) for v in row] + [d.label_names[lab]])


def toy_config(tmp_path, methods=("rfsvm",), seed=3, reps=2, n_trees=25, **extra):
    d1 = synthetic_dataset(n=36, m=8, c=2, seed=10, name="toy_a")
    d2 = synthetic_dataset(n=36, m=8, c=3, seed=11, name="toy_b")
    for d in (d1, d2):
        write_dataset_csv(d, tmp_path / f"{d.name}.csv")
    kwargs = dict(
        datasets=[
            {"name": "toy_a", "path": str(tmp_path / "toy_a.csv"), "label_column": "label"},
            {"name": "toy_b", "path": str(tmp_path / "toy_b.csv"), "label_column": "label"},
        ],
        methods=list(methods),
        repetitions=reps,
        cv_folds=2,
        master_seed=seed,
        n_trees=n_trees,
        output_dir=str(tmp_path / "out"),
        svm_c_grid=(1.0, 100.0),
        rbf_gamma_grid=(0.01, 1.0),
        rf_max_features_grid=(0.2,),
        rf_min_samples_leaf_grid=(1,),
        rf_min_samples_split_grid=(2,),
        rf_max_depth_grid=(None,),
        bayes_samples=2000,
    )
    kwargs.update(extra)
    return ExperimentConfig(**kwargs)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_three_of_four(self):
        assert accuracy([0, 1, 1, 0], [0, 1, 0, 0]) == 0.75

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            accuracy([], [])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            accuracy([1], [1, 2])


class TestMicroF1:
    def test_perfect(self):
        assert micro_f1([0, 1, 2], [0, 1, 2], c=3) == 1.0

    def test_pooled_counts_by_hand(self):
        # 4 instances, 1 error: pooled tp=3, fp=1, fn=1 -> 2*3/(2*3+1+1)
        assert micro_f1([1, 1, 1, 0], [1, 1, 1, 1], c=2) == pytest.approx(0.75)

    def test_equals_accuracy_on_single_label_input(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            c = int(rng.integers(2, 5))
            actual = rng.integers(0, c, size=30)
            pred = rng.integers(0, c, size=30)
            assert micro_f1(pred, actual, c) == pytest.approx(accuracy(pred, actual))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            micro_f1([1], [1, 2], c=2)


class TestConfig:
    def test_grid_domain_enforced(self, tmp_path):
        with pytest.raises(ValueError, match="outside the searched domain"):
            toy_config(tmp_path, svm_c_grid=(3.0,))

    def test_unknown_method_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown methods"):
            toy_config(tmp_path, methods=("boosting",))

    def test_from_file_roundtrip(self, tmp_path):
        config = toy_config(tmp_path)
        payload = {
            "datasets": config.datasets,
            "methods": config.methods,
            "repetitions": config.repetitions,
            "cv_folds": config.cv_folds,
            "master_seed": config.master_seed,
            "output_dir": config.output_dir,
            "n_trees": config.n_trees,
            "svm_c_grid": list(config.svm_c_grid),
            "rf_max_depth_grid": [10, None],
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload))
        loaded = ExperimentConfig.from_file(path)
        assert loaded.methods == ["rfsvm"]
        assert loaded.svm_c_grid == (1.0, 100.0)
        assert loaded.rf_max_depth_grid == (10, None)


class TestTuneAndFit:
    def test_single_point_grid_chosen(self, tmp_path):
        config = toy_config(tmp_path, svm_c_grid=(10.0,))
        d = synthetic_dataset(n=30, m=6, c=2, seed=12)
        fitted, chosen = tune_and_fit("rfsvm", d, np.arange(d.n), config, (0,))
        assert chosen["c"] == 10.0

    def test_rfsvm_grid_has_seven_points_by_default(self, tmp_path):
        d = synthetic_dataset(n=30, m=6, c=2, seed=13)
        config = toy_config(tmp_path)
        full = ExperimentConfig(
            datasets=config.datasets,
            methods=["rfsvm"],
            repetitions=1,
            cv_folds=2,
            n_trees=10,
            output_dir=config.output_dir,
        )
        assert len(full.svm_c_grid) == 7
        _, chosen = tune_and_fit("rfsvm", d, np.arange(d.n), full, (0,))
        assert any(np.isclose(chosen["c"], v) for v in full.svm_c_grid)

    def test_svm_rbf_grid_is_seven_by_seven_by_default(self):
        config = ExperimentConfig(
            datasets=[{"name": "x", "path": "x.csv"}],
            methods=["svm_rbf"],
        )
        assert len(config.svm_c_grid) * len(config.rbf_gamma_grid) == 49

    def test_predictions_come_from_refit_on_full_train(self, tmp_path):
        config = toy_config(tmp_path)
        d = synthetic_dataset(n=34, m=6, c=2, seed=14)
        train = np.arange(24)
        test = np.arange(24, 34)
        fitted, _ = tune_and_fit("rfsvm", d, train, config, (1,))
        pred = predict_with(fitted, d, test)
        assert pred.shape == (10,)
        assert set(np.unique(pred)) <= {0, 1}

    @pytest.mark.parametrize("method", ["rf", "svm_rbf", "cossvm"])
    def test_other_methods_run(self, tmp_path, method):
        config = toy_config(tmp_path, methods=(method,))
        d = synthetic_dataset(n=30, m=6, c=2, seed=15)
        train = np.arange(20)
        fitted, chosen = tune_and_fit(method, d, train, config, (2,))
        pred = predict_with(fitted, d, np.arange(20, 30))
        assert pred.shape == (10,)
        assert chosen


class TestRunMethodOnDataset:
    def test_single_repetition_on_ten_instances(self, tmp_path):
        config = toy_config(tmp_path, reps=1)
        d = synthetic_dataset(n=10, m=4, c=2, seed=16)
        result = run_method_on_dataset("rfsvm", d, config, ds_index=0)
        assert len(result.accuracies) == 1
        assert len(result.micro_f1s) == 1
        assert len(result.chosen) == 1

    def test_same_master_seed_identical_results(self, tmp_path):
        config = toy_config(tmp_path, reps=2)
        d = synthetic_dataset(n=30, m=6, c=2, seed=17)
        a = run_method_on_dataset("rfsvm", d, config, ds_index=0)
        b = run_method_on_dataset("rfsvm", d, config, ds_index=0)
        assert a.accuracies == b.accuracies
        assert a.micro_f1s == b.micro_f1s
        assert a.chosen == b.chosen

    def test_micro_f1_equals_accuracy_in_harness_outputs(self, tmp_path):
        config = toy_config(tmp_path, reps=2)
        d = synthetic_dataset(n=30, m=6, c=3, seed=18)
        result = run_method_on_dataset("rfsvm", d, config, ds_index=0)
        for acc, f1 in zip(result.accuracies, result.micro_f1s):
            assert f1 == pytest.approx(acc)

    def test_mean_std_consistent_with_list(self, tmp_path):
        config = toy_config(tmp_path, reps=3)
        d = synthetic_dataset(n=30, m=6, c=2, seed=19)
        result = run_method_on_dataset("rf", d, config, ds_index=0)
        assert result.mean_accuracy == pytest.approx(np.mean(result.accuracies), abs=1e-12)
        assert result.std_accuracy == pytest.approx(np.std(result.accuracies), abs=1e-12)


@pytest.fixture(scope="module")
def run_outputs(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("exp")
    config = toy_config(tmp_path, methods=("rfsvm", "rf", "cossvm"), reps=2)
    results, profiles, failures = run_experiment(config)
    return config, results, profiles, failures


class TestReportAssembly:
    def test_no_failures_on_toy(self, run_outputs):
        _, _, _, failures = run_outputs
        assert failures == {}

    def test_band_partition(self, run_outputs):
        config, results, profiles, _ = run_outputs
        report = assemble_report(results, profiles, config)
        band_counts = sum(len(sec["datasets"]) for sec in report["bands"].values())
        assert band_counts == len(report["header"]["datasets"])

    def test_universal_winner_sweeps_wins(self, run_outputs):
        config, results, profiles, _ = run_outputs
        doctored = {}
        for (ds, m), res in results.items():
            accs = [0.99] * len(res.accuracies) if m == "rf" else [0.5] * len(res.accuracies)
            doctored[(ds, m)] = MethodResult(ds, m, accs, accs, res.chosen, res.wall_clock)
        report = assemble_report(doctored, profiles, config)
        assert report["wins"]["rf"] == len(report["header"]["datasets"])

    def test_friedman_present_with_three_methods(self, run_outputs):
        config, results, profiles, _ = run_outputs
        report = assemble_report(results, profiles, config)
        assert report["friedman"] is not None
        assert set(report["friedman"]["avg_ranks"]) == {"rfsvm", "rf", "cossvm"}

    def test_bayes_maps_cover_ordered_pairs_and_ropes(self, run_outputs):
        config, results, profiles, _ = run_outputs
        report = assemble_report(results, profiles, config)
        assert len(report["bayes"]) == len(config.ropes) * 3 * 2


class TestAbsentCells:
    def test_failed_pair_recorded_not_raised(self, tmp_path):
        # a class with a single member cannot stratify, so the pair must fail
        import csv as csvmod

        with open(tmp_path / "lonely.csv", "w", newline="") as fh:
            writer = csvmod.writer(fh)
            writer.writerow(["f0", "f1", "label"])
            for i in range(8):
                writer.writerow([i, -i, "a"])
            writer.writerow([99, 99, "b"])
        config = toy_config(tmp_path, methods=("rfsvm", "rf"), reps=1)
        config.datasets.append(
            {"name": "lonely", "path": str(tmp_path / "lonely.csv"), "label_column": "label"}
        )
        with pytest.warns(UserWarning, match="ABSENT CELL"):
            results, profiles, failures = run_experiment(config)
        assert ("lonely", "rfsvm") in failures
        assert ("toy_a", "rfsvm") in results
        # the failed dataset is excluded from the report with a warning
        with pytest.warns(UserWarning, match="absent"):
            report = assemble_report(results, profiles, config)
        assert "lonely" not in report["header"]["datasets"]


class TestEndToEndDeterminism:
    def test_two_runs_identical_report_files(self, tmp_path):
        config_a = toy_config(tmp_path, methods=("rfsvm", "rf"), reps=2)
        out_a = tmp_path / "run_a"
        out_b = tmp_path / "run_b"

        for out in (out_a, out_b):
            cfg = ExperimentConfig(
                datasets=config_a.datasets,
                methods=config_a.methods,
                repetitions=config_a.repetitions,
                cv_folds=config_a.cv_folds,
                master_seed=config_a.master_seed,
                n_trees=config_a.n_trees,
                output_dir=str(out),
                svm_c_grid=config_a.svm_c_grid,
                rbf_gamma_grid=config_a.rbf_gamma_grid,
                rf_max_features_grid=config_a.rf_max_features_grid,
                rf_min_samples_leaf_grid=config_a.rf_min_samples_leaf_grid,
                rf_min_samples_split_grid=config_a.rf_min_samples_split_grid,
                rf_max_depth_grid=config_a.rf_max_depth_grid,
                bayes_samples=config_a.bayes_samples,
            )
            datasets = None
            results, profiles, failures = run_experiment(cfg, datasets)
            write_outputs(results, profiles, failures, cfg, _load_datasets(cfg))

        comparable = ["report.json", "raw_results.json", "rfsvm.csv", "rf.csv"]
        for name in comparable:
            assert filecmp.cmp(out_a / name, out_b / name, shallow=False), name
        for split_file in sorted(os.listdir(out_a / "splits")):
            assert filecmp.cmp(
                out_a / "splits" / split_file, out_b / "splits" / split_file, shallow=False
            )


def _load_datasets(config):
    from rfsvm.data import load_csv

    return [
        load_csv(entry["path"], entry.get("label_column", "label"), name=entry.get("name"))
        for entry in config.datasets
    ]
