"""Acceptance suite: one test per exit criterion, each printing a PASS/FAIL line.

Run with `pytest -v -s tests/test_acceptance.py`. The desk-scale benchmark
tests fit hundreds of 500-tree forests and take a few minutes; everything else
finishes in seconds.
"""

import filecmp
import itertools
import json
import os
import time

import numpy as np
import pytest

from rfsvm.data import Dataset, load_csv, omega, random_half_splits
from rfsvm.forest import ForestHyperparams, bootstrap_sample, fit_forest, forest_apply
from rfsvm.harness import (
    ExperimentConfig,
    accuracy,
    micro_f1,
    run_experiment,
    run_method_on_dataset,
    write_outputs,
)
from rfsvm.kernel import rf_kernel_train, rf_similarity
from rfsvm.stats import (
    ScoreTable,
    bayesian_sign_test,
    friedman_nemenyi,
    nemenyi_critical_difference,
    rank_methods,
)
from rfsvm.svm import SvmHyperparams, solve_binary_smo

from conftest import DATA_DIR, synthetic_dataset
from oracles import kkt_violation, projected_gradient_dual, random_psd_kernel


def report(name, ok, detail=""):
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip(), flush=True)
    return ok


class TestKernelCorrectness:
    def test_bucket_kernel_matches_pairwise_oracle_on_50_forests(self):
        started = time.perf_counter()
        rng = np.random.default_rng(2024)
        worst_eig = np.inf
        for trial in range(50):
            m_trees = (1, 10, 100)[trial % 3]
            n = (10, 60)[trial % 2]
            c = 2 + trial % 2
            d = synthetic_dataset(n=n, m=6, c=c, seed=1000 + trial)
            train = np.arange(d.n)
            model = fit_forest(d, train, ForestHyperparams(n_trees=m_trees, max_features=0.5), seed=trial)
            kernel = rf_kernel_train(model, d, train)
            values = kernel.values

            # pairwise-definition oracle: per-pair fraction of matching leaves
            leaves = forest_apply(model, d.features[train])
            oracle = (leaves[:, None, :] == leaves[None, :, :]).sum(axis=2) / m_trees
            assert np.array_equal(values, oracle), f"trial {trial}: bucket != pairwise"

            assert np.all(np.diag(values) == 1.0), f"trial {trial}: diagonal"
            assert np.array_equal(values, values.T), f"trial {trial}: symmetry"
            worst_eig = min(worst_eig, float(np.linalg.eigvalsh(values).min()))

            if trial % 10 == 0:  # scalar-traversal spot check on sampled pairs
                for i, j in itertools.islice(itertools.combinations(range(n), 2), 15):
                    assert values[i, j] == rf_similarity(model, d.features[i], d.features[j])
        elapsed = time.perf_counter() - started
        ok = worst_eig >= -1e-8 and elapsed < 60
        assert report(
            "kernel-correctness",
            ok,
            f"(50 forests, min eigenvalue {worst_eig:.2e}, {elapsed:.1f}s)",
        )


class TestSmoOracleEquivalence:
    def test_200_random_problems_match_projected_gradient(self):
        started = time.perf_counter()
        worst_gap = 0.0
        worst_kkt = 0.0
        for trial in range(200):
            rng = np.random.default_rng(5000 + trial)
            n = int(rng.integers(2, 9))
            K = random_psd_kernel(rng, n)
            y = rng.choice([-1.0, 1.0], size=n)
            while len(np.unique(y)) < 2:
                y = rng.choice([-1.0, 1.0], size=n)
            c_value = (0.01, 1.0, 100.0)[trial % 3]

            hp = SvmHyperparams(c=c_value, kkt_tolerance=1e-5, max_passes=10000)
            model = solve_binary_smo(K, y, hp)
            assert model.converged, f"trial {trial}: SMO did not converge"
            _, oracle_obj = projected_gradient_dual(K, y, c_value)
            worst_gap = max(worst_gap, abs(model.dual_objective - oracle_obj))

            alpha = model.dual_coefs * y
            worst_kkt = max(worst_kkt, kkt_violation(K, y, c_value, alpha, model.bias))
        elapsed = time.perf_counter() - started
        ok = worst_gap <= 1e-6 and worst_kkt <= 1e-3 and elapsed < 60
        assert report(
            "smo-oracle-equivalence",
            ok,
            f"(200 problems, max objective gap {worst_gap:.2e}, max KKT violation {worst_kkt:.2e}, {elapsed:.1f}s)",
        )


class TestOmegaReproduction:
    def test_all_benchmark_profiles_match_to_three_decimals(self):
        with open(os.path.join(DATA_DIR, "table1_profiles.json")) as fh:
            profiles = json.load(fh)
        assert len(profiles) == 40
        bad = []
        for row in profiles:
            n, m, c = row["instances"], row["features"], row["classes"]
            d = Dataset(
                row["name"],
                np.broadcast_to(0.0, (n, m)),
                (np.arange(n) % c).astype(np.int64),
                tuple(str(j) for j in range(c)),
            )
            if round(omega(d), 3) != row["omega"]:
                bad.append((row["name"], omega(d), row["omega"]))
        assert report("omega-reproduction", not bad, f"(40 datasets checked, mismatches: {bad})")


class TestStatisticalConstants:
    def test_critical_difference_and_degenerate_cases(self):
        cd = nemenyi_critical_difference(7, 40, alpha=0.05)
        cd_ok = abs(cd - 1.425) <= 0.01

        flat = ScoreTable(
            tuple(f"m{j}" for j in range(7)),
            tuple(f"d{i}" for i in range(40)),
            np.full((40, 7), 0.8),
        )
        friedman_ok = friedman_nemenyi(flat).statistic == pytest.approx(0.0)

        same = np.linspace(0.5, 0.95, 30)
        rope_rep = bayesian_sign_test(same, same.copy(), rope=0.01, samples=50000, seed=11)
        rope_ok = rope_rep.p_rope >= 0.99

        rng = np.random.default_rng(12)
        a = rng.uniform(0.4, 1.0, size=30)
        b = rng.uniform(0.4, 1.0, size=30)
        ab = bayesian_sign_test(a, b, rope=0.01, samples=50000, seed=13)
        ba = bayesian_sign_test(b, a, rope=0.01, samples=50000, seed=14)
        swap_ok = abs(ab.p_a_gt_b - ba.p_b_gt_a) <= 0.01 and abs(ab.p_b_gt_a - ba.p_a_gt_b) <= 0.01

        ok = cd_ok and friedman_ok and rope_ok and swap_ok
        assert report(
            "statistical-constants",
            ok,
            f"(CD={cd:.4f}, flat-table statistic ok={friedman_ok}, p_rope={rope_rep.p_rope:.4f}, swap ok={swap_ok})",
        )


class TestDeskScaleBenchmarks:
    def test_wdbc_rfsvm_accuracy_band(self):
        d = load_csv(os.path.join(DATA_DIR, "wdbc.csv"), name="wdbc")
        config = ExperimentConfig(
            datasets=[{"name": "wdbc", "path": "data/wdbc.csv"}],
            methods=["rfsvm"],
            repetitions=10,
            cv_folds=3,
            master_seed=20240610,
            n_trees=500,
        )
        started = time.perf_counter()
        result = run_method_on_dataset("rfsvm", d, config, ds_index=0)
        elapsed = time.perf_counter() - started
        mean = result.mean_accuracy
        ok = abs(mean - 0.966) <= 0.03
        assert report(
            "table3-wdbc",
            ok,
            f"(mean accuracy {mean:.4f} ± {result.std_accuracy:.4f} over 10 half-splits, "
            f"target 0.966 ± 0.03, {elapsed:.0f}s)",
        )

    def test_chen_2002_band_if_fixture_available(self):
        path = os.path.join(DATA_DIR, "chen-2002.csv")
        if not os.path.exists(path):
            report("table3-chen-2002", True, "(SKIPPED: no chen-2002 fixture in the repo)")
            pytest.skip("chen-2002 fixture not available")
        d = load_csv(path, name="chen-2002")
        config = ExperimentConfig(
            datasets=[{"name": "chen-2002", "path": path}],
            methods=["rfsvm"],
            repetitions=10,
            cv_folds=3,
            master_seed=20240611,
            n_trees=500,
        )
        result = run_method_on_dataset("rfsvm", d, config, ds_index=0)
        ok = abs(result.mean_accuracy - 0.942) <= 0.05
        assert report("table3-chen-2002", ok, f"(mean accuracy {result.mean_accuracy:.4f})")

    def test_hdlss_qualitative_ordering(self):
        # rank assertion over the three committed HDLSS fixtures with a
        # desk-scale sub-grid for the forest baseline (subset of the full grid)
        config = ExperimentConfig(
            datasets=[
                {"name": "micro_expr_a", "path": os.path.join(DATA_DIR, "micro_expr_a.csv")},
                {"name": "micro_expr_b", "path": os.path.join(DATA_DIR, "micro_expr_b.csv")},
                {"name": "text_sparse", "path": os.path.join(DATA_DIR, "text_sparse.csv")},
            ],
            methods=["rf", "svm_rbf", "rfsvm"],
            repetitions=5,
            cv_folds=3,
            master_seed=1,
            n_trees=500,
            rf_max_features_grid=(0.05, 0.30),
            rf_min_samples_leaf_grid=(1,),
            rf_min_samples_split_grid=(2,),
            rf_max_depth_grid=(None,),
        )
        started = time.perf_counter()
        results, profiles, failures = run_experiment(config)
        elapsed = time.perf_counter() - started
        assert not failures, failures

        names = [entry["name"] for entry in config.datasets]
        assert all(profiles[ds].omega < 1.0 for ds in names)  # genuinely HDLSS
        scores = np.array(
            [[results[(ds, m)].mean_accuracy for m in config.methods] for ds in names]
        )
        table = ScoreTable(tuple(config.methods), tuple(names), scores)
        _, avg_ranks = rank_methods(table)
        ranks = dict(zip(config.methods, avg_ranks))
        ok = ranks["rfsvm"] <= ranks["rf"] and ranks["rfsvm"] <= ranks["svm_rbf"]
        detail = ", ".join(
            f"{m}: rank {ranks[m]:.2f}, acc {scores[:, j].mean():.3f}"
            for j, m in enumerate(config.methods)
        )
        assert report("hdlss-ordering", ok, f"({detail}, {elapsed:.0f}s)")


class TestPropertySuites:
    def test_forest_determinism(self):
        d = synthetic_dataset(n=40, m=8, c=2, seed=77)
        hp = ForestHyperparams(n_trees=10)
        a = fit_forest(d, np.arange(d.n), hp, seed=5)
        b = fit_forest(d, np.arange(d.n), hp, seed=5)
        same = all(
            np.array_equal(ta.feature, tb.feature)
            and np.array_equal(ta.threshold, tb.threshold, equal_nan=True)
            and np.array_equal(ta.histograms, tb.histograms)
            for ta, tb in zip(a.trees, b.trees)
        )
        assert report("property-forest-determinism", same)

    def test_bootstrap_distinct_fraction(self):
        fractions = [
            len(np.unique(bootstrap_sample(np.arange(100), seed=s))) / 100 for s in range(100)
        ]
        gap = abs(np.mean(fractions) - (1 - 1 / np.e))
        assert report(
            "property-bootstrap-0.632", gap < 0.05, f"(mean distinct fraction {np.mean(fractions):.4f})"
        )

    def test_rank_row_sum_identity(self):
        rng = np.random.default_rng(15)
        ok = True
        for _ in range(25):
            k = int(rng.integers(2, 8))
            n = int(rng.integers(2, 12))
            t = ScoreTable(
                tuple(f"m{j}" for j in range(k)),
                tuple(f"d{i}" for i in range(n)),
                rng.uniform(size=(n, k)),
            )
            ranks, _ = rank_methods(t)
            ok &= bool(np.allclose(ranks.sum(axis=1), k * (k + 1) / 2))
        assert report("property-rank-row-sums", ok)

    def test_micro_f1_equals_accuracy(self):
        rng = np.random.default_rng(16)
        ok = True
        for _ in range(50):
            c = int(rng.integers(2, 6))
            actual = rng.integers(0, c, size=40)
            pred = rng.integers(0, c, size=40)
            ok &= abs(micro_f1(pred, actual, c) - accuracy(pred, actual)) < 1e-12
        assert report("property-micro-f1-identity", ok)

    def test_end_to_end_seed_reproducibility(self, tmp_path):
        d1 = synthetic_dataset(n=30, m=6, c=2, seed=60, name="seed_a")
        d2 = synthetic_dataset(n=30, m=6, c=3, seed=61, name="seed_b")
        import csv as csvmod

        for d in (d1, d2):
            with open(tmp_path / f"{d.name}.csv", "w", newline="") as fh:
                writer = csvmod.writer(fh)
                writer.writerow([f"f{j}" for j in range(d.m)] + ["label"])
                for row, lab in zip(d.features, d.labels):
                    writer.writerow([repr(float(v)) for v in row] + [d.label_names[lab]])

        outputs = []
        for run_name in ("run1", "run2"):
            config = ExperimentConfig(
                datasets=[
                    {"name": "seed_a", "path": str(tmp_path / "seed_a.csv")},
                    {"name": "seed_b", "path": str(tmp_path / "seed_b.csv")},
                ],
                methods=["rfsvm", "rf"],
                repetitions=2,
                cv_folds=2,
                master_seed=99,
                n_trees=20,
                output_dir=str(tmp_path / run_name),
                svm_c_grid=(1.0, 100.0),
                rf_max_features_grid=(0.2,),
                rf_min_samples_leaf_grid=(1,),
                rf_min_samples_split_grid=(2,),
                rf_max_depth_grid=(None,),
                bayes_samples=2000,
            )
            datasets = [
                load_csv(entry["path"], "label", name=entry["name"]) for entry in config.datasets
            ]
            results, profiles, failures = run_experiment(config, datasets)
            assert not failures
            write_outputs(results, profiles, failures, config, datasets)
            outputs.append(config.output_dir)

        same = all(
            filecmp.cmp(
                os.path.join(outputs[0], name), os.path.join(outputs[1], name), shallow=False
            )
            for name in ("report.json", "raw_results.json", "rfsvm.csv", "rf.csv")
        )
        split_files = sorted(os.listdir(os.path.join(outputs[0], "splits")))
        same &= all(
            filecmp.cmp(
                os.path.join(outputs[0], "splits", f),
                os.path.join(outputs[1], "splits", f),
                shallow=False,
            )
            for f in split_files
        )
        assert report("property-end-to-end-reproducibility", same, "(two toy runs, identical report files)")
