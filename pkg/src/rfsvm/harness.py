"""Experiment runner: repeated half-splits, CV grid tuning, metrics, and reports."""

from __future__ import annotations

import csv
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import data as datamod
from . import kernel as kernelmod
from . import svm as svmmod
from .data import Dataset, load_csv
from .forest import ForestHyperparams, fit_forest, predict_forest
from .stats import BayesReport, ScoreTable, bayesian_sign_test, friedman_nemenyi

__all__ = [
    "ExperimentConfig",
    "MethodResult",
    "MethodFailure",
    "accuracy",
    "micro_f1",
    "tune_and_fit",
    "predict_with",
    "run_method_on_dataset",
    "run_experiment",
    "assemble_report",
]

METHODS = ("rf", "svm_rbf", "rfsvm", "cossvm")
_METHOD_CODE = {name: k for k, name in enumerate(METHODS)}

C_GRID = tuple(10.0**i for i in range(-2, 5))
GAMMA_GRID = tuple(10.0**i for i in range(-4, 3))
RF_MAX_DEPTH_GRID = tuple(10**i for i in range(1, 11)) + (None,)
RF_MAX_FEATURES_GRID = (0.01, 0.05, 0.10, 0.20, 0.30)
RF_MIN_SAMPLES_LEAF_GRID = (1, 2, 4)
RF_MIN_SAMPLES_SPLIT_GRID = (2, 5, 10)

FP_VARIANCE_NOTE = (
    "Scores are exact functions of (config, master_seed) on a given platform; "
    "floating-point results can differ across BLAS builds and CPU architectures."
)


class MethodFailure(RuntimeError):
    """A (dataset, method) pair could not produce a result."""


def _within(value, domain, rel=1e-9) -> bool:
    for d in domain:
        if value is None or d is None:
            if value is d:
                return True
        elif math.isclose(value, d, rel_tol=rel):
            return True
    return False


@dataclass
class ExperimentConfig:
    """Everything a run needs; file keys mirror the field names."""

    datasets: list[dict]  # {"name", "path", "label_column"}
    methods: list[str]
    repetitions: int = 10
    cv_folds: int = 3
    master_seed: int = 0
    output_dir: str = "results"
    n_trees: int = 500
    svm_c_grid: tuple = C_GRID
    rbf_gamma_grid: tuple = GAMMA_GRID
    rf_max_depth_grid: tuple = RF_MAX_DEPTH_GRID
    rf_max_features_grid: tuple = RF_MAX_FEATURES_GRID
    rf_min_samples_leaf_grid: tuple = RF_MIN_SAMPLES_LEAF_GRID
    rf_min_samples_split_grid: tuple = RF_MIN_SAMPLES_SPLIT_GRID
    rf_subgrid_budget: int = 100
    ropes: tuple = (0.005, 0.01)
    bayes_samples: int = 50000

    def __post_init__(self):
        if self.repetitions < 1 or self.cv_folds < 2:
            raise ValueError("repetitions >= 1 and cv_folds >= 2 required")
        if self.n_trees < 1 or self.rf_subgrid_budget < 1:
            raise ValueError("n_trees and rf_subgrid_budget must be positive")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if not self.methods or not self.datasets:
            raise ValueError("config needs at least one method and one dataset")
        for grid, domain, label in (
            (self.svm_c_grid, C_GRID, "svm_c_grid"),
            (self.rbf_gamma_grid, GAMMA_GRID, "rbf_gamma_grid"),
            (self.rf_max_depth_grid, RF_MAX_DEPTH_GRID, "rf_max_depth_grid"),
            (self.rf_max_features_grid, RF_MAX_FEATURES_GRID, "rf_max_features_grid"),
            (self.rf_min_samples_leaf_grid, RF_MIN_SAMPLES_LEAF_GRID, "rf_min_samples_leaf_grid"),
            (self.rf_min_samples_split_grid, RF_MIN_SAMPLES_SPLIT_GRID, "rf_min_samples_split_grid"),
        ):
            if not grid:
                raise ValueError(f"{label} is empty")
            for value in grid:
                if not _within(value, domain):
                    raise ValueError(f"{label} value {value!r} outside the searched domain {domain}")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        kwargs = dict(raw)
        for key in (
            "svm_c_grid",
            "rbf_gamma_grid",
            "rf_max_depth_grid",
            "rf_max_features_grid",
            "rf_min_samples_leaf_grid",
            "rf_min_samples_split_grid",
            "ropes",
        ):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class MethodResult:
    dataset: str
    method: str
    accuracies: list[float]
    micro_f1s: list[float]
    chosen: list[dict]
    wall_clock: list[float]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self) -> float:
        # population std over the repetition scores
        return float(np.std(self.accuracies))

    @property
    def mean_micro_f1(self) -> float:
        return float(np.mean(self.micro_f1s))


def accuracy(predicted, actual) -> float:
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise ValueError("prediction/actual length mismatch")
    if predicted.size == 0:
        raise ValueError("empty prediction vector")
    return float(np.mean(predicted == actual))


def micro_f1(predicted, actual, c: int) -> float:
    """F1 from true positives / false positives / false negatives pooled over classes."""
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise ValueError("prediction/actual length mismatch")
    if predicted.size == 0:
        raise ValueError("empty prediction vector")
    tp = fp = fn = 0
    for j in range(c):
        tp += int(np.sum((predicted == j) & (actual == j)))
        fp += int(np.sum((predicted == j) & (actual != j)))
        fn += int(np.sum((predicted != j) & (actual == j)))
    if tp == 0 and fp == 0 and fn == 0:
        return 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def _seed(*parts) -> tuple:
    return tuple(int(p) for p in parts)


def _rfsvm_forest_hp(config: ExperimentConfig) -> ForestHyperparams:
    # fully grown trees with sqrt-of-m candidate features, matching the cited
    # classification defaults; only C is tuned for the kernel methods
    return ForestHyperparams(n_trees=config.n_trees, max_depth=None, max_features="sqrt")


def _rf_grid_points(config: ExperimentConfig, n_fit: int) -> list[ForestHyperparams]:
    """Deterministic stratified subsample of the full grid, then depth collapse.

    Enumeration is depth-innermost, so taking every len/budget-th point keeps
    all (max_features, leaf, split) combinations represented. Depth limits
    beyond log2(n) collapse to unlimited; duplicates after the collapse are
    dropped to skip redundant CV evaluations.
    """
    full = [
        (mf, msl, mss, depth)
        for mf in config.rf_max_features_grid
        for msl in config.rf_min_samples_leaf_grid
        for mss in config.rf_min_samples_split_grid
        for depth in config.rf_max_depth_grid
    ]
    budget = min(config.rf_subgrid_budget, len(full))
    picked = [full[(i * len(full)) // budget] for i in range(budget)]

    cutoff = math.log2(n_fit) if n_fit > 1 else 1.0
    seen = set()
    points = []
    for mf, msl, mss, depth in picked:
        if depth is not None and depth > cutoff:
            depth = None
        key = (mf, msl, mss, depth)
        if key in seen:
            continue
        seen.add(key)
        points.append(
            ForestHyperparams(
                n_trees=config.n_trees,
                max_depth=depth,
                max_features=mf,
                min_samples_leaf=msl,
                min_samples_split=mss,
            )
        )
    return points


def _validated_rf_kernel(model, d, indices) -> kernelmod.KernelMatrix:
    k = kernelmod.rf_kernel_train(model, d, indices)
    report = kernelmod.validate_kernel(k, tolerance=1e-8)
    if report.max_diagonal_deviation != 0.0 or not report.is_psd:
        raise MethodFailure(
            f"forest kernel failed validation: diag dev {report.max_diagonal_deviation}, "
            f"min eigenvalue {report.min_eigenvalue}"
        )
    return k


def _solve_all(kernel_fit, y_fit, kernel_val, c_value) -> tuple[np.ndarray, bool]:
    hp = svmmod.SvmHyperparams(c=c_value)
    model = svmmod.fit_multiclass(kernel_fit, y_fit, hp)
    converged = all(bm.converged for bm in model.binary_models)
    return svmmod.predict(model, kernel_val), converged


def _cv_precomputed(d, folds, c_grid, build_kernels, label):
    """Mean CV accuracy per C value for one kernel family; cached per fold."""
    sums = np.zeros(len(c_grid))
    ok = np.ones(len(c_grid), dtype=bool)
    for f, (fit, val) in enumerate(folds):
        k_fit, k_val = build_kernels(f, fit, val)
        y_fit = d.labels[fit]
        y_val = d.labels[val]
        for ci, c_value in enumerate(c_grid):
            pred, converged = _solve_all(k_fit, y_fit, k_val, c_value)
            if not converged:
                warnings.warn(f"{label}: SMO non-convergence at C={c_value}, fold {f}; scoring 0")
                ok[ci] = False
            sums[ci] += accuracy(pred, y_val)
    scores = sums / len(folds)
    scores[~ok] = 0.0
    return scores


def tune_and_fit(method: str, d: Dataset, train, config: ExperimentConfig, seed_parts=(0,)):
    """Exhaustive grid search scored by mean CV accuracy, then a full-train refit.

    Returns (fitted, chosen) where ``fitted`` is whatever the method's predict
    path needs and ``chosen`` records the selected grid point. Ties prefer the
    earlier grid point (smaller C first for the SVM families).
    """
    train = np.asarray(train)
    if len(train) == 0:
        raise ValueError("empty training set")
    base = _seed(*seed_parts)
    folds = datamod.kfold_indices(train, d.labels, config.cv_folds, _seed(*base, 0))

    if method == "rf":
        points = _rf_grid_points(config, len(folds[0][0]))
        scores = np.zeros(len(points))
        for f, (fit, val) in enumerate(folds):
            for gi, hp in enumerate(points):
                model = fit_forest(d, fit, hp, _seed(*base, 1, f, gi))
                scores[gi] += accuracy(predict_forest(model, d.features[val]), d.labels[val])
        best = int(np.argmax(scores))
        hp = points[best]
        model = fit_forest(d, train, hp, _seed(*base, 2))
        chosen = {
            "max_depth": hp.max_depth,
            "max_features": hp.max_features,
            "min_samples_leaf": hp.min_samples_leaf,
            "min_samples_split": hp.min_samples_split,
            "n_trees": hp.n_trees,
            "cv_accuracy": scores[best] / len(folds),
            "converged": True,
        }
        return ("rf", model), chosen

    if method == "rfsvm":
        forest_hp = _rfsvm_forest_hp(config)
        fold_forests = {}

        def build(f, fit, val):
            forest = fit_forest(d, fit, forest_hp, _seed(*base, 1, f))
            fold_forests[f] = forest
            k_fit = _validated_rf_kernel(forest, d, fit)
            k_val = kernelmod.rf_kernel_test(forest, d, val, fit)
            return k_fit, k_val

        scores = _cv_precomputed(d, folds, config.svm_c_grid, build, f"rfsvm/{d.name}")
        best = int(np.argmax(scores))
        c_value = config.svm_c_grid[best]
        forest = fit_forest(d, train, forest_hp, _seed(*base, 2))
        k_train = _validated_rf_kernel(forest, d, train)
        model = svmmod.fit_multiclass(k_train, d.labels[train], svmmod.SvmHyperparams(c=c_value))
        converged = all(bm.converged for bm in model.binary_models)
        if not converged:
            warnings.warn(f"rfsvm/{d.name}: final SMO fit did not converge at C={c_value}")
        chosen = {"c": c_value, "cv_accuracy": scores[best], "converged": converged}
        return ("rfsvm", forest, model, train), chosen

    if method == "cossvm":

        def build(f, fit, val):
            return kernelmod.cosine_kernel(d, fit, fit), kernelmod.cosine_kernel(d, val, fit)

        scores = _cv_precomputed(d, folds, config.svm_c_grid, build, f"cossvm/{d.name}")
        best = int(np.argmax(scores))
        c_value = config.svm_c_grid[best]
        k_train = kernelmod.cosine_kernel(d, train, train)
        model = svmmod.fit_multiclass(k_train, d.labels[train], svmmod.SvmHyperparams(c=c_value))
        converged = all(bm.converged for bm in model.binary_models)
        if not converged:
            warnings.warn(f"cossvm/{d.name}: final SMO fit did not converge at C={c_value}")
        chosen = {"c": c_value, "cv_accuracy": scores[best], "converged": converged}
        return ("cossvm", model, train), chosen

    if method == "svm_rbf":
        # C outer, gamma inner: ties already fall to smaller C, then smaller gamma
        grid = [(c_value, g) for c_value in config.svm_c_grid for g in config.rbf_gamma_grid]
        sums = np.zeros(len(grid))
        ok = np.ones(len(grid), dtype=bool)
        for f, (fit, val) in enumerate(folds):
            y_fit = d.labels[fit]
            y_val = d.labels[val]
            for gi_gamma, gamma in enumerate(config.rbf_gamma_grid):
                k_fit = kernelmod.rbf_kernel(d, fit, fit, gamma)
                k_val = kernelmod.rbf_kernel(d, val, fit, gamma)
                for ci, c_value in enumerate(config.svm_c_grid):
                    gi = ci * len(config.rbf_gamma_grid) + gi_gamma
                    pred, converged = _solve_all(k_fit, y_fit, k_val, c_value)
                    if not converged:
                        warnings.warn(
                            f"svm_rbf/{d.name}: SMO non-convergence at C={c_value}, gamma={gamma}; scoring 0"
                        )
                        ok[gi] = False
                    sums[gi] += accuracy(pred, y_val)
        scores = sums / len(folds)
        scores[~ok] = 0.0
        best = int(np.argmax(scores))
        c_value, gamma = grid[best]
        k_train = kernelmod.rbf_kernel(d, train, train, gamma)
        model = svmmod.fit_multiclass(k_train, d.labels[train], svmmod.SvmHyperparams(c=c_value))
        converged = all(bm.converged for bm in model.binary_models)
        if not converged:
            warnings.warn(f"svm_rbf/{d.name}: final SMO fit did not converge at C={c_value}")
        chosen = {"c": c_value, "gamma": gamma, "cv_accuracy": scores[best], "converged": converged}
        return ("svm_rbf", model, train, gamma), chosen

    raise ValueError(f"unknown method {method!r}")


def predict_with(fitted, d: Dataset, test) -> np.ndarray:
    """Test-half predictions for a fitted model returned by tune_and_fit."""
    test = np.asarray(test)
    kind = fitted[0]
    if kind == "rf":
        return predict_forest(fitted[1], d.features[test])
    if kind == "rfsvm":
        _, forest, model, train = fitted
        return svmmod.predict(model, kernelmod.rf_kernel_test(forest, d, test, train))
    if kind == "cossvm":
        _, model, train = fitted
        return svmmod.predict(model, kernelmod.cosine_kernel(d, test, train))
    if kind == "svm_rbf":
        _, model, train, gamma = fitted
        return svmmod.predict(model, kernelmod.rbf_kernel(d, test, train, gamma))
    raise ValueError(f"unknown fitted model kind {kind!r}")


def run_method_on_dataset(method: str, d: Dataset, config: ExperimentConfig, ds_index: int) -> MethodResult:
    """The per-(dataset, method) protocol: tune, refit, and score each half-split."""
    try:
        splits = datamod.random_half_splits(d, config.repetitions, _seed(config.master_seed, ds_index))
    except Exception as exc:
        raise MethodFailure(f"{method} on {d.name}: split generation failed: {exc}") from exc
    code = _METHOD_CODE[method]
    accuracies, f1s, chosen_list, clocks = [], [], [], []
    for rep, plan in enumerate(splits):
        started = time.perf_counter()
        try:
            fitted, chosen = tune_and_fit(
                method, d, plan.train_indices, config, (config.master_seed, ds_index, code, rep)
            )
            pred = predict_with(fitted, d, plan.test_indices)
        except MethodFailure:
            raise
        except Exception as exc:
            raise MethodFailure(f"{method} on {d.name}, repetition {rep}: {exc}") from exc
        actual = d.labels[plan.test_indices]
        accuracies.append(accuracy(pred, actual))
        f1s.append(micro_f1(pred, actual, d.c))
        chosen_list.append(chosen)
        clocks.append(time.perf_counter() - started)
    return MethodResult(
        dataset=d.name,
        method=method,
        accuracies=accuracies,
        micro_f1s=f1s,
        chosen=chosen_list,
        wall_clock=clocks,
    )


def _run_job(args):
    d, method, config, ds_index = args
    return run_method_on_dataset(method, d, config, ds_index)


def run_experiment(config: ExperimentConfig, datasets: list[Dataset] | None = None):
    """Run every (dataset, method) pair; returns (results, profiles, failures).

    Failed pairs are recorded as absent cells and excluded from rank-based
    reports, with a loud warning. RFSVM_WORKERS > 1 runs pairs in parallel.
    """
    if datasets is None:
        datasets = [
            load_csv(entry["path"], entry.get("label_column", "label"), name=entry.get("name"))
            for entry in config.datasets
        ]
    profiles = {d.name: datamod.hdlss_profile(d) for d in datasets}

    jobs = [
        (d, method, config, ds_index)
        for ds_index, d in enumerate(datasets)
        for method in config.methods
    ]
    workers = int(os.environ.get("RFSVM_WORKERS", "1"))
    results: dict[tuple[str, str], MethodResult] = {}
    failures: dict[tuple[str, str], str] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(job[0].name, job[1], pool.submit(_run_job, job)) for job in jobs]
            for name, method, future in futures:
                try:
                    results[(name, method)] = future.result()
                except MethodFailure as exc:
                    warnings.warn(f"ABSENT CELL: {name}/{method} failed: {exc}")
                    failures[(name, method)] = str(exc)
    else:
        for job in jobs:
            d, method = job[0], job[1]
            try:
                results[(d.name, method)] = _run_job(job)
            except MethodFailure as exc:
                warnings.warn(f"ABSENT CELL: {d.name}/{method} failed: {exc}")
                failures[(d.name, method)] = str(exc)
    return results, profiles, failures


def _score_table(results, dataset_names, methods) -> ScoreTable:
    scores = np.array(
        [[results[(ds, m)].mean_accuracy for m in methods] for ds in dataset_names]
    )
    return ScoreTable(methods=tuple(methods), datasets=tuple(dataset_names), scores=scores)


def _wins(table: ScoreTable) -> dict[str, int]:
    wins = dict.fromkeys(table.methods, 0)
    for row in table.scores:
        best = row.max()
        for j, m in enumerate(table.methods):
            if row[j] == best:
                wins[m] += 1
    return wins


def _friedman_dict(table: ScoreTable):
    if len(table.methods) < 3:
        return None
    rep = friedman_nemenyi(table)
    return {
        "avg_ranks": {m: float(r) for m, r in zip(rep.methods, rep.avg_ranks)},
        "statistic": rep.statistic,
        "p_value": rep.p_value,
        "iman_davenport": rep.iman_davenport,
        "iman_davenport_p": rep.iman_davenport_p,
        "cd": rep.cd,
        "alpha": rep.alpha,
        "groups": [list(g) for g in rep.groups],
    }


def _bayes_maps(table: ScoreTable, ropes, samples, master_seed):
    """Pairwise sign tests plus the color-map matrix (cell [a][b] = p(a > b))."""
    pairs = []
    matrices = []
    k = len(table.methods)
    for rope_idx, rope in enumerate(ropes):
        matrix = [[None] * k for _ in range(k)]
        for ai in range(k):
            for bi in range(k):
                if ai == bi:
                    continue
                rep = bayesian_sign_test(
                    table.scores[:, ai],
                    table.scores[:, bi],
                    rope=rope,
                    samples=samples,
                    seed=_seed(master_seed, 900, rope_idx, ai, bi),
                )
                matrix[ai][bi] = rep.p_a_gt_b
                pairs.append(
                    {
                        "a": table.methods[ai],
                        "b": table.methods[bi],
                        "rope": rope,
                        "p_a_gt_b": rep.p_a_gt_b,
                        "p_rope": rep.p_rope,
                        "p_b_gt_a": rep.p_b_gt_a,
                        "samples": rep.samples,
                    }
                )
        matrices.append({"rope": rope, "methods": list(table.methods), "p_a_gt_b": matrix})
    return pairs, matrices


def _section(results, dataset_names, methods, ropes, samples, master_seed):
    if len(dataset_names) < 2:
        return {
            "datasets": list(dataset_names),
            "note": "fewer than 2 datasets in this band; rank statistics skipped",
        }
    table = _score_table(results, dataset_names, methods)
    pairs, matrices = _bayes_maps(table, ropes, samples, master_seed)
    return {
        "datasets": list(dataset_names),
        "mean_accuracy": table.scores.tolist(),
        "wins": _wins(table),
        "friedman": _friedman_dict(table),
        "bayes": pairs,
        "bayes_matrices": matrices,
    }


def assemble_report(results, profiles, config: ExperimentConfig) -> dict:
    """Global score table, Friedman/Nemenyi, pairwise Bayesian maps, and band sub-reports."""
    methods = list(config.methods)
    dataset_names = [entry.get("name") or _csv_stem(entry["path"]) for entry in config.datasets]
    dataset_names = [ds for ds in dataset_names if all((ds, m) in results for m in methods)]
    missing = [
        (ds, m)
        for ds in {entry.get("name") or _csv_stem(entry["path"]) for entry in config.datasets}
        for m in methods
        if (ds, m) not in results
    ]
    if missing:
        warnings.warn(f"report excludes datasets with absent cells: {sorted(missing)}")
    if len(dataset_names) < 2 or len(methods) < 2:
        raise ValueError("report needs at least 2 datasets and 2 methods with complete results")

    table = _score_table(results, dataset_names, methods)
    std = [[results[(ds, m)].std_accuracy for m in methods] for ds in dataset_names]
    f1 = [[results[(ds, m)].mean_micro_f1 for m in methods] for ds in dataset_names]

    bands = {"very_hdlss": [], "mid_hdlss": [], "non_hdlss": []}
    for ds in dataset_names:
        bands[profiles[ds].band].append(ds)

    pairs, matrices = _bayes_maps(table, config.ropes, config.bayes_samples, config.master_seed)
    report = {
        "header": {
            "methods": methods,
            "datasets": dataset_names,
            "repetitions": config.repetitions,
            "cv_folds": config.cv_folds,
            "master_seed": config.master_seed,
            "numeric_note": FP_VARIANCE_NOTE,
        },
        "profiles": {
            ds: {
                "omega": profiles[ds].omega,
                "imbalance_ratio": profiles[ds].imbalance_ratio,
                "band": profiles[ds].band,
            }
            for ds in dataset_names
        },
        "score_table": {
            "methods": methods,
            "datasets": dataset_names,
            "mean_accuracy": table.scores.tolist(),
            "std_accuracy": std,
            "mean_micro_f1": f1,
        },
        "wins": _wins(table),
        "friedman": _friedman_dict(table),
        "bayes": pairs,
        "bayes_matrices": matrices,
        "bands": {
            band: _section(results, names, methods, config.ropes, config.bayes_samples, config.master_seed)
            for band, names in bands.items()
            if names
        },
    }
    return report


def _csv_stem(path) -> str:
    base = str(path).replace("\\", "/").rsplit("/", 1)[-1]
    return base.rsplit(".", 1)[0] if "." in base else base


def write_outputs(results, profiles, failures, config: ExperimentConfig, datasets: list[Dataset]):
    """Write result CSVs, split manifests, raw results, timings, and the report bundle.

    Wall clocks go only to timings.csv so every other output is byte-stable
    for a fixed config and master seed.
    """
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    os.makedirs(os.path.join(out, "splits"), exist_ok=True)

    for ds_index, d in enumerate(datasets):
        plans = datamod.random_half_splits(d, config.repetitions, _seed(config.master_seed, ds_index))
        manifest = {"dataset": d.name, "splits": [p.to_manifest() for p in plans]}
        with open(os.path.join(out, "splits", f"{d.name}.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)

    for method in config.methods:
        with open(os.path.join(out, f"{method}.csv"), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dataset", "repetition", "accuracy", "micro_f1", "chosen_hyperparams"])
            for d in datasets:
                res = results.get((d.name, method))
                if res is None:
                    continue
                for rep in range(config.repetitions):
                    writer.writerow(
                        [
                            d.name,
                            rep,
                            repr(res.accuracies[rep]),
                            repr(res.micro_f1s[rep]),
                            json.dumps(res.chosen[rep], sort_keys=True),
                        ]
                    )

    with open(os.path.join(out, "timings.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "method", "repetition", "seconds"])
        for (ds, method), res in sorted(results.items()):
            for rep, seconds in enumerate(res.wall_clock):
                writer.writerow([ds, method, rep, f"{seconds:.3f}"])

    raw = {
        "config": {
            "methods": list(config.methods),
            "repetitions": config.repetitions,
            "cv_folds": config.cv_folds,
            "master_seed": config.master_seed,
            "ropes": list(config.ropes),
            "bayes_samples": config.bayes_samples,
            "datasets": config.datasets,
        },
        "profiles": {
            name: {"omega": p.omega, "imbalance_ratio": p.imbalance_ratio, "band": p.band}
            for name, p in profiles.items()
        },
        "failures": {f"{ds}/{m}": msg for (ds, m), msg in failures.items()},
        "results": [
            {
                "dataset": res.dataset,
                "method": res.method,
                "accuracies": res.accuracies,
                "micro_f1s": res.micro_f1s,
                "chosen": res.chosen,
            }
            for _, res in sorted(results.items())
        ],
    }
    with open(os.path.join(out, "raw_results.json"), "w", encoding="utf-8") as fh:
        json.dump(raw, fh, indent=2, sort_keys=True)

    report = assemble_report(results, profiles, config)
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return report
