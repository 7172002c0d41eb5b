"""Command-line entry points: run, profile, report, validate-kernel."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness
from .data import hdlss_profile, load_csv
from .forest import ForestHyperparams, fit_forest
from .kernel import rf_kernel_train, validate_kernel


def _cmd_run(args) -> int:
    config = harness.ExperimentConfig.from_file(args.config)
    datasets = [
        load_csv(entry["path"], entry.get("label_column", "label"), name=entry.get("name"))
        for entry in config.datasets
    ]
    results, profiles, failures = harness.run_experiment(config, datasets)
    report = harness.write_outputs(results, profiles, failures, config, datasets)
    print(f"wrote {config.output_dir}/report.json")
    _print_score_table(report["score_table"])
    if report["friedman"]:
        fr = report["friedman"]
        ranked = sorted(fr["avg_ranks"].items(), key=lambda kv: kv[1])
        print(f"friedman chi2={fr['statistic']:.3f} p={fr['p_value']:.4f} CD={fr['cd']:.3f}")
        print("avg ranks: " + ", ".join(f"{m}={r:.2f}" for m, r in ranked))
    if failures:
        print(f"{len(failures)} absent cell(s); see raw_results.json", file=sys.stderr)
        return 1
    return 0


def _print_score_table(table: dict):
    methods = table["methods"]
    print("dataset".ljust(24) + "".join(m.rjust(12) for m in methods))
    for row_idx, ds in enumerate(table["datasets"]):
        cells = [
            f"{table['mean_accuracy'][row_idx][j]:.3f}±{table['std_accuracy'][row_idx][j]:.3f}"
            for j in range(len(methods))
        ]
        print(ds.ljust(24) + "".join(c.rjust(12) for c in cells))


def _cmd_profile(args) -> int:
    d = load_csv(args.dataset, _label_column(args))
    profile = hdlss_profile(d)
    payload = {
        "name": d.name,
        "n": d.n,
        "m": d.m,
        "classes": d.c,
        "omega": round(profile.omega, 6),
        "imbalance_ratio": round(profile.imbalance_ratio, 6),
        "band": profile.band,
    }
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_report(args) -> int:
    raw_path = os.path.join(args.results_dir, "raw_results.json")
    with open(raw_path, encoding="utf-8") as fh:
        raw = json.load(fh)
    cfg = raw["config"]
    config = harness.ExperimentConfig(
        datasets=cfg["datasets"],
        methods=cfg["methods"],
        repetitions=cfg["repetitions"],
        cv_folds=cfg["cv_folds"],
        master_seed=cfg["master_seed"],
        output_dir=args.results_dir,
        ropes=tuple(cfg["ropes"]),
        bayes_samples=cfg["bayes_samples"],
    )
    results = {}
    for item in raw["results"]:
        results[(item["dataset"], item["method"])] = harness.MethodResult(
            dataset=item["dataset"],
            method=item["method"],
            accuracies=item["accuracies"],
            micro_f1s=item["micro_f1s"],
            chosen=item["chosen"],
            wall_clock=[float("nan")] * len(item["accuracies"]),
        )

    from .data import HdlssProfile

    profiles = {
        name: HdlssProfile(omega=p["omega"], imbalance_ratio=p["imbalance_ratio"], band=p["band"])
        for name, p in raw["profiles"].items()
    }
    report = harness.assemble_report(results, profiles, config)
    out_path = os.path.join(args.results_dir, "report.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    print(f"wrote {out_path}")
    _print_score_table(report["score_table"])
    return 0


def _cmd_validate_kernel(args) -> int:
    d = load_csv(args.dataset, _label_column(args))
    hp = ForestHyperparams(n_trees=args.trees)
    model = fit_forest(d, np.arange(d.n), hp, seed=args.seed)
    kernel = rf_kernel_train(model, d, np.arange(d.n))
    report = validate_kernel(kernel, tolerance=1e-8)
    payload = {
        "dataset": d.name,
        "trees": args.trees,
        "seed": args.seed,
        "max_asymmetry": report.max_asymmetry,
        "min_eigenvalue": report.min_eigenvalue,
        "max_diagonal_deviation": report.max_diagonal_deviation,
        "is_psd": report.is_psd,
    }
    print(json.dumps(payload, indent=2))
    return 0 if report.is_psd else 1


def _label_column(args):
    try:
        return int(args.label_column)
    except ValueError:
        return args.label_column


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rfsvm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config and write a results directory")
    p_run.add_argument("config", help="JSON config file (keys mirror ExperimentConfig)")
    p_run.set_defaults(func=_cmd_run)

    p_prof = sub.add_parser("profile", help="print a dataset's HDLSS profile")
    p_prof.add_argument("dataset", help="CSV file")
    p_prof.add_argument("--label-column", default="label")
    p_prof.set_defaults(func=_cmd_profile)

    p_rep = sub.add_parser("report", help="rebuild report.json from a results directory")
    p_rep.add_argument("results_dir")
    p_rep.set_defaults(func=_cmd_report)

    p_val = sub.add_parser("validate-kernel", help="fit a forest and validate its train kernel")
    p_val.add_argument("dataset", help="CSV file")
    p_val.add_argument("--label-column", default="label")
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--trees", type=int, default=100)
    p_val.set_defaults(func=_cmd_validate_kernel)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
