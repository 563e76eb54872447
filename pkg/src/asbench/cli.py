"""Command-line entry point.

One binary, seven subcommands::

    asbench validate   --scenario DIR
    asbench baselines  --scenario DIR
    asbench train      --scenario DIR --selector KIND --out MODEL
    asbench predict    --scenario DIR --model MODEL --out PREDICTIONS
    asbench evaluate   --scenario DIR --predictions PATH --out PREFIX
    asbench compare    REPORT.csv [REPORT.csv ...] --out PREFIX
    asbench seed-study --scenario DIR --selector KIND --n-seeds N --out PREFIX

Every command is deterministic given its flags (seeds included), echoes its
resolved configuration to stderr, and writes outputs atomically. Exit codes:
0 success, 1 runtime failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

from . import evaluation, scenario_io, selectors, stats
from .evaluation import ScoreReport, aggregate, report_gap, score_system
from .scenario import Scenario, RunRecord, improvement_factor, sbs, validate, vbs_cost
from .scenario_io import ParseError, ViolationsError, generate_splits, parse_scenario
from .selectors import Hyperparameters, fit_system, load_model, predict, save_model

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2


def _echo_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print("config: " + json.dumps(resolved, sort_keys=True, default=str), file=sys.stderr)


def _atomic_write(path: Path, writer) -> None:
    """Write through a temp file plus rename so readers never see partials."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def _resolve_splits(scenario: Scenario, spec: str, seed: int):
    """Turn a --splits flag into concrete splits.

    ``file`` uses the splits stored in the bundle; ``bootstrap:N`` and
    ``holdout:N:FRACTION`` generate fresh ones from the seed.
    """
    if spec == "file":
        if not scenario.splits:
            raise ValueError("scenario bundle has no stored splits; use --splits bootstrap:N")
        return list(scenario.splits)
    parts = spec.split(":")
    if parts[0] == "bootstrap" and len(parts) == 2:
        return generate_splits(scenario, int(parts[1]), "bootstrap", seed=seed)
    if parts[0] == "holdout" and len(parts) in (2, 3):
        frac = float(parts[2]) if len(parts) == 3 else 0.33
        return generate_splits(scenario, int(parts[1]), "holdout", test_fraction=frac, seed=seed)
    raise ValueError(f"bad --splits value {spec!r}")


def _pick_split(splits, split_id: int):
    for split in splits:
        if split.split_id == split_id:
            return split
    raise ValueError(f"no split with id {split_id}; have {[s.split_id for s in splits]}")


def _anonymize_test(scenario: Scenario, test_instances) -> Scenario:
    """Blind the test rows: performance 0, status ok, like a hidden test set."""
    test = set(test_instances)
    runs = {
        pair: (RunRecord(value=0.0, status="ok") if pair[0] in test else rec)
        for pair, rec in scenario.runs.items()
    }
    from dataclasses import replace

    return replace(scenario, runs=runs)


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    scen = parse_scenario(args.scenario, check=False)
    violations = validate(scen)
    for v in violations:
        print(str(v))
    errors = [v for v in violations if v.severity == "error"]
    print(f"{scen.id}: {len(errors)} error(s), {len(violations) - len(errors)} warning(s)")
    return EXIT_OK if not errors else EXIT_INPUT


def cmd_baselines(args) -> int:
    scen = parse_scenario(args.scenario)
    sbs_algo = sbs(scen, scen.instances)
    n = len(scen.instances)
    sign = -1.0 if scen.direction == "maximize" else 1.0
    if scen.objective == "runtime":
        from .scenario import best_ok_time

        vbs_mean = math.fsum(best_ok_time(scen, i) for i in scen.instances) / n
    else:
        vbs_mean = sign * math.fsum(vbs_cost(scen, i) for i in scen.instances) / n
    if scen.objective == "runtime":
        # capped, unpenalized means: the same convention the factor uses
        sbs_mean = (
            math.fsum(
                min(scen.runs[(i, sbs_algo)].value, scen.cutoff)
                if scen.runs[(i, sbs_algo)].status == "ok"
                else scen.cutoff
                for i in scen.instances
            )
            / n
        )
    else:
        sbs_mean = math.fsum(scen.runs[(i, sbs_algo)].value for i in scen.instances) / n
    factor = improvement_factor(scen)
    doc = {
        "scenario": scen.id,
        "objective": scen.objective,
        "direction": scen.direction,
        "algorithms": len(scen.algorithms),
        "instances": len(scen.instances),
        "features": len(scen.feature_names),
        "sbs": sbs_algo,
        "sbs_mean": sbs_mean,
        "vbs_mean": vbs_mean,
        "improvement_factor": factor,
    }
    if args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for key, value in doc.items():
            if key == "improvement_factor":
                print(f"{key}: {value:.3f}")
            else:
                print(f"{key}: {value}")
    return EXIT_OK


def cmd_train(args) -> int:
    scen = parse_scenario(args.scenario)
    splits = _resolve_splits(scen, args.splits, args.seed)
    split = _pick_split(splits, args.split_id)
    hp = Hyperparameters.from_pairs(args.hp or [])
    if args.seed is not None and "seed" not in _hp_keys(args.hp):
        hp = Hyperparameters(**{**_hp_dict(hp), "seed": args.seed})
    if args.anonymize_test:
        scen = _anonymize_test(scen, split.test)
    groups = args.feature_groups.split(",") if args.feature_groups else None
    started = time.perf_counter()
    model = fit_system(scen, split.train, args.selector, hp, mode=args.mode, feature_groups=groups)
    elapsed = time.perf_counter() - started
    _atomic_write(Path(args.out), lambda tmp: save_model(model, tmp))
    print(f"trained {args.selector} on {len(split.train)} instances in {elapsed:.2f}s -> {args.out}")
    return EXIT_OK


def _hp_dict(hp: Hyperparameters) -> dict:
    return {name: getattr(hp, name) for name in Hyperparameters.__dataclass_fields__}


def _hp_keys(pairs) -> set:
    return {p.split("=", 1)[0] for p in (pairs or [])}


def cmd_predict(args) -> int:
    scen = parse_scenario(args.scenario)
    splits = _resolve_splits(scen, args.splits, args.seed)
    split = _pick_split(splits, args.split_id)
    model = load_model(args.model)
    if args.anonymize_test:
        scen = _anonymize_test(scen, split.test)
    schedules = {inst: predict(model, scen, inst) for inst in split.test}
    _atomic_write(Path(args.out), lambda tmp: scenario_io.write_predictions(schedules, scen, tmp))
    print(f"wrote schedules for {len(schedules)} test instances -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    scen = parse_scenario(args.scenario)
    splits = _resolve_splits(scen, args.splits, args.seed)
    reports: list[ScoreReport] = []
    if args.mode == "oasc2017":
        split = _pick_split(splits, args.split_id)
        schedules = scenario_io.parse_predictions(args.predictions, scen, require_cover=split.test)
        reports.append(score_system(scen, split, schedules, system=args.system))
    else:
        pred_root = Path(args.predictions)
        if not pred_root.is_dir():
            raise ValueError("icon2015 evaluation expects --predictions DIR with one file per split")
        for split in splits:
            path = pred_root / f"predictions_split{split.split_id}.csv"
            if not path.exists():
                raise ValueError(f"missing prediction file {path}")
            schedules = scenario_io.parse_predictions(path, scen, require_cover=split.test)
            reports.append(score_system(scen, split, schedules, system=args.system))
    overall = aggregate(reports, mode=args.mode)
    summary = {
        "system": args.system,
        "scenario": scen.id,
        "mode": args.mode,
        "aggregate_gap": overall,
        "reports": [evaluation.report_to_dict(r) for r in reports],
    }
    out = Path(args.out)
    _atomic_write(out.with_suffix(".csv"), lambda tmp: evaluation.write_report_csv(reports, tmp))
    if args.json:
        _atomic_write(out.with_suffix(".json"), lambda tmp: evaluation.dump_json(summary, tmp))
    print(f"{args.system} on {scen.id} [{args.mode}]: gap {overall:.6f}")
    return EXIT_OK


def build_comparison(rows, mode: str, ooc=(), alpha: float = 0.05) -> dict:
    """Merge report rows into the comparison document used by ``compare``.

    ``rows`` are (system, scenario, split, metric, value) tuples. The score
    of a system on a scenario is its designated gap (2017: PAR10 or quality
    gap; 2015: the mean of the three metric gaps), averaged over splits.
    """
    designated = {
        "icon2015": ("gap_par10", "gap_mcp", "gap_solved", "gap_quality"),
        "oasc2017": ("gap_par10", "gap_quality"),
    }[mode]
    per_cell: dict[tuple[str, str], dict[int, list[float]]] = {}
    systems: list[str] = []
    scenarios: list[str] = []
    for system, scen, split, metric, value in rows:
        if system not in systems:
            systems.append(system)
        if scen not in scenarios:
            scenarios.append(scen)
        if metric in designated:
            per_cell.setdefault((system, scen), {}).setdefault(split, []).append(value)

    def cell(system, scen):
        splits = per_cell.get((system, scen))
        if not splits:
            raise ValueError(f"no designated gap rows for {system!r} on {scen!r}")
        split_means = [math.fsum(v) / len(v) for v in splits.values()]
        return math.fsum(split_means) / len(split_means)

    matrix = [[cell(system, scen) for system in systems] for scen in scenarios]
    ranked = [s for s in systems if s not in set(ooc)]
    if not ranked:
        raise ValueError("every system is out of competition; nothing to rank")
    ranked_idx = [systems.index(s) for s in ranked]
    ranked_matrix = [[row[i] for i in ranked_idx] for row in matrix]
    mins, meta_vbs = stats.virtual_best_selector(ranked_matrix)
    avg_gap = {
        system: math.fsum(matrix[r][c] for r in range(len(scenarios))) / len(scenarios)
        for c, system in enumerate(systems)
    }
    doc = {
        "mode": mode,
        "alpha": alpha,
        "systems": systems,
        "ooc": [s for s in systems if s in set(ooc)],
        "scenarios": scenarios,
        "scores": matrix,
        "avg_gap": avg_gap,
        "meta_vbs": {"per_scenario": mins.tolist(), "mean": meta_vbs},
        "friedman_statistic": None,
        "friedman_p": None,
        "critical_distance": None,
        "cd_diagram": None,
    }
    ranks = stats.rank_table(ranked_matrix)
    doc["per_scenario_ranks"] = ranks.tolist()
    doc["avg_rank"] = {s: float(r) for s, r in zip(ranked, stats.average_ranks(ranks))}
    # the Friedman/Nemenyi machinery needs at least 2 systems, 2 scenarios,
    # and a tabulated critical value; smaller comparisons keep ranks only
    if 2 <= len(ranked) <= 20 and len(scenarios) >= 2:
        analysis = stats.compare_systems(ranked, ranked_matrix, alpha=alpha)
        doc["friedman_statistic"] = analysis.friedman_statistic
        doc["friedman_p"] = analysis.friedman_p
        doc["critical_distance"] = analysis.critical_distance
        doc["cd_diagram"] = stats.cd_diagram_data(analysis)
    return doc


def _write_comparison_csv(doc: dict, prefix: Path) -> None:
    import csv as _csv

    def write_scores(tmp):
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["scenario", *doc["systems"]])
            for scen, row in zip(doc["scenarios"], doc["scores"]):
                writer.writerow([scen, *(repr(v) for v in row)])
            writer.writerow(["__avg_gap__", *(repr(doc["avg_gap"][s]) for s in doc["systems"])])
            writer.writerow(
                ["__meta_vbs__", repr(doc["meta_vbs"]["mean"])] + [""] * (len(doc["systems"]) - 1)
            )

    def write_ranks(tmp):
        ranked = [s for s in doc["systems"] if s not in doc["ooc"]]
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["scenario", *ranked])
            for scen, row in zip(doc["scenarios"], doc["per_scenario_ranks"]):
                writer.writerow([scen, *(repr(v) for v in row)])
            writer.writerow(["__avg_rank__", *(repr(doc["avg_rank"][s]) for s in ranked)])

    _atomic_write(prefix.parent / (prefix.name + "_scores.csv"), write_scores)
    _atomic_write(prefix.parent / (prefix.name + "_ranks.csv"), write_ranks)


def cmd_compare(args) -> int:
    rows = []
    for path in args.reports:
        rows.extend(evaluation.read_report_csv(path))
    doc = build_comparison(rows, mode=args.mode, ooc=args.ooc or (), alpha=args.alpha)
    prefix = Path(args.out)
    if args.json:
        _atomic_write(prefix.with_suffix(".json"), lambda tmp: evaluation.dump_json(doc, tmp))
    else:
        _write_comparison_csv(doc, prefix)
        _atomic_write(
            prefix.parent / (prefix.name + "_cd.json"),
            lambda tmp: evaluation.dump_json(doc["cd_diagram"], tmp),
        )
    ranked = sorted(doc["avg_gap"].items(), key=lambda kv: kv[1])
    for system, gap in ranked:
        rank = doc["avg_rank"].get(system)
        rank_text = f"{rank:.1f}" if rank is not None else "N/A (ooc)"
        print(f"{system}: avg gap {gap:.3f}, avg rank {rank_text}")
    print(f"meta-VBS mean gap: {doc['meta_vbs']['mean']:.3f}")
    return EXIT_OK


def cmd_seed_study(args) -> int:
    scen = parse_scenario(args.scenario)
    splits = _resolve_splits(scen, args.splits, args.seed)
    split = _pick_split(splits, args.split_id)
    hp0 = Hyperparameters.from_pairs(args.hp or [])
    samples = []
    for offset in range(args.n_seeds):
        hp = Hyperparameters(**{**_hp_dict(hp0), "seed": args.seed + offset})
        model = fit_system(scen, split.train, args.selector, hp, mode=args.mode)
        schedules = {inst: predict(model, scen, inst) for inst in split.test}
        report = score_system(scen, split, schedules, system=args.selector)
        gap = report_gap(report, args.mode)
        if gap is None:
            raise ValueError("gap undefined on this scenario (SBS equals VBS)")
        samples.append(gap)
    query = samples[0]
    quantile = stats.ecdf(samples, query)
    points = stats.ecdf_points(samples)
    prefix = Path(args.out)

    def write_samples(tmp):
        import csv as _csv

        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["seed", "gap"])
            for offset, gap in enumerate(samples):
                writer.writerow([args.seed + offset, repr(gap)])

    def write_ecdf(tmp):
        import csv as _csv

        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["gap", "cumulative_fraction"])
            for x, f in points:
                writer.writerow([repr(x), repr(f)])

    _atomic_write(prefix.parent / (prefix.name + "_samples.csv"), write_samples)
    _atomic_write(prefix.parent / (prefix.name + "_ecdf.csv"), write_ecdf)
    summary = {
        "selector": args.selector,
        "scenario": scen.id,
        "n_seeds": args.n_seeds,
        "first_seed_gap": query,
        "quantile_of_first_seed": quantile,
    }
    _atomic_write(prefix.with_suffix(".json"), lambda tmp: evaluation.dump_json(summary, tmp))
    print(f"first seed gap {query:.6f} sits at quantile {quantile:.6f} of {args.n_seeds} seeds")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, scenario=True, split=False, hp=False):
    if scenario:
        p.add_argument("--scenario", required=True, help="scenario bundle directory")
    if split:
        p.add_argument(
            "--splits",
            default="file",
            help="'file' (bundle splits), 'bootstrap:N', or 'holdout:N[:FRACTION]'",
        )
        p.add_argument("--split-id", type=int, default=0, help="which split to use")
    if hp:
        p.add_argument("--hp", action="append", metavar="KEY=VALUE", help="hyperparameter override")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument(
        "--mode",
        choices=("icon2015", "oasc2017"),
        default="oasc2017",
        help="competition rule set",
    )
    p.add_argument("--json", action="store_true", help="machine-readable JSON output")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asbench",
        description="benchmark harness for per-instance algorithm selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario bundle against the model invariants")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("baselines", help="portfolio size, SBS/VBS means, improvement factor")
    _add_common(p)
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("train", help="fit a selector on a split's training instances")
    _add_common(p, split=True, hp=True)
    p.add_argument("--selector", required=True, choices=selectors.SELECTOR_KINDS)
    p.add_argument("--feature-groups", help="comma list restricting the feature groups used")
    p.add_argument("--anonymize-test", action="store_true", help="blind test rows before fitting")
    p.add_argument("--out", required=True, help="model artifact path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="emit schedules for a split's test instances")
    _add_common(p, split=True)
    p.add_argument("--model", required=True)
    p.add_argument("--anonymize-test", action="store_true", help="blind test rows before predicting")
    p.add_argument("--out", required=True, help="prediction file path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a prediction file against recorded data")
    _add_common(p, split=True)
    p.add_argument("--predictions", required=True, help="prediction file (2017) or directory (2015)")
    p.add_argument("--system", default="system", help="system name for the report")
    p.add_argument("--out", required=True, help="report path prefix")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="rank systems from evaluation reports")
    p.add_argument("reports", nargs="+", help="report CSV files from evaluate")
    p.add_argument("--ooc", action="append", help="system scored but excluded from ranking")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--mode", choices=("icon2015", "oasc2017"), default="oasc2017")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("seed-study", help="refit across seeds and report the score's ECDF")
    _add_common(p, split=True, hp=True)
    p.add_argument("--selector", required=True, choices=selectors.SELECTOR_KINDS)
    p.add_argument("--n-seeds", type=int, required=True)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_seed_study)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    _echo_config(args)
    try:
        return args.func(args)
    except (ParseError, ViolationsError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
