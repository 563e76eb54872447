"""Replay simulator and the metric stack.

Nothing here runs a real solver. A schedule is replayed against the recorded
data of a scenario: feature steps consume the recorded feature-computation
cost, solver steps consume recorded runtimes, and an instance counts as
solved once a scheduled algorithm's successful run fits inside its time
slice. On top of the per-instance outcomes sit PAR10, the misclassification
penalty, the solved fraction, and the normalized gap between the single best
solver (gap 1) and the virtual best solver (gap 0).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

from .scenario import PAR10_FACTOR, Scenario, Split, best_ok_time, sbs, vbs_cost

GAP_EPS = 1e-12


@dataclass(frozen=True)
class FeatureStep:
    """Compute one feature group, paying its recorded per-instance cost."""

    group: str


@dataclass(frozen=True)
class SolverStep:
    """Run one algorithm for at most ``budget`` seconds."""

    algorithm: str
    budget: float


@dataclass(frozen=True)
class EvaluationOutcome:
    """Result of replaying one schedule on one instance."""

    solved: bool
    time_used: float | None = None
    achieved_value: float | None = None
    solving_step: int | None = None


def validate_schedule(scenario: Scenario, schedule) -> None:
    """Raise ValueError unless the schedule is legal for the scenario."""
    groups = {g.name for g in scenario.feature_groups}
    algos = set(scenario.algorithms)
    seen_groups = set()
    n_solver = 0
    for step in schedule:
        if isinstance(step, FeatureStep):
            if step.group not in groups:
                raise ValueError(f"unknown feature group {step.group!r}")
            if step.group in seen_groups:
                raise ValueError(f"feature group {step.group!r} scheduled twice")
            seen_groups.add(step.group)
        elif isinstance(step, SolverStep):
            if step.algorithm not in algos:
                raise ValueError(f"unknown algorithm {step.algorithm!r}")
            if scenario.objective == "runtime" and not step.budget > 0:
                raise ValueError(f"solver budget must be positive, got {step.budget}")
            n_solver += 1
        else:
            raise ValueError(f"unknown step type {type(step).__name__}")
    if scenario.objective == "quality":
        if n_solver != 1 or len(schedule) != 1:
            raise ValueError("quality scenarios take exactly one solver step and nothing else")


def simulate(scenario: Scenario, instance: str, schedule) -> EvaluationOutcome:
    """Replay a schedule against the recorded runs of one instance.

    Runtime scenarios walk the steps with a running clock. A solver step
    gets a slice of min(budget, time left before the cutoff); it solves the
    instance if its recorded run was ok and fits in the slice. Runs that
    died early (memout/crash/other, faster than the slice) give their time
    back; everything else eats the whole slice. Reaching the cutoff means
    unsolved with time_used pinned at the cutoff.

    Quality scenarios return the recorded value of the single scheduled
    algorithm; feature costs never count against quality.
    """
    if instance not in scenario.instances:
        raise ValueError(f"unknown instance {instance!r}")
    validate_schedule(scenario, schedule)

    if scenario.objective == "quality":
        step = schedule[0]
        rec = scenario.runs[(instance, step.algorithm)]
        return EvaluationOutcome(
            solved=rec.status == "ok", achieved_value=rec.value, solving_step=1
        )

    cutoff = scenario.cutoff
    groups = {g.name: g for g in scenario.feature_groups}
    t = 0.0
    for ordinal, step in enumerate(schedule, start=1):
        if isinstance(step, FeatureStep):
            cost = groups[step.group].cost
            t += cost.get(instance, 0.0) if cost else 0.0
        else:
            rec = scenario.runs[(instance, step.algorithm)]
            slice_ = min(step.budget, cutoff - t)
            if rec.status == "ok" and rec.value <= slice_:
                return EvaluationOutcome(solved=True, time_used=t + rec.value, solving_step=ordinal)
            if rec.status in ("memout", "crash", "other") and rec.value < slice_:
                t += rec.value
            else:
                t += slice_
        if t >= cutoff:
            return EvaluationOutcome(solved=False, time_used=cutoff)
    return EvaluationOutcome(solved=False, time_used=cutoff)


def par10(outcome: EvaluationOutcome, cutoff: float) -> float:
    """Penalized runtime: the time used if solved, ten times the cutoff if not."""
    if outcome.time_used is None:
        raise ValueError("PAR10 is defined for runtime outcomes only")
    return outcome.time_used if outcome.solved else PAR10_FACTOR * cutoff


def mcp(outcome: EvaluationOutcome, scenario: Scenario, instance: str) -> float:
    """Misclassification penalty: extra time over the per-instance best
    algorithm, with unsolved instances contributing the cutoff (no 10x
    penalty, which would double-count the timeout)."""
    if scenario.objective != "runtime":
        raise ValueError("the misclassification penalty is defined for runtime scenarios only")
    if outcome.time_used is None:
        raise ValueError("runtime outcome required")
    capped = min(outcome.time_used, scenario.cutoff)
    return capped - best_ok_time(scenario, instance)


@dataclass(frozen=True)
class MetricScore:
    """One metric with its baseline references.

    ``gap`` places the system between the virtual best solver (0) and the
    single best solver (1); ``None`` marks a degenerate case where the two
    baselines coincide and the gap is undefined.
    """

    value: float
    sbs: float
    vbs: float
    gap: float | None


@dataclass(frozen=True)
class ScoreReport:
    """Scores of one system on one split of one scenario."""

    system: str
    scenario_id: str
    split_id: int
    objective: str
    metrics: dict[str, MetricScore]

    @property
    def undefined_gaps(self) -> tuple[str, ...]:
        return tuple(name for name, m in self.metrics.items() if m.gap is None)


def _gap(value: float, sbs_ref: float, vbs_ref: float) -> float | None:
    denom = sbs_ref - vbs_ref
    if abs(denom) < GAP_EPS:
        return None
    return (value - vbs_ref) / denom


def score_system(scenario: Scenario, split: Split, schedules, system: str = "system") -> ScoreReport:
    """Score one system's schedules on a split's test instances.

    The single best solver is picked on the split's training instances and
    replayed as a bare full-cutoff run; the virtual best solver references
    come straight from the recorded data. The solved metric enters its gap
    as an unsolved fraction and maximize-direction quality values as negated
    costs, so every gap is a ratio of minimized quantities.
    """
    test = list(split.test)
    missing = [i for i in test if i not in schedules]
    if missing:
        raise ValueError(f"missing predictions for test instances {missing[:5]!r}")
    sbs_algo = sbs(scenario, split.train)
    n = len(test)

    if scenario.objective == "runtime":
        cutoff = scenario.cutoff
        sbs_step = (SolverStep(algorithm=sbs_algo, budget=cutoff),)
        outcomes = [simulate(scenario, i, schedules[i]) for i in test]
        sbs_outcomes = [simulate(scenario, i, sbs_step) for i in test]

        def mean(xs):
            return math.fsum(xs) / n

        par10_s = mean(par10(o, cutoff) for o in outcomes)
        par10_b = mean(par10(o, cutoff) for o in sbs_outcomes)
        par10_v = mean(vbs_cost(scenario, i) for i in test)

        mcp_s = mean(mcp(o, scenario, i) for o, i in zip(outcomes, test))
        mcp_b = mean(mcp(o, scenario, i) for o, i in zip(sbs_outcomes, test))

        solved_s = mean(float(o.solved) for o in outcomes)
        solved_b = mean(float(o.solved) for o in sbs_outcomes)
        solved_v = mean(float(_any_ok(scenario, i)) for i in test)

        metrics = {
            "par10": MetricScore(par10_s, par10_b, par10_v, _gap(par10_s, par10_b, par10_v)),
            "mcp": MetricScore(mcp_s, mcp_b, 0.0, _gap(mcp_s, mcp_b, 0.0)),
            "solved": MetricScore(
                solved_s, solved_b, solved_v, _gap(1.0 - solved_s, 1.0 - solved_b, 1.0 - solved_v)
            ),
        }
    else:
        sign = -1.0 if scenario.direction == "maximize" else 1.0
        values = [simulate(scenario, i, schedules[i]).achieved_value for i in test]
        value_s = math.fsum(values) / n
        value_b = math.fsum(scenario.runs[(i, sbs_algo)].value for i in test) / n
        value_v = math.fsum(sign * vbs_cost(scenario, i) for i in test) / n
        metrics = {
            "quality": MetricScore(
                value_s, value_b, value_v, _gap(sign * value_s, sign * value_b, sign * value_v)
            )
        }
    return ScoreReport(
        system=system,
        scenario_id=scenario.id,
        split_id=split.split_id,
        objective=scenario.objective,
        metrics=metrics,
    )


def _any_ok(scenario: Scenario, instance: str) -> bool:
    return any(
        scenario.runs[(instance, a)].status == "ok"
        and scenario.runs[(instance, a)].value <= scenario.cutoff
        for a in scenario.algorithms
    )


GAP_METRICS = {"runtime": ("par10", "mcp", "solved"), "quality": ("quality",)}


def report_gap(report: ScoreReport, mode: str) -> float | None:
    """The mode's headline gap for one report.

    The 2015 rule averages the gaps of all three runtime metrics; the 2017
    rule uses the PAR10 gap alone (the quality gap on quality scenarios).
    Undefined gaps are skipped; ``None`` means nothing was defined.
    """
    names = _designated(report, mode)
    gaps = [report.metrics[m].gap for m in names if report.metrics[m].gap is not None]
    if not gaps:
        return None
    return math.fsum(gaps) / len(gaps)


def _designated(report: ScoreReport, mode: str) -> tuple[str, ...]:
    names = GAP_METRICS[report.objective]
    if mode == "oasc2017":
        names = ("par10",) if report.objective == "runtime" else ("quality",)
    return tuple(m for m in names if m in report.metrics)


def aggregate(reports, mode: str = "icon2015", use: str = "gap", weights=None) -> float:
    """Cascade of unweighted means: metrics, then splits, then scenarios.

    With ``use="value"`` the raw metric values are averaged instead of the
    gaps. ``weights`` optionally reweights scenarios (same order as their
    first appearance); splits and metrics always average unweighted.
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    per_scenario: dict[str, dict[int, list[float]]] = {}
    for rep in reports:
        if use == "gap":
            v = report_gap(rep, mode)
            if v is None:
                continue
        else:
            vals = [rep.metrics[m].value for m in _designated(rep, mode)]
            v = math.fsum(vals) / len(vals)
        per_scenario.setdefault(rep.scenario_id, {}).setdefault(rep.split_id, []).append(v)
    if not per_scenario:
        raise ValueError("every gap was undefined; nothing to aggregate")
    scenario_means = []
    for scen in per_scenario.values():
        split_means = [math.fsum(vs) / len(vs) for vs in scen.values()]
        scenario_means.append(math.fsum(split_means) / len(split_means))
    if weights is None:
        return math.fsum(scenario_means) / len(scenario_means)
    if len(weights) != len(scenario_means):
        raise ValueError("one weight per scenario required")
    total = math.fsum(weights)
    return math.fsum(w * m for w, m in zip(weights, scenario_means)) / total


# ---------------------------------------------------------------------------
# report files

REPORT_HEADER = ["system", "scenario", "split", "metric", "value"]


def write_report_csv(reports, path) -> None:
    """Comma-separated report rows in the fixed column order
    system,scenario,split,metric,value; undefined gaps land in a footer."""
    footer = []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for rep in reports:
            for name, metric in rep.metrics.items():
                writer.writerow([rep.system, rep.scenario_id, rep.split_id, name, repr(metric.value)])
                if metric.gap is not None:
                    writer.writerow(
                        [rep.system, rep.scenario_id, rep.split_id, f"gap_{name}", repr(metric.gap)]
                    )
                else:
                    footer.append((rep.system, rep.scenario_id, rep.split_id, name))
        for system, scen, split, name in footer:
            fh.write(f"# undefined_gap: {system},{scen},{split},{name}\n")


def read_report_csv(path):
    """Rows of (system, scenario, split, metric, value), footer skipped."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if raw.startswith("#") or not raw.strip():
                continue
            row = next(csv.reader([raw]))
            if lineno == 1:
                if row != REPORT_HEADER:
                    raise ValueError(f"{path}: bad report header {row!r}")
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 columns")
            rows.append((row[0], row[1], int(row[2]), row[3], float(row[4])))
    return rows


def report_to_dict(report: ScoreReport) -> dict:
    """JSON-shaped summary of one report."""
    return {
        "system": report.system,
        "scenario": report.scenario_id,
        "split": report.split_id,
        "objective": report.objective,
        "metrics": {
            name: {"value": m.value, "sbs": m.sbs, "vbs": m.vbs, "gap": m.gap}
            for name, m in report.metrics.items()
        },
        "undefined_gaps": list(report.undefined_gaps),
    }


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
