"""In-memory model of an algorithm-selection scenario.

A scenario records, for a fixed portfolio of algorithms and a fixed set of
problem instances, the outcome of every (instance, algorithm) run, the
per-instance feature vectors, the cost of computing each feature group, and
the train/test splits used for selector evaluation. Everything downstream
(simulation, scoring, selector training) reads from this model and never
mutates it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

OBJECTIVES = ("runtime", "quality")
DIRECTIONS = ("minimize", "maximize")
RUN_STATUSES = ("ok", "timeout", "memout", "crash", "other")

# Severity order used when collapsing repeated runs: keep the worst status.
_STATUS_RANK = {s: i for i, s in enumerate(RUN_STATUSES)}

PAR10_FACTOR = 10.0


@dataclass(frozen=True)
class RunRecord:
    """Outcome of running one algorithm on one instance.

    For runtime scenarios ``value`` is seconds; any status other than ``ok``
    means the instance counts as unsolved no matter what the value says.
    For quality scenarios ``value`` is the achieved score.
    """

    value: float
    status: str = "ok"


@dataclass(frozen=True)
class FeatureGroup:
    """A set of features computed together, with a shared per-instance cost.

    ``cost`` maps instance id to seconds; ``None`` means no cost table was
    recorded (allowed for quality scenarios, where feature cost is ignored).
    """

    name: str
    feature_indices: tuple[int, ...]
    cost: dict[str, float] | None = None


@dataclass(frozen=True)
class Split:
    """One train/test partition of the instance set."""

    split_id: int
    train: tuple[str, ...]
    test: tuple[str, ...]
    from_bootstrap: bool = False


@dataclass(frozen=True)
class Scenario:
    """A complete, immutable algorithm-selection benchmark scenario.

    ``runs`` is a dense table: exactly one record per (instance, algorithm)
    pair. ``features`` maps each instance to a vector aligned with
    ``feature_names``; missing values are ``None``, never silently zero.
    """

    id: str
    objective: str
    direction: str
    cutoff: float | None
    algorithms: tuple[str, ...]
    instances: tuple[str, ...]
    runs: dict[tuple[str, str], RunRecord]
    features: dict[str, tuple[float | None, ...]]
    feature_names: tuple[str, ...]
    feature_groups: tuple[FeatureGroup, ...]
    splits: tuple[Split, ...] = ()


@dataclass(frozen=True)
class Violation:
    """One broken invariant found by :func:`validate`."""

    code: str
    entity: str
    detail: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"[{self.severity}] {self.code} ({self.entity}): {self.detail}"


def collapse_repetitions(records: list[RunRecord]) -> RunRecord:
    """Merge repeated runs of one pair: mean value, worst observed status."""
    if len(records) == 1:
        return records[0]
    value = math.fsum(r.value for r in records) / len(records)
    status = max((r.status for r in records), key=lambda s: _STATUS_RANK[s])
    return RunRecord(value=value, status=status)


def validate(scenario: Scenario) -> list[Violation]:
    """Check every model invariant; violations are returned, never raised."""
    out: list[Violation] = []
    err = lambda code, entity, detail: out.append(Violation(code, entity, detail))
    warn = lambda code, entity, detail: out.append(
        Violation(code, entity, detail, severity="warning")
    )

    if scenario.objective not in OBJECTIVES:
        err("bad_objective", scenario.id, f"objective {scenario.objective!r}")
    if scenario.direction not in DIRECTIONS:
        err("bad_direction", scenario.id, f"direction {scenario.direction!r}")
    runtime = scenario.objective == "runtime"
    if runtime and (scenario.cutoff is None or scenario.cutoff <= 0):
        err("bad_cutoff", scenario.id, f"runtime scenario needs cutoff > 0, got {scenario.cutoff}")
    if not runtime and scenario.cutoff is not None:
        err("bad_cutoff", scenario.id, "quality scenario must not carry a cutoff")

    if len(set(scenario.algorithms)) != len(scenario.algorithms):
        err("duplicate_algorithm", scenario.id, "algorithm ids are not unique")
    if len(set(scenario.instances)) != len(scenario.instances):
        err("duplicate_instance", scenario.id, "instance ids are not unique")

    inst_set = set(scenario.instances)
    algo_set = set(scenario.algorithms)

    # Dense run matrix: exactly one record per pair, nothing extra.
    for inst in scenario.instances:
        for algo in scenario.algorithms:
            rec = scenario.runs.get((inst, algo))
            if rec is None:
                err("missing_run", f"{inst}/{algo}", "no run record for pair")
                continue
            if rec.status not in RUN_STATUSES:
                err("bad_status", f"{inst}/{algo}", f"status {rec.status!r}")
            if runtime and rec.value < 0:
                err("negative_value", f"{inst}/{algo}", f"runtime {rec.value} < 0")
            if runtime and rec.status == "ok" and scenario.cutoff is not None and rec.value > scenario.cutoff:
                err(
                    "value_exceeds_cutoff",
                    f"{inst}/{algo}",
                    f"ok run took {rec.value} > cutoff {scenario.cutoff}",
                )
    for inst, algo in scenario.runs:
        if inst not in inst_set or algo not in algo_set:
            err("unknown_run", f"{inst}/{algo}", "run for unknown instance or algorithm")

    d = len(scenario.feature_names)
    for inst in scenario.instances:
        vec = scenario.features.get(inst)
        if vec is None:
            err("missing_features", inst, "no feature vector")
        elif len(vec) != d:
            err("bad_feature_length", inst, f"vector has {len(vec)} values, expected {d}")
    for inst in scenario.features:
        if inst not in inst_set:
            err("unknown_feature_row", inst, "feature vector for unknown instance")

    group_names = [g.name for g in scenario.feature_groups]
    if len(set(group_names)) != len(group_names):
        err("duplicate_group", scenario.id, "feature group names are not unique")

    # Each feature index belongs to exactly one group.
    owners: dict[int, str] = {}
    for group in scenario.feature_groups:
        for idx in group.feature_indices:
            if not 0 <= idx < d:
                err("bad_feature_index", group.name, f"index {idx} outside [0, {d})")
            elif idx in owners:
                err("feature_in_two_groups", group.name, f"index {idx} also in {owners[idx]!r}")
            else:
                owners[idx] = group.name
        if group.cost is None:
            if runtime:
                warn("missing_cost_table", group.name, "no cost table; costs treated as 0")
        else:
            for inst, cost in group.cost.items():
                if inst not in inst_set:
                    err("unknown_cost_row", group.name, f"cost for unknown instance {inst!r}")
                elif cost < 0:
                    err("negative_cost", group.name, f"cost {cost} for {inst!r}")
            for inst in scenario.instances:
                if inst not in group.cost:
                    warn("missing_cost", group.name, f"no cost for {inst!r}; treated as 0")
    for idx in range(d):
        if idx not in owners:
            err("ungrouped_feature", scenario.feature_names[idx], f"index {idx} in no group")

    seen_split_ids = set()
    for split in scenario.splits:
        sid = f"split {split.split_id}"
        if split.split_id in seen_split_ids:
            err("duplicate_split", sid, "split id repeated")
        seen_split_ids.add(split.split_id)
        for name, part in (("train", split.train), ("test", split.test)):
            unknown = [i for i in part if i not in inst_set]
            if unknown:
                err("unknown_split_instance", sid, f"{name} contains {unknown[:3]!r}")
        if not split.test:
            err("empty_test_set", sid, "test set is empty")
        overlap = set(split.train) & set(split.test)
        if overlap and not split.from_bootstrap:
            err("split_overlap", sid, f"train/test share {sorted(overlap)[:3]!r}")
    return out


def effective_cost(scenario: Scenario, instance: str, algorithm: str) -> float:
    """Cost of running one algorithm alone on one instance, as minimized.

    Runtime scenarios use the PAR10 transform: the recorded time if the run
    finished ok within the cutoff, otherwise ten times the cutoff. Quality
    scenarios return the value itself (negated for maximize direction).
    """
    rec = scenario.runs[(instance, algorithm)]
    if scenario.objective == "runtime":
        assert scenario.cutoff is not None
        if rec.status == "ok" and rec.value <= scenario.cutoff:
            return rec.value
        return PAR10_FACTOR * scenario.cutoff
    return -rec.value if scenario.direction == "maximize" else rec.value


def best_ok_time(scenario: Scenario, instance: str) -> float:
    """Fastest successful recorded runtime on an instance, cutoff if none."""
    assert scenario.objective == "runtime" and scenario.cutoff is not None
    times = [
        scenario.runs[(instance, a)].value
        for a in scenario.algorithms
        if scenario.runs[(instance, a)].status == "ok"
        and scenario.runs[(instance, a)].value <= scenario.cutoff
    ]
    return min(times) if times else scenario.cutoff


def vbs_cost(scenario: Scenario, instance: str) -> float:
    """Cost of the virtual best solver on one instance: the per-instance
    minimum effective cost, with zero overhead for feature computation."""
    if instance not in scenario.instances:
        raise ValueError(f"unknown instance {instance!r}")
    return min(effective_cost(scenario, instance, a) for a in scenario.algorithms)


def sbs(scenario: Scenario, train_instances) -> str:
    """Single best solver: the algorithm with the lowest total effective cost
    over the given training instances. Ties go to the earlier portfolio slot."""
    train = list(train_instances)
    if not train:
        raise ValueError("cannot pick a single best solver from an empty training set")
    best_algo = None
    best_total = math.inf
    for algo in scenario.algorithms:
        total = math.fsum(effective_cost(scenario, i, algo) for i in train)
        if total < best_total:
            best_total = total
            best_algo = algo
    assert best_algo is not None
    return best_algo


def improvement_factor(scenario: Scenario) -> float:
    """How many times better the virtual best solver is than the single best.

    Runtime scenarios compare mean unpenalized runtimes capped at the cutoff,
    skipping instances that no algorithm solved. Quality scenarios compare
    mean values over all instances, with the ratio oriented so that a better
    VBS yields a factor above 1 for either direction.
    """
    if scenario.objective == "runtime":
        assert scenario.cutoff is not None
        cutoff = scenario.cutoff
        kept = [
            i
            for i in scenario.instances
            if any(
                scenario.runs[(i, a)].status == "ok" and scenario.runs[(i, a)].value <= cutoff
                for a in scenario.algorithms
            )
        ]
        if not kept:
            raise ValueError("degenerate scenario: every algorithm failed on every instance")
        sbs_algo = sbs(scenario, scenario.instances)

        def capped(inst: str, algo: str) -> float:
            rec = scenario.runs[(inst, algo)]
            if rec.status == "ok":
                return min(rec.value, cutoff)
            return cutoff

        m_sbs = math.fsum(capped(i, sbs_algo) for i in kept) / len(kept)
        m_vbs = math.fsum(best_ok_time(scenario, i) for i in kept) / len(kept)
        return m_sbs / m_vbs

    sbs_algo = sbs(scenario, scenario.instances)
    n = len(scenario.instances)
    mean_sbs = math.fsum(scenario.runs[(i, sbs_algo)].value for i in scenario.instances) / n
    mean_vbs = (
        math.fsum(
            max(scenario.runs[(i, a)].value for a in scenario.algorithms)
            if scenario.direction == "maximize"
            else min(scenario.runs[(i, a)].value for a in scenario.algorithms)
            for i in scenario.instances
        )
        / n
    )
    if scenario.direction == "maximize":
        return mean_vbs / mean_sbs
    return mean_sbs / mean_vbs
