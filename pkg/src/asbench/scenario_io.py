"""Textual formats for scenarios, predictions and reports, plus split
generation and name obfuscation.

A scenario lives in a directory ("bundle") of five files:

    description.txt    key: value lines (id, objective, direction, cutoff,
                       algorithms, feature_groups)
    runs.csv           instance_id,algorithm_id,value,status
    features.csv       instance_id,<one column per feature>, "?" = missing
    feature_costs.csv  instance_id,<one column per feature group> (optional;
                       required for runtime scenarios)
    splits.csv         split_id,mode,role,instance_id

Repeated rows per (instance, algorithm) in runs.csv are treated as run
repetitions and collapsed to a single record at load time. The writer is
deterministic: identical scenarios produce byte-identical bundles.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .learners import rng_stream
from .scenario import (
    DIRECTIONS,
    OBJECTIVES,
    RUN_STATUSES,
    FeatureGroup,
    RunRecord,
    Scenario,
    Split,
    collapse_repetitions,
    validate,
)

DESCRIPTION_FILE = "description.txt"
RUNS_FILE = "runs.csv"
FEATURES_FILE = "features.csv"
COSTS_FILE = "feature_costs.csv"
SPLITS_FILE = "splits.csv"

MISSING_MARK = "?"

_ID_FORBIDDEN = set(",;:=\"\n\r")


class ParseError(ValueError):
    """A malformed or inconsistent input file, pinned to a location."""

    def __init__(self, file: str, line: int, reason: str):
        super().__init__(f"{file}:{line}: {reason}")
        self.file = file
        self.line = line
        self.reason = reason


class ViolationsError(ValueError):
    """Raised when a parsed scenario breaks model invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            "scenario violates invariants: " + "; ".join(str(v) for v in self.violations)
        )


def _fmt(x: float) -> str:
    # repr() is the shortest decimal string that round-trips the float.
    return repr(float(x))


def _check_id(token: str, file: str, line: int, what: str) -> str:
    token = token.strip()
    if not token or _ID_FORBIDDEN & set(token):
        raise ParseError(file, line, f"bad {what} id {token!r}")
    return token


def _parse_float(text: str, file: str, line: int, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(file, line, f"bad {what} {text!r}, expected a number") from None


def _read_csv(path: Path, header: list[str] | None = None):
    """Yield (line_number, row) pairs, checking the header when given."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise ParseError(path.name, 1, "file is empty, header row required") from None
        if header is not None and head != header:
            raise ParseError(path.name, 1, f"bad header {head!r}, expected {header!r}")
        yield 1, head
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            yield lineno, row


# ---------------------------------------------------------------------------
# description file


_DESC_KEYS = ("scenario_id", "objective", "direction", "cutoff", "algorithms", "feature_groups")


def _parse_description(path: Path):
    fname = path.name
    seen: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if ":" not in line:
                raise ParseError(fname, lineno, f"expected 'key: value', got {line!r}")
            key, value = line.split(":", 1)
            key = key.strip()
            if key not in _DESC_KEYS:
                raise ParseError(fname, lineno, f"unknown key {key!r}")
            if key in seen:
                raise ParseError(fname, lineno, f"duplicate key {key!r}")
            seen[key] = value.strip()

    for key in ("scenario_id", "objective", "direction", "algorithms", "feature_groups"):
        if key not in seen:
            raise ParseError(fname, 1, f"missing key {key!r}")
    objective = seen["objective"]
    if objective not in OBJECTIVES:
        raise ParseError(fname, 1, f"objective must be one of {OBJECTIVES}, got {objective!r}")
    direction = seen["direction"]
    if direction not in DIRECTIONS:
        raise ParseError(fname, 1, f"direction must be one of {DIRECTIONS}, got {direction!r}")
    cutoff = None
    if objective == "runtime":
        if "cutoff" not in seen:
            raise ParseError(fname, 1, "runtime scenario needs a cutoff")
        cutoff = _parse_float(seen["cutoff"], fname, 1, "cutoff")
    elif "cutoff" in seen:
        raise ParseError(fname, 1, "quality scenario must not carry a cutoff")

    algorithms = []
    for tok in seen["algorithms"].split(","):
        algorithms.append(_check_id(tok, fname, 1, "algorithm"))
    if len(set(algorithms)) != len(algorithms):
        raise ParseError(fname, 1, "duplicate algorithm id in portfolio")

    # groups: name=cost_column:i,j,k separated by ';'
    groups: list[tuple[str, str, tuple[int, ...]]] = []
    spec = seen["feature_groups"]
    if spec:
        for part in spec.split(";"):
            if "=" not in part or ":" not in part.split("=", 1)[1]:
                raise ParseError(fname, 1, f"bad feature group {part!r}, expected name=cost_column:indices")
            name, rest = part.split("=", 1)
            cost_col, idx_text = rest.split(":", 1)
            name = _check_id(name, fname, 1, "feature group")
            cost_col = _check_id(cost_col, fname, 1, "cost column")
            try:
                indices = tuple(int(t) for t in idx_text.split(",") if t.strip() != "")
            except ValueError:
                raise ParseError(fname, 1, f"bad index list {idx_text!r}") from None
            if not indices:
                raise ParseError(fname, 1, f"feature group {name!r} has no indices")
            groups.append((name, cost_col, indices))
        names = [g[0] for g in groups]
        if len(set(names)) != len(names):
            raise ParseError(fname, 1, "duplicate feature group name")

    return seen["scenario_id"], objective, direction, cutoff, tuple(algorithms), groups


def _write_description(scenario: Scenario, path: Path) -> None:
    lines = [
        f"scenario_id: {scenario.id}",
        f"objective: {scenario.objective}",
        f"direction: {scenario.direction}",
    ]
    if scenario.objective == "runtime":
        lines.append(f"cutoff: {_fmt(scenario.cutoff)}")
    lines.append("algorithms: " + ",".join(scenario.algorithms))
    groups = ";".join(
        f"{g.name}={g.name}:" + ",".join(str(i) for i in g.feature_indices)
        for g in scenario.feature_groups
    )
    lines.append(f"feature_groups: {groups}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# scenario bundle


def parse_scenario(path, check: bool = True) -> Scenario:
    """Load a scenario bundle from a directory.

    With ``check`` (the default) the scenario must come back clean from
    :func:`asbench.scenario.validate`; error-level violations raise
    :class:`ViolationsError`, warnings are tolerated.
    """
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"scenario directory {root} does not exist")
    for required in (DESCRIPTION_FILE, RUNS_FILE, FEATURES_FILE, SPLITS_FILE):
        if not (root / required).exists():
            raise ParseError(required, 0, "required file missing from bundle")

    scenario_id, objective, direction, cutoff, algorithms, group_specs = _parse_description(
        root / DESCRIPTION_FILE
    )

    # features.csv fixes the instance order; one row per instance.
    feature_names: tuple[str, ...] = ()
    instances: list[str] = []
    features: dict[str, tuple[float | None, ...]] = {}
    for lineno, row in _read_csv(root / FEATURES_FILE):
        if lineno == 1:
            if not row or row[0] != "instance_id":
                raise ParseError(FEATURES_FILE, 1, "first column must be instance_id")
            feature_names = tuple(row[1:])
            continue
        if len(row) != 1 + len(feature_names):
            raise ParseError(
                FEATURES_FILE, lineno, f"expected {1 + len(feature_names)} columns, got {len(row)}"
            )
        inst = _check_id(row[0], FEATURES_FILE, lineno, "instance")
        if inst in features:
            raise ParseError(FEATURES_FILE, lineno, f"duplicate instance row {inst!r}")
        vec = tuple(
            None if tok.strip() == MISSING_MARK else _parse_float(tok, FEATURES_FILE, lineno, "feature")
            for tok in row[1:]
        )
        instances.append(inst)
        features[inst] = vec
    inst_set = set(instances)
    algo_set = set(algorithms)

    reps: dict[tuple[str, str], list[RunRecord]] = {}
    for lineno, row in _read_csv(root / RUNS_FILE, ["instance_id", "algorithm_id", "value", "status"]):
        if lineno == 1:
            continue
        if len(row) != 4:
            raise ParseError(RUNS_FILE, lineno, f"expected 4 columns, got {len(row)}")
        inst, algo, value_text, status = (t.strip() for t in row)
        if inst not in inst_set:
            raise ParseError(RUNS_FILE, lineno, f"unknown instance {inst!r}")
        if algo not in algo_set:
            raise ParseError(RUNS_FILE, lineno, f"unknown algorithm {algo!r}")
        if status not in RUN_STATUSES:
            raise ParseError(RUNS_FILE, lineno, f"unknown status {status!r}")
        value = _parse_float(value_text, RUNS_FILE, lineno, "value")
        reps.setdefault((inst, algo), []).append(RunRecord(value=value, status=status))
    runs = {pair: collapse_repetitions(records) for pair, records in reps.items()}

    cost_tables: dict[str, dict[str, float]] = {}
    cost_path = root / COSTS_FILE
    if cost_path.exists():
        cost_cols: list[str] = []
        for lineno, row in _read_csv(cost_path):
            if lineno == 1:
                if not row or row[0] != "instance_id":
                    raise ParseError(COSTS_FILE, 1, "first column must be instance_id")
                cost_cols = row[1:]
                if len(set(cost_cols)) != len(cost_cols):
                    raise ParseError(COSTS_FILE, 1, "duplicate cost column")
                for col in cost_cols:
                    cost_tables[col] = {}
                continue
            if len(row) != 1 + len(cost_cols):
                raise ParseError(COSTS_FILE, lineno, f"expected {1 + len(cost_cols)} columns")
            inst = row[0].strip()
            if inst not in inst_set:
                raise ParseError(COSTS_FILE, lineno, f"unknown instance {inst!r}")
            if cost_cols and inst in cost_tables[cost_cols[0]]:
                raise ParseError(COSTS_FILE, lineno, f"duplicate instance row {inst!r}")
            for col, tok in zip(cost_cols, row[1:]):
                cost_tables[col][inst] = _parse_float(tok, COSTS_FILE, lineno, "cost")
    elif objective == "runtime":
        raise ParseError(COSTS_FILE, 0, "runtime scenario requires a feature cost table")

    # A group whose cost column is absent simply has no recorded costs;
    # validate() downgrades that to a warning for runtime scenarios.
    groups = [
        FeatureGroup(name=name, feature_indices=indices, cost=cost_tables.get(cost_col))
        for name, cost_col, indices in group_specs
    ]

    splits = _parse_splits(root / SPLITS_FILE, inst_set)

    scenario = Scenario(
        id=scenario_id,
        objective=objective,
        direction=direction,
        cutoff=cutoff,
        algorithms=algorithms,
        instances=tuple(instances),
        runs=runs,
        features=features,
        feature_names=feature_names,
        feature_groups=tuple(groups),
        splits=splits,
    )
    if check:
        problems = [v for v in validate(scenario) if v.severity == "error"]
        if problems:
            raise ViolationsError(problems)
    return scenario


def _parse_splits(path: Path, inst_set: set[str]) -> tuple[Split, ...]:
    rows: dict[int, dict[str, list[str]]] = {}
    modes: dict[int, str] = {}
    for lineno, row in _read_csv(path, ["split_id", "mode", "role", "instance_id"]):
        if lineno == 1:
            continue
        if len(row) != 4:
            raise ParseError(SPLITS_FILE, lineno, f"expected 4 columns, got {len(row)}")
        sid_text, mode, role, inst = (t.strip() for t in row)
        try:
            sid = int(sid_text)
        except ValueError:
            raise ParseError(SPLITS_FILE, lineno, f"bad split id {sid_text!r}") from None
        if mode not in ("bootstrap", "holdout", "custom"):
            raise ParseError(SPLITS_FILE, lineno, f"unknown split mode {mode!r}")
        if role not in ("train", "test"):
            raise ParseError(SPLITS_FILE, lineno, f"unknown role {role!r}")
        if inst not in inst_set:
            raise ParseError(SPLITS_FILE, lineno, f"unknown instance {inst!r}")
        if sid in modes and modes[sid] != mode:
            raise ParseError(SPLITS_FILE, lineno, f"split {sid} mixes modes")
        modes[sid] = mode
        rows.setdefault(sid, {"train": [], "test": []})[role].append(inst)
    return tuple(
        Split(
            split_id=sid,
            train=tuple(parts["train"]),
            test=tuple(parts["test"]),
            from_bootstrap=modes[sid] == "bootstrap",
        )
        for sid, parts in sorted(rows.items())
    )


def write_scenario(scenario: Scenario, path) -> None:
    """Write a scenario bundle; identical scenarios yield identical bytes.

    Rows follow the scenario's own instance and portfolio order, which the
    parser reconstructs, so write/parse round-trips preserve structure.
    """
    problems = [v for v in validate(scenario) if v.severity == "error"]
    if problems:
        raise ViolationsError(problems)
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    _write_description(scenario, root / DESCRIPTION_FILE)

    with open(root / RUNS_FILE, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["instance_id", "algorithm_id", "value", "status"])
        for inst in scenario.instances:
            for algo in scenario.algorithms:
                rec = scenario.runs[(inst, algo)]
                writer.writerow([inst, algo, _fmt(rec.value), rec.status])

    with open(root / FEATURES_FILE, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["instance_id", *scenario.feature_names])
        for inst in scenario.instances:
            vec = scenario.features[inst]
            writer.writerow([inst, *(MISSING_MARK if v is None else _fmt(v) for v in vec)])

    with_costs = [g for g in scenario.feature_groups if g.cost is not None]
    cost_file = root / COSTS_FILE
    if with_costs or scenario.objective == "runtime":
        # Runtime bundles always ship the cost table, header-only if no
        # group recorded costs.
        with open(cost_file, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["instance_id", *(g.name for g in with_costs)])
            if with_costs:
                for inst in scenario.instances:
                    writer.writerow(
                        [inst, *(_fmt(g.cost.get(inst, 0.0)) for g in with_costs)]
                    )
    elif cost_file.exists():
        cost_file.unlink()

    with open(root / SPLITS_FILE, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["split_id", "mode", "role", "instance_id"])
        order = {inst: i for i, inst in enumerate(scenario.instances)}
        for split in sorted(scenario.splits, key=lambda s: s.split_id):
            mode = "bootstrap" if split.from_bootstrap else "custom"
            for role, part in (("train", split.train), ("test", split.test)):
                for inst in sorted(part, key=order.__getitem__):
                    writer.writerow([split.split_id, mode, role, inst])


# ---------------------------------------------------------------------------
# prediction files


PREDICTIONS_HEADER = ["instance_id", "step", "kind", "name", "budget"]


def parse_predictions(path, scenario: Scenario, require_cover=None):
    """Read a prediction file into per-instance schedules.

    ``require_cover`` is an optional iterable of instance ids (typically a
    split's test set) that must all receive a schedule.
    """
    from .evaluation import FeatureStep, SolverStep, validate_schedule

    fname = Path(path).name
    inst_set = set(scenario.instances)
    algo_set = set(scenario.algorithms)
    group_set = {g.name for g in scenario.feature_groups}

    staged: dict[str, list[tuple[int, object]]] = {}
    lines: dict[str, int] = {}
    for lineno, row in _read_csv(Path(path), PREDICTIONS_HEADER):
        if lineno == 1:
            continue
        if len(row) != 5:
            raise ParseError(fname, lineno, f"expected 5 columns, got {len(row)}")
        inst, ordinal_text, kind, name, budget_text = (t.strip() for t in row)
        if inst not in inst_set:
            raise ParseError(fname, lineno, f"unknown instance {inst!r}")
        try:
            ordinal = int(ordinal_text)
        except ValueError:
            raise ParseError(fname, lineno, f"bad step ordinal {ordinal_text!r}") from None
        budget = _parse_float(budget_text, fname, lineno, "budget")
        if kind == "solver":
            if name not in algo_set:
                raise ParseError(fname, lineno, f"unknown algorithm {name!r}")
            step = SolverStep(algorithm=name, budget=budget)
        elif kind == "feature":
            if name not in group_set:
                raise ParseError(fname, lineno, f"unknown feature group {name!r}")
            step = FeatureStep(group=name)
        else:
            raise ParseError(fname, lineno, f"unknown step kind {kind!r}")
        staged.setdefault(inst, []).append((ordinal, step))
        lines[inst] = lineno

    schedules = {}
    for inst, steps in staged.items():
        steps.sort(key=lambda pair: pair[0])
        ordinals = [o for o, _ in steps]
        if ordinals != list(range(1, len(steps) + 1)):
            raise ParseError(
                fname, lines[inst], f"step ordinals for {inst!r} are not contiguous from 1: {ordinals}"
            )
        schedule = tuple(step for _, step in steps)
        try:
            validate_schedule(scenario, schedule)
        except ValueError as exc:
            raise ParseError(fname, lines[inst], f"invalid schedule for {inst!r}: {exc}") from None
        schedules[inst] = schedule

    if require_cover is not None:
        missing = [i for i in require_cover if i not in schedules]
        if missing:
            raise ParseError(fname, 0, f"no schedule for test instances {missing[:5]!r}")
    return schedules


def write_predictions(schedules, scenario: Scenario, path) -> None:
    """Write per-instance schedules as a prediction file (scenario order)."""
    from .evaluation import FeatureStep

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTIONS_HEADER)
        for inst in scenario.instances:
            if inst not in schedules:
                continue
            for ordinal, step in enumerate(schedules[inst], start=1):
                if isinstance(step, FeatureStep):
                    writer.writerow([inst, ordinal, "feature", step.group, _fmt(0.0)])
                else:
                    writer.writerow([inst, ordinal, "solver", step.algorithm, _fmt(step.budget)])


# ---------------------------------------------------------------------------
# splits


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def generate_splits(scenario: Scenario, n_splits: int, mode: str, test_fraction: float = 0.33, seed: int = 0):
    """Create train/test splits without stratification, deterministic in seed.

    Bootstrap mode draws |instances| samples with replacement; the distinct
    draws form the training set and the out-of-bag instances the test set.
    Holdout mode is a disjoint random partition with a test share of
    ``test_fraction`` (rounded half up).
    """
    if n_splits < 1:
        raise ValueError("n_splits must be at least 1")
    n = len(scenario.instances)
    splits = []
    if mode == "bootstrap":
        for s in range(n_splits):
            for attempt in range(100):
                rng = rng_stream(seed, 101, s, attempt)
                draws = rng.integers(0, n, size=n)
                chosen = set(draws.tolist())
                test = tuple(scenario.instances[i] for i in range(n) if i not in chosen)
                if test:
                    train = tuple(scenario.instances[i] for i in sorted(chosen))
                    splits.append(Split(split_id=s, train=train, test=test, from_bootstrap=True))
                    break
            else:
                raise RuntimeError(f"no out-of-bag instances after 100 attempts for split {s}")
    elif mode == "holdout":
        if not 0 < test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        n_test = min(max(_round_half_up(test_fraction * n), 1), n - 1)
        for s in range(n_splits):
            rng = rng_stream(seed, 102, s)
            perm = rng.permutation(n)
            test_idx = sorted(perm[:n_test].tolist())
            train_idx = sorted(perm[n_test:].tolist())
            splits.append(
                Split(
                    split_id=s,
                    train=tuple(scenario.instances[i] for i in train_idx),
                    test=tuple(scenario.instances[i] for i in test_idx),
                )
            )
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    return splits


# ---------------------------------------------------------------------------
# obfuscation


def obfuscate(scenario: Scenario, seed: int = 0):
    """Replace algorithm and instance ids with shuffled pseudonyms.

    Portfolio and instance positions are preserved (only the labels move),
    so every metric is unchanged. Returns the renamed scenario and a map
    from pseudonym back to the original id.
    """
    rng = rng_stream(seed, 103)
    algo_perm = rng.permutation(len(scenario.algorithms))
    inst_perm = rng.permutation(len(scenario.instances))
    algo_new = {a: f"algo_{p + 1}" for a, p in zip(scenario.algorithms, algo_perm.tolist())}
    inst_new = {i: f"inst_{p + 1}" for i, p in zip(scenario.instances, inst_perm.tolist())}

    renamed = rename_scenario(scenario, algo_new, inst_new)
    name_map = {
        "algorithms": {new: old for old, new in algo_new.items()},
        "instances": {new: old for old, new in inst_new.items()},
    }
    return renamed, name_map


def deobfuscate(scenario: Scenario, name_map) -> Scenario:
    """Invert :func:`obfuscate` using its name map."""
    return rename_scenario(scenario, name_map["algorithms"], name_map["instances"])


def rename_scenario(scenario: Scenario, algo_map, inst_map) -> Scenario:
    """Rebuild a scenario with algorithm/instance ids renamed in place."""
    return Scenario(
        id=scenario.id,
        objective=scenario.objective,
        direction=scenario.direction,
        cutoff=scenario.cutoff,
        algorithms=tuple(algo_map[a] for a in scenario.algorithms),
        instances=tuple(inst_map[i] for i in scenario.instances),
        runs={(inst_map[i], algo_map[a]): rec for (i, a), rec in scenario.runs.items()},
        features={inst_map[i]: vec for i, vec in scenario.features.items()},
        feature_names=scenario.feature_names,
        feature_groups=tuple(
            FeatureGroup(
                name=g.name,
                feature_indices=g.feature_indices,
                cost=None if g.cost is None else {inst_map[i]: c for i, c in g.cost.items()},
            )
            for g in scenario.feature_groups
        ),
        splits=tuple(
            Split(
                split_id=s.split_id,
                train=tuple(inst_map[i] for i in s.train),
                test=tuple(inst_map[i] for i in s.test),
                from_bootstrap=s.from_bootstrap,
            )
            for s in scenario.splits
        ),
    )
