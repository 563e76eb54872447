"""Trainable selection systems.

Five families are provided, all sitting on the learners module:

* ``regression``: one random-forest runtime model per algorithm, pick the
  predicted minimum.
* ``pairwise``: one binary forest per algorithm pair, pick the algorithm
  with the most "is better" votes.
* ``cluster``: k-means over the feature space, each cluster champions the
  algorithm with the lowest summed cost inside it.
* ``stacking``: per-algorithm regressors whose out-of-fold predictions feed
  a classification forest.
* ``sunny``: a per-instance schedule built from the k nearest training
  instances, slicing the cutoff proportionally to neighborhood solve counts.

Any of them can carry a static pre-solving prefix that runs before feature
computation. Fitted models are immutable, deterministic in (data, hyper-
parameters, seed), and serialize to a versioned JSON artifact.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .evaluation import FeatureStep, SolverStep, simulate
from .learners import KNN, Forest, Tree, fit_forest, fit_kmeans, rng_stream
from .scenario import Scenario, effective_cost, sbs

SELECTOR_KINDS = ("regression", "pairwise", "cluster", "stacking", "sunny")

# Fixed stream tags so sibling submodels never share a substream.
_S_REGRESSION, _S_PAIRWISE, _S_CLUSTER, _S_STACK_L1, _S_STACK_L2, _S_FOLDS = range(1, 7)

MODEL_FORMAT = "asbench-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Hyperparameters:
    """Tuning knobs shared by all selector families.

    These defaults are this library's own; pass ``key=value`` strings from
    the command line to override any of them.
    """

    k_neighbors: int = 32
    n_trees: int = 100
    min_leaf: int = 1
    features_per_split: int | None = None  # None: ceil(sqrt(n_features))
    k_clusters: int = 10
    sunny_k: int = 16
    presolve_budget_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("k_neighbors", "n_trees", "min_leaf", "k_clusters", "sunny_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ValueError("features_per_split must be positive")
        if not 0 <= self.presolve_budget_fraction < 1:
            raise ValueError("presolve_budget_fraction must lie in [0, 1)")

    @classmethod
    def from_pairs(cls, pairs) -> Hyperparameters:
        """Build from CLI-style ``key=value`` strings."""
        kwargs = {}
        for pair in pairs:
            if "=" not in pair:
                raise ValueError(f"expected key=value, got {pair!r}")
            key, value = pair.split("=", 1)
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"unknown hyperparameter {key!r}")
            kwargs[key] = float(value) if key == "presolve_budget_fraction" else int(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class Preprocess:
    """Feature pipeline fitted on training data: select the used groups'
    columns, impute per-column medians, z-standardize, drop constants."""

    columns: tuple[int, ...]
    medians: tuple[float, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]
    kept: tuple[bool, ...]

    def __call__(self, raw_vector) -> np.ndarray | None:
        """Transform one raw feature vector; None if every value is missing."""
        vals = [raw_vector[c] for c in self.columns]
        if all(v is None for v in vals) and self.columns:
            return None
        x = np.array(
            [m if v is None else float(v) for v, m in zip(vals, self.medians)], dtype=np.float64
        )
        x = (x - np.asarray(self.means)) / np.asarray(self.stds)
        return x[np.asarray(self.kept, dtype=bool)]


@dataclass(frozen=True)
class TrainingSet:
    """Preprocessed training data: one row per instance, one cost column per
    portfolio algorithm (PAR10 for runtime scenarios), plus a matching
    matrix of solved flags."""

    instances: tuple[str, ...]
    algorithms: tuple[str, ...]
    feature_groups: tuple[str, ...]
    X: np.ndarray
    costs: np.ndarray
    solved: np.ndarray
    pre: Preprocess


def build_training_set(scenario: Scenario, instances, feature_groups=None) -> TrainingSet:
    """Assemble a training set from a scenario's recorded data.

    ``feature_groups`` restricts the model to those groups (and only their
    columns are ever read afterwards); the default uses every group.
    """
    instances = tuple(instances)
    if not instances:
        raise ValueError("empty training set")
    if feature_groups is None:
        feature_groups = tuple(g.name for g in scenario.feature_groups)
    else:
        feature_groups = tuple(feature_groups)
        known = {g.name for g in scenario.feature_groups}
        unknown = [g for g in feature_groups if g not in known]
        if unknown:
            raise ValueError(f"unknown feature groups {unknown!r}")
    by_name = {g.name: g for g in scenario.feature_groups}
    columns = tuple(idx for name in feature_groups for idx in by_name[name].feature_indices)

    raw = np.full((len(instances), len(columns)), np.nan)
    for r, inst in enumerate(instances):
        vec = scenario.features[inst]
        for c, col in enumerate(columns):
            v = vec[col]
            if v is not None:
                raw[r, c] = float(v)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
        medians = np.nanmedian(raw, axis=0)
    medians = np.where(np.isnan(medians), 0.0, medians)
    filled = np.where(np.isnan(raw), medians[None, :], raw)
    means = filled.mean(axis=0) if len(columns) else np.zeros(0)
    stds = filled.std(axis=0) if len(columns) else np.zeros(0)
    kept = stds > 0
    safe_stds = np.where(kept, stds, 1.0)
    X = (filled - means[None, :]) / safe_stds[None, :]
    X = X[:, kept]

    costs = np.array(
        [[effective_cost(scenario, i, a) for a in scenario.algorithms] for i in instances]
    )

    def is_solved(inst, algo):
        rec = scenario.runs[(inst, algo)]
        if scenario.objective == "runtime":
            return rec.status == "ok" and rec.value <= scenario.cutoff
        return rec.status == "ok"

    solved = np.array([[is_solved(i, a) for a in scenario.algorithms] for i in instances])
    pre = Preprocess(
        columns=columns,
        medians=tuple(medians.tolist()),
        means=tuple(means.tolist()),
        stds=tuple(safe_stds.tolist()),
        kept=tuple(bool(k) for k in kept),
    )
    return TrainingSet(
        instances=instances,
        algorithms=scenario.algorithms,
        feature_groups=feature_groups,
        X=X,
        costs=costs,
        solved=solved,
        pre=pre,
    )


@dataclass(frozen=True)
class SelectorModel:
    """A fitted selector plus everything needed to emit schedules."""

    kind: str
    algorithms: tuple[str, ...]
    feature_groups: tuple[str, ...]
    pre: Preprocess
    sbs_algorithm: str
    payload: dict
    presolve: tuple[SolverStep, ...] = ()
    hp: Hyperparameters = field(default_factory=Hyperparameters)


def _mean_costs(train: TrainingSet) -> np.ndarray:
    return train.costs.mean(axis=0)


def fit_regression(train: TrainingSet, hp: Hyperparameters) -> SelectorModel:
    """One runtime-predicting forest per algorithm; selection is the argmin
    of the predictions, ties resolved by portfolio order."""
    forests = [
        fit_forest(train.X, train.costs[:, a], hp, (_S_REGRESSION, a))
        for a in range(len(train.algorithms))
    ]
    return _model("regression", train, hp, {"forests": forests})


def fit_pairwise(train: TrainingSet, hp: Hyperparameters) -> SelectorModel:
    """One "does the first beat the second" classifier per algorithm pair;
    selection is by vote count, ties going to the algorithm with the lower
    mean training cost, then portfolio order."""
    k = len(train.algorithms)
    if k < 2:
        raise ValueError("pairwise selection needs at least two algorithms")
    classifiers = []
    for a in range(k):
        for b in range(a + 1, k):
            labels = (train.costs[:, a] < train.costs[:, b]).astype(np.int64)
            forest = fit_forest(train.X, labels, hp, (_S_PAIRWISE, a, b), n_classes=2)
            classifiers.append((a, b, forest))
    payload = {"classifiers": classifiers, "mean_costs": _mean_costs(train)}
    return _model("pairwise", train, hp, payload)


def fit_cluster(train: TrainingSet, hp: Hyperparameters) -> SelectorModel:
    """k-means over the training features; each cluster is championed by the
    algorithm with the lowest summed cost among its members."""
    n = len(train.instances)
    k = hp.k_clusters
    if k > n:
        warnings.warn(f"only {n} training instances; reducing clusters from {k} to {n}")
        k = n
    km = fit_kmeans(train.X, k, rng_stream(hp.seed, _S_CLUSTER))
    assign = km.assign(train.X)
    mean_costs = _mean_costs(train)
    champions = []
    for c in range(km.centroids.shape[0]):
        members = assign == c
        totals = train.costs[members].sum(axis=0) if members.any() else mean_costs
        champions.append(int(np.argmin(totals)))
    payload = {"centroids": km.centroids, "champions": champions}
    return _model("cluster", train, hp, payload)


def fit_stacking(train: TrainingSet, hp: Hyperparameters) -> SelectorModel:
    """Per-algorithm regressors stacked under a classification forest.

    The combiner trains on out-of-fold level-1 predictions (5 internal
    folds) so it sees honest inputs; the level-1 models are then refit on
    the full training set.
    """
    n, k = train.costs.shape
    best_label = np.argmin(train.costs, axis=1)
    n_folds = min(5, n)
    fold_of = np.zeros(n, dtype=np.int64)
    perm = rng_stream(hp.seed, _S_FOLDS).permutation(n)
    for pos, row in enumerate(perm.tolist()):
        fold_of[row] = pos % n_folds

    level1_oof = np.zeros((n, k))
    for f in range(n_folds):
        hold = fold_of == f
        fit_rows = ~hold
        if not fit_rows.any():
            fit_rows = hold
        for a in range(k):
            forest = fit_forest(
                train.X[fit_rows], train.costs[fit_rows, a], hp, (_S_STACK_L1, f, a)
            )
            level1_oof[hold, a] = forest.predict(train.X[hold])

    combiner = fit_forest(level1_oof, best_label, hp, (_S_STACK_L2,), n_classes=k)
    forests = [
        fit_forest(train.X, train.costs[:, a], hp, (_S_STACK_L1, n_folds, a)) for a in range(k)
    ]
    return _model("stacking", train, hp, {"forests": forests, "combiner": combiner})


def fit_sunny(train: TrainingSet, hp: Hyperparameters) -> SelectorModel:
    """Store the training set for neighborhood lookups at prediction time."""
    payload = {
        "X": train.X,
        "costs": train.costs,
        "solved": train.solved,
        "mean_costs": _mean_costs(train),
    }
    return _model("sunny", train, hp, payload)


def _model(kind, train, hp, payload) -> SelectorModel:
    order = np.argsort(_mean_costs(train), kind="stable")
    return SelectorModel(
        kind=kind,
        algorithms=train.algorithms,
        feature_groups=train.feature_groups,
        pre=train.pre,
        sbs_algorithm=train.algorithms[int(order[0])],
        payload=payload,
        hp=hp,
    )


# ---------------------------------------------------------------------------
# selection and schedules


def select_algorithm(model: SelectorModel, x: np.ndarray) -> int:
    """Index of the algorithm the model picks for one transformed vector."""
    kind = model.kind
    p = model.payload
    if kind == "regression":
        preds = np.array([f.predict(x[None, :])[0] for f in p["forests"]])
        return int(np.argmin(preds))
    if kind == "pairwise":
        votes = np.zeros(len(model.algorithms))
        for a, b, forest in p["classifiers"]:
            winner = a if forest.predict(x[None, :])[0] == 1 else b
            votes[winner] += 1
        best = votes.max()
        tied = np.flatnonzero(votes == best)
        if len(tied) > 1:
            mean_costs = np.asarray(p["mean_costs"])
            tied = tied[np.argsort(mean_costs[tied], kind="stable")]
        return int(tied[0])
    if kind == "cluster":
        centroids = np.asarray(p["centroids"])
        d = ((centroids - x[None, :]) ** 2).sum(axis=1)
        return int(p["champions"][int(np.argmin(d))])
    if kind == "stacking":
        level1 = np.array([[f.predict(x[None, :])[0] for f in p["forests"]]])
        return int(p["combiner"].predict(level1)[0])
    if kind == "sunny":
        costs = _sunny_neighborhood(model, x)[1]
        return int(np.argmin(costs.mean(axis=0)))
    raise ValueError(f"unknown selector kind {kind!r}")


def _sunny_neighborhood(model: SelectorModel, x: np.ndarray):
    p = model.payload
    X = np.asarray(p["X"])
    knn = KNN(X=X, y=np.asarray(p["costs"]), k=model.hp.sunny_k)
    idx = knn.neighbors(x)
    return idx, np.asarray(p["costs"])[idx], np.asarray(p["solved"])[idx]


def _sunny_schedule(model: SelectorModel, x: np.ndarray, budget: float):
    """Slice ``budget`` proportionally to neighborhood solve counts.

    Neighborhood instances that nobody solves contribute their share to a
    backup slice for the algorithm with the best mean cost nearby; slices
    run in order of decreasing solve count, ties broken by mean cost.
    """
    _, costs, solved = _sunny_neighborhood(model, x)
    counts = solved.sum(axis=0).astype(np.float64)
    mean_costs = costs.mean(axis=0)
    unsolved = int((~solved.any(axis=1)).sum())
    backup = int(np.argmin(mean_costs))

    denom = counts.sum() + unsolved
    if denom <= 0:
        return ((backup, budget),)
    order = sorted(
        (a for a in range(len(counts)) if counts[a] > 0),
        key=lambda a: (-counts[a], mean_costs[a], a),
    )
    slices = {a: budget * counts[a] / denom for a in order}
    remainder = budget - math.fsum(slices.values())
    if backup in slices:
        # Absorbing the remainder here also soaks up float dust, keeping the
        # slice total at exactly the allocated budget.
        slices[backup] += remainder
    elif remainder > 0:
        order.append(backup)
        slices[backup] = remainder
    return tuple((a, slices[a]) for a in order)


def predict(model: SelectorModel, scenario: Scenario, instance: str):
    """Emit the schedule for one instance.

    Runtime schedules are presolve prefix, then the model's feature groups,
    then solver steps filling the cutoff left after presolving. Quality
    schedules are a single solver step. Instances with no feature values at
    all fall back to the stored single best solver, with a warning.
    """
    x = model.pre(scenario.features[instance])
    if scenario.objective == "quality":
        if x is None:
            warnings.warn(f"no features for {instance!r}; falling back to the single best solver")
            return (SolverStep(algorithm=model.sbs_algorithm, budget=0.0),)
        return (SolverStep(algorithm=model.algorithms[select_algorithm(model, x)], budget=0.0),)

    cutoff = scenario.cutoff
    prefix = tuple(model.presolve)
    remaining = cutoff - math.fsum(s.budget for s in prefix)
    if x is None:
        warnings.warn(f"no features for {instance!r}; falling back to the single best solver")
        return prefix + (SolverStep(algorithm=model.sbs_algorithm, budget=remaining),)
    steps: list = [FeatureStep(group=g) for g in model.feature_groups]
    if model.kind == "sunny":
        for a, budget in _sunny_schedule(model, x, remaining):
            steps.append(SolverStep(algorithm=model.algorithms[a], budget=budget))
    else:
        chosen = model.algorithms[select_algorithm(model, x)]
        steps.append(SolverStep(algorithm=chosen, budget=remaining))
    return prefix + tuple(steps)


# ---------------------------------------------------------------------------
# static pre-solving


def build_presolver(train_instances, scenario: Scenario, hp: Hyperparameters, max_steps: int = 1):
    """Greedy static prefix run before any feature computation.

    Each round picks the (algorithm, time) pair that solves the most
    remaining training instances per allocated second, with times drawn from
    the recorded runtimes that fit the remaining budget. Stops when nothing
    solves, the budget is gone, or ``max_steps`` rounds were taken.
    """
    if scenario.objective != "runtime" or hp.presolve_budget_fraction <= 0:
        return ()
    budget = hp.presolve_budget_fraction * scenario.cutoff
    remaining = list(train_instances)
    prefix: list[SolverStep] = []
    for _ in range(max_steps):
        if budget <= 0 or not remaining:
            break
        best = None  # (rate, time, algo_idx)
        for ai, algo in enumerate(scenario.algorithms):
            times = sorted(
                {
                    scenario.runs[(i, algo)].value
                    for i in remaining
                    if scenario.runs[(i, algo)].status == "ok"
                    and 0 < scenario.runs[(i, algo)].value <= budget
                }
            )
            if not times and any(
                scenario.runs[(i, algo)].status == "ok" and scenario.runs[(i, algo)].value == 0
                for i in remaining
            ):
                times = [budget]
            for t in times:
                solved = sum(
                    1
                    for i in remaining
                    if scenario.runs[(i, algo)].status == "ok" and scenario.runs[(i, algo)].value <= t
                )
                rate = solved / t
                if best is None or rate > best[0] or (rate == best[0] and t < best[1]):
                    best = (rate, t, ai)
        if best is None or best[0] <= 0:
            break
        _, t, ai = best
        algo = scenario.algorithms[ai]
        prefix.append(SolverStep(algorithm=algo, budget=t))
        remaining = [
            i
            for i in remaining
            if not (scenario.runs[(i, algo)].status == "ok" and scenario.runs[(i, algo)].value <= t)
        ]
        budget -= t
    return tuple(prefix)


def presolved_instances(prefix, scenario: Scenario, instances):
    """Training instances the prefix alone already solves."""
    if not prefix:
        return set()
    solved = set()
    for inst in instances:
        if simulate(scenario, inst, tuple(prefix)).solved:
            solved.add(inst)
    return solved


def fit_system(
    scenario: Scenario,
    train_instances,
    kind: str,
    hp: Hyperparameters,
    mode: str = "icon2015",
    feature_groups=None,
) -> SelectorModel:
    """Full training pipeline: build the presolver, drop the training
    instances it dispatches, then fit the requested selector family.

    2015 rules allow a single pre-solver step; 2017 rules allow a greedy
    schedule of up to three.
    """
    if kind not in SELECTOR_KINDS:
        raise ValueError(f"unknown selector kind {kind!r}; choose from {SELECTOR_KINDS}")
    train_instances = tuple(train_instances)
    prefix = build_presolver(
        train_instances, scenario, hp, max_steps=1 if mode == "icon2015" else 3
    )
    dispatched = presolved_instances(prefix, scenario, train_instances)
    kept = tuple(i for i in train_instances if i not in dispatched)
    if not kept:  # the prefix already cleans up the whole training set
        prefix = ()
        kept = train_instances
    train = build_training_set(scenario, kept, feature_groups)
    fitter = {
        "regression": fit_regression,
        "pairwise": fit_pairwise,
        "cluster": fit_cluster,
        "stacking": fit_stacking,
        "sunny": fit_sunny,
    }[kind]
    model = fitter(train, hp)
    return replace(model, presolve=prefix)


# ---------------------------------------------------------------------------
# model serialization


def _tree_to_dict(tree: Tree) -> dict:
    out = {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
    }
    if tree.value is not None:
        out["value"] = tree.value.tolist()
    if tree.dist is not None:
        out["dist"] = tree.dist.tolist()
    return out


def _tree_from_dict(d: dict) -> Tree:
    return Tree(
        feature=np.asarray(d["feature"], dtype=np.int64),
        threshold=np.asarray(d["threshold"], dtype=np.float64),
        left=np.asarray(d["left"], dtype=np.int64),
        right=np.asarray(d["right"], dtype=np.int64),
        value=np.asarray(d["value"], dtype=np.float64) if "value" in d else None,
        dist=np.asarray(d["dist"], dtype=np.float64) if "dist" in d else None,
    )


def _forest_to_dict(forest: Forest) -> dict:
    return {"n_classes": forest.n_classes, "trees": [_tree_to_dict(t) for t in forest.trees]}


def _forest_from_dict(d: dict) -> Forest:
    return Forest(trees=[_tree_from_dict(t) for t in d["trees"]], n_classes=d["n_classes"])


def _payload_to_dict(kind: str, p: dict) -> dict:
    if kind in ("regression",):
        return {"forests": [_forest_to_dict(f) for f in p["forests"]]}
    if kind == "pairwise":
        return {
            "classifiers": [[a, b, _forest_to_dict(f)] for a, b, f in p["classifiers"]],
            "mean_costs": np.asarray(p["mean_costs"]).tolist(),
        }
    if kind == "cluster":
        return {
            "centroids": np.asarray(p["centroids"]).tolist(),
            "champions": list(p["champions"]),
        }
    if kind == "stacking":
        return {
            "forests": [_forest_to_dict(f) for f in p["forests"]],
            "combiner": _forest_to_dict(p["combiner"]),
        }
    if kind == "sunny":
        return {
            "X": np.asarray(p["X"]).tolist(),
            "costs": np.asarray(p["costs"]).tolist(),
            "solved": np.asarray(p["solved"]).astype(int).tolist(),
            "mean_costs": np.asarray(p["mean_costs"]).tolist(),
        }
    raise ValueError(f"unknown selector kind {kind!r}")


def _payload_from_dict(kind: str, d: dict) -> dict:
    if kind == "regression":
        return {"forests": [_forest_from_dict(f) for f in d["forests"]]}
    if kind == "pairwise":
        return {
            "classifiers": [(a, b, _forest_from_dict(f)) for a, b, f in d["classifiers"]],
            "mean_costs": np.asarray(d["mean_costs"]),
        }
    if kind == "cluster":
        return {"centroids": np.asarray(d["centroids"]), "champions": list(d["champions"])}
    if kind == "stacking":
        return {
            "forests": [_forest_from_dict(f) for f in d["forests"]],
            "combiner": _forest_from_dict(d["combiner"]),
        }
    if kind == "sunny":
        return {
            "X": np.asarray(d["X"], dtype=np.float64),
            "costs": np.asarray(d["costs"], dtype=np.float64),
            "solved": np.asarray(d["solved"], dtype=bool),
            "mean_costs": np.asarray(d["mean_costs"]),
        }
    raise ValueError(f"unknown selector kind {kind!r}")


def save_model(model: SelectorModel, path) -> None:
    """Serialize to a versioned JSON artifact with stable bytes."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "algorithms": list(model.algorithms),
        "feature_groups": list(model.feature_groups),
        "sbs_algorithm": model.sbs_algorithm,
        "presolve": [[s.algorithm, s.budget] for s in model.presolve],
        "preprocess": {
            "columns": list(model.pre.columns),
            "medians": list(model.pre.medians),
            "means": list(model.pre.means),
            "stds": list(model.pre.stds),
            "kept": [int(k) for k in model.pre.kept],
        },
        "hyperparameters": {
            name: getattr(model.hp, name) for name in Hyperparameters.__dataclass_fields__
        },
        "payload": _payload_to_dict(model.kind, model.payload),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> SelectorModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a selector model artifact")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    pre = doc["preprocess"]
    return SelectorModel(
        kind=doc["kind"],
        algorithms=tuple(doc["algorithms"]),
        feature_groups=tuple(doc["feature_groups"]),
        pre=Preprocess(
            columns=tuple(pre["columns"]),
            medians=tuple(pre["medians"]),
            means=tuple(pre["means"]),
            stds=tuple(pre["stds"]),
            kept=tuple(bool(k) for k in pre["kept"]),
        ),
        sbs_algorithm=doc["sbs_algorithm"],
        payload=_payload_from_dict(doc["kind"], doc["payload"]),
        presolve=tuple(SolverStep(algorithm=a, budget=b) for a, b in doc["presolve"]),
        hp=Hyperparameters(**doc["hyperparameters"]),
    )
