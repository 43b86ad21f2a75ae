"""Model selection and evaluation: nested cross-validation, ensembling,
classification metrics, and the McNemar paired test.

Protocol
--------
Subjects are split into stratified outer folds (default 3); each outer
training set is split again into stratified inner folds (default 5). For
every hyperparameter configuration and every reservoir guess, inner models
produce training/validation accuracies; the configuration with the best
validation accuracy averaged over inner folds and guesses wins the fold
(ties go to the earliest grid position). The winner is retrained on the
full outer training set and scored on the fold's test subjects.

Two training/validation readings exist and both are reported: inner-fold
averages (``tr_inner``/``vl_inner``) and the retrained outer model's
training accuracy (``tr_retrained``). Test accuracy is pooled over subjects
across folds (each subject is tested exactly once); train/validation
figures are unweighted means over folds. Standard deviations over guesses
divide by N (population form).

Ensembling averages the raw readout score vectors of all guesses before
the argmax. With one guess it reduces exactly to the single model.

Determinism
-----------
Guess sub-seeds derive from (master seed, fold index, guess index), and
fold plans from (master seed, fold tag), so results are bit-identical
across runs and across any parallel execution order or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .data import ClassLabel, Dataset, label_to_text
from .exceptions import AuditError, StratificationError, UndefinedMetricError
from .numerics import derive_seed
from .readout import score_many, train_readout
from .reservoir import DeepEsnConfig, build_stack, run_sequence

__all__ = [
    "CLASS_ORDER",
    "GridPoint",
    "HyperGrid",
    "FoldPlan",
    "make_fold_plan",
    "PurityAudit",
    "GuessScores",
    "SummaryStats",
    "ConfigEvaluation",
    "FoldEvaluation",
    "SubjectPrediction",
    "EvaluationReport",
    "GridSearchResult",
    "evaluate_config",
    "grid_search",
    "ensemble_evaluate",
    "ClassificationMetrics",
    "metrics",
    "format_percent",
    "McNemarResult",
    "mcnemar",
    "EXACT_TEST_THRESHOLD",
]

CLASS_ORDER = (ClassLabel.CONTROL, ClassLabel.PD)

_PLAN_TAG = 0xF01D
_GUESS_TAG = 0x6E55

# below this discordant-pair total the exact binomial test is used
EXACT_TEST_THRESHOLD = 25


class GridPoint(NamedTuple):
    """One hyperparameter configuration of the search grid."""

    units: int
    input_scaling: float
    inter_layer_scaling: float
    spectral_radius: float
    ridge_lambda: float


_DEFAULT_LAMBDAS = (0.0,) + tuple(10.0 ** -e for e in range(10, -1, -1))


@dataclass(frozen=True)
class HyperGrid:
    """Cartesian hyperparameter grid with fixed depth and leak rate.

    Iteration order is the cartesian product with axes ascending and the
    rightmost axis (ridge lambda) varying fastest: (units, input scaling,
    inter-layer scaling, spectral radius, lambda). Earlier position wins
    selection ties.
    """

    units: tuple[int, ...] = (10, 20, 30, 40, 50)
    input_scalings: tuple[float, ...] = (0.1, 0.5, 1.0, 2.0)
    inter_layer_scalings: tuple[float, ...] = (0.1, 0.5, 1.0, 2.0)
    spectral_radii: tuple[float, ...] = (0.7, 0.8, 0.9, 1.0)
    ridge_lambdas: tuple[float, ...] = _DEFAULT_LAMBDAS
    num_layers: int = 10
    leak_rate: float = 0.1
    guesses: int = 10

    @classmethod
    def default_deep(cls) -> "HyperGrid":
        """The standard 10-layer grid (3840 configurations)."""
        return cls()

    @classmethod
    def default_shallow(cls) -> "HyperGrid":
        """Single-layer baseline over the same total unit range.

        With one layer no inter-layer matrices exist, so that axis
        collapses to a placeholder (960 configurations).
        """
        return cls(
            units=(100, 200, 300, 400, 500),
            inter_layer_scalings=(1.0,),
            num_layers=1,
        )

    def points(self) -> tuple[GridPoint, ...]:
        return tuple(
            GridPoint(u, s, sh, r, l)
            for u in self.units
            for s in self.input_scalings
            for sh in self.inter_layer_scalings
            for r in self.spectral_radii
            for l in self.ridge_lambdas
        )

    def __len__(self) -> int:
        return (
            len(self.units)
            * len(self.input_scalings)
            * len(self.inter_layer_scalings)
            * len(self.spectral_radii)
            * len(self.ridge_lambdas)
        )


@dataclass(frozen=True)
class FoldPlan:
    """Stratified outer/inner subject-id partitions.

    ``outer[f]`` are fold ``f``'s test subjects; ``inner[f][i]`` are the
    validation subjects of inner fold ``i`` within outer fold ``f``'s
    training set.
    """

    seed: int
    outer: tuple[tuple[str, ...], ...]
    inner: tuple[tuple[tuple[str, ...], ...], ...]

    @property
    def n_outer(self) -> int:
        return len(self.outer)

    def outer_train(self, fold: int) -> tuple[str, ...]:
        """Training subjects of ``fold``: everyone outside its test part."""
        return tuple(
            sid for g, part in enumerate(self.outer) if g != fold for sid in part
        )


def _stratified_parts(ids_by_class, k: int, rng: np.random.Generator):
    """Split each class as evenly as possible into k shuffled parts."""
    parts = [[] for _ in range(k)]
    for label in sorted(ids_by_class):
        ids = list(ids_by_class[label])
        if len(ids) < k:
            raise StratificationError(
                f"class {label_to_text(label)} has {len(ids)} subjects; "
                f"cannot fill {k} nonempty folds"
            )
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        base, extra = divmod(len(shuffled), k)
        start = 0
        for f in range(k):
            size = base + (1 if f < extra else 0)
            parts[f].extend(shuffled[start : start + size])
            start += size
    return [tuple(p) for p in parts]


def make_fold_plan(
    dataset: Dataset, seed: int, outer_folds: int = 3, inner_folds: int = 5
) -> FoldPlan:
    """Build the stratified nested fold plan for ``dataset``.

    Deterministic in ``seed``. Raises :class:`StratificationError` when a
    class cannot populate every fold at either level.
    """
    if outer_folds < 2:
        raise ValueError(f"outer_folds must be >= 2, got {outer_folds}")
    if inner_folds < 2:
        raise ValueError(f"inner_folds must be >= 2, got {inner_folds}")
    by_class: dict[ClassLabel, list[str]] = {}
    label_of = {}
    for seq in dataset:
        by_class.setdefault(seq.label, []).append(seq.subject_id)
        label_of[seq.subject_id] = seq.label
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, _PLAN_TAG, 0)))
    outer = _stratified_parts(by_class, outer_folds, rng)
    inner = []
    for f in range(outer_folds):
        train_by_class: dict[ClassLabel, list[str]] = {}
        for g, part in enumerate(outer):
            if g == f:
                continue
            for sid in part:
                train_by_class.setdefault(label_of[sid], []).append(sid)
        rng_f = np.random.Generator(np.random.PCG64(derive_seed(seed, _PLAN_TAG, f + 1)))
        inner.append(tuple(_stratified_parts(train_by_class, inner_folds, rng_f)))
    return FoldPlan(seed=seed, outer=tuple(outer), inner=tuple(inner))


@dataclass
class PurityAudit:
    """Tracks which subject ids actually flowed where during evaluation."""

    selection_train: list
    selection_val: list
    final_train: list
    test_scored: list

    @classmethod
    def empty(cls, n_folds: int) -> "PurityAudit":
        return cls(
            selection_train=[set() for _ in range(n_folds)],
            selection_val=[set() for _ in range(n_folds)],
            final_train=[set() for _ in range(n_folds)],
            test_scored=[set() for _ in range(n_folds)],
        )

    def verify(self, plan: FoldPlan, all_ids) -> None:
        """Assert structural purity; raises :class:`AuditError` on leakage."""
        all_ids = set(all_ids)
        outer_sets = [set(part) for part in plan.outer]
        if set.union(*outer_sets) != all_ids:
            raise AuditError("outer folds do not cover the dataset")
        for f, a in enumerate(outer_sets):
            for g in range(f + 1, len(outer_sets)):
                if a & outer_sets[g]:
                    raise AuditError(f"outer folds {f} and {g} overlap: {sorted(a & outer_sets[g])}")
        for f in range(plan.n_outer):
            train_set = set(plan.outer_train(f))
            inner_parts = [set(p) for p in plan.inner[f]]
            if set.union(*inner_parts) != train_set:
                raise AuditError(f"fold {f}: inner folds do not cover the outer training set")
            for i, a in enumerate(inner_parts):
                for j in range(i + 1, len(inner_parts)):
                    if a & inner_parts[j]:
                        raise AuditError(f"fold {f}: inner folds {i} and {j} overlap")
            test_set = outer_sets[f]
            for name, used in (
                ("selection training", self.selection_train[f]),
                ("selection validation", self.selection_val[f]),
                ("final training", self.final_train[f]),
            ):
                leaked = used & test_set
                if leaked:
                    raise AuditError(f"fold {f}: test subjects leaked into {name}: {sorted(leaked)}")
                outside = used - train_set
                if outside:
                    raise AuditError(
                        f"fold {f}: {name} used ids outside the outer training set: {sorted(outside)}"
                    )
            if self.test_scored[f] - test_set:
                raise AuditError(
                    f"fold {f}: scored non-test subjects as test: "
                    f"{sorted(self.test_scored[f] - test_set)}"
                )


class GuessScores(NamedTuple):
    """Accuracies of one reservoir guess (one fold or pooled)."""

    tr_inner: float
    vl_inner: float
    tr_retrained: float
    ts_accuracy: float


@dataclass(frozen=True)
class SummaryStats:
    """Mean and population std over guesses for each accuracy reading."""

    tr_inner_mean: float
    tr_inner_std: float
    vl_inner_mean: float
    vl_inner_std: float
    tr_retrained_mean: float
    tr_retrained_std: float
    ts_mean: float
    ts_std: float


@dataclass
class _FoldPointResult:
    fold: int
    point: GridPoint
    per_guess: list
    ts_correct: list
    n_test: int
    test_ids: tuple = ()
    test_truth: tuple = ()
    test_scores: np.ndarray | None = None
    train_ids: tuple = ()
    train_truth: tuple = ()
    train_scores: np.ndarray | None = None
    val_scores: np.ndarray | None = None


def _accuracy(scores: np.ndarray, truth_idx: np.ndarray) -> tuple[int, int]:
    preds = np.argmax(scores, axis=1)
    return int(np.sum(preds == truth_idx)), len(truth_idx)


def _evaluate_fold_point(
    dataset: Dataset,
    plan: FoldPlan,
    fold: int,
    point: GridPoint,
    *,
    num_layers: int,
    leak_rate: float,
    guesses: int,
    master_seed: int,
    washout: int,
    collect_scores: bool,
    audit: PurityAudit | None = None,
) -> _FoldPointResult:
    """Run every guess of one configuration through one outer fold."""
    sequences = dataset.sequences
    pos = {seq.subject_id: i for i, seq in enumerate(sequences)}
    truth_idx_all = np.array([int(seq.label) for seq in sequences])
    input_dim = sequences[0].channels.shape[0]

    outer_train = plan.outer_train(fold)
    test_ids = plan.outer[fold]
    train_idx = np.array([pos[s] for s in outer_train])
    test_idx = np.array([pos[s] for s in test_ids])
    train_truth = truth_idx_all[train_idx]
    test_truth = truth_idx_all[test_idx]
    train_labels = [sequences[i].label for i in train_idx]
    train_pos = {sid: i for i, sid in enumerate(outer_train)}

    inner_splits = []
    for inner_ids in plan.inner[fold]:
        val_set = set(inner_ids)
        fit_ids = [sid for sid in outer_train if sid not in val_set]
        inner_splits.append((fit_ids, inner_ids))
        if audit is not None:
            audit.selection_train[fold].update(fit_ids)
            audit.selection_val[fold].update(inner_ids)
    if audit is not None:
        audit.final_train[fold].update(outer_train)
        audit.test_scored[fold].update(test_ids)

    n_classes = len(CLASS_ORDER)
    result = _FoldPointResult(fold=fold, point=point, per_guess=[], ts_correct=[], n_test=len(test_ids))
    if collect_scores:
        result.test_ids = tuple(test_ids)
        result.test_truth = tuple(int(v) for v in test_truth)
        result.test_scores = np.empty((guesses, len(test_ids), n_classes))
        result.train_ids = tuple(outer_train)
        result.train_truth = tuple(int(v) for v in train_truth)
        result.train_scores = np.empty((guesses, len(outer_train), n_classes))
        result.val_scores = np.empty((guesses, len(outer_train), n_classes))

    for g in range(guesses):
        config = DeepEsnConfig(
            num_layers=num_layers,
            units_per_layer=point.units,
            leak_rates=(leak_rate,) * num_layers,
            input_scaling=point.input_scaling,
            inter_layer_scaling=point.inter_layer_scaling,
            spectral_radius=point.spectral_radius,
            input_dim=input_dim,
            master_seed=derive_seed(master_seed, _GUESS_TAG, fold, g),
        )
        stack = build_stack(config)
        features = np.stack(
            [run_sequence(stack, seq.channels, washout=washout).mean_state for seq in sequences]
        )

        tr_accs, vl_accs = [], []
        for fit_ids, val_ids in inner_splits:
            fit_idx = np.array([pos[s] for s in fit_ids])
            val_idx = np.array([pos[s] for s in val_ids])
            readout = train_readout(
                features[fit_idx],
                [sequences[i].label for i in fit_idx],
                point.ridge_lambda,
                class_order=CLASS_ORDER,
            )
            fit_scores = score_many(readout, features[fit_idx])
            correct, total = _accuracy(fit_scores, truth_idx_all[fit_idx])
            tr_accs.append(correct / total)
            val_sc = score_many(readout, features[val_idx])
            correct, total = _accuracy(val_sc, truth_idx_all[val_idx])
            vl_accs.append(correct / total)
            if collect_scores:
                for row, sid in enumerate(val_ids):
                    result.val_scores[g, train_pos[sid]] = val_sc[row]

        retrained = train_readout(
            features[train_idx], train_labels, point.ridge_lambda, class_order=CLASS_ORDER
        )
        train_sc = score_many(retrained, features[train_idx])
        tr_correct, tr_total = _accuracy(train_sc, train_truth)
        test_sc = score_many(retrained, features[test_idx])
        ts_correct, ts_total = _accuracy(test_sc, test_truth)

        result.per_guess.append(
            GuessScores(
                tr_inner=float(np.mean(tr_accs)),
                vl_inner=float(np.mean(vl_accs)),
                tr_retrained=tr_correct / tr_total,
                ts_accuracy=ts_correct / ts_total,
            )
        )
        result.ts_correct.append(ts_correct)
        if collect_scores:
            result.train_scores[g] = train_sc
            result.test_scores[g] = test_sc
    return result


def _pool_guesses(fold_results, guesses: int):
    """Per-guess overall scores: fold means for TR/VL, subject pools for TS."""
    pooled = []
    total_test = sum(r.n_test for r in fold_results)
    for g in range(guesses):
        tr_i = float(np.mean([r.per_guess[g].tr_inner for r in fold_results]))
        vl_i = float(np.mean([r.per_guess[g].vl_inner for r in fold_results]))
        tr_r = float(np.mean([r.per_guess[g].tr_retrained for r in fold_results]))
        ts = sum(r.ts_correct[g] for r in fold_results) / total_test
        pooled.append(GuessScores(tr_i, vl_i, tr_r, ts))
    return tuple(pooled)


def _summarize(per_guess) -> SummaryStats:
    arr = np.array([[g.tr_inner, g.vl_inner, g.tr_retrained, g.ts_accuracy] for g in per_guess])
    means = arr.mean(axis=0)
    stds = arr.std(axis=0)  # population form
    return SummaryStats(
        tr_inner_mean=float(means[0]),
        tr_inner_std=float(stds[0]),
        vl_inner_mean=float(means[1]),
        vl_inner_std=float(stds[1]),
        tr_retrained_mean=float(means[2]),
        tr_retrained_std=float(stds[2]),
        ts_mean=float(means[3]),
        ts_std=float(stds[3]),
    )


@dataclass(frozen=True)
class ConfigEvaluation:
    """Per-guess results of one configuration across all folds."""

    point: GridPoint
    num_layers: int
    guesses: int
    fold_scores: tuple  # tuple per fold of tuple[GuessScores]
    per_guess_overall: tuple
    summary: SummaryStats


def evaluate_config(
    dataset: Dataset,
    plan: FoldPlan,
    point: GridPoint,
    *,
    num_layers: int = 10,
    leak_rate: float = 0.1,
    guesses: int = 10,
    master_seed: int = 0,
    washout: int = 0,
    audit: PurityAudit | None = None,
) -> ConfigEvaluation:
    """Evaluate one configuration over the whole plan, one row per guess."""
    if guesses < 1:
        raise ValueError(f"guesses must be >= 1, got {guesses}")
    results = [
        _evaluate_fold_point(
            dataset,
            plan,
            fold,
            point,
            num_layers=num_layers,
            leak_rate=leak_rate,
            guesses=guesses,
            master_seed=master_seed,
            washout=washout,
            collect_scores=False,
            audit=audit,
        )
        for fold in range(plan.n_outer)
    ]
    per_guess_overall = _pool_guesses(results, guesses)
    return ConfigEvaluation(
        point=point,
        num_layers=num_layers,
        guesses=guesses,
        fold_scores=tuple(tuple(r.per_guess) for r in results),
        per_guess_overall=per_guess_overall,
        summary=_summarize(per_guess_overall),
    )


class ScoreRow(NamedTuple):
    """One line of the grid-search score table."""

    fold: int
    config_index: int
    point: GridPoint
    guess: int
    tr_inner: float
    vl_inner: float
    tr_retrained: float
    ts_accuracy: float


@dataclass(frozen=True)
class GridSearchResult:
    grid: HyperGrid
    rows: tuple
    selection_scores: tuple  # [fold][config_index] mean validation accuracy
    selected_indices: tuple
    selected_points: tuple
    audit: PurityAudit


_WORKER_STATE: dict = {}


def _init_worker(dataset, plan, points, params):
    _WORKER_STATE["dataset"] = dataset
    _WORKER_STATE["plan"] = plan
    _WORKER_STATE["points"] = points
    _WORKER_STATE["params"] = params


def _grid_task(task):
    fold, config_index = task
    result = _evaluate_fold_point(
        _WORKER_STATE["dataset"],
        _WORKER_STATE["plan"],
        fold,
        _WORKER_STATE["points"][config_index],
        collect_scores=False,
        audit=None,
        **_WORKER_STATE["params"],
    )
    return fold, config_index, result.per_guess, result.ts_correct, result.n_test


def grid_search(
    dataset: Dataset,
    plan: FoldPlan,
    grid: HyperGrid,
    *,
    master_seed: int,
    washout: int = 0,
    workers: int = 1,
) -> GridSearchResult:
    """Select the best configuration per outer fold by inner validation.

    The selection statistic is validation accuracy averaged over inner
    folds and guesses; ties resolve to the earliest grid position. Results
    are identical for any ``workers`` value.
    """
    points = grid.points()
    params = {
        "num_layers": grid.num_layers,
        "leak_rate": grid.leak_rate,
        "guesses": grid.guesses,
        "master_seed": master_seed,
        "washout": washout,
    }
    audit = PurityAudit.empty(plan.n_outer)
    tasks = [(fold, ci) for fold in range(plan.n_outer) for ci in range(len(points))]
    outcomes: dict[tuple[int, int], tuple] = {}
    if workers > 1:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(dataset, plan, points, params),
        ) as pool:
            for fold, ci, per_guess, ts_correct, n_test in pool.map(
                _grid_task, tasks, chunksize=max(1, len(tasks) // (workers * 8))
            ):
                outcomes[(fold, ci)] = (per_guess, ts_correct, n_test)
        # replay id flows once for the audit; the worker math is unaffected
        for fold in range(plan.n_outer):
            test_set = plan.outer[fold]
            audit.final_train[fold].update(plan.outer_train(fold))
            audit.test_scored[fold].update(test_set)
            for inner_ids in plan.inner[fold]:
                val_set = set(inner_ids)
                audit.selection_val[fold].update(inner_ids)
                audit.selection_train[fold].update(
                    sid for sid in plan.outer_train(fold) if sid not in val_set
                )
    else:
        for fold, ci in tasks:
            result = _evaluate_fold_point(
                dataset,
                plan,
                fold,
                points[ci],
                collect_scores=False,
                audit=audit,
                **params,
            )
            outcomes[(fold, ci)] = (result.per_guess, result.ts_correct, result.n_test)

    rows = []
    selection_scores = []
    selected_indices = []
    for fold in range(plan.n_outer):
        fold_scores = []
        for ci in range(len(points)):
            per_guess, _, _ = outcomes[(fold, ci)]
            for g, gs in enumerate(per_guess):
                rows.append(
                    ScoreRow(fold, ci, points[ci], g, gs.tr_inner, gs.vl_inner, gs.tr_retrained, gs.ts_accuracy)
                )
            fold_scores.append(float(np.mean([gs.vl_inner for gs in per_guess])))
        best = max(range(len(points)), key=lambda ci: (fold_scores[ci], -ci))
        selection_scores.append(tuple(fold_scores))
        selected_indices.append(best)
    return GridSearchResult(
        grid=grid,
        rows=tuple(rows),
        selection_scores=tuple(selection_scores),
        selected_indices=tuple(selected_indices),
        selected_points=tuple(points[i] for i in selected_indices),
        audit=audit,
    )


class SubjectPrediction(NamedTuple):
    """Ensembled test prediction for one subject."""

    subject_id: str
    truth: ClassLabel
    prediction: ClassLabel
    scores: tuple


@dataclass(frozen=True)
class FoldEvaluation:
    """Everything one fold contributes to the final report."""

    fold: int
    point: GridPoint
    per_guess: tuple
    ensemble_train_accuracy: float
    ensemble_validation_accuracy: float
    ensemble_test: "ClassificationMetrics"
    test_predictions: tuple


@dataclass(frozen=True)
class EvaluationReport:
    """Full outcome of evaluating (per-fold) configurations with ensembling."""

    master_seed: int
    num_layers: int
    leak_rate: float
    washout: int
    guesses: int
    folds: tuple
    per_guess_overall: tuple
    summary: SummaryStats
    ensemble_train_accuracy: float
    ensemble_validation_accuracy: float
    ensemble_test: "ClassificationMetrics"
    predictions: tuple


def _ensemble_predictions(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average scores over the guess axis and take the argmax."""
    mean_scores = scores.mean(axis=0)
    preds = np.argmax(mean_scores, axis=1)
    return preds, mean_scores


def ensemble_evaluate(
    dataset: Dataset,
    plan: FoldPlan,
    points,
    *,
    num_layers: int = 10,
    leak_rate: float = 0.1,
    guesses: int = 10,
    master_seed: int = 0,
    washout: int = 0,
    audit: PurityAudit | None = None,
) -> EvaluationReport:
    """Evaluate fixed configurations (one per fold, or one shared) with
    score-vector ensembling across guesses.

    ``points`` may be a single :class:`GridPoint` or one per outer fold.
    """
    if guesses < 1:
        raise ValueError(f"guesses must be >= 1, got {guesses}")
    if isinstance(points, GridPoint):
        per_fold_points = [points] * plan.n_outer
    else:
        per_fold_points = list(points)
        if len(per_fold_points) != plan.n_outer:
            raise ValueError(
                f"need one configuration per fold ({plan.n_outer}), got {len(per_fold_points)}"
            )

    folds = []
    fold_results = []
    for fold in range(plan.n_outer):
        result = _evaluate_fold_point(
            dataset,
            plan,
            fold,
            per_fold_points[fold],
            num_layers=num_layers,
            leak_rate=leak_rate,
            guesses=guesses,
            master_seed=master_seed,
            washout=washout,
            collect_scores=True,
            audit=audit,
        )
        fold_results.append(result)

        train_truth = np.array(result.train_truth)
        tr_preds, _ = _ensemble_predictions(result.train_scores)
        vl_preds, _ = _ensemble_predictions(result.val_scores)
        ts_preds, ts_scores = _ensemble_predictions(result.test_scores)

        test_predictions = tuple(
            SubjectPrediction(
                subject_id=sid,
                truth=CLASS_ORDER[result.test_truth[i]],
                prediction=CLASS_ORDER[int(ts_preds[i])],
                scores=tuple(float(v) for v in ts_scores[i]),
            )
            for i, sid in enumerate(result.test_ids)
        )
        folds.append(
            FoldEvaluation(
                fold=fold,
                point=per_fold_points[fold],
                per_guess=tuple(result.per_guess),
                ensemble_train_accuracy=float(np.mean(tr_preds == train_truth)),
                ensemble_validation_accuracy=float(np.mean(vl_preds == train_truth)),
                ensemble_test=metrics(
                    [CLASS_ORDER[int(p)] for p in ts_preds],
                    [CLASS_ORDER[t] for t in result.test_truth],
                ),
                test_predictions=test_predictions,
            )
        )

    per_guess_overall = _pool_guesses(fold_results, guesses)
    by_subject = {p.subject_id: p for fe in folds for p in fe.test_predictions}
    predictions = tuple(by_subject[sid] for sid in dataset.subject_ids())
    pooled = metrics([p.prediction for p in predictions], [p.truth for p in predictions])
    return EvaluationReport(
        master_seed=master_seed,
        num_layers=num_layers,
        leak_rate=leak_rate,
        washout=washout,
        guesses=guesses,
        folds=tuple(folds),
        per_guess_overall=per_guess_overall,
        summary=_summarize(per_guess_overall),
        ensemble_train_accuracy=float(np.mean([f.ensemble_train_accuracy for f in folds])),
        ensemble_validation_accuracy=float(
            np.mean([f.ensemble_validation_accuracy for f in folds])
        ),
        ensemble_test=pooled,
        predictions=predictions,
    )


@dataclass(frozen=True)
class ClassificationMetrics:
    """Confusion counts with exact rational accuracy readings (PD positive)."""

    true_pd: int
    false_control: int
    true_control: int
    false_pd: int

    @property
    def total(self) -> int:
        return self.true_pd + self.false_control + self.true_control + self.false_pd

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.true_pd + self.true_control, self.total)

    @property
    def sensitivity(self) -> Fraction:
        return Fraction(self.true_pd, self.true_pd + self.false_control)

    @property
    def specificity(self) -> Fraction:
        return Fraction(self.true_control, self.true_control + self.false_pd)


def format_percent(value) -> str:
    """Render a fraction in [0, 1] as a percentage with two decimals."""
    return f"{float(value) * 100:.2f}%"


def metrics(predictions, truth) -> ClassificationMetrics:
    """Exact confusion counts for PD-positive binary predictions."""
    predictions = list(predictions)
    truth = list(truth)
    if len(predictions) != len(truth):
        raise UndefinedMetricError(
            f"got {len(predictions)} predictions for {len(truth)} subjects"
        )
    if not truth:
        raise UndefinedMetricError("metrics undefined on an empty subject set")
    tp = fn = tn = fp = 0
    for p, t in zip(predictions, truth):
        if ClassLabel(t) == ClassLabel.PD:
            if ClassLabel(p) == ClassLabel.PD:
                tp += 1
            else:
                fn += 1
        else:
            if ClassLabel(p) == ClassLabel.CONTROL:
                tn += 1
            else:
                fp += 1
    if tp + fn == 0:
        raise UndefinedMetricError("sensitivity undefined: no PD subjects in truth")
    if tn + fp == 0:
        raise UndefinedMetricError("specificity undefined: no Control subjects in truth")
    return ClassificationMetrics(true_pd=tp, false_control=fn, true_control=tn, false_pd=fp)


@dataclass(frozen=True)
class McNemarResult:
    """Paired-accuracy comparison of two prediction vectors.

    ``b``: subjects the first model got right and the second wrong;
    ``c``: the reverse. ``method`` names the p-value route taken.
    """

    b: int
    c: int
    statistic: float
    p_value: float
    method: str


def mcnemar(preds_a, preds_b, truth) -> McNemarResult:
    """Two-sided McNemar test on paired predictions.

    Exact binomial when the discordant total ``b + c`` is below
    ``EXACT_TEST_THRESHOLD``; otherwise the chi-square statistic with
    continuity correction, ``(|b - c| - 1)^2 / (b + c)``, with a 1-dof
    survival p-value.
    """
    preds_a = list(preds_a)
    preds_b = list(preds_b)
    truth = list(truth)
    if not (len(preds_a) == len(preds_b) == len(truth)):
        raise UndefinedMetricError(
            f"prediction/truth lengths disagree: {len(preds_a)}, {len(preds_b)}, {len(truth)}"
        )
    if not truth:
        raise UndefinedMetricError("mcnemar undefined on an empty subject set")
    b = c = 0
    for pa, pb, t in zip(preds_a, preds_b, truth):
        a_right = pa == t
        b_right = pb == t
        if a_right and not b_right:
            b += 1
        elif b_right and not a_right:
            c += 1
    n = b + c
    if n < EXACT_TEST_THRESHOLD:
        tail = sum(math.comb(n, k) for k in range(max(b, c), n + 1))
        p = min(Fraction(1), Fraction(2 * tail, 2**n))
        return McNemarResult(
            b=b, c=c, statistic=float(min(b, c)), p_value=float(p), method="exact-binomial"
        )
    statistic = (abs(b - c) - 1) ** 2 / n
    p = math.erfc(math.sqrt(statistic / 2.0))
    return McNemarResult(
        b=b, c=c, statistic=float(statistic), p_value=float(p), method="chi-square-corrected"
    )
