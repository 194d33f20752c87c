"""Nested cross-validation: outer evaluation folds, inner grid-search folds.

Per outer fold the hyperparameter grid is scored by mean inner-fold test
accuracy (one shared stratified inner assignment per outer fold), the winner
is refit on the whole outer-train portion, and train accuracy, outer-test
accuracy, and outer-test AUC are recorded. The negative-class augmentation
either precedes fold assignment (the protocol's published ordering, which
puts augmented twins of test rows into training folds at both levels) or is
confined to the training side of every split (leakage-safe: each inner-train
is augmented for grid scoring and the outer-train for the refit, so no fold
is ever evaluated on rows whose twins were trained on). Both modes are
reported distinctly.

Work is task-parallel over (fold x combination) with per-task seeds derived
from indices, so parallel runs are bit-identical to serial ones. Inputs to
the linear and kernel models are standardized with statistics fit on the
training side of each split; forests consume raw features (split thresholds
are order-based, so scaling cannot change them).
"""

from __future__ import annotations

import itertools
import multiprocessing
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import forest, linear_models, svm
from .dataset import (
    AUGMENT_SUBTRACT_MEAN,
    LABEL_PD,
    LabeledDataset,
    Standardizer,
    augment_matrix,
    augment_negatives,
    standardize_matrix,
    stratified_kfold,
)
from .errors import SingleClass
from .metrics import accuracy, auc_score

CLASSIFIERS = ("LR", "RF", "SVM")

PAPER_ORDER = "paper-order"
LEAKAGE_SAFE = "leakage-safe"
LEAKAGE_MODES = (PAPER_ORDER, LEAKAGE_SAFE)


@dataclass(frozen=True)
class HyperGrid:
    """Ordered hyperparameter axes for one classifier family."""

    classifier: str
    axes: dict[str, tuple]

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"classifier must be one of {CLASSIFIERS}")
        if not self.axes or any(len(v) == 0 for v in self.axes.values()):
            raise ValueError("every axis needs at least one value")


def default_grid(classifier: str) -> HyperGrid:
    """The stock search spaces (RF depth 2-10 expands to the integer range)."""
    if classifier == "LR":
        scan = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
        return HyperGrid("LR", {"reg": scan, "tol": scan})
    if classifier == "RF":
        return HyperGrid(
            "RF",
            {"n_estimators": (5, 10, 15, 20, 25), "max_depth": tuple(range(2, 11))},
        )
    if classifier == "SVM":
        return HyperGrid(
            "SVM",
            {
                "kernel": ("linear", "rbf", "poly"),
                "C": (0.1, 1.0, 10.0, 100.0, 1000.0),
                "gamma": (10.0, 1.0, 1e-1, 1e-2, 1e-3, 1e-4),
            },
        )
    raise ValueError(f"unknown classifier {classifier!r}")


def enumerate_combinations(grid: HyperGrid) -> list[dict]:
    """Cartesian product in axis order, later axes varying fastest.

    The gamma axis does not apply to the linear kernel, so combinations that
    differ only in gamma collapse to one (keeping first-seen order).
    """
    names = list(grid.axes)
    combos: list[dict] = []
    seen: set[tuple] = set()
    for values in itertools.product(*grid.axes.values()):
        combo = dict(zip(names, values))
        if grid.classifier == "SVM" and combo.get("kernel") == "linear":
            combo.pop("gamma", None)
        key = tuple(sorted(combo.items()))
        if key not in seen:
            seen.add(key)
            combos.append(combo)
    return combos


def derive_seed(*parts: int) -> int:
    """Stable child seed from index parts; independent of execution order."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def train_model(classifier: str, params: Mapping, X, y, seed: int):
    if classifier == "LR":
        return linear_models.fit_logistic(X, y, reg=params["reg"], tol=params["tol"])
    if classifier == "RF":
        return forest.fit_forest(
            X,
            y,
            n_estimators=params["n_estimators"],
            max_depth=params["max_depth"],
            seed=seed,
        )
    if classifier == "SVM":
        spec = svm.KernelSpec(
            kind=params["kernel"],
            gamma=params.get("gamma"),
        )
        return svm.fit_svm(X, y, C=params["C"], kernel=spec)
    raise ValueError(f"unknown classifier {classifier!r}")


def model_outputs(classifier: str, model, X) -> tuple[np.ndarray, np.ndarray]:
    """(labels, ranking scores) on the rows of X."""
    if classifier == "LR":
        return linear_models.predict(model, X), linear_models.predict_proba(model, X)
    if classifier == "RF":
        return forest.predict_forest(model, X), forest.predict_vote_fraction(model, X)
    if classifier == "SVM":
        return svm.predict(model, X), svm.decision_function(model, X)
    raise ValueError(f"unknown classifier {classifier!r}")


_STANDARDIZED = {"LR": True, "RF": False, "SVM": True}


def _fit_eval(classifier, params, X_tr, y_tr, X_ev, seed):
    """Train on (X_tr, y_tr) and return (labels, scores) on X_ev."""
    if _STANDARDIZED[classifier]:
        std = Standardizer(mean=X_tr.mean(axis=0), stddev=X_tr.std(axis=0, ddof=0))
        X_tr = standardize_matrix(std, X_tr)
        X_ev = standardize_matrix(std, X_ev)
    model = train_model(classifier, params, X_tr, y_tr, seed)
    return model_outputs(classifier, model, X_ev)


@dataclass(frozen=True)
class _FoldPayload:
    """Everything one outer fold's tasks need, picklable for worker shipping.

    augment_mode None means the train arrays are already final (the pooled
    ordering); a mode string means every training portion is augmented right
    before fitting, which keeps evaluation rows twin-free.
    """

    fold: int
    fold_seed: int
    train_X: np.ndarray
    train_y: np.ndarray
    test_X: np.ndarray
    test_y: np.ndarray
    inner_splits: tuple[tuple[np.ndarray, np.ndarray], ...]
    augment_mode: str | None = None


def _training_arrays(payload: _FoldPayload, rows=None):
    X = payload.train_X if rows is None else payload.train_X[rows]
    y = payload.train_y if rows is None else payload.train_y[rows]
    if payload.augment_mode is not None:
        X, y, _ = augment_matrix(X, y, payload.augment_mode)
    return X, y


def _combo_inner_accuracy(payload: _FoldPayload, classifier, combos, combo_idx) -> float:
    params = combos[combo_idx]
    accs = []
    for inner_idx, (tr, te) in enumerate(payload.inner_splits):
        seed = derive_seed(payload.fold_seed, 1, combo_idx, inner_idx)
        X_tr, y_tr = _training_arrays(payload, tr)
        labels, _ = _fit_eval(
            classifier,
            params,
            X_tr,
            y_tr,
            payload.train_X[te],
            seed,
        )
        accs.append(accuracy(labels, payload.train_y[te]))
    return float(np.mean(accs))


@dataclass(frozen=True)
class FoldResult:
    fold: int
    chosen_params: dict
    train_accuracy: float
    test_accuracy: float
    auc: float
    n_train_pd: int
    n_train_hc: int
    n_test_pd: int
    n_test_hc: int
    test_scores: tuple[float, ...]
    test_labels: tuple[int, ...]


def _refit_and_eval(payload: _FoldPayload, classifier, combos, combo_idx) -> FoldResult:
    params = combos[combo_idx]
    seed = derive_seed(payload.fold_seed, 2)
    X_tr, y_tr = _training_arrays(payload)
    train_labels, _ = _fit_eval(classifier, params, X_tr, y_tr, X_tr, seed)
    test_labels, test_scores = _fit_eval(
        classifier, params, X_tr, y_tr, payload.test_X, seed
    )
    n_train_pd = int(np.count_nonzero(y_tr == LABEL_PD))
    n_test_pd = int(np.count_nonzero(payload.test_y == LABEL_PD))
    return FoldResult(
        fold=payload.fold,
        chosen_params=dict(params),
        train_accuracy=accuracy(train_labels, y_tr),
        test_accuracy=accuracy(test_labels, payload.test_y),
        auc=auc_score(np.asarray(test_scores, dtype=np.float64), payload.test_y),
        n_train_pd=n_train_pd,
        n_train_hc=y_tr.size - n_train_pd,
        n_test_pd=n_test_pd,
        n_test_hc=payload.test_y.size - n_test_pd,
        test_scores=tuple(float(v) for v in np.atleast_1d(test_scores)),
        test_labels=tuple(int(v) for v in payload.test_y),
    )


@dataclass(frozen=True)
class CvReport:
    classifier: str
    outer_k: int
    inner_k: int
    seed: int
    leakage_mode: str
    per_outer_fold: tuple[FoldResult, ...]
    mean_train_accuracy: float
    mean_test_accuracy: float
    mean_auc: float


def _inner_splits(ds: LabeledDataset, inner_k: int, seed: int):
    folds = stratified_kfold(ds, inner_k, seed)
    return tuple(
        (folds.train_rows(f), folds.test_rows(f)) for f in range(inner_k)
    )


def grid_search(
    train: LabeledDataset,
    grid: HyperGrid,
    inner_k: int,
    seed: int,
    augment_mode: str | None = None,
) -> tuple[dict, tuple[float, ...]]:
    """Score every combination by mean stratified inner-fold test accuracy.

    One fold assignment is shared by all combinations; the best mean wins and
    ties break toward the earlier combination in grid order. When
    augment_mode is set, each inner-train portion is augmented before
    fitting (the leakage-safe protocol); inner-test rows are never augmented.
    """
    combos = enumerate_combinations(grid)
    payload = _FoldPayload(
        fold=0,
        fold_seed=seed,
        train_X=train.features,
        train_y=np.asarray(train.labels),
        test_X=train.features[:0],
        test_y=np.asarray(train.labels[:0]),
        inner_splits=_inner_splits(train, inner_k, seed),
        augment_mode=augment_mode,
    )
    scores = tuple(
        _combo_inner_accuracy(payload, grid.classifier, combos, c)
        for c in range(len(combos))
    )
    return dict(combos[_argmax_first(scores)]), scores


def _argmax_first(scores: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return best


# Worker-side state for the process pool, set once per worker by the
# initializer so tasks only carry indices.
_POOL_STATE: dict = {}


def _init_pool(payloads, classifier, combos):
    _POOL_STATE["payloads"] = payloads
    _POOL_STATE["classifier"] = classifier
    _POOL_STATE["combos"] = combos


def _score_task(task: tuple[int, int]) -> float:
    fold, combo_idx = task
    return _combo_inner_accuracy(
        _POOL_STATE["payloads"][fold],
        _POOL_STATE["classifier"],
        _POOL_STATE["combos"],
        combo_idx,
    )


def _refit_task(task: tuple[int, int]) -> FoldResult:
    fold, combo_idx = task
    return _refit_and_eval(
        _POOL_STATE["payloads"][fold],
        _POOL_STATE["classifier"],
        _POOL_STATE["combos"],
        combo_idx,
    )


def nested_cv(
    ds: LabeledDataset,
    classifier: str,
    grid: HyperGrid | None = None,
    outer_k: int = 10,
    inner_k: int = 5,
    seed: int = 0,
    leakage_mode: str = PAPER_ORDER,
    augment_mode: str = AUGMENT_SUBTRACT_MEAN,
    n_jobs: int = 1,
) -> CvReport:
    """Run the full nested protocol and aggregate per-fold results.

    In paper-order mode the augmentation runs once up front and folds are
    assigned on the augmented pool; in leakage-safe mode folds are assigned
    on the original rows and augmentation is applied to each training
    portion (inner-train for scoring, outer-train for the refit) just before
    fitting. AUC uses the outer-test scores of each fold (probability for
    LR, vote fraction for RF, uncalibrated decision value for SVM); pooling
    scores across folds into a single ROC is intentionally not done here,
    though callers may pool the recorded per-fold scores themselves.
    """
    if grid is None:
        grid = default_grid(classifier)
    if grid.classifier != classifier:
        raise ValueError("grid classifier does not match")
    if leakage_mode not in LEAKAGE_MODES:
        raise ValueError(f"leakage_mode must be one of {LEAKAGE_MODES}")
    combos = enumerate_combinations(grid)

    if leakage_mode == PAPER_ORDER:
        pool_ds = augment_negatives(ds, augment_mode)
        task_augment = None
    else:
        pool_ds = ds
        task_augment = augment_mode
    outer = stratified_kfold(pool_ds, outer_k, seed)

    payloads = []
    for fold in range(outer_k):
        train_ds = pool_ds.take(outer.train_rows(fold))
        test_rows = outer.test_rows(fold)
        fold_seed = derive_seed(seed, fold)
        payloads.append(
            _FoldPayload(
                fold=fold,
                fold_seed=fold_seed,
                train_X=train_ds.features,
                train_y=np.asarray(train_ds.labels),
                test_X=pool_ds.features[test_rows],
                test_y=np.asarray(pool_ds.labels[test_rows]),
                inner_splits=_inner_splits(train_ds, inner_k, fold_seed),
                augment_mode=task_augment,
            )
        )

    score_tasks = [(f, c) for f in range(outer_k) for c in range(len(combos))]
    if n_jobs > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(
            n_jobs, initializer=_init_pool, initargs=(payloads, classifier, combos)
        ) as pool:
            flat = pool.map(_score_task, score_tasks, chunksize=8)
            best_per_fold = _select_best(flat, outer_k, len(combos))
            results = pool.map(
                _refit_task, [(f, best_per_fold[f]) for f in range(outer_k)]
            )
    else:
        _init_pool(payloads, classifier, combos)
        flat = [_score_task(t) for t in score_tasks]
        best_per_fold = _select_best(flat, outer_k, len(combos))
        results = [_refit_task((f, best_per_fold[f])) for f in range(outer_k)]

    return CvReport(
        classifier=classifier,
        outer_k=outer_k,
        inner_k=inner_k,
        seed=seed,
        leakage_mode=leakage_mode,
        per_outer_fold=tuple(results),
        mean_train_accuracy=float(np.mean([r.train_accuracy for r in results])),
        mean_test_accuracy=float(np.mean([r.test_accuracy for r in results])),
        mean_auc=float(np.mean([r.auc for r in results])),
    )


def _select_best(flat_scores, outer_k: int, n_combos: int) -> list[int]:
    return [
        _argmax_first(flat_scores[f * n_combos : (f + 1) * n_combos])
        for f in range(outer_k)
    ]


# --- CSV export -----------------------------------------------------------------


def _format_param(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _param_columns(report: CvReport) -> list[str]:
    cols: list[str] = []
    for r in report.per_outer_fold:
        for k in r.chosen_params:
            if k not in cols:
                cols.append(k)
    return cols


def write_cv_report_csv(
    report: CvReport,
    path,
    extra_columns: Mapping[str, str] | None = None,
    header_comments: Sequence[str] = (),
) -> None:
    """Per-fold rows plus one aggregate row, with optional '#' header lines."""
    extra = dict(extra_columns or {})
    params = _param_columns(report)
    lines = [f"# {c}" for c in header_comments]
    cols = ["classifier", *extra, "fold", *params, "train_acc", "test_acc", "auc",
            "n_train_pd", "n_train_hc", "n_test_pd", "n_test_hc"]
    lines.append(",".join(cols))
    for r in report.per_outer_fold:
        row = [report.classifier, *extra.values(), str(r.fold)]
        row += [_format_param(r.chosen_params[p]) if p in r.chosen_params else "" for p in params]
        row += [
            format(r.train_accuracy, ".17g"),
            format(r.test_accuracy, ".17g"),
            format(r.auc, ".17g"),
            str(r.n_train_pd),
            str(r.n_train_hc),
            str(r.n_test_pd),
            str(r.n_test_hc),
        ]
        lines.append(",".join(row))
    agg = [report.classifier, *extra.values(), "mean", *[""] * len(params)]
    agg += [
        format(report.mean_train_accuracy, ".17g"),
        format(report.mean_test_accuracy, ".17g"),
        format(report.mean_auc, ".17g"),
        "", "", "", "",
    ]
    lines.append(",".join(agg))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
