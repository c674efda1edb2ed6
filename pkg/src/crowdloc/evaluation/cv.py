"""Path-grouped cross-validation."""

from __future__ import annotations

import inspect
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone

from ..exceptions import TooFewFolds, TooFewPaths
from ..models.ensemble import weighted_average
from .metrics import position_errors


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    seed: int
    folds: dict  # path_id -> fold index

    def test_paths(self, fold: int) -> list:
        return sorted(p for p, f in self.folds.items() if f == fold)

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for f in self.folds.values():
            sizes[f] += 1
        return sizes

    def fold_of(self, path_ids) -> np.ndarray:
        return np.array([self.folds[p] for p in path_ids], dtype=int)

    def restrict(self, paths) -> "FoldAssignment":
        """Same assignment limited to ``paths``; every fold must stay non-empty."""
        sub = {p: self.folds[p] for p in paths}
        restricted = FoldAssignment(self.k, self.seed, sub)
        if min(restricted.fold_sizes()) == 0:
            raise TooFewPaths("a fold lost all of its paths; use a larger subset")
        return restricted


def kfold_split_by_path(paths, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Shuffle path ids with ``seed`` and deal them round-robin into ``k`` folds.

    ``paths`` may be a Dataset or an iterable of path ids.
    """
    path_list = paths.paths if hasattr(paths, "paths") else sorted(set(paths))
    if k < 2:
        raise TooFewFolds(f"cross-validation needs k >= 2, got {k}")
    if len(path_list) < k:
        raise TooFewPaths(f"{len(path_list)} paths cannot fill {k} folds")
    order = np.random.default_rng(seed).permutation(len(path_list))
    folds = {path_list[j]: pos % k for pos, j in enumerate(order)}
    return FoldAssignment(k, seed, folds)


@dataclass
class EvalReport:
    """Per-fold and aggregate MPE.

    ``mean_mpe`` and ``std_mpe`` are the mean and population std of
    ``fold_mpe``. ``row_error_std`` is the population std of the per-row
    errors pooled over all folds; ``n_rows`` counts the evaluated rows.
    """

    experiment: str
    model: str
    fold_mpe: list
    n_rows: int
    pooled_mpe: float
    row_error_std: float
    config: dict = field(default_factory=dict)

    @property
    def mean_mpe(self) -> float:
        return float(np.mean(self.fold_mpe))

    @property
    def std_mpe(self) -> float:
        return float(np.std(self.fold_mpe))

    @classmethod
    def from_errors(cls, experiment, model, fold_errors, config=None):
        pooled = np.concatenate(fold_errors) if fold_errors else np.zeros(0)
        return cls(
            experiment=experiment,
            model=model,
            fold_mpe=[float(e.mean()) for e in fold_errors],
            n_rows=int(pooled.size),
            pooled_mpe=float(pooled.mean()),
            row_error_std=float(pooled.std()),
            config=dict(config or {}),
        )


def _fit_kwargs(estimator, train_idx, path_ids):
    try:
        sig = inspect.signature(estimator.fit).parameters
    except (TypeError, ValueError):
        return {}
    kwargs = {}
    if "row_ids" in sig:
        kwargs["row_ids"] = train_idx
    if "groups" in sig:
        kwargs["groups"] = path_ids[train_idx]
    return kwargs


def fit_fold(estimator, dataset, train_idx):
    model = clone(estimator)
    model.fit(dataset.X[train_idx], dataset.y[train_idx], **_fit_kwargs(model, train_idx, dataset.path_ids))
    return model


def _fold_indices(dataset, folds, fold):
    fold_idx = folds.fold_of(dataset.path_ids)
    return np.flatnonzero(fold_idx != fold), np.flatnonzero(fold_idx == fold)


def _run_fold(estimators, dataset, folds, fold):
    train_idx, test_idx = _fold_indices(dataset, folds, fold)
    preds = {}
    for name, est in estimators.items():
        model = fit_fold(est, dataset, train_idx)
        preds[name] = model.predict(dataset.X[test_idx])
    return test_idx, preds


def cross_validate(estimators: dict, dataset, folds: FoldAssignment, ensembles=None,
                   experiment="cv", config=None, n_jobs=1) -> dict:
    """CV for several models at once; returns ``{name: EvalReport}``.

    ``ensembles`` maps a name to ``{model_name: weight}`` and is scored from
    the component predictions of the same folds, without refitting.
    """
    ensembles = ensembles or {}
    results = Parallel(n_jobs=n_jobs)(
        delayed(_run_fold)(estimators, dataset, folds, f) for f in range(folds.k)
    )
    errors = {name: [] for name in list(estimators) + list(ensembles)}
    for test_idx, preds in results:
        truth = dataset.y[test_idx]
        for name, p in preds.items():
            errors[name].append(position_errors(truth, p))
        for name, weights in ensembles.items():
            combo = weighted_average([preds[m] for m in weights], list(weights.values()))
            errors[name].append(position_errors(truth, combo))
    cfg = {"k": folds.k, "fold_seed": folds.seed, "n_paths": len(folds.folds), "n_bssid": dataset.n_bssid}
    cfg.update(config or {})
    reports = {}
    for name, errs in errors.items():
        model_cfg = dict(cfg)
        if name in estimators:
            model_cfg["params"] = _params_of(estimators[name])
        else:
            model_cfg["weights"] = dict(ensembles[name])
        reports[name] = EvalReport.from_errors(experiment, name, errs, model_cfg)
    return reports


def _params_of(estimator):
    try:
        return {k: v for k, v in estimator.get_params(deep=False).items()
                if isinstance(v, (int, float, str, bool, tuple, list, type(None)))}
    except AttributeError:
        return {}


def run_cv(estimator, dataset, folds: FoldAssignment, name=None, n_jobs=1, config=None) -> EvalReport:
    """Train on k-1 folds, score the held-out fold, for every fold."""
    name = name or type(estimator).__name__
    return cross_validate({name: estimator}, dataset, folds, n_jobs=n_jobs, config=config)[name]
