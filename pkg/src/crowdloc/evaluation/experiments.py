"""Ablation experiments built on path-grouped CV.

Every repeat is an independent job seeded with ``seed + job_index`` so the
results do not depend on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from ..dataset import MISSING
from ..exceptions import TooFewCheckpoints, TooFewPaths
from ..floorplan import thin_grid
from ..models.ensemble import weighted_average
from .cv import EvalReport, cross_validate, fit_fold
from .metrics import mpe, position_errors

# default repeat counts, keyed by fraction kept
PATH_REPEATS = {0.25: 50, 0.5: 40, 0.75: 30, 1.0: 1}
BSSID_REPEATS = {0.75: 30, 0.5: 40, 0.25: 50}
_MAX_DRAWS = 100


def count_for_fraction(fraction: float, n: int) -> int:
    """``fraction * n`` rounded to nearest, halves rounded down (0.25*423 -> 106, 0.5*423 -> 211)."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    return max(1, math.ceil(fraction * n - 0.5))


def _repeat_plan(fractions, repeats):
    plan = []
    for f in fractions:
        n_rep = repeats.get(f, 1) if isinstance(repeats, dict) else int(repeats)
        if f == 1.0:
            n_rep = 1  # every subset of the full set is the full set
        plan.extend((f, r) for r in range(n_rep))
    return plan


def _path_job(estimators, ensembles, dataset, folds, fraction, repeat, seed):
    rng = np.random.default_rng(seed)
    paths = dataset.paths
    n_sel = count_for_fraction(fraction, len(paths))
    # redraw subsets that leave a fold without test paths
    for _ in range(_MAX_DRAWS):
        chosen = sorted(rng.choice(paths, size=n_sel, replace=False).tolist())
        if len({folds.folds[p] for p in chosen}) == folds.k:
            break
    else:
        raise TooFewPaths(f"{n_sel} random paths never covered all {folds.k} folds in {_MAX_DRAWS} draws")
    sub = dataset.select_paths(chosen)
    cfg = {"fraction": fraction, "repeat": repeat, "seed": seed, "n_paths_used": n_sel}
    return cross_validate(estimators, sub, folds.restrict(chosen), ensembles, "paths", cfg)


def _bssid_job(estimators, ensembles, dataset, folds, fraction, repeat, seed):
    rng = np.random.default_rng(seed)
    n_sel = count_for_fraction(fraction, dataset.n_bssid)
    cols = np.sort(rng.choice(dataset.n_bssid, size=n_sel, replace=False))
    sub = dataset.select_columns(cols)
    cfg = {"fraction": fraction, "repeat": repeat, "seed": seed, "n_bssid_used": n_sel}
    return cross_validate(estimators, sub, folds, ensembles, "bssids", cfg)


def _run_plan(job, estimators, ensembles, dataset, folds, fractions, repeats, seed, n_jobs):
    plan = _repeat_plan(fractions, repeats)
    results = Parallel(n_jobs=n_jobs)(
        delayed(job)(estimators, ensembles, dataset, folds, f, r, seed + i)
        for i, (f, r) in enumerate(plan)
    )
    return [rep for per_job in results for rep in per_job.values()]


def path_subsample_experiment(estimators, dataset, folds, fractions=(0.25, 0.5, 0.75, 1.0),
                              repeats=PATH_REPEATS, seed=0, ensembles=None, n_jobs=1) -> list[EvalReport]:
    """CV on random subsets of the paths, keeping each path's original fold."""
    return _run_plan(_path_job, _as_dict(estimators), ensembles, dataset, folds,
                     fractions, repeats, seed, n_jobs)


def bssid_subsample_experiment(estimators, dataset, folds, fractions=(0.75, 0.5, 0.25),
                               repeats=BSSID_REPEATS, seed=0, ensembles=None, n_jobs=1) -> list[EvalReport]:
    """CV after restricting the vocabulary to a random subset of BSSIDs."""
    return _run_plan(_bssid_job, _as_dict(estimators), ensembles, dataset, folds,
                     fractions, repeats, seed, n_jobs)


def _as_dict(estimators):
    if isinstance(estimators, dict):
        return estimators
    return {type(estimators).__name__: estimators}


@dataclass
class SubsampleSummary:
    model: str
    fraction: float
    used: int  # paths or BSSIDs kept
    repeats: int
    mean_mpe: float
    std_mpe: float  # population std of the repeat means


def summarize_subsamples(reports: list[EvalReport]) -> list[SubsampleSummary]:
    groups: dict = {}
    for r in reports:
        used = r.config.get("n_paths_used", r.config.get("n_bssid_used"))
        groups.setdefault((r.model, r.config["fraction"], used), []).append(r.mean_mpe)
    out = []
    for (model, frac, used), values in groups.items():
        out.append(SubsampleSummary(model, frac, used, len(values), float(np.mean(values)), float(np.std(values))))
    return out


@dataclass
class ResilienceCurve:
    num_dropped: np.ndarray
    mpe: dict  # name -> (n_orders, n_steps) array
    orders: list = field(default_factory=list)

    def mean(self, name) -> np.ndarray:
        return self.mpe[name].mean(axis=0)

    @property
    def names(self) -> list[str]:
        return list(self.mpe)


def resilience_experiment(models: dict, X_test, y_test, n_orders=1, seed=0, ensembles=None,
                          missing=MISSING) -> ResilienceCurve:
    """MPE of fixed, trained models as BSSID columns are masked one at a time.

    For each drop order (a seeded shuffle of the columns) step ``s`` masks
    the first ``s`` columns of the order, for ``s = 0 .. n_bssid - 1``.
    """
    ensembles = ensembles or {}
    X_test = np.asarray(X_test, dtype=float)
    n_bssid = X_test.shape[1]
    names = list(models) + list(ensembles)
    curves = {name: np.zeros((n_orders, n_bssid)) for name in names}
    orders = []
    for o in range(n_orders):
        order = np.random.default_rng(seed + o).permutation(n_bssid)
        orders.append(order)
        X = X_test.copy()
        for step in range(n_bssid):
            if step > 0:
                X[:, order[step - 1]] = missing
            preds = {name: m.predict(X) for name, m in models.items()}
            for name, p in preds.items():
                curves[name][o, step] = mpe(y_test, p)
            for name, weights in ensembles.items():
                combo = weighted_average([preds[m] for m in weights], list(weights.values()))
                curves[name][o, step] = mpe(y_test, combo)
    return ResilienceCurve(np.arange(n_bssid), curves, orders)


@dataclass
class GridSplitRow:
    model: str
    same_split: float
    other_split: float

    @property
    def average(self) -> float:
        return 0.5 * (self.same_split + self.other_split)


def _grid_fold_job(estimators, sub, other, folds, fold):
    train_paths = {p for p, f in folds.folds.items() if f != fold}
    test_paths = {p for p, f in folds.folds.items() if f == fold}
    train_idx = np.flatnonzero(np.isin(sub.path_ids, list(train_paths)))
    same_idx = np.flatnonzero(np.isin(sub.path_ids, list(test_paths)))
    other_idx = np.flatnonzero(np.isin(other.path_ids, list(test_paths)))
    out = {}
    for name, est in estimators.items():
        model = fit_fold(est, sub, train_idx)
        out[name] = (model.predict(sub.X[same_idx]), model.predict(other.X[other_idx]))
    return same_idx, other_idx, out


def grid_split_experiment(estimators, dataset, grid, folds, ensembles=None, n_jobs=1,
                          min_checkpoints=2) -> tuple[list[GridSplitRow], dict]:
    """Train on half of the checkpoints, score on the same and the other half.

    For each parity the rows at that sub-grid's checkpoints are
    cross-validated ("same split"); each fold model then also scores the
    held-out paths' rows at the complementary checkpoints ("other split").
    Returns rows averaged over both parities, and the per-parity rows.
    """
    estimators = _as_dict(estimators)
    ensembles = ensembles or {}
    halves = {parity: thin_grid(grid, parity) for parity in ("even", "odd")}
    if min(len(h) for h in halves.values()) < min_checkpoints:
        raise TooFewCheckpoints(f"each half of the grid needs >= {min_checkpoints} checkpoints")

    per_parity = {}
    for parity, other_parity in (("even", "odd"), ("odd", "even")):
        sub = dataset.take(np.isin(dataset.checkpoint_ids, halves[parity].ids))
        other = dataset.take(np.isin(dataset.checkpoint_ids, halves[other_parity].ids))
        sub_folds = folds.restrict(sub.paths)
        results = Parallel(n_jobs=n_jobs)(
            delayed(_grid_fold_job)(estimators, sub, other, sub_folds, f) for f in range(folds.k)
        )
        errs = {name: ([], []) for name in list(estimators) + list(ensembles)}
        for same_idx, other_idx, preds in results:
            for name, (p_same, p_other) in preds.items():
                errs[name][0].append(position_errors(sub.y[same_idx], p_same))
                if len(other_idx):
                    errs[name][1].append(position_errors(other.y[other_idx], p_other))
            for name, weights in ensembles.items():
                for j, (truth, idx) in enumerate(((sub.y, same_idx), (other.y, other_idx))):
                    if len(idx) == 0:
                        continue
                    combo = weighted_average([preds[m][j] for m in weights], list(weights.values()))
                    errs[name][j].append(position_errors(truth[idx], combo))
        per_parity[parity] = [
            GridSplitRow(name, float(np.mean([e.mean() for e in same])), float(np.mean([e.mean() for e in oth])))
            for name, (same, oth) in errs.items()
        ]

    table = []
    for i, row in enumerate(per_parity["even"]):
        odd = per_parity["odd"][i]
        table.append(GridSplitRow(row.model, 0.5 * (row.same_split + odd.same_split),
                                  0.5 * (row.other_split + odd.other_split)))
    return table, per_parity
