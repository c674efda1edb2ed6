import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdloc.evaluation import (
    EvalReport,
    bssid_subsample_experiment,
    count_for_fraction,
    cross_validate,
    grid_split_experiment,
    kfold_split_by_path,
    mpe,
    path_subsample_experiment,
    position_errors,
    resilience_experiment,
    run_cv,
    summarize_subsamples,
)
from crowdloc.evaluation.reports import (
    read_report,
    write_cv_summary,
    write_fold_report,
    write_grid_table,
    write_resilience_curve,
    write_subsample_summary,
)
from crowdloc.exceptions import EmptyInput, LengthMismatch, TooFewCheckpoints, TooFewFolds, TooFewPaths
from crowdloc.floorplan import CheckpointGrid, thin_grid
from crowdloc.models import CentroidRegressor, KNNRegressor

# ---------------------------------------------------------------- metric


def test_mpe_hand_case():
    assert mpe([(0, 0), (0, 0)], [(3, 4), (0, 0)]) == 2.5


def test_mpe_exact_is_zero():
    pts = np.random.default_rng(0).normal(size=(10, 2))
    assert mpe(pts, pts) == 0.0


def test_mpe_errors():
    with pytest.raises(LengthMismatch):
        mpe([(0, 0)], [(0, 0), (1, 1)])
    with pytest.raises(EmptyInput):
        mpe([], [])


coords = st.floats(-1e3, 1e3, allow_nan=False)
pairs = st.lists(st.tuples(coords, coords, coords, coords), min_size=1, max_size=20)


@settings(max_examples=100, deadline=None)
@given(pairs, coords, coords)
def test_mpe_properties(rows, dx, dy):
    a = np.array([r[:2] for r in rows])
    b = np.array([r[2:] for r in rows])
    value = mpe(a, b)
    assert value >= 0
    assert (value == 0) == bool(np.all(a == b))
    shift = np.array([dx, dy])
    assert mpe(a + shift, b + shift) == pytest.approx(value, rel=1e-9, abs=1e-6)
    assert value == pytest.approx(np.mean(np.hypot(*(a - b).T)))


def test_position_errors_shape():
    assert position_errors([(0, 0), (1, 1)], [(0, 1), (1, 1)]).tolist() == [1.0, 0.0]


# ---------------------------------------------------------------- folds


def test_five_paths_five_folds():
    folds = kfold_split_by_path([f"p{i}" for i in range(5)], k=5, seed=3)
    assert sorted(folds.fold_sizes()) == [1] * 5


def test_fold_sizes_for_423_paths():
    folds = kfold_split_by_path([f"p{i:03d}" for i in range(423)], k=5, seed=0)
    assert sorted(folds.fold_sizes(), reverse=True) == [85, 85, 85, 84, 84]


def test_fold_errors():
    with pytest.raises(TooFewFolds):
        kfold_split_by_path(["a", "b"], k=1)
    with pytest.raises(TooFewPaths):
        kfold_split_by_path(["a", "b"], k=3)


@settings(max_examples=50, deadline=None)
@given(st.sets(st.text("abcdef", min_size=1, max_size=5), min_size=2, max_size=60), st.integers(2, 8), st.integers(0, 99))
def test_fold_assignment_properties(paths, k, seed):
    if len(paths) < k:
        return
    folds = kfold_split_by_path(paths, k=k, seed=seed)
    assert set(folds.folds) == paths
    sizes = folds.fold_sizes()
    assert max(sizes) - min(sizes) <= 1
    # depends only on the path set, not on its order
    assert kfold_split_by_path(sorted(paths, reverse=True), k=k, seed=seed).folds == folds.folds


# ---------------------------------------------------------------- CV


def test_centroid_cv_matches_recomputation(small_dataset):
    folds = kfold_split_by_path(small_dataset, k=5, seed=1)
    report = run_cv(CentroidRegressor(), small_dataset, folds)
    fold_of = folds.fold_of(small_dataset.path_ids)
    expected = []
    for f in range(5):
        train, test = fold_of != f, fold_of == f
        centre = small_dataset.y[train].mean(axis=0)
        expected.append(np.mean(np.hypot(*(small_dataset.y[test] - centre).T)))
    np.testing.assert_allclose(report.fold_mpe, expected, rtol=1e-12)
    assert report.n_rows == len(small_dataset)
    assert report.mean_mpe == pytest.approx(np.mean(expected))
    assert report.std_mpe == pytest.approx(np.std(expected))


def test_cv_deterministic_and_ensembles(small_dataset):
    folds = kfold_split_by_path(small_dataset, k=4, seed=2)
    est = {"knn": KNNRegressor(n_neighbors=5), "centroid": CentroidRegressor()}
    ens = {"mix": {"knn": 2, "centroid": 1}}
    a = cross_validate(est, small_dataset, folds, ens)
    b = cross_validate(est, small_dataset, folds, ens, n_jobs=2)
    assert {n: r.fold_mpe for n, r in a.items()} == {n: r.fold_mpe for n, r in b.items()}
    assert set(a) == {"knn", "centroid", "mix"}
    assert a["mix"].config["weights"] == {"knn": 2, "centroid": 1}


def test_report_statistics_recomputable():
    r = EvalReport.from_errors("cv", "m", [np.array([1.0, 3.0]), np.array([2.0])])
    assert r.fold_mpe == [2.0, 2.0]
    assert r.n_rows == 3
    assert r.pooled_mpe == 2.0
    assert r.row_error_std == pytest.approx(np.std([1.0, 3.0, 2.0]))


def test_restrict_keeps_assignment():
    folds = kfold_split_by_path([f"p{i}" for i in range(20)], k=4, seed=0)
    keep = sorted(folds.folds)[:12]
    try:
        sub = folds.restrict(keep)
    except TooFewPaths:
        pytest.skip("subset emptied a fold")
    assert all(sub.folds[p] == folds.folds[p] for p in keep)


# ---------------------------------------------------------------- experiments


@pytest.mark.parametrize("fraction,n,expected", [(0.25, 423, 106), (0.5, 423, 211), (0.75, 423, 317),
                                                 (1.0, 423, 423), (0.75, 312, 234), (0.5, 312, 156),
                                                 (0.25, 312, 78)])
def test_count_for_fraction(fraction, n, expected):
    assert count_for_fraction(fraction, n) == expected


def test_count_for_fraction_range():
    with pytest.raises(ValueError):
        count_for_fraction(0.0, 10)


def test_full_fraction_equals_plain_cv(small_dataset):
    folds = kfold_split_by_path(small_dataset, k=3, seed=0)
    est = {"knn": KNNRegressor(n_neighbors=5)}
    base = cross_validate(est, small_dataset, folds)["knn"]
    (paths_full,) = path_subsample_experiment(est, small_dataset, folds, (1.0,), 5)
    (bssid_full,) = bssid_subsample_experiment(est, small_dataset, folds, (1.0,), 5)
    assert paths_full.fold_mpe == base.fold_mpe == bssid_full.fold_mpe


def test_subsample_sizes_and_repeats(small_dataset):
    folds = kfold_split_by_path(small_dataset, k=3, seed=0)
    est = {"knn": KNNRegressor(n_neighbors=3)}
    reports = bssid_subsample_experiment(est, small_dataset, folds, (0.5,), 3, seed=7)
    assert len(reports) == 3
    assert {r.config["n_bssid"] for r in reports} == {count_for_fraction(0.5, small_dataset.n_bssid)}
    assert len({r.config["seed"] for r in reports}) == 3
    (summary,) = summarize_subsamples(reports)
    assert summary.repeats == 3
    assert summary.mean_mpe == pytest.approx(np.mean([r.mean_mpe for r in reports]))
    reports = path_subsample_experiment(est, small_dataset, folds, (0.5,), 2, seed=7)
    assert {r.config["n_paths"] for r in reports} == {count_for_fraction(0.5, len(small_dataset.paths))}


def test_resilience_anchor_and_shape(small_dataset):
    fold_of = kfold_split_by_path(small_dataset, k=3, seed=0).fold_of(small_dataset.path_ids)
    tr, te = fold_of != 0, fold_of == 0
    knn = KNNRegressor(n_neighbors=3).fit(small_dataset.X[tr], small_dataset.y[tr])
    cen = CentroidRegressor().fit(small_dataset.X[tr], small_dataset.y[tr])
    curve = resilience_experiment({"knn": knn, "c": cen}, small_dataset.X[te], small_dataset.y[te],
                                  n_orders=3, ensembles={"mix": {"knn": 1, "c": 1}})
    n = small_dataset.n_bssid
    assert curve.num_dropped.tolist() == list(range(n))
    assert curve.mpe["knn"].shape == (3, n)
    base = mpe(small_dataset.y[te], knn.predict(small_dataset.X[te]))
    assert np.all(curve.mpe["knn"][:, 0] == base)
    assert len({tuple(o) for o in curve.orders}) == 3


def test_resilience_last_step_uses_only_surviving_column(small_dataset):
    X, y = small_dataset.X, small_dataset.y
    knn = KNNRegressor(n_neighbors=4).fit(X, y)
    curve = resilience_experiment({"knn": knn}, X[:20], y[:20], n_orders=1, seed=3)
    survivor = curve.orders[0][-1]
    masked = np.full_like(X[:20], -999.0)
    masked[:, survivor] = X[:20, survivor]
    assert curve.mpe["knn"][0, -1] == mpe(y[:20], knn.predict(masked))


def test_grid_split_experiment(small_dataset, small_grid):
    folds = kfold_split_by_path(small_dataset, k=3, seed=0)
    table, per_parity = grid_split_experiment({"c": CentroidRegressor()}, small_dataset, small_grid, folds)
    (row,) = table
    assert row.average == pytest.approx((row.same_split + row.other_split) / 2)
    even, odd = per_parity["even"][0], per_parity["odd"][0]
    assert row.same_split == pytest.approx((even.same_split + odd.same_split) / 2)
    # the same-split score is plain CV on the rows of one sub-grid
    ids = thin_grid(small_grid, "even").ids
    sub = small_dataset.take(np.isin(small_dataset.checkpoint_ids, ids))
    assert even.same_split == pytest.approx(run_cv(CentroidRegressor(), sub, folds.restrict(sub.paths)).mean_mpe)


def test_grid_split_refuses_tiny_grid(small_dataset):
    grid = CheckpointGrid.from_points({0: (0, 0), 1: (2.5, 0)}, [(0, 1)])
    folds = kfold_split_by_path(small_dataset, k=3, seed=0)
    with pytest.raises(TooFewCheckpoints):
        grid_split_experiment({"c": CentroidRegressor()}, small_dataset, grid, folds)


# ---------------------------------------------------------------- reports


def test_reports_carry_config(tmp_path, small_dataset):
    folds = kfold_split_by_path(small_dataset, k=3, seed=0)
    reports = cross_validate({"c": CentroidRegressor()}, small_dataset, folds)
    cfg = {"seed": 0, "note": "x"}
    write_fold_report(reports.values(), tmp_path / "f.csv", cfg)
    write_cv_summary(reports.values(), tmp_path / "s.csv", cfg)
    config, header, rows = read_report(tmp_path / "f.csv")
    assert config == cfg
    assert header[:2] == ["experiment", "model"] and len(rows) == 3
    config, header, rows = read_report(tmp_path / "s.csv")
    assert float(rows[0][1]) == reports["c"].mean_mpe


def test_curve_and_table_reports(tmp_path, small_dataset, small_grid):
    X, y = small_dataset.X, small_dataset.y
    curve = resilience_experiment({"c": CentroidRegressor().fit(X, y)}, X[:10], y[:10])
    write_resilience_curve(curve, tmp_path / "curve.csv", {"seed": 1})
    _, header, rows = read_report(tmp_path / "curve.csv")
    assert header == ["num_dropped", "mpe_c"] and len(rows) == small_dataset.n_bssid
    folds = kfold_split_by_path(small_dataset, k=3, seed=0)
    reps = path_subsample_experiment({"c": CentroidRegressor()}, small_dataset, folds, (0.5, 1.0), 2)
    write_subsample_summary(summarize_subsamples(reps), tmp_path / "sum.csv", "paths")
    _, header, rows = read_report(tmp_path / "sum.csv")
    assert header[2] == "paths" and len(rows) == 2
    table, _ = grid_split_experiment({"c": CentroidRegressor()}, small_dataset, small_grid, folds)
    write_grid_table(table, tmp_path / "grid.csv")
    _, header, rows = read_report(tmp_path / "grid.csv")
    assert header == ["model", "same_split", "other_split", "average"]
