import hashlib
import json

import numpy as np
import pytest
import yaml

from crowdloc.cli import main, resolve_config
from crowdloc.dataset import load_dataset
from crowdloc.evaluation.reports import read_report
from crowdloc.exceptions import ConfigError
from crowdloc.walklog import write_corpus

from .corpus_factory import _path, line_grid

SYNTH = ["--set", "synth.cols=5", "--set", "synth.rows=5", "--set", "synth.n_aps=10",
         "--set", "synth.n_paths=20", "--set", "synth.max_taps=10", "--set", "synth.emit_sensors=false"]
BUILD = ["--set", "dataset.min_checkpoint_presence=5"]
FAST = ["--set", "models.use=[knn, centroid]", "--set", "models.params.knn.n_neighbors=3",
        "--set", "models.ensembles={mix: {knn: 1, centroid: 1}}", "--set", "cv.k=3"]


def _tree_hash(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "syn"), "--seed", "4", *SYNTH]) == 0
    ds = root / "data" / "ds.csv"
    assert main(["build", "--corpus", str(root / "syn" / "logs"), "--grid", str(root / "syn" / "grid.csv"),
                 "--dataset", str(ds), "--out", str(root / "data"), *BUILD]) == 0
    return root, ds


def test_synth_writes_one_file_per_path(built):
    root, _ = built
    assert len(list((root / "syn" / "logs").glob("*.txt"))) == 20
    for name in ("grid.csv", "truth.csv", "aps.csv", "config.yaml"):
        assert (root / "syn" / name).exists()
    assert yaml.safe_load((root / "syn" / "config.yaml").read_text())["seed"] == 4


def test_synth_is_reproducible(tmp_path, built):
    root, _ = built
    assert main(["synth", "--out", str(tmp_path / "again"), "--seed", "4", *SYNTH]) == 0
    # the snapshot records the output directory, which differs by construction
    (tmp_path / "again" / "config.yaml").unlink()
    reference = tmp_path / "ref"
    reference.mkdir()
    for p in (root / "syn").rglob("*"):
        if p.is_file() and p.name != "config.yaml":
            dest = reference / p.relative_to(root / "syn")
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_bytes(p.read_bytes())
    assert _tree_hash(tmp_path / "again") == _tree_hash(reference)


def test_synth_bad_dims(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--set", "synth.cols=1"]) == 2
    assert "InvalidDims" in capsys.readouterr().err


def test_build_prints_stats(built, capsys, tmp_path):
    root, ds = built
    assert main(["stats", "--dataset", str(ds), "--out", str(tmp_path)]) == 0
    printed = capsys.readouterr().out
    assert (tmp_path / "stats.txt").read_text() == printed
    dataset = load_dataset(ds)
    assert f"{len(dataset)} rows" in printed
    assert (ds.parent / "ds.config.yaml").exists()


def test_build_only_short_paths(tmp_path, capsys):
    write_corpus([_path(f"p{i}", [0, 1, 2, 3], 1_000_000 * (i + 1)) for i in range(3)], tmp_path / "logs")
    line_grid().save(tmp_path / "grid.csv")
    code = main(["build", "--corpus", str(tmp_path / "logs"), "--grid", str(tmp_path / "grid.csv"),
                 "--out", str(tmp_path / "out")])
    assert code == 3
    assert "EmptyDataset" in capsys.readouterr().err
    assert not (tmp_path / "out" / "dataset.csv").exists()


def test_eval_centroid_matches_recomputation(built, tmp_path):
    _, ds = built
    assert main(["eval", "--dataset", str(ds), "--out", str(tmp_path), "--seed", "2", *FAST]) == 0
    config, header, rows = read_report(tmp_path / "cv_folds.csv")
    assert config["seed"] == 2
    got = {int(r[header.index("fold")]): float(r[header.index("mpe")]) for r in rows if r[1] == "centroid"}

    dataset = load_dataset(ds)
    paths = sorted(set(dataset.path_ids))
    fold_of_path = {paths[j]: pos % 3 for pos, j in enumerate(np.random.default_rng(2).permutation(len(paths)))}
    fold = np.array([fold_of_path[p] for p in dataset.path_ids])
    for f in range(3):
        centre = dataset.y[fold != f].mean(axis=0)
        err = np.hypot(*(dataset.y[fold == f] - centre).T).mean()
        assert got[f] == pytest.approx(err, rel=1e-12)
    _, header, rows = read_report(tmp_path / "cv_summary.csv")
    assert {r[0] for r in rows} == {"knn", "centroid", "mix"}


def test_train_then_holdout_eval(built, tmp_path):
    _, ds = built
    model = tmp_path / "m.model.json"
    assert main(["train", "--dataset", str(ds), "--model", str(model), "--out", str(tmp_path),
                 "--set", "train.model=knn", "--set", "models.params.knn.n_neighbors=3"]) == 0
    assert model.exists() and (tmp_path / "m.config.yaml").exists()
    assert main(["eval", "--dataset", str(ds), "--model", str(model), "--out", str(tmp_path)]) == 0
    config, header, rows = read_report(tmp_path / "holdout.csv")
    assert header == ["model", "mpe", "n_rows"] and config["paths"]["model"] == str(model)


def test_experiment_paths_summary_rows(built, tmp_path):
    _, ds = built
    assert main(["experiment", "paths", "--dataset", str(ds), "--out", str(tmp_path), *FAST,
                 "--set", "experiment.fractions=[0.25, 0.5, 0.75, 1.0]", "--set", "experiment.repeats=2"]) == 0
    _, header, rows = read_report(tmp_path / "paths_summary.csv")
    assert header[2] == "paths"
    for model in ("knn", "centroid", "mix"):
        assert [float(r[1]) for r in rows if r[0] == model] == [0.25, 0.5, 0.75, 1.0]


def test_experiment_resilience_rows(built, tmp_path):
    _, ds = built
    assert main(["experiment", "resilience", "--dataset", str(ds), "--out", str(tmp_path), *FAST,
                 "--set", "experiment.n_orders=2"]) == 0
    config, header, rows = read_report(tmp_path / "resilience_curve.csv")
    assert len(rows) == load_dataset(ds).n_bssid
    assert header == ["num_dropped", "mpe_knn", "mpe_centroid", "mpe_mix"]
    assert config["experiment"]["n_orders"] == 2


def test_experiment_grid_and_bssids(built, tmp_path):
    root, ds = built
    grid = str(root / "syn" / "grid.csv")
    assert main(["experiment", "grid", "--dataset", str(ds), "--grid", grid, "--out", str(tmp_path), *FAST]) == 0
    for name in ("grid_summary.csv", "grid_even.csv", "grid_odd.csv"):
        assert len(read_report(tmp_path / name)[2]) == 3
    assert main(["experiment", "bssids", "--dataset", str(ds), "--out", str(tmp_path), *FAST,
                 "--set", "experiment.repeats=2"]) == 0
    _, header, rows = read_report(tmp_path / "bssids_summary.csv")
    assert header[2] == "wifis" and len(rows) == 9


def test_reports_are_idempotent(built, tmp_path):
    _, ds = built
    for d in ("a", "b"):
        assert main(["eval", "--dataset", str(ds), "--out", str(tmp_path / d), *FAST]) == 0
    a = (tmp_path / "a" / "cv_folds.csv").read_text().split("\n", 1)[1]
    b = (tmp_path / "b" / "cv_folds.csv").read_text().split("\n", 1)[1]
    assert a == b


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"seed": 9, "models": {"params": {"gbm": {"num_leaves": 7}}}}))
    config = resolve_config(cfg, ["models.params.gbm.num_iterations=20", "cv.k=4"])
    assert config["seed"] == 9 and config["cv"]["k"] == 4
    assert config["models"]["params"]["gbm"] == {"num_iterations": 20, "num_leaves": 7}
    assert config["models"]["params"]["knn"] == {"n_neighbors": 45}
    with pytest.raises(ConfigError):
        resolve_config(tmp_path / "missing.yaml")
    with pytest.raises(ConfigError):
        resolve_config(None, ["no_equals_sign"])


def test_config_errors_exit_2(built, tmp_path, capsys):
    _, ds = built
    assert main(["eval", "--out", str(tmp_path)]) == 2
    assert main(["eval", "--dataset", str(ds), "--out", str(tmp_path), "--set", "models.use=[nope]"]) == 2
    assert main(["eval", "--dataset", str(ds), "--out", str(tmp_path),
                 "--set", "models.params.knn.bogus=1", "--set", "models.use=[knn]"]) == 2
    err = capsys.readouterr().err
    assert "unknown model" in err and "bogus" in err


def test_config_header_is_json(built, tmp_path):
    _, ds = built
    main(["eval", "--dataset", str(ds), "--out", str(tmp_path), *FAST])
    first = (tmp_path / "cv_summary.csv").read_text().splitlines()[0]
    assert first.startswith("# config: ")
    assert json.loads(first[len("# config: "):])["cv"]["k"] == 3
