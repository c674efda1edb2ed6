"""Command-line driver: ``crowdloc <command> [options]``.

Configuration is a YAML mapping merged over :data:`DEFAULTS`, then patched
with ``--set section.key=value`` overrides (values parsed as YAML). Every
command writes the resolved configuration next to its outputs and embeds it
in the header of each report CSV.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np
import yaml

from .dataset import DatasetConfig, build_dataset, dataset_stats, load_dataset, write_stats_histograms
from .evaluation import (
    bssid_subsample_experiment,
    cross_validate,
    grid_split_experiment,
    kfold_split_by_path,
    path_subsample_experiment,
    resilience_experiment,
    summarize_subsamples,
)
from .evaluation.cv import fit_fold
from .evaluation.metrics import mpe
from .evaluation.reports import (
    write_cv_summary,
    write_fold_report,
    write_grid_table,
    write_resilience_curve,
    write_subsample_summary,
)
from .exceptions import ConfigError, CrowdlocError, DataError, EmptyDataset
from .floorplan import load_grid
from .models import EnsembleRegressor, MODEL_REGISTRY, load_model, make_model, save_model
from .synthgen import CampaignConfig, generate_building, generate_campaign, make_environment, write_campaign
from .walklog import load_corpus

log = logging.getLogger("crowdloc")

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "out": "out",
    "paths": {"corpus": None, "grid": None, "dataset": None, "model": None},
    "synth": {
        "cols": 10, "rows": 10, "spacing_m": 2.5, "n_aps": 60, "n_paths": 400,
        "path_loss_exponent": 3.0, "shadowing_sigma_db": 4.0, "visibility_floor_dbm": -97.0,
        "tx_power_range": [-70.0, -60.0], "min_taps": 5, "max_taps": 30,
        "hotspot_fraction": 0.1, "emit_sensors": True,
    },
    "dataset": {"min_taps": 5, "min_checkpoint_presence": 50, "window_ms": 6000},
    "models": {
        "use": ["gbm", "knn"],
        "params": {"gbm": {"num_iterations": 500}, "knn": {"n_neighbors": 45}},
        "ensembles": {"2*gbm+knn": {"gbm": 2, "knn": 1}},
    },
    "train": {"model": "gbm"},
    "cv": {"k": 5},
    "experiment": {
        "fractions": None,
        "repeats": None,
        "n_orders": 10,
        "holdout_fold": 0,
        "max_test_rows": None,
    },
}


# ---------------------------------------------------------------- config

def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (extra or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def apply_override(config: dict, assignment: str) -> None:
    """Apply one ``a.b.c=value`` override in place."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"override must look like key=value, got {assignment!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from None
    node = config
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a non-mapping")
    node[parts[-1]] = value


def resolve_config(config_path=None, overrides=()) -> dict:
    config = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        try:
            loaded = yaml.safe_load(Path(config_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {config_path}: {exc}") from None
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping")
        config = _deep_merge(config, loaded or {})
    for assignment in overrides:
        apply_override(config, assignment)
    if not isinstance(config.get("seed"), int):
        raise ConfigError("seed must be an integer")
    return config


def _require(config, key) -> Path:
    value = config["paths"].get(key)
    if not value:
        raise ConfigError(f"paths.{key} is required for this command")
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"paths.{key} does not exist: {path}")
    return path


def _out_dir(config) -> Path:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_config(config, out_dir, name="config.yaml") -> Path:
    path = Path(out_dir) / name
    path.write_text(yaml.safe_dump(config, sort_keys=True), encoding="utf-8")
    return path


# ---------------------------------------------------------------- helpers

def _model_params(config, name):
    params = dict((config["models"].get("params") or {}).get(name) or {})
    cls = MODEL_REGISTRY.get(name)
    if cls is None:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(MODEL_REGISTRY)}")
    accepted = cls().get_params(deep=False)
    unknown = set(params) - set(accepted)
    if unknown:
        raise ConfigError(f"unknown parameters for {name}: {sorted(unknown)}")
    if "random_state" in accepted and "random_state" not in params:
        params["random_state"] = config["seed"]
    for key, value in params.items():
        if isinstance(accepted[key], tuple) and isinstance(value, list):
            params[key] = tuple(value)
    return params


def _estimators(config, names=None) -> dict:
    names = names or config["models"]["use"]
    if isinstance(names, str):
        names = [names]
    return {name: make_model(name, **_model_params(config, name)) for name in names}


def _ensembles(config, estimators) -> dict:
    ensembles = {}
    for name, weights in (config["models"].get("ensembles") or {}).items():
        if not isinstance(weights, dict) or not weights:
            raise ConfigError(f"ensemble {name!r} must map model names to weights")
        if all(m in estimators for m in weights):
            ensembles[name] = {m: float(w) for m, w in weights.items()}
        else:
            log.warning("skipping ensemble %s: components not in models.use", name)
    return ensembles


def _load_dataset(config):
    grid = load_grid(config["paths"]["grid"]) if config["paths"].get("grid") else None
    return load_dataset(_require(config, "dataset"), grid)


def _folds(config, dataset):
    return kfold_split_by_path(dataset, k=int(config["cv"]["k"]), seed=config["seed"])


def _fractions(config, default):
    value = config["experiment"].get("fractions")
    return tuple(float(f) for f in value) if value else default


def _repeats(config, default):
    value = config["experiment"].get("repeats")
    if value is None:
        return default
    if isinstance(value, dict):
        return {float(k): int(v) for k, v in value.items()}
    return int(value)


# ---------------------------------------------------------------- commands

def cmd_synth(config) -> int:
    s = config["synth"]
    out = _out_dir(config)
    grid = generate_building(int(s["cols"]), int(s["rows"]), float(s["spacing_m"]))
    try:
        env = make_environment(
            grid, n_aps=int(s["n_aps"]), seed=config["seed"],
            path_loss_exponent=float(s["path_loss_exponent"]),
            shadowing_sigma_db=float(s["shadowing_sigma_db"]),
            visibility_floor_dbm=float(s["visibility_floor_dbm"]),
            tx_power_range=tuple(float(v) for v in s["tx_power_range"]),
        )
        campaign_cfg = CampaignConfig(
            n_paths=int(s["n_paths"]), min_taps=int(s["min_taps"]), max_taps=int(s["max_taps"]),
            hotspot_fraction=float(s["hotspot_fraction"]), emit_sensors=bool(s["emit_sensors"]),
            seed=config["seed"],
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    campaign = generate_campaign(env, grid, campaign_cfg)
    write_campaign(campaign, out)
    write_config(config, out)
    print(f"wrote {len(campaign.logs)} walk logs to {out / 'logs'}")
    return 0


def cmd_build(config) -> int:
    corpus = _require(config, "corpus")
    grid = load_grid(_require(config, "grid"))
    logs, failures = load_corpus(corpus, errors="skip")
    for path, exc in failures.items():
        print(f"skipped {path}: {exc}", file=sys.stderr)
    d = config["dataset"]
    ds_cfg = DatasetConfig(min_taps=int(d["min_taps"]), min_checkpoint_presence=int(d["min_checkpoint_presence"]),
                           window_ms=int(d["window_ms"]))
    dataset = build_dataset(logs, grid, ds_cfg)
    if len(dataset) == 0:
        raise EmptyDataset(f"no rows survived filtering ({len(logs)} paths parsed, min_taps={ds_cfg.min_taps})")
    out = _out_dir(config)
    target = Path(config["paths"].get("dataset") or out / "dataset.csv")
    target.parent.mkdir(parents=True, exist_ok=True)
    dataset.save(target)
    write_config(config, target.parent, target.stem + ".config.yaml")
    stats = dataset_stats(dataset)
    for line in stats.summary_lines():
        print(line)
    return 0


def cmd_stats(config) -> int:
    dataset = _load_dataset(config)
    stats = dataset_stats(dataset)
    out = _out_dir(config)
    lines = stats.summary_lines()
    (out / "stats.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_stats_histograms(dataset, stats, out)
    write_config(config, out)
    for line in lines:
        print(line)
    return 0


def cmd_train(config) -> int:
    dataset = _load_dataset(config)
    if len(dataset) == 0:
        raise DataError("dataset has no rows")
    name = config["train"]["model"]
    ensembles = config["models"].get("ensembles") or {}
    if name in ensembles:
        estimators = _estimators(config, list(ensembles[name]))
        weights = _ensembles(config, estimators)[name]
        model = EnsembleRegressor([(m, estimators[m], w) for m, w in weights.items()])
    else:
        model = _estimators(config, [name])[name]
    fitted = fit_fold(model, dataset, np.arange(len(dataset)))
    out = _out_dir(config)
    stem = re.sub(r"[^A-Za-z0-9_-]+", "_", name)
    target = Path(config["paths"].get("model") or out / f"{stem}.model.json")
    target.parent.mkdir(parents=True, exist_ok=True)
    save_model(fitted, target, dataset.vocabulary.fingerprint)
    write_config(config, target.parent, target.name.split(".")[0] + ".config.yaml")
    print(f"saved {name} to {target}")
    return 0


def cmd_eval(config) -> int:
    """Cross-validate the configured models, or score a saved model on a dataset."""
    dataset = _load_dataset(config)
    out = _out_dir(config)
    model_path = config["paths"].get("model")
    if model_path:
        model, fingerprint = load_model(_require(config, "model"))
        if fingerprint and fingerprint != dataset.vocabulary.fingerprint:
            raise DataError("model was trained on a different BSSID vocabulary")
        value = mpe(dataset.y, model.predict(dataset.X))
        name = Path(model_path).name.split(".")[0]
        with open(out / "holdout.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write("# config: " + _json(config) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "mpe", "n_rows"])
            w.writerow([name, repr(float(value)), len(dataset)])
        print(f"{name}: MPE {value:.4f} m on {len(dataset)} rows")
    else:
        estimators = _estimators(config)
        folds = _folds(config, dataset)
        reports = cross_validate(estimators, dataset, folds, _ensembles(config, estimators),
                                 experiment="cv", config={"seed": config["seed"]}, n_jobs=config["jobs"])
        write_fold_report(reports.values(), out / "cv_folds.csv", config)
        write_cv_summary(reports.values(), out / "cv_summary.csv", config)
        for r in reports.values():
            print(f"{r.model}: mean MPE {r.mean_mpe:.4f} m (fold std {r.std_mpe:.4f}, row std {r.row_error_std:.4f})")
    write_config(config, out)
    return 0


def _json(config):
    return json.dumps(config, sort_keys=True, default=str)


def cmd_experiment(config, which) -> int:
    dataset = _load_dataset(config)
    estimators = _estimators(config)
    ensembles = _ensembles(config, estimators)
    folds = _folds(config, dataset)
    out = _out_dir(config)
    exp = config["experiment"]
    seed = config["seed"]
    jobs = config["jobs"]
    if which in ("paths", "bssids"):
        if which == "paths":
            reports = path_subsample_experiment(
                estimators, dataset, folds, _fractions(config, (0.25, 0.5, 0.75, 1.0)),
                _repeats(config, {0.25: 50, 0.5: 40, 0.75: 30, 1.0: 1}), seed, ensembles, jobs)
            label = "paths"
        else:
            reports = bssid_subsample_experiment(
                estimators, dataset, folds, _fractions(config, (0.75, 0.5, 0.25)),
                _repeats(config, {0.75: 30, 0.5: 40, 0.25: 50}), seed, ensembles, jobs)
            label = "wifis"
        write_fold_report(reports, out / f"{which}_folds.csv", config)
        summaries = summarize_subsamples(reports)
        write_subsample_summary(summaries, out / f"{which}_summary.csv", label, config)
        for s in summaries:
            print(f"{s.model} {label}={s.used}: {s.mean_mpe:.4f} +- {s.std_mpe:.4f} ({s.repeats} repeats)")
    elif which == "resilience":
        fold = int(exp["holdout_fold"])
        fold_of = folds.fold_of(dataset.path_ids)
        train_idx = np.flatnonzero(fold_of != fold)
        test_idx = np.flatnonzero(fold_of == fold)
        limit = exp.get("max_test_rows")
        if limit and len(test_idx) > int(limit):
            rng = np.random.default_rng(seed)
            test_idx = np.sort(rng.choice(test_idx, size=int(limit), replace=False))
        models = {name: fit_fold(est, dataset, train_idx) for name, est in estimators.items()}
        curve = resilience_experiment(models, dataset.X[test_idx], dataset.y[test_idx],
                                      n_orders=int(exp["n_orders"]), seed=seed, ensembles=ensembles)
        write_resilience_curve(curve, out / "resilience_curve.csv", config)
        for name in curve.names:
            m = curve.mean(name)
            print(f"{name}: {m[0]:.4f} m with all BSSIDs, {m[-1]:.4f} m with one left")
    elif which == "grid":
        grid = load_grid(_require(config, "grid"))
        table, per_parity = grid_split_experiment(estimators, dataset, grid, folds, ensembles, jobs)
        write_grid_table(table, out / "grid_summary.csv", config)
        for parity, rows in per_parity.items():
            write_grid_table(rows, out / f"grid_{parity}.csv", config)
        for row in table:
            print(f"{row.model}: same {row.same_split:.4f}, other {row.other_split:.4f}, average {row.average:.4f}")
    else:  # pragma: no cover - argparse restricts the choices
        raise ConfigError(f"unknown experiment {which!r}")
    write_config(config, out)
    return 0


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set models.params.gbm.num_iterations=200")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes for folds and repeats")
    common.add_argument("--corpus", help="directory of walk logs")
    common.add_argument("--grid", help="checkpoint grid CSV")
    common.add_argument("--dataset", help="dataset CSV")
    common.add_argument("--model", help="model file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="crowdloc", description="WiFi fingerprint positioning pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("synth", "generate a synthetic campaign"), ("build", "build a dataset from walk logs"),
                       ("train", "fit a model on a whole dataset"), ("eval", "cross-validate models"),
                       ("stats", "dataset statistics")):
        sub.add_parser(name, parents=[common], help=text)
    exp = sub.add_parser("experiment", parents=[common], help="run an ablation experiment")
    exp.add_argument("which", choices=["paths", "bssids", "resilience", "grid"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = resolve_config(args.config, args.overrides)
        for key, value in (("out", args.out), ("seed", args.seed), ("jobs", args.jobs)):
            if value is not None:
                config[key] = value
        for key in ("corpus", "grid", "dataset", "model"):
            value = getattr(args, key)
            if value is not None:
                config["paths"][key] = value
        if args.command == "experiment":
            return cmd_experiment(config, args.which)
        return COMMANDS[args.command](config)
    except CrowdlocError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return ConfigError.exit_code


COMMANDS = {"synth": cmd_synth, "build": cmd_build, "train": cmd_train, "eval": cmd_eval, "stats": cmd_stats}


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
