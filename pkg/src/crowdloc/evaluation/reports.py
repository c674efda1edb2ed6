"""CSV emitters for evaluation results.

Every file opens with ``# config: {...}`` comment lines holding the run's
resolved configuration, so a report can be reproduced from its header.
Read them back with ``csv`` after skipping lines that start with ``#``.
"""

import csv
import json
from pathlib import Path


def _open(path, config):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", newline="", encoding="utf-8")
    if config is not None:
        fh.write("# config: " + json.dumps(config, sort_keys=True, default=str) + "\n")
    return fh, csv.writer(fh, lineterminator="\n")


def _num(v):
    return repr(float(v))


def write_fold_report(reports, path, config=None):
    """One row per (report, fold)."""
    fh, w = _open(path, config)
    with fh:
        w.writerow(["experiment", "model", "fraction", "repeat", "fold", "mpe", "n_rows"])
        for r in reports:
            for fold, value in enumerate(r.fold_mpe):
                w.writerow([r.experiment, r.model, r.config.get("fraction", ""), r.config.get("repeat", ""),
                            fold, _num(value), r.n_rows])


def write_cv_summary(reports, path, config=None):
    """Model table: mean/std over folds plus the pooled per-row std."""
    fh, w = _open(path, config)
    with fh:
        w.writerow(["model", "mean_mpe", "std_mpe_folds", "std_error_rows", "pooled_mpe", "n_rows"])
        for r in reports:
            w.writerow([r.model, _num(r.mean_mpe), _num(r.std_mpe), _num(r.row_error_std),
                        _num(r.pooled_mpe), r.n_rows])


def write_subsample_summary(summaries, path, used_label, config=None):
    """Rows of (model, fraction, paths|wifis, repeats, mean, std)."""
    fh, w = _open(path, config)
    with fh:
        w.writerow(["model", "fraction", used_label, "repeats", "mean_mpe", "std_mpe"])
        for s in summaries:
            w.writerow([s.model, s.fraction, s.used, s.repeats, _num(s.mean_mpe), _num(s.std_mpe)])


def write_resilience_curve(curve, path, config=None):
    fh, w = _open(path, config)
    with fh:
        names = curve.names
        w.writerow(["num_dropped"] + [f"mpe_{n}" for n in names])
        means = {n: curve.mean(n) for n in names}
        for i, k in enumerate(curve.num_dropped):
            w.writerow([int(k)] + [_num(means[n][i]) for n in names])


def write_grid_table(rows, path, config=None):
    fh, w = _open(path, config)
    with fh:
        w.writerow(["model", "same_split", "other_split", "average"])
        for r in rows:
            w.writerow([r.model, _num(r.same_split), _num(r.other_split), _num(r.average)])


def read_report(path):
    """Return ``(config, header, rows)`` from a report CSV."""
    config = None
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# config: "):
                config = json.loads(line[len("# config: "):])
            elif not line.startswith("#"):
                lines.append(line)
    rows = list(csv.reader(lines))
    return config, rows[0], rows[1:]
