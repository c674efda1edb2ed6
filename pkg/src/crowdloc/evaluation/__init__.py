from .cv import EvalReport, FoldAssignment, cross_validate, kfold_split_by_path, run_cv
from .experiments import (
    BSSID_REPEATS,
    PATH_REPEATS,
    GridSplitRow,
    ResilienceCurve,
    bssid_subsample_experiment,
    count_for_fraction,
    grid_split_experiment,
    path_subsample_experiment,
    resilience_experiment,
    summarize_subsamples,
)
from .metrics import mpe, position_errors

__all__ = [
    "BSSID_REPEATS", "EvalReport", "FoldAssignment", "GridSplitRow", "PATH_REPEATS", "ResilienceCurve",
    "bssid_subsample_experiment", "count_for_fraction", "cross_validate", "grid_split_experiment",
    "kfold_split_by_path", "mpe", "path_subsample_experiment", "position_errors",
    "resilience_experiment", "run_cv", "summarize_subsamples",
]
