"""WiFi fingerprint positioning from crowd-sensed walk logs."""

from .dataset import MISSING, BssidVocabulary, Dataset, DatasetConfig, build_dataset, load_dataset
from .floorplan import CheckpointGrid, load_grid, parse_grid
from .walklog import WalkLog, load_corpus, parse_log, write_log

__version__ = "0.1.0"

__all__ = [
    "MISSING", "BssidVocabulary", "CheckpointGrid", "Dataset", "DatasetConfig", "WalkLog",
    "build_dataset", "load_corpus", "load_dataset", "load_grid", "parse_grid", "parse_log", "write_log",
]
