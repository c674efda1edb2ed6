"""From walk logs to a fingerprint table.

Pipeline: drop short paths, assign WiFi scan bursts to the nearest-in-time
checkpoint tap, keep BSSIDs that are seen at enough distinct checkpoints and
are not phone hotspots, then write one row per assigned burst with the RSSI
of every retained BSSID (``MISSING`` when not heard).
"""

from __future__ import annotations

import bisect
import csv
import hashlib
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import DataError, EmptyDataset, EmptyVocabulary
from .floorplan import CheckpointGrid
from .walklog import WalkLog, format_record

logger = logging.getLogger(__name__)

MISSING = -999
HOTSPOT_KEYWORDS = ("Android", "Galaxy", "iPhone", "HUAWEI", "Pixel", "Nokia", "Honor")
BASE_COLUMNS = ("path_id", "timestamp_ms", "checkpoint_id", "x_m", "y_m")


@dataclass
class DatasetConfig:
    min_taps: int = 5
    min_checkpoint_presence: int = 50
    hotspot_keywords: tuple = HOTSPOT_KEYWORDS
    window_ms: int = 6000


@dataclass
class ScanGroup:
    """One WiFi burst assigned to a checkpoint tap."""

    path_id: str
    timestamp_ms: int
    checkpoint_id: int
    tap_timestamp_ms: int
    observations: list


@dataclass
class BssidVocabulary:
    entries: list
    min_checkpoint_presence: int = 50
    hotspot_keywords: tuple = HOTSPOT_KEYWORDS
    window_ms: int = 6000
    corpus_fingerprint: str = ""
    ssids: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = list(self.entries)
        self.index = {b: i for i, b in enumerate(self.entries)}

    def __len__(self):
        return len(self.entries)

    def subset(self, columns) -> "BssidVocabulary":
        keep = [self.entries[int(j)] for j in columns]
        return BssidVocabulary(
            sorted(keep), self.min_checkpoint_presence, self.hotspot_keywords,
            self.window_ms, self.corpus_fingerprint, {b: self.ssids.get(b, []) for b in keep},
        )

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.entries).encode()).hexdigest()

    def to_json(self) -> str:
        return json.dumps(
            {
                "bssids": self.entries,
                "min_checkpoint_presence": self.min_checkpoint_presence,
                "hotspot_keywords": list(self.hotspot_keywords),
                "window_ms": self.window_ms,
                "corpus_fingerprint": self.corpus_fingerprint,
                "ssids": {b: self.ssids.get(b, []) for b in self.entries},
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "BssidVocabulary":
        d = json.loads(text)
        return cls(
            d["bssids"], d["min_checkpoint_presence"], tuple(d["hotspot_keywords"]),
            d["window_ms"], d.get("corpus_fingerprint", ""), d.get("ssids", {}),
        )


@dataclass(frozen=True)
class FeatureRow:
    path_id: str
    timestamp_ms: int
    checkpoint_id: int
    target: tuple
    features: np.ndarray


class Dataset:
    """Column-oriented fingerprint table.

    ``X`` holds RSSI (dBm) per vocabulary entry with ``MISSING`` for absent
    BSSIDs, ``y`` the checkpoint (x, y) in meters.
    """

    def __init__(self, X, y, path_ids, timestamps, checkpoint_ids, vocabulary, grid=None):
        self.X = np.asarray(X, dtype=float).reshape(len(path_ids), len(vocabulary))
        self.y = np.asarray(y, dtype=float).reshape(-1, 2)
        self.path_ids = np.asarray(path_ids, dtype=object)
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.checkpoint_ids = np.asarray(checkpoint_ids, dtype=np.int64)
        self.vocabulary = vocabulary
        self.grid = grid

    def __len__(self):
        return len(self.path_ids)

    @property
    def n_bssid(self) -> int:
        return len(self.vocabulary)

    @property
    def paths(self) -> list[str]:
        return sorted(set(self.path_ids.tolist()))

    def rows(self):
        for i in range(len(self)):
            yield FeatureRow(
                self.path_ids[i], int(self.timestamps[i]), int(self.checkpoint_ids[i]),
                (float(self.y[i, 0]), float(self.y[i, 1])), self.X[i],
            )

    def take(self, mask_or_index) -> "Dataset":
        idx = np.asarray(mask_or_index)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return Dataset(
            self.X[idx], self.y[idx], self.path_ids[idx], self.timestamps[idx],
            self.checkpoint_ids[idx], self.vocabulary, self.grid,
        )

    def select_paths(self, paths) -> "Dataset":
        return self.take(np.isin(self.path_ids, list(paths)))

    def select_columns(self, columns) -> "Dataset":
        """Restrict to a subset of BSSIDs; columns keep vocabulary order."""
        columns = np.sort(np.asarray(columns, dtype=int))
        return Dataset(
            self.X[:, columns], self.y, self.path_ids, self.timestamps,
            self.checkpoint_ids, self.vocabulary.subset(columns), self.grid,
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(BASE_COLUMNS) + [f"rssid{j + 1}" for j in range(self.n_bssid)])
            for i in range(len(self)):
                feats = [int(v) if float(v).is_integer() else repr(float(v)) for v in self.X[i]]
                w.writerow(
                    [self.path_ids[i], int(self.timestamps[i]), int(self.checkpoint_ids[i]),
                     repr(float(self.y[i, 0])), repr(float(self.y[i, 1]))] + feats
                )

    def save(self, path) -> tuple[Path, Path]:
        path = Path(path)
        self.to_csv(path)
        sidecar = vocabulary_path(path)
        sidecar.write_text(self.vocabulary.to_json(), encoding="utf-8")
        return path, sidecar


def vocabulary_path(dataset_path) -> Path:
    dataset_path = Path(dataset_path)
    return dataset_path.with_name(dataset_path.stem + ".vocab.json")


def load_dataset(path, grid: Optional[CheckpointGrid] = None) -> Dataset:
    path = Path(path)
    vocab = BssidVocabulary.from_json(vocabulary_path(path).read_text(encoding="utf-8"))
    path_ids, ts, cids, ys, xs = [], [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:5]) != BASE_COLUMNS:
            raise DataError(f"{path}: unexpected dataset header")
        if len(header) - 5 != len(vocab):
            raise DataError(f"{path}: {len(header) - 5} feature columns but vocabulary has {len(vocab)}")
        for row in reader:
            path_ids.append(row[0])
            ts.append(int(row[1]))
            cids.append(int(row[2]))
            ys.append((float(row[3]), float(row[4])))
            xs.append([float(v) for v in row[5:]])
    X = np.array(xs, dtype=float).reshape(len(path_ids), len(vocab))
    return Dataset(X, np.array(ys).reshape(-1, 2), path_ids, ts, cids, vocab, grid)


def filter_paths(logs, min_taps: int = 5) -> list[WalkLog]:
    """Keep logs with more than four checkpoint taps (``min_taps`` = 5)."""
    return [log for log in logs if len(log.taps) >= min_taps]


def _bursts(walklog: WalkLog) -> list[tuple[int, list]]:
    groups: dict[int, list] = {}
    for obs in walklog.wifi:
        groups.setdefault(obs.timestamp_ms, []).append(obs)
    return sorted(groups.items())


def associate_scans(walklog: WalkLog, grid: Optional[CheckpointGrid] = None, window_ms: int = 6000) -> list[ScanGroup]:
    """Assign each burst to the nearest-in-time tap within ``window_ms``.

    A burst equidistant from two taps goes to the earlier one. Bursts outside
    every window, or whose tap is not a known checkpoint, are dropped.
    """
    taps = sorted(walklog.taps, key=lambda t: t.timestamp_ms)
    if not taps:
        return []
    times = [t.timestamp_ms for t in taps]
    out = []
    for ts, obs in _bursts(walklog):
        i = bisect.bisect_left(times, ts)
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(taps):
                dt = abs(ts - times[j])
                if best is None or dt < best[0]:
                    best = (dt, j)
        dt, j = best
        if dt > window_ms:
            continue
        tap = taps[j]
        if grid is not None and tap.checkpoint_id not in grid.points:
            continue
        out.append(ScanGroup(walklog.path_id, ts, tap.checkpoint_id, tap.timestamp_ms, obs))
    return out


def _is_hotspot(ssid: str, keywords) -> bool:
    low = ssid.lower()
    return any(k.lower() in low for k in keywords)


def corpus_fingerprint(logs) -> str:
    """SHA-256 over the tap and WiFi records of every log, ordered by path id."""
    h = hashlib.sha256()
    for log in sorted(logs, key=lambda l: l.path_id):
        h.update(log.path_id.encode() + b"\n")
        for rec in log.records:
            if not hasattr(rec, "values"):
                h.update(format_record(rec).encode() + b"\n")
    return h.hexdigest()


def build_vocabulary(
    logs,
    grid: Optional[CheckpointGrid] = None,
    min_checkpoint_presence: int = 50,
    hotspot_keywords=HOTSPOT_KEYWORDS,
    window_ms: int = 6000,
    groups: Optional[dict] = None,
) -> BssidVocabulary:
    """Two-pass reduce: count distinct checkpoints per BSSID, then filter.

    ``groups`` may carry precomputed ``associate_scans`` output per path id.
    """
    presence: dict[str, set] = defaultdict(set)
    ssids: dict[str, set] = defaultdict(set)
    for log in logs:
        for obs in log.wifi:
            ssids[obs.bssid].add(obs.ssid)
        assoc = groups[log.path_id] if groups is not None else associate_scans(log, grid, window_ms)
        for g in assoc:
            for obs in g.observations:
                presence[obs.bssid].add(g.checkpoint_id)
    kept = sorted(
        b for b, cps in presence.items()
        if len(cps) >= min_checkpoint_presence
        and not any(_is_hotspot(s, hotspot_keywords) for s in ssids[b])
    )
    if not kept:
        raise EmptyVocabulary(
            f"no BSSID seen at >= {min_checkpoint_presence} distinct checkpoints; "
            "the corpus may be too small for this threshold"
        )
    return BssidVocabulary(
        kept, min_checkpoint_presence, tuple(hotspot_keywords), window_ms,
        corpus_fingerprint(logs), {b: sorted(ssids[b]) for b in kept},
    )


def vectorize(observations, vocabulary: BssidVocabulary) -> np.ndarray:
    """RSSI vector over the vocabulary; the strongest reading wins on duplicates."""
    vec = np.full(len(vocabulary), float(MISSING))
    for obs in observations:
        j = vocabulary.index.get(obs.bssid)
        if j is not None and (vec[j] == MISSING or obs.rssi_dbm > vec[j]):
            vec[j] = obs.rssi_dbm
    return vec


def _empty_dataset(config: DatasetConfig, grid) -> Dataset:
    vocab = BssidVocabulary([], config.min_checkpoint_presence, tuple(config.hotspot_keywords), config.window_ms)
    return Dataset(np.zeros((0, 0)), np.zeros((0, 2)), [], [], [], vocab, grid)


def build_dataset(logs, grid: CheckpointGrid, config: Optional[DatasetConfig] = None) -> Dataset:
    config = config or DatasetConfig()
    kept = filter_paths(logs, config.min_taps)
    if not kept:
        return _empty_dataset(config, grid)
    groups = {log.path_id: associate_scans(log, grid, config.window_ms) for log in kept}
    vocab = build_vocabulary(
        kept, grid, config.min_checkpoint_presence, config.hotspot_keywords, config.window_ms, groups
    )
    path_ids, ts, cids, ys, xs = [], [], [], [], []
    for log in kept:
        for g in groups[log.path_id]:
            path_ids.append(g.path_id)
            ts.append(g.timestamp_ms)
            cids.append(g.checkpoint_id)
            ys.append(grid.points[g.checkpoint_id])
            xs.append(vectorize(g.observations, vocab))
    X = np.array(xs).reshape(len(path_ids), len(vocab))
    return Dataset(X, np.array(ys, dtype=float).reshape(-1, 2), path_ids, ts, cids, vocab, grid)


@dataclass
class DatasetStats:
    n_rows: int
    n_paths: int
    n_bssid: int
    rows_per_path: float
    rssi_min: float
    rssi_max: float
    rssi_median: float
    rssi_mean: float
    sentinel_fraction: float
    presence_counts: dict  # bssid -> rows where it was heard
    presence_pct: dict

    def presence_summary(self) -> dict:
        counts = np.array(list(self.presence_counts.values()), dtype=float)
        pct = 100.0 * counts / max(self.n_rows, 1)
        return {
            "min": float(counts.min()), "min_pct": float(pct.min()),
            "max": float(counts.max()), "max_pct": float(pct.max()),
            "median": float(np.median(counts)), "median_pct": float(np.median(pct)),
        }

    def summary_lines(self) -> list[str]:
        p = self.presence_summary()
        return [
            f"{self.n_rows} rows, {self.n_paths} paths, {self.n_bssid} BSSIDs",
            f"rows per path: {self.rows_per_path:.1f}",
            f"RSSI range {self.rssi_min:g} to {self.rssi_max:g} dBm, "
            f"median {self.rssi_median:g}, mean {self.rssi_mean:.1f}",
            f"BSSID presence: min {p['min']:.0f} ({p['min_pct']:.1f}%), "
            f"max {p['max']:.0f} ({p['max_pct']:.1f}%), median {p['median']:.0f} ({p['median_pct']:.1f}%)",
        ]


def dataset_stats(dataset: Dataset) -> DatasetStats:
    if len(dataset) == 0 or dataset.n_bssid == 0:
        raise EmptyDataset("dataset has no rows")
    heard = dataset.X != MISSING
    values = dataset.X[heard]
    if values.size == 0:
        raise EmptyDataset("dataset has no RSSI readings")
    counts = heard.sum(axis=0)
    n = len(dataset)
    n_paths = len(dataset.paths)
    return DatasetStats(
        n_rows=n,
        n_paths=n_paths,
        n_bssid=dataset.n_bssid,
        rows_per_path=n / n_paths,
        rssi_min=float(values.min()),
        rssi_max=float(values.max()),
        rssi_median=float(np.median(values)),
        rssi_mean=float(values.mean()),
        sentinel_fraction=float(1.0 - heard.mean()),
        presence_counts={b: int(c) for b, c in zip(dataset.vocabulary.entries, counts)},
        presence_pct={b: 100.0 * int(c) / n for b, c in zip(dataset.vocabulary.entries, counts)},
    )


def write_stats_histograms(dataset: Dataset, stats: DatasetStats, out_dir) -> tuple[Path, Path]:
    """``rssi_histogram.csv`` (count per dBm) and ``bssid_presence.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    values = dataset.X[dataset.X != MISSING].astype(int)
    uniq, cnt = np.unique(values, return_counts=True)
    rssi_path = out / "rssi_histogram.csv"
    with open(rssi_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rssi_dbm", "count"])
        w.writerows(zip(uniq.tolist(), cnt.tolist()))
    presence_path = out / "bssid_presence.csv"
    with open(presence_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column", "bssid", "count", "percent"])
        for j, b in enumerate(dataset.vocabulary.entries):
            w.writerow([f"rssid{j + 1}", b, stats.presence_counts[b], f"{stats.presence_pct[b]:.3f}"])
    return rssi_path, presence_path
