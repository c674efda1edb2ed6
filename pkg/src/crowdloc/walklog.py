"""Reading and writing raw walk logs.

A walk log is the text file produced for one recorded path. Each line is
``<timestamp_ms> TYPE_<KIND> <payload...>``::

    1633437600157 TYPE_GYROSCOPE 0.118198946 -0.20234315 -6.8720314E-4  3
    1633437608241 TYPE_CHECKPOINT 12
    1633437608615 TYPE_WIFI f4:db:e6:aa:bb:cc SSID1 -57 5620

Sensor lines carry three values and a trailing integer status, WiFi lines
carry BSSID, SSID, RSSI (dBm) and frequency (MHz), checkpoint lines carry
the tapped checkpoint id.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .exceptions import EmptyLog, MalformedLine

logger = logging.getLogger(__name__)

SENSOR_KINDS = ("gyroscope", "rotation_vector", "accelerometer", "magnetic_field")
RSSI_RANGE = (-120, 0)

_MAC_RE = re.compile(r"^[0-9a-fA-F]{2}(?::[0-9a-fA-F]{2}){5}$")


@dataclass(frozen=True, slots=True)
class SensorSample:
    timestamp_ms: int
    kind: str
    values: tuple[float, float, float]
    status: int

    def __post_init__(self):
        if self.kind not in SENSOR_KINDS:
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        if len(self.values) != 3:
            raise ValueError("sensor samples carry exactly 3 values")


@dataclass(frozen=True, slots=True)
class WifiObservation:
    timestamp_ms: int
    bssid: str
    ssid: str
    rssi_dbm: int
    frequency_mhz: int


@dataclass(frozen=True, slots=True)
class CheckpointTap:
    timestamp_ms: int
    checkpoint_id: int


Record = Union[SensorSample, WifiObservation, CheckpointTap]


@dataclass(frozen=True)
class ParseWarning:
    line_no: int
    kind: str  # "unknown_type" or "out_of_order"
    message: str


@dataclass
class WalkLog:
    path_id: str
    records: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def taps(self) -> list[CheckpointTap]:
        return [r for r in self.records if isinstance(r, CheckpointTap)]

    @property
    def wifi(self) -> list[WifiObservation]:
        return [r for r in self.records if isinstance(r, WifiObservation)]

    @property
    def sensors(self) -> list[SensorSample]:
        return [r for r in self.records if isinstance(r, SensorSample)]

    @property
    def skipped(self) -> list[ParseWarning]:
        """Lines that were well-formed but carried an unknown record type."""
        return [w for w in self.warnings if w.kind == "unknown_type"]


def normalize_bssid(token: str) -> str:
    if not _MAC_RE.match(token):
        raise ValueError(f"not a MAC address: {token!r}")
    return token.lower()


def _parse_line(line_no: int, line: str):
    tokens = line.split()
    if len(tokens) < 2:
        raise MalformedLine(line_no, line, "expected timestamp and type")
    try:
        ts = int(tokens[0])
    except ValueError:
        raise MalformedLine(line_no, line, "bad timestamp") from None
    type_token = tokens[1]
    if not type_token.startswith("TYPE_"):
        raise MalformedLine(line_no, line, "missing TYPE_ token")
    kind = type_token[5:].lower()

    try:
        if kind == "checkpoint":
            if len(tokens) != 3:
                raise MalformedLine(line_no, line, "checkpoint lines have 3 fields")
            cid = int(tokens[2])
            if cid < 0:
                raise MalformedLine(line_no, line, "negative checkpoint id")
            return CheckpointTap(ts, cid)

        if kind == "wifi":
            # timestamp, type and BSSID from the left; frequency and RSSI from
            # the right; whatever remains in between is the SSID.
            left = line.strip().split(None, 3)
            if len(left) < 4:
                raise MalformedLine(line_no, line, "wifi lines have >= 5 fields")
            right = left[3].rsplit(None, 2)
            if len(right) == 2:
                ssid, rssi_tok, freq_tok = "", right[0], right[1]
            else:
                ssid, rssi_tok, freq_tok = right
            bssid = normalize_bssid(left[2])
            rssi, freq = int(rssi_tok), int(freq_tok)
            if not RSSI_RANGE[0] <= rssi <= RSSI_RANGE[1]:
                raise MalformedLine(line_no, line, f"RSSI {rssi} outside {RSSI_RANGE}")
            return WifiObservation(ts, bssid, ssid, rssi, freq)

        if kind in SENSOR_KINDS:
            if len(tokens) != 6:
                raise MalformedLine(line_no, line, "sensor lines have 3 values and a status")
            values = (float(tokens[2]), float(tokens[3]), float(tokens[4]))
            return SensorSample(ts, kind, values, int(tokens[5]))
    except MalformedLine:
        raise
    except ValueError as exc:
        raise MalformedLine(line_no, line, str(exc)) from None

    return ParseWarning(line_no, "unknown_type", f"unknown record type {type_token}")


def parse_log(text: str, path_id: str) -> WalkLog:
    """Parse the contents of one walk-log file.

    Records are stably sorted by timestamp; out-of-order lines and unknown
    record types are reported in ``WalkLog.warnings``.
    """
    records = []
    warnings = []
    last_ts = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        item = _parse_line(line_no, line)
        if isinstance(item, ParseWarning):
            warnings.append(item)
            continue
        if last_ts is not None and item.timestamp_ms < last_ts:
            warnings.append(
                ParseWarning(line_no, "out_of_order", f"timestamp {item.timestamp_ms} < {last_ts}")
            )
        last_ts = item.timestamp_ms if last_ts is None else max(last_ts, item.timestamp_ms)
        records.append(item)
    if not records:
        raise EmptyLog(f"no records parsed for path {path_id!r}")
    records.sort(key=lambda r: r.timestamp_ms)
    return WalkLog(path_id, records, warnings)


def format_record(record: Record) -> str:
    if isinstance(record, CheckpointTap):
        return f"{record.timestamp_ms} TYPE_CHECKPOINT {record.checkpoint_id}"
    if isinstance(record, WifiObservation):
        return (
            f"{record.timestamp_ms} TYPE_WIFI {record.bssid.lower()} {record.ssid} "
            f"{record.rssi_dbm} {record.frequency_mhz}"
        )
    if isinstance(record, SensorSample):
        v = record.values
        return (
            f"{record.timestamp_ms} TYPE_{record.kind.upper()} "
            f"{v[0]!r} {v[1]!r} {v[2]!r} {record.status}"
        )
    raise TypeError(f"not a walk-log record: {record!r}")


def write_log(walklog: WalkLog) -> str:
    return "".join(format_record(r) + "\n" for r in walklog.records)


@dataclass(frozen=True)
class UnknownCheckpoint:
    checkpoint_id: int
    timestamp_ms: int


@dataclass(frozen=True)
class NonAdjacentTransition:
    from_id: int
    to_id: int
    timestamp_ms: int


def validate_path(walklog: WalkLog, grid) -> list:
    """Check the tap sequence against the checkpoint graph.

    Tapping the same checkpoint twice in a row is allowed. Transitions that
    involve an unknown checkpoint are only reported as ``UnknownCheckpoint``.
    """
    violations = []
    prev = None
    for tap in walklog.taps:
        known = tap.checkpoint_id in grid.points
        if not known:
            violations.append(UnknownCheckpoint(tap.checkpoint_id, tap.timestamp_ms))
        if prev is not None and known and prev.checkpoint_id in grid.points:
            a, b = prev.checkpoint_id, tap.checkpoint_id
            if a != b and not grid.is_adjacent(a, b):
                violations.append(NonAdjacentTransition(a, b, tap.timestamp_ms))
        prev = tap
    return violations


def read_log(path) -> WalkLog:
    path = Path(path)
    return parse_log(path.read_text(encoding="utf-8"), path.stem)


def load_corpus(directory, pattern: str = "*.txt", errors: str = "raise"):
    """Parse every walk log in ``directory``.

    With ``errors="skip"`` files that fail to parse are logged and left out;
    the second return value maps their file names to the error.
    """
    directory = Path(directory)
    logs, failures = [], {}
    for path in sorted(directory.glob(pattern)):
        if not path.is_file():
            continue
        try:
            logs.append(read_log(path))
        except (MalformedLine, EmptyLog) as exc:
            if errors == "raise":
                raise
            logger.warning("skipping %s: %s", path.name, exc)
            failures[path.name] = exc
    return logs, failures


def write_corpus(logs: Iterable[WalkLog], directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for log in logs:
        target = directory / f"{log.path_id}.txt"
        # newline="" keeps "\n" on every platform so files are byte-stable
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(write_log(log))
        written.append(target)
    return written
