"""Synthetic crowd-sensing campaigns.

Builds a rectangular checkpoint grid, scatters access points over it and
lets simulated participants random-walk the adjacency graph. Received
signal strength follows a log-distance path-loss model with log-normal
shadowing. The output is byte-compatible with real walk logs, plus the
ground truth needed to check the rest of the pipeline against.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .exceptions import DisconnectedGrid, InvalidDims
from .floorplan import CheckpointGrid
from .walklog import CheckpointTap, SensorSample, WalkLog, WifiObservation, write_corpus

RSSI_CEILING_DBM = -31.0

INFRA_SSIDS = ("eduroam", "Campus-Staff", "Campus-Guest", "LabNet", "Library-WiFi", "Printer-Net")
HOTSPOT_SSIDS = ("AndroidAP", "Galaxy S21", "iPhone de Maria", "HUAWEI P30", "Pixel_7", "Nokia 8.3", "HONOR 50")
FREQUENCIES_MHZ = (2412, 2437, 2462, 5180, 5240, 5620)


@dataclass(frozen=True)
class AccessPoint:
    bssid: str
    ssid: str
    position: tuple[float, float]
    tx_power_dbm: float
    frequency_mhz: int


@dataclass
class RadioEnvironment:
    aps: list
    path_loss_exponent: float = 3.0
    shadowing_sigma_db: float = 4.0
    visibility_floor_dbm: float = -97.0
    reference_distance_m: float = 1.0
    seed: int = 0
    # optional extra loss in dB for (ap, position), e.g. wall attenuation
    attenuation: Optional[Callable] = None

    def __post_init__(self):
        if self.path_loss_exponent <= 0:
            raise ValueError("path loss exponent must be positive")
        if self.visibility_floor_dbm >= 0:
            raise ValueError("visibility floor must be negative")
        bssids = [ap.bssid for ap in self.aps]
        if len(set(bssids)) != len(bssids):
            raise ValueError("duplicate BSSID in environment")


@dataclass
class CampaignConfig:
    n_paths: int = 400
    min_taps: int = 5
    max_taps: int = 30
    dwell_ms: tuple[int, int] = (3000, 4500)
    scan_period_ms: int = 2000
    sensor_period_ms: int = 50
    lead_ms: int = 1500
    tail_ms: int = 1500
    hotspot_fraction: float = 0.1
    n_hotspot_devices: int = 4
    start_epoch_ms: int = 1633437600000
    emit_sensors: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.scan_period_ms <= 0 or self.sensor_period_ms <= 0:
            raise ValueError("scan and sensor periods must be positive")
        if self.min_taps < 5:
            raise ValueError("paths need at least 5 taps to survive path filtering")
        if self.max_taps < self.min_taps:
            raise ValueError("max_taps < min_taps")


@dataclass
class Campaign:
    grid: CheckpointGrid
    env: RadioEnvironment
    logs: list
    truth: list  # (path_id, timestamp_ms, x_m, y_m) per WiFi burst
    hotspots: list = field(default_factory=list)


def generate_building(cols: int, rows: int, spacing_m: float = 2.5) -> CheckpointGrid:
    """Rectangular grid with row-major ids and 4-neighbour adjacency."""
    if cols < 2 or rows < 2:
        raise InvalidDims(f"grid needs at least 2x2 checkpoints, got {cols}x{rows}")
    if spacing_m <= 0:
        raise InvalidDims("spacing must be positive")
    points = {}
    edges = []
    for r in range(rows):
        for c in range(cols):
            cid = r * cols + c
            points[cid] = (c * spacing_m, r * spacing_m)
            if c + 1 < cols:
                edges.append((cid, cid + 1))
            if r + 1 < rows:
                edges.append((cid, cid + cols))
    return CheckpointGrid.from_points(points, edges, nominal_spacing_m=spacing_m)


def _random_bssid(rng, taken: set) -> str:
    while True:
        octets = rng.integers(0, 256, size=6)
        octets[0] = (octets[0] & 0xFC) | 0x02  # locally administered, unicast
        mac = ":".join(f"{int(o):02x}" for o in octets)
        if mac not in taken:
            taken.add(mac)
            return mac


def make_environment(
    grid: CheckpointGrid,
    n_aps: int = 60,
    seed: int = 0,
    path_loss_exponent: float = 3.0,
    shadowing_sigma_db: float = 4.0,
    visibility_floor_dbm: float = -97.0,
    tx_power_range: tuple[float, float] = (-70.0, -60.0),
    margin_m: float = 2.0,
) -> RadioEnvironment:
    """Scatter ``n_aps`` access points uniformly over the grid's bounding box."""
    rng = np.random.default_rng([seed, 0xA9])
    coords = grid.coords()
    lo = coords.min(axis=0) - margin_m
    hi = coords.max(axis=0) + margin_m
    taken: set = set()
    aps = []
    for i in range(n_aps):
        pos = rng.uniform(lo, hi)
        aps.append(
            AccessPoint(
                bssid=_random_bssid(rng, taken),
                ssid=INFRA_SSIDS[i % len(INFRA_SSIDS)],
                position=(float(pos[0]), float(pos[1])),
                tx_power_dbm=float(rng.uniform(*tx_power_range)),
                frequency_mhz=int(rng.choice(FREQUENCIES_MHZ)),
            )
        )
    return RadioEnvironment(
        aps=aps,
        path_loss_exponent=path_loss_exponent,
        shadowing_sigma_db=shadowing_sigma_db,
        visibility_floor_dbm=visibility_floor_dbm,
        seed=seed,
    )


def mean_rssi(env: RadioEnvironment, ap: AccessPoint, position) -> float:
    """Noise-free log-distance received power (dBm)."""
    d = math.hypot(position[0] - ap.position[0], position[1] - ap.position[1])
    d0 = env.reference_distance_m
    rssi = ap.tx_power_dbm - 10.0 * env.path_loss_exponent * math.log10(max(d, d0) / d0)
    if env.attenuation is not None:
        rssi -= env.attenuation(ap, position)
    return rssi


def simulate_rssi(env: RadioEnvironment, ap: AccessPoint, position, rng) -> Optional[float]:
    """One received-power draw, or ``None`` when below the visibility floor."""
    if not all(math.isfinite(v) for v in position):
        raise ValueError("position must be finite")
    rssi = mean_rssi(env, ap, position)
    if env.shadowing_sigma_db > 0:
        rssi += rng.normal(0.0, env.shadowing_sigma_db)
    if rssi < env.visibility_floor_dbm:
        return None
    return min(rssi, RSSI_CEILING_DBM)


def _burst_rssi(env: RadioEnvironment, ap_pos, tx, position, rng) -> np.ndarray:
    # vectorised simulate_rssi over many APs; NaN marks "not visible"
    d = np.hypot(ap_pos[:, 0] - position[0], ap_pos[:, 1] - position[1])
    d0 = env.reference_distance_m
    rssi = tx - 10.0 * env.path_loss_exponent * np.log10(np.maximum(d, d0) / d0)
    if env.attenuation is not None:
        rssi = rssi - np.array([env.attenuation(ap, position) for ap in env.aps])
    if env.shadowing_sigma_db > 0:
        rssi = rssi + rng.normal(0.0, env.shadowing_sigma_db, size=len(rssi))
    rssi = np.where(rssi < env.visibility_floor_dbm, np.nan, np.minimum(rssi, RSSI_CEILING_DBM))
    return rssi


def _random_walk(grid: CheckpointGrid, adj, n_taps: int, rng) -> list[int]:
    ids = grid.ids
    walk = [ids[int(rng.integers(len(ids)))]]
    while len(walk) < n_taps:
        options = adj[walk[-1]]
        if len(walk) >= 2 and len(options) > 1:
            options = [o for o in options if o != walk[-2]]
        walk.append(options[int(rng.integers(len(options)))])
    return walk


def _make_hotspots(n: int, seed: int, taken: set) -> list:
    rng = np.random.default_rng([seed, 0x40])
    return [
        AccessPoint(
            bssid=_random_bssid(rng, taken),
            ssid=HOTSPOT_SSIDS[i % len(HOTSPOT_SSIDS)],
            position=(0.0, 0.0),
            tx_power_dbm=-38.0,
            frequency_mhz=2437,
        )
        for i in range(n)
    ]


def _sensor_records(t0: int, t1: int, period: int, rng) -> list:
    stamps = np.arange(t0, t1 + 1, period, dtype=np.int64)
    n = len(stamps)
    gyro = np.round(rng.normal(0.0, 0.2, size=(n, 3)), 6)
    rot = np.round(np.clip(rng.normal(0.0, 0.4, size=(n, 3)), -1.0, 1.0), 6)
    acc = np.round(rng.normal(0.0, 0.5, size=(n, 3)) + [0.0, 0.0, 9.81], 6)
    mag = np.round(rng.normal(0.0, 3.0, size=(n, 3)) + [-25.0, 20.0, 170.0], 6)
    out = []
    for i, ts in enumerate(stamps.tolist()):
        out.append(SensorSample(ts, "gyroscope", tuple(gyro[i].tolist()), 3))
        out.append(SensorSample(ts, "rotation_vector", tuple(rot[i].tolist()), 3))
        out.append(SensorSample(ts, "accelerometer", tuple(acc[i].tolist()), 3))
        out.append(SensorSample(ts, "magnetic_field", tuple(mag[i].tolist()), 0))
    return out


def _generate_path(index, grid, adj, env, config, hotspots, ap_pos, tx):
    rng = np.random.default_rng([config.seed, index])
    path_id = f"path_{index:04d}"
    n_taps = int(rng.integers(config.min_taps, config.max_taps + 1))
    walk = _random_walk(grid, adj, n_taps, rng)
    start = config.start_epoch_ms + index * 600_000 + int(rng.integers(0, 60_000))

    tap_times = [start + config.lead_ms]
    for _ in walk[1:]:
        tap_times.append(tap_times[-1] + int(rng.integers(config.dwell_ms[0], config.dwell_ms[1] + 1)))
    tap_xy = grid.coords(walk)
    t_end = tap_times[-1] + config.tail_ms
    tap_t = np.asarray(tap_times, dtype=float)

    hotspot = None
    if hotspots and rng.random() < config.hotspot_fraction:
        hotspot = hotspots[int(rng.integers(len(hotspots)))]
        offset = rng.uniform(-2.0, 2.0, size=2)

    records = [CheckpointTap(t, cid) for t, cid in zip(tap_times, walk)]
    truth = []
    scan_t = start + int(rng.integers(0, config.scan_period_ms))
    while scan_t <= t_end:
        # linear interpolation between taps; clamped outside the tap span
        pos = (
            float(np.interp(scan_t, tap_t, tap_xy[:, 0])),
            float(np.interp(scan_t, tap_t, tap_xy[:, 1])),
        )
        truth.append((path_id, scan_t, pos[0], pos[1]))
        rssi = _burst_rssi(env, ap_pos, tx, pos, rng)
        for ap, value in zip(env.aps, rssi.tolist()):
            if not math.isnan(value):
                records.append(WifiObservation(scan_t, ap.bssid, ap.ssid, int(round(value)), ap.frequency_mhz))
        if hotspot is not None:
            carried = AccessPoint(
                hotspot.bssid, hotspot.ssid, (pos[0] + offset[0], pos[1] + offset[1]),
                hotspot.tx_power_dbm, hotspot.frequency_mhz,
            )
            value = simulate_rssi(env, carried, pos, rng)
            if value is not None:
                records.append(
                    WifiObservation(scan_t, hotspot.bssid, hotspot.ssid, int(round(value)), hotspot.frequency_mhz)
                )
        scan_t += config.scan_period_ms

    if config.emit_sensors:
        records.extend(_sensor_records(start, t_end, config.sensor_period_ms, rng))
    records.sort(key=lambda r: r.timestamp_ms)
    return WalkLog(path_id, records, []), truth


def generate_campaign(env: RadioEnvironment, grid: CheckpointGrid, config: CampaignConfig) -> Campaign:
    if not grid.is_connected():
        raise DisconnectedGrid("random walks need a connected checkpoint graph")
    adj = grid.adjacency_list()
    taken = {ap.bssid for ap in env.aps}
    hotspots = _make_hotspots(config.n_hotspot_devices, config.seed, taken) if config.hotspot_fraction > 0 else []
    ap_pos = np.array([ap.position for ap in env.aps], dtype=float).reshape(-1, 2)
    tx = np.array([ap.tx_power_dbm for ap in env.aps], dtype=float)
    logs, truth = [], []
    for i in range(config.n_paths):
        log, rows = _generate_path(i, grid, adj, env, config, hotspots, ap_pos, tx)
        logs.append(log)
        truth.extend(rows)
    return Campaign(grid=grid, env=env, logs=logs, truth=truth, hotspots=hotspots)


def write_campaign(campaign: Campaign, out_dir) -> Path:
    """Write ``logs/*.txt``, ``grid.csv``, ``truth.csv`` and ``aps.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(campaign.logs, out / "logs")
    campaign.grid.save(out / "grid.csv")
    with open(out / "truth.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "timestamp_ms", "x_m", "y_m"])
        for path_id, ts, x, y in campaign.truth:
            w.writerow([path_id, ts, repr(x), repr(y)])
    with open(out / "aps.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bssid", "ssid", "x_m", "y_m", "tx_power_dbm", "frequency_mhz", "role"])
        for role, aps in (("infrastructure", campaign.env.aps), ("hotspot", campaign.hotspots)):
            for ap in aps:
                w.writerow([ap.bssid, ap.ssid, repr(ap.position[0]), repr(ap.position[1]),
                            repr(ap.tx_power_dbm), ap.frequency_mhz, role])
    return out
