"""Hand-built corpora with known filtering outcomes."""

from crowdloc.floorplan import CheckpointGrid
from crowdloc.walklog import CheckpointTap, WalkLog, WifiObservation

BSSID_EVERYWHERE = "0a:00:00:00:00:01"
BSSID_AT_50 = "0a:00:00:00:00:02"
BSSID_AT_49 = "0a:00:00:00:00:03"
BSSID_HOTSPOT = "0a:00:00:00:00:04"
SHORT_PATH = "short"


def line_grid(n=60, spacing=2.5):
    pts = {i: (i * spacing, 0.0) for i in range(n)}
    return CheckpointGrid.from_points(pts, [(i, i + 1) for i in range(n - 1)])


def _path(path_id, checkpoints, t0):
    records = []
    for i, cid in enumerate(checkpoints):
        t = t0 + 3000 * i
        records.append(CheckpointTap(t, cid))
        burst = t + 500
        records.append(WifiObservation(burst, BSSID_EVERYWHERE, "corp", -60, 2412))
        records.append(WifiObservation(burst, BSSID_HOTSPOT, "AndroidAP", -45, 2437))
        if cid < 50:
            records.append(WifiObservation(burst, BSSID_AT_50, "corp", -70, 5180))
        if cid < 49:
            records.append(WifiObservation(burst, BSSID_AT_49, "guest", -80, 5200))
    return WalkLog(path_id, records)


def filter_corpus():
    """12 five-tap paths covering checkpoints 0..59, plus one 4-tap path.

    Expected dataset: the 12 long paths (60 rows), vocabulary
    ``[BSSID_EVERYWHERE, BSSID_AT_50]``.
    """
    logs = [_path(f"walk_{k:02d}", range(5 * k, 5 * k + 5), 1_000_000 * (k + 1)) for k in range(12)]
    logs.append(_path(SHORT_PATH, [0, 1, 2, 3], 50_000_000))
    return logs, line_grid()
