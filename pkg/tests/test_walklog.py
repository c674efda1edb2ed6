import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdloc.exceptions import EmptyLog, MalformedLine
from crowdloc.floorplan import CheckpointGrid
from crowdloc.walklog import (
    CheckpointTap,
    NonAdjacentTransition,
    SensorSample,
    UnknownCheckpoint,
    WalkLog,
    WifiObservation,
    load_corpus,
    parse_log,
    validate_path,
    write_corpus,
    write_log,
)


def test_checkpoint_line():
    log = parse_log("1633437608241 TYPE_CHECKPOINT 12\n", "p")
    assert log.records == [CheckpointTap(1633437608241, 12)]


def test_wifi_line():
    log = parse_log("1633437608615 TYPE_WIFI f4:db:e6:aa:bb:cc SSID1 -57 5620", "p")
    assert log.records == [WifiObservation(1633437608615, "f4:db:e6:aa:bb:cc", "SSID1", -57, 5620)]


def test_wifi_ssid_with_spaces_and_upper_mac():
    log = parse_log("5 TYPE_WIFI F4:DB:E6:AA:BB:CC Johns iPhone 12 -61 2412", "p")
    obs = log.wifi[0]
    assert obs.ssid == "Johns iPhone 12"
    assert obs.bssid == "f4:db:e6:aa:bb:cc"
    assert (obs.rssi_dbm, obs.frequency_mhz) == (-61, 2412)


def test_wifi_empty_ssid():
    obs = parse_log("5 TYPE_WIFI f4:db:e6:aa:bb:cc -61 2412", "p").wifi[0]
    assert obs.ssid == ""


def test_sensor_line():
    rec = parse_log("7 TYPE_ACCELEROMETER 0.1 -9.81 3 1", "p").records[0]
    assert rec == SensorSample(7, "accelerometer", (0.1, -9.81, 3.0), 1)


@pytest.mark.parametrize("text", ["", "\n\n", "   \n"])
def test_empty_log(text):
    with pytest.raises(EmptyLog):
        parse_log(text, "p")


@pytest.mark.parametrize(
    "line",
    [
        "abc TYPE_CHECKPOINT 1",
        "1 CHECKPOINT 1",
        "1 TYPE_CHECKPOINT",
        "1 TYPE_CHECKPOINT 1 2",
        "1 TYPE_CHECKPOINT -3",
        "1 TYPE_WIFI zz:db:e6:aa:bb:cc x -50 2412",
        "1 TYPE_WIFI f4:db:e6:aa:bb:cc x -50",
        "1 TYPE_WIFI f4:db:e6:aa:bb:cc x 5 2412",
        "1 TYPE_WIFI f4:db:e6:aa:bb:cc x -130 2412",
        "1 TYPE_GYROSCOPE 1 2 1",
        "1 TYPE_GYROSCOPE 1 2 3 4 5",
    ],
)
def test_malformed_lines(line):
    with pytest.raises(MalformedLine) as info:
        parse_log("0 TYPE_CHECKPOINT 1\n" + line, "p")
    assert info.value.line_no == 2


def test_unknown_type_becomes_warning():
    log = parse_log("1 TYPE_CHECKPOINT 1\n2 TYPE_BAROMETER 1013\n", "p")
    assert len(log.records) == 1
    assert [w.kind for w in log.warnings] == ["unknown_type"]


def test_out_of_order_is_sorted_and_flagged():
    log = parse_log("5 TYPE_CHECKPOINT 2\n3 TYPE_CHECKPOINT 1\n", "p")
    assert [t.checkpoint_id for t in log.taps] == [1, 2]
    assert [w.kind for w in log.warnings] == ["out_of_order"]


def test_write_single_tap():
    text = write_log(WalkLog("p", [CheckpointTap(10, 3)]))
    assert text == "10 TYPE_CHECKPOINT 3\n"


def test_three_record_round_trip():
    recs = [CheckpointTap(1, 1), WifiObservation(2, "aa:bb:cc:dd:ee:ff", "net", -70, 2437),
            SensorSample(3, "magnetic_field", (1.5, -2.25, 30.0), 3)]
    assert parse_log(write_log(WalkLog("p", recs)), "p").records == recs


def test_synthetic_corpus_round_trip(tmp_path, small_campaign):
    logs = small_campaign.logs[:10]
    written = write_corpus(logs, tmp_path / "a")
    parsed, failures = load_corpus(tmp_path / "a")
    assert not failures
    write_corpus(parsed, tmp_path / "b")
    for path in written:
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


def test_load_corpus_skip(tmp_path):
    (tmp_path / "good.txt").write_text("1 TYPE_CHECKPOINT 1\n")
    (tmp_path / "bad.txt").write_text("nonsense\n")
    with pytest.raises(MalformedLine):
        load_corpus(tmp_path)
    logs, failures = load_corpus(tmp_path, errors="skip")
    assert [l.path_id for l in logs] == ["good"]
    assert list(failures) == ["bad.txt"]


@pytest.fixture
def line_grid():
    return CheckpointGrid.from_points({12: (0.0, 0.0), 13: (2.0, 0.0), 14: (4.0, 0.0)}, {(12, 13), (13, 14)})


def _taps(*ids):
    return WalkLog("p", [CheckpointTap(i * 1000, c) for i, c in enumerate(ids)])


def test_validate_adjacent(line_grid):
    assert validate_path(_taps(12, 13), line_grid) == []


def test_validate_self_transition(line_grid):
    assert validate_path(_taps(12, 12), line_grid) == []


def test_validate_unknown(line_grid):
    assert validate_path(_taps(12, 99), line_grid) == [UnknownCheckpoint(99, 1000)]


def test_validate_jump(line_grid):
    assert validate_path(_taps(12, 14), line_grid) == [NonAdjacentTransition(12, 14, 1000)]


# property: any well-formed record sequence survives write -> parse -> write

_ssid_chars = string.ascii_letters + string.digits + "-_'."
ssids = st.lists(st.text(_ssid_chars, min_size=1, max_size=8), min_size=1, max_size=3).map(" ".join)
macs = st.lists(st.integers(0, 255), min_size=6, max_size=6).map(lambda b: ":".join(f"{x:02x}" for x in b))
floats = st.floats(allow_nan=False, allow_infinity=False, width=64)
records = st.one_of(
    st.builds(CheckpointTap, st.integers(0, 2**45), st.integers(0, 10**6)),
    st.builds(WifiObservation, st.integers(0, 2**45), macs, ssids, st.integers(-120, 0), st.integers(2400, 6000)),
    st.builds(SensorSample, st.integers(0, 2**45),
              st.sampled_from(["accelerometer", "gyroscope", "magnetic_field", "rotation_vector"]),
              st.tuples(floats, floats, floats), st.integers(0, 3)),
)


@settings(max_examples=150, deadline=None)
@given(st.lists(records, min_size=1, max_size=20))
def test_round_trip_property(recs):
    recs = sorted(recs, key=lambda r: r.timestamp_ms)
    text = write_log(WalkLog("p", recs))
    parsed = parse_log(text, "p")
    assert parsed.records == recs
    assert write_log(parsed) == text
