import numpy as np
import pytest

from qdcascade.timetags import (
    MAGIC, TimeTagFormatError, make_tags, read_sidecar, read_timetags, read_timetags_csv,
    sidecar_path, write_sidecar, write_timetags, write_timetags_csv,
)


@pytest.fixture
def tags():
    rng = np.random.default_rng(1)
    ts = np.sort(rng.integers(0, 2**62, 1000, dtype=np.uint64))
    return make_tags(rng.integers(0, 4, 1000), ts)


def test_binary_round_trip(tmp_path, tags):
    p = write_timetags(tags, tmp_path / "a.qdtt")
    assert p.read_bytes()[:8] == MAGIC
    assert p.stat().st_size == 8 + 9 * len(tags)
    back = read_timetags(p)
    assert np.array_equal(back, tags)


def test_empty_file_round_trip(tmp_path):
    p = write_timetags(make_tags([], []), tmp_path / "e.qdtt")
    assert read_timetags(p).size == 0


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.qdtt"
    p.write_bytes(b"NOTMAGIC" + bytes(9))
    with pytest.raises(TimeTagFormatError, match="magic"):
        read_timetags(p)


def test_truncated_payload(tmp_path, tags):
    p = write_timetags(tags, tmp_path / "t.qdtt")
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(TimeTagFormatError, match="records"):
        read_timetags(p)


def test_csv_round_trip(tmp_path, tags):
    p = write_timetags_csv(tags, tmp_path / "a.csv")
    assert np.array_equal(read_timetags_csv(p), tags)
    p.write_text("chan,time\n1,2\n")
    with pytest.raises(TimeTagFormatError):
        read_timetags_csv(p)


def test_sidecar(tmp_path):
    p = tmp_path / "x.qdtt"
    write_sidecar(p, 787.4, {0: "XX co"}, {"k": 1}, basis="rect", extra=np.float64(2.0))
    assert sidecar_path(p).name == "x.qdtt.json"
    meta = read_sidecar(p)
    assert meta["sync_period_ps"] == 787.4 and meta["basis"] == "rect"
    assert meta["channels"] == {"0": "XX co"} and meta["extra"] == 2.0
