"""Binary and CSV time-tag files.

Binary layout: the 8-byte magic ``QDTTAG01`` followed by packed 9-byte
records ``{channel: u8, timestamp: u64 little-endian, picoseconds}``. A JSON
sidecar next to the file (``<name>.json``) carries channel semantics, the
sync period and the generating configuration.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"QDTTAG01"
TIMETAG_DTYPE = np.dtype([("channel", "u1"), ("timestamp", "<u8")])
CSV_HEADER = "channel,timestamp_ps"


class TimeTagFormatError(ValueError):
    pass


def make_tags(channels, timestamps) -> np.ndarray:
    tags = np.empty(len(timestamps), dtype=TIMETAG_DTYPE)
    tags["channel"] = np.asarray(channels, dtype=np.uint8)
    tags["timestamp"] = np.asarray(timestamps, dtype=np.uint64)
    return tags


def write_timetags(tags: np.ndarray, path) -> Path:
    path = Path(path)
    tags = np.asarray(tags, dtype=TIMETAG_DTYPE)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(tags.tobytes())
    return path


def read_timetags(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise TimeTagFormatError(f"{path}: bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}")
    body = data[len(MAGIC):]
    if len(body) % TIMETAG_DTYPE.itemsize:
        raise TimeTagFormatError(
            f"{path}: payload of {len(body)} bytes is not a whole number of "
            f"{TIMETAG_DTYPE.itemsize}-byte records"
        )
    return np.frombuffer(body, dtype=TIMETAG_DTYPE).copy()


def write_timetags_csv(tags: np.ndarray, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for c, t in zip(tags["channel"].tolist(), tags["timestamp"].tolist()):
            fh.write(f"{c},{t}\n")
    return path


def read_timetags_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise TimeTagFormatError(f"{path}: expected header {CSV_HEADER!r}, got {header!r}")
        rows = [line.split(",") for line in fh if line.strip()]
    if not rows:
        return np.empty(0, dtype=TIMETAG_DTYPE)
    ch = [int(r[0]) for r in rows]
    ts = [int(r[1]) for r in rows]
    return make_tags(ch, ts)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_sidecar(path, period: float, channels: dict, config: dict | None = None,
                  **extra) -> Path:
    meta = {
        "format": "QDTTAG01",
        "record": {"channel": "uint8", "timestamp": "uint64 little-endian, ps"},
        "sync_period_ps": period,
        "channels": {str(k): v for k, v in channels.items()},
        "config": config or {},
    }
    meta.update(extra)
    out = sidecar_path(path)
    out.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")
    return out


def read_sidecar(path) -> dict:
    return json.loads(sidecar_path(path).read_text())


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")
