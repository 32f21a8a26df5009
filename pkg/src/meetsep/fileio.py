"""Shared file formats: TSEP tensor files, RTTM, and JSON helpers."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

TENSOR_MAGIC = b"TSEP"
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<c8")}


def write_tensor(path, array: np.ndarray) -> None:
    """Write an array in the TSEP tensor format.

    Layout: magic ``TSEP``, u8 dtype code (0 float32, 1 complex64), u8 ndim,
    ndim u64 little-endian dims, row-major payload. Real input is stored as
    float32, complex input as complex64.
    """
    array = np.asarray(array)
    if np.iscomplexobj(array):
        code, data = 1, np.ascontiguousarray(array, dtype="<c8")
    else:
        code, data = 0, np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<BB", code, data.ndim))
        fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        fh.write(data.tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TENSOR_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        code, ndim = struct.unpack("<BB", fh.read(2))
        if code not in _DTYPE_CODES:
            raise ValueError(f"{path}: unknown dtype code {code}")
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        dtype = _DTYPE_CODES[code]
        payload = fh.read(int(np.prod(shape)) * dtype.itemsize)
        return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def write_rttm(path, entries, session: str) -> None:
    """Write diarization segments as RTTM.

    ``entries`` is an iterable of (speaker_label, start_seconds,
    duration_seconds) with times emitted at 2-decimal precision.
    """
    lines = [
        f"SPEAKER {session} 1 {start:.2f} {dur:.2f} <NA> <NA> {speaker} <NA> <NA>\n"
        for speaker, start, dur in entries
    ]
    Path(path).write_text("".join(lines))


def read_rttm(path) -> list[tuple[str, float, float]]:
    """Read RTTM into (speaker, start_seconds, end_seconds) tuples."""
    out = []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts or parts[0] != "SPEAKER":
            continue
        start, dur = float(parts[3]), float(parts[4])
        out.append((parts[7], start, start + dur))
    return out


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())
