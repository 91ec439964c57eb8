"""Checkpoint files: a JSON header followed by a little-endian float64 payload.

Layout::

    b"EMPSNCK1" | uint64 LE header length | header (UTF-8 JSON) | payload

The header lists every array's name, shape and byte offset into the payload,
plus an arbitrary ``meta`` object.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError

MAGIC = b"EMPSNCK1"


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        a = np.asarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.nbytes
    header = json.dumps({"meta": meta or {}, "arrays": entries}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for chunk in chunks:
            fh.write(chunk)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise InvalidInputError(f"{path} is not a checkpoint file")
    (size,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + size])
    payload = raw[16 + size:]
    arrays = {}
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        a = np.frombuffer(payload, dtype="<f8", count=count, offset=entry["offset"])
        arrays[entry["name"]] = a.reshape(tuple(entry["shape"])).astype(np.float64)
    return arrays, header["meta"]
