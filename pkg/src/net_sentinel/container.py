"""Self-describing binary container for model and detector checkpoints.

Layout::

    b"NSNT"  magic
    u16      format version
    u16      reserved (0)
    u64      header length H
    H bytes  UTF-8 JSON header {"kind", "meta", "arrays": [{name, dtype, shape, offset, nbytes}]}
    ...      array payloads, each 8-byte aligned, little-endian, C order
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ContainerError

MAGIC = b"NSNT"
VERSION = 1
_PREFIX = struct.Struct("<4sHHQ")


def _align(n: int) -> int:
    return (n + 7) & ~7


def write_container(path: str | Path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> str:
    """Write the container and return the sha256 of its bytes."""
    entries, blobs, offset = [], [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        raw = a.tobytes()
        entries.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw + b"\0" * (_align(len(raw)) - len(raw)))
        offset += _align(len(raw))
    header = json.dumps({"kind": kind, "meta": meta, "arrays": entries}, sort_keys=True).encode()
    header += b" " * (_align(len(header)) - len(header))
    payload = _PREFIX.pack(MAGIC, VERSION, 0, len(header)) + header + b"".join(blobs)
    Path(path).write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def read_container(path: str | Path, expect_kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise ContainerError(f"{path}: too short for a checkpoint")
    magic, version, _, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ContainerError(f"{path}: not a net_sentinel checkpoint")
    if version > VERSION:
        raise ContainerError(f"{path}: checkpoint version {version} is newer than supported {VERSION}")
    start = _PREFIX.size
    header = json.loads(data[start : start + hlen])
    if expect_kind is not None and header["kind"] != expect_kind:
        raise ContainerError(f"{path}: expected a {expect_kind!r} checkpoint, found {header['kind']!r}")
    base = start + hlen
    arrays = {}
    for e in header["arrays"]:
        lo = base + e["offset"]
        arrays[e["name"]] = np.frombuffer(data[lo : lo + e["nbytes"]], dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    meta = dict(header["meta"])
    meta["_kind"] = header["kind"]
    meta["_sha256"] = hashlib.sha256(data).hexdigest()
    return meta, arrays
