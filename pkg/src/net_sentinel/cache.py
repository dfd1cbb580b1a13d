"""On-disk tensor cache.

Layout::

    <root>/manifest.json                  schema, windowing settings, per-capture digests
    <root>/PARTIAL                        present while a preprocess run is in flight
    <root>/labels.json                    per-capture window scenarios (when sidecars exist)
    <root>/captures/<cid>/packets.f32     encoded packet rows, little-endian float32
    <root>/captures/<cid>/windows.json    per-window node list and edge row ranges
    <root>/captures/<cid>/capture.json    completion record for resumable runs
    <root>/features/<version>/...         feature blocks written by ``extract``
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import PartialCache
from .packet import FeatureSchema

MANIFEST = "manifest.json"
PARTIAL = "PARTIAL"
LABELS = "labels.json"
CACHE_ENV = "NET_SENTINEL_CACHE"
F32 = np.dtype("<f4")


def resolve_cache_dir(path: str | os.PathLike | None) -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    if path is None:
        raise ValueError(f"no cache directory given and {CACHE_ENV} is unset")
    return Path(path)


def sha256_file(path: str | os.PathLike, chunk: int = 1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while block := fh.read(chunk):
            h.update(block)
    return h.hexdigest()


def dump_json(path: Path, obj) -> str:
    data = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def write_f32(path: Path, rows: np.ndarray) -> str:
    data = np.ascontiguousarray(rows, dtype=F32).tobytes()
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def read_f32(path: Path, width: int) -> np.ndarray:
    return np.fromfile(path, dtype=F32).reshape(-1, width)


@dataclass
class CachedWindow:
    capture: str
    index: int
    start: float
    end: float
    nodes: list[str]
    edges: dict[tuple[str, str], np.ndarray]
    truncated: dict[tuple[str, str], int]
    packets: int
    undissectable: int
    self_pairs: int

    @property
    def rows(self) -> int:
        return sum(len(v) for v in self.edges.values())


class TensorCache:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self._manifest: dict | None = None

    # -------------------------------------------------------------- manifest
    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST

    def is_complete(self) -> bool:
        return self.manifest_path.exists() and not (self.root / PARTIAL).exists()

    @property
    def manifest(self) -> dict:
        if self._manifest is None:
            if (self.root / PARTIAL).exists():
                raise PartialCache(f"{self.root}: preprocessing did not finish; rerun preprocess to resume")
            if not self.manifest_path.exists():
                raise PartialCache(f"{self.root}: no cache manifest")
            self._manifest = json.loads(self.manifest_path.read_text())
        return self._manifest

    @property
    def schema(self) -> FeatureSchema:
        return FeatureSchema.from_manifest(self.manifest["schema"])

    @property
    def schema_hash(self) -> str:
        return self.manifest["schema_hash"]

    def captures(self) -> list[str]:
        return [c["id"] for c in self.manifest["captures"]]

    def capture_dir(self, cid: str) -> Path:
        return self.root / "captures" / cid

    # -------------------------------------------------------------- windows
    def window_index(self, cid: str) -> list[dict]:
        return json.loads((self.capture_dir(cid) / "windows.json").read_text())

    def packet_rows(self, cid: str) -> np.ndarray:
        return read_f32(self.capture_dir(cid) / "packets.f32", self.schema.total_width)

    def iter_windows(self, cid: str) -> Iterator[CachedWindow]:
        rows = self.packet_rows(cid)
        for w in self.window_index(cid):
            edges, trunc = {}, {}
            for e in w["edges"]:
                key = (e["key"][0], e["key"][1])
                edges[key] = rows[e["offset"] : e["offset"] + e["rows"]]
                trunc[key] = e["truncated"]
            yield CachedWindow(
                cid, w["index"], w["start"], w["end"], w["nodes"], edges, trunc,
                w["packets"], w["undissectable"], w["self_pairs"],
            )

    # -------------------------------------------------------------- labels
    def labels(self) -> dict | None:
        p = self.root / LABELS
        return json.loads(p.read_text()) if p.exists() else None

    def window_scenarios(self, cid: str) -> list[str] | None:
        labels = self.labels()
        if labels is None or cid not in labels:
            return None
        return labels[cid]["windows"]

    # -------------------------------------------------------------- features
    def features_dir(self, version: str) -> Path:
        return self.root / "features" / version

    def feature_versions(self) -> list[str]:
        d = self.root / "features"
        if not d.exists():
            return []
        return sorted(p.name for p in d.iterdir() if (p / MANIFEST).exists())

    def load_features(self, version: str, cid: str, level: str) -> tuple[list[tuple[int, str]], np.ndarray]:
        """``(window, entity)`` ids and rows of one level for one capture."""
        d = self.features_dir(version)
        meta = json.loads((d / MANIFEST).read_text())
        index = json.loads((d / cid / "index.json").read_text())
        rows = read_f32(d / cid / f"{level}.f32", meta["d_z"])
        return [(int(w), e) for w, e in index[level]], rows
