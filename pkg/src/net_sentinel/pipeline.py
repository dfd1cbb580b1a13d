"""Preprocess → train → extract → fit-detectors → detect → report.

Preprocessing fans windows out to a process pool and commits results in
window order, so cache bytes do not depend on the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import multiprocessing as mp
import re
import shutil
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .aggregator import aggregate
from .cache import (
    LABELS, MANIFEST, PARTIAL, TensorCache, dump_json, read_f32, resolve_cache_dir, sha256_file, write_f32,
)
from .detectors import (
    DEFAULT_TARGET_FPR, CalibratedDetector, edge_id, fit_detector, load_detector, save_detector,
)
from .errors import (
    EmptyInput, MissingDetector, MixedTrainingData, NetSentinelError, SchemaHashMismatch, TooShort,
)
from .evaluation import EvalReport, adr, entity_anomaly_counts, fpr, kfold, project_2d
from .packet import encode_packets, schema_by_name
from .pcap import read_pcap
from .synth import labels_path_for
from .transformer import OptimizerSettings, TransformerConfig, encode_many, load_model, save_model, train
from .windowing import PacketWindow, build_graph, roll_windows, split_sequence

log = logging.getLogger(__name__)

LEVELS = ("global", "node", "edge")
_LEVEL_ORDER = {lvl: i for i, lvl in enumerate(LEVELS)}


@dataclass
class PipelineConfig:
    window_len: float = 30.0
    stride: float | None = None
    schema: str = "tcp"
    workers: int = 1
    cache_dir: str | None = None
    max_edge_len: int = 256
    transformer: TransformerConfig = field(default_factory=TransformerConfig)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    detector: str = "ae"
    levels: tuple[str, ...] = LEVELS
    target_fpr: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.stride is None:
            self.stride = self.window_len

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        if "transformer" in d:
            d["transformer"] = TransformerConfig(**d["transformer"])
        if "optimizer" in d:
            d["optimizer"] = OptimizerSettings(**d["optimizer"])
        if "levels" in d:
            d["levels"] = tuple(d["levels"])
        return cls(**d)


# ------------------------------------------------------------------ preprocess


def _window_job(job):
    """Stages 2-3 for one window: dissect into a graph, then encode each edge."""
    index, start, end, records, schema_name, max_edge_len = job
    schema = schema_by_name(schema_name)
    g = build_graph(PacketWindow(index, start, end, records), max_edge_len)
    blocks, edges, offset = [], [], 0
    for key, edge in g.edges.items():
        rows = encode_packets(edge.packets, edge.directions, schema)
        blocks.append(rows)
        edges.append({"key": list(key), "offset": offset, "rows": len(rows), "truncated": edge.truncated})
        offset += len(rows)
    meta = {
        "index": index, "start": start, "end": end, "packets": len(records),
        "undissectable": g.undissectable, "self_pairs": g.self_pairs, "nodes": g.nodes, "edges": edges,
    }
    rows = np.concatenate(blocks) if blocks else np.zeros((0, schema.total_width))
    return meta, rows.astype("<f4")


def _capture_ids(paths: Sequence[Path]) -> list[str]:
    ids, seen = [], {}
    for p in paths:
        base = re.sub(r"[^A-Za-z0-9_.-]", "_", p.stem) or "capture"
        n = seen.get(base, 0)
        seen[base] = n + 1
        ids.append(base if n == 0 else f"{base}-{n + 1}")
    return ids


def _ordered_results(jobs: Iterable, workers: int):
    """Yield job results in submission order with a bounded in-flight queue."""
    if workers == 1:
        for job in jobs:
            yield _window_job(job)
        return
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        inflight: deque = deque()
        for job in jobs:
            inflight.append(pool.submit(_window_job, job))
            if len(inflight) >= 2 * workers:
                yield inflight.popleft().result()
        while inflight:
            yield inflight.popleft().result()


def _window_labels(sidecar: dict, windows: list[dict]) -> list[str]:
    intervals = sidecar.get("attack_intervals", [])
    scenario = sidecar.get("scenario", "normal")
    out = []
    for w in windows:
        hit = any(a < w["end"] and b >= w["start"] for a, b in intervals)
        out.append(scenario if hit else "normal")
    return out


def _process_capture(path: Path, cid: str, cdir: Path, cfg: PipelineConfig, source_sha: str, settings: str) -> dict:
    cdir.mkdir(parents=True, exist_ok=True)
    stream = read_pcap(path)
    jobs = (
        (w.window_index, w.start_time, w.end_time, w.packets, cfg.schema, cfg.max_edge_len)
        for w in roll_windows(stream, cfg.window_len, cfg.stride)
    )
    windows, total = [], 0
    h = hashlib.sha256()
    with open(cdir / "packets.f32", "wb") as fh:
        for meta, rows in _ordered_results(jobs, cfg.workers):
            for e in meta["edges"]:
                e["offset"] += total
            total += len(rows)
            data = rows.tobytes()
            h.update(data)
            fh.write(data)
            windows.append(meta)
    record = {
        "id": cid,
        "source": path.name,
        "source_sha256": source_sha,
        "settings": settings,
        "windows": len(windows),
        "rows": total,
        "truncated_records": stream.truncated,
        "out_of_order": stream.out_of_order,
        "packets_sha256": h.hexdigest(),
        "windows_sha256": dump_json(cdir / "windows.json", windows),
    }
    dump_json(cdir / "capture.json", record)
    return record


def preprocess(pcaps: Sequence[str | Path], config: PipelineConfig, cache_dir=None) -> TensorCache:
    """Window, dissect and encode every capture into the tensor cache.

    A complete cache built from the same inputs and settings is reused as is;
    an interrupted one resumes, keeping captures that finished.
    """
    root = resolve_cache_dir(cache_dir or config.cache_dir)
    paths = [Path(p) for p in pcaps]
    if not paths:
        raise EmptyInput("no capture files given")
    schema = schema_by_name(config.schema)
    sources = [sha256_file(p) for p in paths]
    ids = _capture_ids(paths)
    key = {
        "format": 1,
        "schema": schema.manifest(),
        "schema_hash": schema.hash(),
        "window_len": config.window_len,
        "stride": config.stride,
        "max_edge_len": config.max_edge_len,
    }
    settings = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()
    cache = TensorCache(root)
    if cache.is_complete():
        m = cache.manifest
        same = {k: m.get(k) for k in key} == key and [(c["id"], c["source_sha256"]) for c in m["captures"]] == list(
            zip(ids, sources)
        )
        if same:
            log.info("cache hit at %s", root)
            return cache
        raise NetSentinelError(f"{root} already holds a cache built from different inputs or settings")
    root.mkdir(parents=True, exist_ok=True)
    (root / PARTIAL).write_text("preprocessing in progress\n")
    records = []
    labels = {}
    for path, cid, sha in zip(paths, ids, sources):
        cdir = root / "captures" / cid
        done = cdir / "capture.json"
        rec = json.loads(done.read_text()) if done.exists() else None
        if rec is None or (rec["source_sha256"], rec.get("settings")) != (sha, settings):
            if cdir.exists():
                shutil.rmtree(cdir)
            log.info("preprocessing %s", path)
            rec = _process_capture(path, cid, cdir, config, sha, settings)
        records.append(rec)
        sidecar = labels_path_for(path)
        if sidecar.exists():
            side = json.loads(sidecar.read_text())
            windows = json.loads((cdir / "windows.json").read_text())
            labels[cid] = {
                "scenario": side.get("scenario", "normal"),
                "attacker": side.get("attacker"),
                "targets": side.get("targets", []),
                "topology": side.get("topology", {}),
                "windows": _window_labels(side, windows),
            }
    if labels:
        dump_json(root / LABELS, labels)
    dump_json(root / MANIFEST, {**key, "captures": records})
    (root / PARTIAL).unlink()
    return TensorCache(root)


# ------------------------------------------------------------------ training


def _selected(cache: TensorCache, captures: Sequence[str] | None) -> list[str]:
    ids = cache.captures()
    if captures is None:
        return ids
    missing = set(captures) - set(ids)
    if missing:
        raise NetSentinelError(f"unknown capture ids: {sorted(missing)}")
    return [c for c in ids if c in set(captures)]


def normal_windows(cache: TensorCache, captures: Sequence[str] | None = None, allow_mixed: bool = False):
    """``(capture, window)`` pairs usable as normal data, in time order.

    Attack-labelled windows raise :class:`MixedTrainingData` unless
    ``allow_mixed`` is set, in which case they are left out.
    """
    out = []
    for cid in _selected(cache, captures):
        scen = cache.window_scenarios(cid)
        n = len(cache.window_index(cid))
        for w in range(n):
            if scen is not None and scen[w] != "normal":
                if not allow_mixed:
                    raise MixedTrainingData(
                        f"capture {cid!r} window {w} is labelled {scen[w]!r}; pass --allow-mixed to skip attack windows"
                    )
                continue
            out.append((cid, w))
    return out


def training_dataset(
    cache: TensorCache, max_seq_len: int, captures=None, allow_mixed: bool = False,
    max_sequences: int | None = None, seed: int = 0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    keep = set(normal_windows(cache, captures, allow_mixed))
    data = []
    for cid in _selected(cache, captures):
        for w in cache.iter_windows(cid):
            if (cid, w.index) not in keep:
                continue
            for rows in w.edges.values():
                rows = np.asarray(rows, dtype=np.float64)
                for s in range(0, len(rows), max_seq_len):
                    try:
                        obs, fut = split_sequence(rows[s : s + max_seq_len])
                    except TooShort:
                        continue
                    data.append((np.asarray(obs), np.asarray(fut)))
    if max_sequences is not None and len(data) > max_sequences:
        pick = np.sort(np.random.default_rng(seed).choice(len(data), max_sequences, replace=False))
        data = [data[i] for i in pick]
    return data


def train_cmd(
    cache_dir, config: TransformerConfig | None = None, settings: OptimizerSettings | None = None,
    out: str | Path | None = None, captures=None, allow_mixed: bool = False, max_sequences: int | None = None,
) -> tuple[Path, list[float]]:
    cache = TensorCache(resolve_cache_dir(cache_dir))
    config = config or TransformerConfig()
    settings = settings or OptimizerSettings()
    data = training_dataset(cache, config.max_seq_len, captures, allow_mixed, max_sequences, settings.seed)
    if not data:
        raise EmptyInput("no trainable edge sequences in the selected normal windows")
    result = train(data, cache.schema, config, settings)
    out = Path(out) if out else cache.root / "models" / "model.nsnt"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(out, result.model, {"optimizer": asdict(settings), "sequences": len(data)})
    out.with_suffix(".history.json").write_text(json.dumps({"loss": result.history}, indent=1))
    return out, result.history


# ------------------------------------------------------------------ features


def extract_cmd(cache_dir, model_path: str | Path) -> str:
    """Write global/node/edge feature blocks for every window; returns the
    feature version (derived from the checkpoint digest)."""
    cache = TensorCache(resolve_cache_dir(cache_dir))
    model, meta = load_model(model_path)
    if meta["schema_hash"] != cache.schema_hash:
        raise SchemaHashMismatch(
            f"checkpoint schema {meta['schema_hash'][:12]} does not match cache schema {cache.schema_hash[:12]}"
        )
    version = meta["_sha256"][:16]
    fdir = cache.features_dir(version)
    if (fdir / MANIFEST).exists():
        return version
    if fdir.exists():
        shutil.rmtree(fdir)
    d_z = model.config.d_z
    digests = {}
    for cid in cache.captures():
        windows = list(cache.iter_windows(cid))
        seqs = [np.asarray(r, dtype=np.float64) for w in windows for r in w.edges.values()]
        sums = [z.sum(axis=0) for z in encode_many(model, seqs)] if seqs else []
        glob, node_rows, edge_rows = [], [], []
        index = {"global": [], "node": [], "edge": []}
        k = 0
        for w in windows:
            keys = list(w.edges)
            mat = np.array(sums[k : k + len(keys)]).reshape(len(keys), d_z)
            k += len(keys)
            f = aggregate(keys, mat, w.nodes, d_z, w.index)
            glob.append(f.global_feature)
            index["global"].append([w.index, "global"])
            for n in w.nodes:
                node_rows.append(f.node_features[n])
                index["node"].append([w.index, n])
            for key in keys:
                edge_rows.append(f.edge_features[key])
                index["edge"].append([w.index, edge_id(key)])
        cdir = fdir / cid
        cdir.mkdir(parents=True, exist_ok=True)
        digests[cid] = {
            level: write_f32(cdir / f"{level}.f32", np.array(rows).reshape(-1, d_z))
            for level, rows in (("global", glob), ("node", node_rows), ("edge", edge_rows))
        }
        digests[cid]["index"] = dump_json(cdir / "index.json", index)
    dump_json(fdir / MANIFEST, {
        "model_sha256": meta["_sha256"], "schema_hash": cache.schema_hash, "d_z": d_z, "captures": digests,
    })
    return version


def _latest_version(cache: TensorCache, version: str | None) -> str:
    versions = cache.feature_versions()
    if version is not None:
        if version not in versions:
            raise NetSentinelError(f"feature version {version!r} not found; run extract first")
        return version
    if len(versions) != 1:
        raise NetSentinelError(f"expected exactly one feature version, found {versions}; pass one explicitly")
    return versions[0]


def level_rows(cache: TensorCache, version: str, level: str, windows: Sequence[tuple[str, int]]) -> np.ndarray:
    """Feature rows of ``level`` for the given windows, in the given order."""
    by_capture: dict[str, set[int]] = {}
    for cid, w in windows:
        by_capture.setdefault(cid, set()).add(w)
    chunks = {}
    for cid, wanted in by_capture.items():
        ids, rows = cache.load_features(version, cid, level)
        for (w, _), r in zip(ids, rows):
            if w in wanted:
                chunks.setdefault((cid, w), []).append(r)
    out = [r for key in windows for r in chunks.get(key, [])]
    d_z = json.loads((cache.features_dir(version) / MANIFEST).read_text())["d_z"]
    return np.array(out, dtype=np.float64).reshape(-1, d_z)


# ------------------------------------------------------------------ detectors


def fit_detectors(
    cache_dir, levels: Sequence[str] = LEVELS, kind: str = "ae", target_fpr: float | None = None,
    out_dir: str | Path | None = None, version: str | None = None, seed: int = 0,
    captures=None, allow_mixed: bool = False, **params,
) -> dict[str, Path]:
    cache = TensorCache(resolve_cache_dir(cache_dir))
    version = _latest_version(cache, version)
    windows = normal_windows(cache, captures, allow_mixed)
    if not windows:
        raise EmptyInput("no normal windows to fit on")
    out_dir = Path(out_dir) if out_dir else cache.root / "detectors"
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for level in levels:
        if level not in LEVELS:
            raise ValueError(f"unknown level {level!r}")
        x = level_rows(cache, version, level, windows)
        det = fit_detector(x, kind, level, target_fpr, seed=seed, **params)
        path = out_dir / f"{level}.nsck"
        save_detector(path, det, {
            "features_version": version, "schema_hash": cache.schema_hash,
            "fit_windows": [list(w) for w in windows],
        })
        paths[level] = path
    return paths


def load_detectors(detectors_dir: str | Path, levels: Sequence[str] | None = None) -> dict[str, CalibratedDetector]:
    d = Path(detectors_dir)
    out = {}
    for level in levels or LEVELS:
        p = d / f"{level}.nsck"
        if p.exists():
            out[level] = load_detector(p)
        elif levels is not None:
            raise MissingDetector(f"no {level} detector in {d}")
    if not out:
        raise MissingDetector(f"no detectors in {d}")
    return out


def detect_cmd(cache_dir, detectors_dir: str | Path, out: str | Path | None = None,
               levels: Sequence[str] | None = None) -> Path:
    """Score every window at each level and write a JSONL verdict stream.

    The first line carries run metadata; records follow sorted by
    (capture, window, level, entity).
    """
    cache = TensorCache(resolve_cache_dir(cache_dir))
    dets = load_detectors(detectors_dir, levels)
    versions = {d.meta.get("features_version") for d in dets.values()}
    if len(versions) != 1:
        raise NetSentinelError("detectors were fitted on different feature versions")
    version = versions.pop()
    fit_windows = next(iter(dets.values())).meta.get("fit_windows", [])
    records = []
    for cid in cache.captures():
        for level, det in dets.items():
            ids, rows = cache.load_features(version, cid, level)
            if not ids:
                continue
            scores = det.score(rows.astype(np.float64))
            for (w, entity), s in zip(ids, scores):
                records.append((cid, w, _LEVEL_ORDER[level], entity, level, float(s), bool(s > det.threshold)))
    records.sort(key=lambda r: r[:4])
    out = Path(out) if out else cache.root / "verdicts.jsonl"
    meta = {
        "cache": str(cache.root.resolve()),
        "features_version": version,
        "fit_windows": fit_windows,
        "detectors": {lvl: {"kind": d.kind, "threshold": d.threshold, "target_fpr": d.target_fpr} for lvl, d in dets.items()},
        "captures": cache.captures(),
    }
    with open(out, "w") as fh:
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for cid, w, _, entity, level, s, flag in records:
            fh.write(json.dumps({"capture": cid, "window": w, "level": level, "entity": entity,
                                 "score": s, "anomalous": flag}, sort_keys=True) + "\n")
    return out


def read_verdicts(path: str | Path) -> tuple[dict, list[dict]]:
    meta, records = {}, []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            if "meta" in rec:
                meta = rec["meta"]
            else:
                records.append(rec)
    return meta, records


# ------------------------------------------------------------------ report


def _device_names(labels: dict | None) -> dict[str, str]:
    names = {}
    for entry in (labels or {}).values():
        for name, ip in entry.get("topology", {}).items():
            names[ip] = name
    return names


def _write_counts(path: Path, counts: dict[str, dict[str, int]], totals: dict, names: dict[str, str], edges: bool):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["scenario", "entity", "name", "anomalies", "verdicts"])
        for scenario, per in counts.items():
            for entity, c in sorted(per.items(), key=lambda kv: (-kv[1], kv[0])):
                if edges:
                    name = "|".join(names.get(p, p) for p in entity.split("|"))
                else:
                    name = names.get(entity, entity)
                out.writerow([scenario, entity, name, c, totals[scenario][entity]])


def report_cmd(verdicts_path: str | Path, labels_path: str | Path | None = None, out_dir: str | Path = "report") -> EvalReport:
    """Metrics (when labels are given), per-device / per-edge anomaly counts
    and a 2-D projection of the global features."""
    meta, records = read_verdicts(verdicts_path)
    labels = json.loads(Path(labels_path).read_text()) if labels_path else None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fit = {(c, int(w)) for c, w in meta.get("fit_windows", [])}

    def window_label(cid, w):
        if labels is None or cid not in labels:
            return None
        return labels[cid]["windows"][w]

    def count_bucket(cid, w):
        # per-window scenario when labelled, else the capture id
        return window_label(cid, w) or cid

    report = EvalReport()
    dets = meta.get("detectors", {})
    if "global" in dets:
        report.detector = dets["global"]["kind"]
        report.target_fpr = dets["global"]["target_fpr"]
    glob = [r for r in records if r["level"] == "global"]
    if labels is not None and glob:
        normal_train = [r["anomalous"] for r in glob if window_label(r["capture"], r["window"]) == "normal"
                        and (r["capture"], r["window"]) in fit]
        normal_test = [r["anomalous"] for r in glob if window_label(r["capture"], r["window"]) == "normal"
                       and (r["capture"], r["window"]) not in fit]
        attack: dict[str, list[bool]] = {}
        for r in glob:
            lab = window_label(r["capture"], r["window"])
            if lab not in (None, "normal"):
                attack.setdefault(lab, []).append(r["anomalous"])
        report.fpr_train = fpr(normal_train) if normal_train else None
        report.fpr_test = fpr(normal_test) if normal_test else None
        report.n_normal_windows = len(normal_train) + len(normal_test)
        report.n_attack_windows = sum(len(v) for v in attack.values())
        if attack:
            report.adr_overall, report.adr_per_scenario = adr(dict(sorted(attack.items())))
    names = _device_names(labels)
    for level, attr, fname in (("node", "per_node_counts", "device_counts.csv"), ("edge", "per_edge_counts", "edge_counts.csv")):
        rows = [(count_bucket(r["capture"], r["window"]), r["entity"], r["anomalous"]) for r in records if r["level"] == level]
        counts = entity_anomaly_counts(rows)
        totals = entity_anomaly_counts((s, e, True) for s, e, _ in rows)
        setattr(report, attr, counts)
        _write_counts(out_dir / fname, counts, totals, names, level == "edge")
    _write_projection(out_dir / "projection.csv", meta, glob, window_label, fit)
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    return report


def _write_projection(path: Path, meta: dict, glob: list[dict], window_label, fit: set):
    cache_root = meta.get("cache")
    if not cache_root or not glob or not Path(cache_root, MANIFEST).exists():
        return
    cache = TensorCache(cache_root)
    version = meta["features_version"]
    keys = [(r["capture"], r["window"]) for r in glob]
    x = level_rows(cache, version, "global", keys)
    if len(x) < 2:
        return
    labs = [window_label(c, w) for c, w in keys]
    if any(lab is not None for lab in labs):
        normal = np.array([lab == "normal" for lab in labs])
    else:
        normal = np.array([k in fit for k in keys]) if fit else None
    proj = project_2d(x, normal)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["capture", "window_index", "x", "y", "scenario"])
        for (cid, w), (px, py), lab in zip(keys, proj.coords, labs):
            out.writerow([cid, w, repr(float(px)), repr(float(py)), lab or ""])


# ------------------------------------------------------------------ cross-validation


def crossval(
    cache_dir, kind: str = "ae", target_fpr: float | None = None, k: int = 5, level: str = "global",
    version: str | None = None, seed: int = 0, captures=None, **params,
) -> EvalReport:
    """k-fold FPR on normal windows (contiguous time blocks) plus ADR of each
    fold's detector on every attack-labelled window."""
    cache = TensorCache(resolve_cache_dir(cache_dir))
    version = _latest_version(cache, version)
    target_fpr = DEFAULT_TARGET_FPR[kind] if target_fpr is None else target_fpr
    normal = normal_windows(cache, captures, allow_mixed=True)
    attack: dict[str, list[tuple[str, int]]] = {}
    for cid in cache.captures():
        for w, lab in enumerate(cache.window_scenarios(cid) or []):
            if lab != "normal":
                attack.setdefault(lab, []).append((cid, w))
    if level != "global":
        raise ValueError("cross-validation is defined on window-level (global) verdicts")
    x = level_rows(cache, version, level, normal)
    attack_x = {s: level_rows(cache, version, level, ws) for s, ws in sorted(attack.items())}
    report = EvalReport(detector=kind, target_fpr=target_fpr, fold_count=k, n_normal_windows=len(normal),
                        n_attack_windows=sum(len(v) for v in attack.values()))
    train_flags, test_flags, attack_flags = [], [], {s: [] for s in attack_x}
    for fold, (tr, te) in enumerate(kfold(len(x), k, seed)):
        det = fit_detector(x[tr], kind, level, target_fpr, seed=seed, **params)
        n_cal = det.meta["n_calibration"]
        cal_flags = (det.score(x[tr][-n_cal:]) > det.threshold).tolist()
        tr_flags = (det.score(x[tr]) > det.threshold).tolist()
        te_flags = (det.score(x[te]) > det.threshold).tolist()
        train_flags += tr_flags
        test_flags += te_flags
        entry = {"fold": fold, "fpr_calibration": fpr(cal_flags), "fpr_test": fpr(te_flags), "threshold": det.threshold}
        for s, ax in attack_x.items():
            flags = (det.score(ax) > det.threshold).tolist()
            attack_flags[s] += flags
            entry[f"adr_{s}"] = sum(flags) / len(flags)
        report.folds.append(entry)
    report.fpr_train = fpr(train_flags)
    report.fpr_test = fpr(test_flags)
    if any(attack_flags.values()):
        report.adr_overall, report.adr_per_scenario = adr(attack_flags)
    return report
