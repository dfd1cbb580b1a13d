"""FPR/ADR metrics, time-contiguous k-fold splits, per-entity anomaly
counts and a PCA projection of global features for plotting."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DegenerateCovariance, EmptyInput, TooFewWindows


def _flags(verdicts: Iterable) -> list[bool]:
    return [bool(getattr(v, "anomalous", v)) for v in verdicts]


def fpr(verdicts: Iterable) -> float:
    """Fraction of normal-window verdicts flagged anomalous."""
    flags = _flags(verdicts)
    if not flags:
        raise EmptyInput("no normal verdicts")
    return sum(flags) / len(flags)


def adr(verdicts_by_scenario: Mapping[str, Iterable]) -> tuple[float, dict[str, float]]:
    """Per-scenario detection rates and the rate pooled over all attack windows."""
    per, hits, total = {}, 0, 0
    for scenario, verdicts in verdicts_by_scenario.items():
        flags = _flags(verdicts)
        if not flags:
            continue
        per[scenario] = sum(flags) / len(flags)
        hits += sum(flags)
        total += len(flags)
    if total == 0:
        raise EmptyInput("no attack-scenario verdicts")
    return hits / total, per


def kfold(n_windows: int, k: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split window indices ``0..n-1`` into ``k`` contiguous test blocks.

    Blocks follow time order (overlapping windows would leak across random
    folds), so the split is fully determined by ``n_windows`` and ``k``;
    ``seed`` is accepted for interface symmetry.
    """
    if k < 2:
        raise ValueError("k-fold needs k >= 2")
    if n_windows < k:
        raise TooFewWindows(f"{n_windows} windows cannot form {k} folds")
    idx = np.arange(n_windows)
    return [(np.setdiff1d(idx, test), test) for test in np.array_split(idx, k)]


def entity_anomaly_counts(records: Iterable[tuple[str, str, bool]]) -> dict[str, dict[str, int]]:
    """``(scenario, entity, anomalous)`` triples -> {scenario: {entity: count}}.

    Every entity that received a verdict is listed, with zero when never flagged.
    """
    out: dict[str, dict[str, int]] = defaultdict(dict)
    for scenario, entity, anomalous in records:
        bucket = out[scenario]
        bucket[entity] = bucket.get(entity, 0) + int(bool(anomalous))
    return {s: dict(sorted(c.items())) for s, c in sorted(out.items())}


def competition_rank(counts: Mapping[str, int], entity: str) -> int:
    """1 + number of entities with a strictly larger count (ties share a rank)."""
    mine = counts.get(entity, 0)
    return 1 + sum(1 for c in counts.values() if c > mine)


@dataclass
class Projection:
    coords: np.ndarray
    components: np.ndarray
    mean: np.ndarray
    fallback: bool = False


def project_2d(features: np.ndarray, normal_mask: np.ndarray | None = None) -> Projection:
    """Project onto the top-2 principal axes of the normal rows.

    Each axis is signed so that its largest-magnitude loading is positive.
    When the normal covariance has rank < 2 the two highest-variance
    coordinate axes are used instead.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("projection needs at least two rows")
    ref = x if normal_mask is None or not np.any(normal_mask) else x[np.asarray(normal_mask, dtype=bool)]
    mean = ref.mean(axis=0)
    try:
        comps = _principal_axes(ref - mean)
        fallback = False
    except DegenerateCovariance:
        var = ref.var(axis=0) if len(ref) > 1 else np.zeros(x.shape[1])
        order = np.argsort(-var, kind="stable")[:2]
        comps = np.zeros((2, x.shape[1]))
        comps[np.arange(len(order)), order] = 1.0
        fallback = True
    return Projection((x - mean) @ comps.T, comps, mean, fallback)


def _principal_axes(centred: np.ndarray) -> np.ndarray:
    if len(centred) < 2 or centred.shape[1] < 2:
        raise DegenerateCovariance("need at least two rows and two columns")
    cov = centred.T @ centred / (len(centred) - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:2]
    vals, vecs = vals[order], vecs[:, order]
    if vals[1] <= 1e-12 * max(vals[0], 1e-300):
        raise DegenerateCovariance("normal covariance has rank < 2")
    comps = vecs.T.copy()
    for c in comps:
        if c[np.argmax(np.abs(c))] < 0:
            c *= -1
    return comps


@dataclass
class EvalReport:
    fpr_train: float | None = None
    fpr_test: float | None = None
    adr_overall: float | None = None
    adr_per_scenario: dict[str, float] = field(default_factory=dict)
    per_node_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    per_edge_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    fold_count: int = 0
    detector: str | None = None
    target_fpr: float | None = None
    n_normal_windows: int = 0
    n_attack_windows: int = 0
    folds: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)
