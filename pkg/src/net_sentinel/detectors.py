"""LOF, one-class SVM and autoencoder detectors with threshold calibration.

All scores follow one convention: higher means more anomalous, and a
verdict is anomalous only when the score strictly exceeds the threshold.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import torch
from torch import nn

from . import kernels
from .errors import NoConvergence, NonFiniteLoss, WidthMismatch

log = logging.getLogger(__name__)

Level = Literal["global", "node", "edge"]
LEVELS: tuple[str, ...] = ("global", "node", "edge")

KDIST_FLOOR = 1e-12
STD_FLOOR = 1e-12
DEFAULT_TARGET_FPR = {"lof": 0.1, "ocsvm": 0.1, "ae": 0.01}


def pairwise_distances(a: np.ndarray, b: np.ndarray, budget: int = 4_000_000) -> np.ndarray:
    """Euclidean distances by explicit differences (no norm-expansion cancellation)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    out = np.empty((len(a), len(b)))
    step = max(1, budget // max(1, len(b) * a.shape[1]))
    for lo in range(0, len(a), step):
        diff = a[lo : lo + step, None, :] - b[None, :, :]
        out[lo : lo + step] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        std = x.std(axis=0)
        # constant channels pass through centred rather than blowing up
        return cls(x.mean(axis=0), np.where(std > STD_FLOOR, std, 1.0))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.scale


# --------------------------------------------------------------------------- LOF


@dataclass
class LofModel:
    train: np.ndarray
    k_neighbors: int
    k_distance: np.ndarray
    lrd: np.ndarray
    train_lof: np.ndarray


def _neighbors(dist: np.ndarray, k: int) -> np.ndarray:
    # stable sort: ties resolved by training-row index
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def fit_lof(train: np.ndarray, k_neighbors: int = 20) -> LofModel:
    x = np.asarray(train, dtype=np.float64)
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    if x.ndim != 2 or len(x) < k_neighbors + 1:
        raise ValueError(f"LOF needs at least k_neighbors + 1 = {k_neighbors + 1} training rows")
    d = pairwise_distances(x, x)
    np.fill_diagonal(d, np.inf)
    nn_idx = _neighbors(d, k_neighbors)
    kdist = np.maximum(np.take_along_axis(d, nn_idx[:, -1:], axis=1)[:, 0], KDIST_FLOOR)
    reach = np.maximum(kdist[nn_idx], np.take_along_axis(d, nn_idx, axis=1))
    lrd = 1.0 / reach.mean(axis=1)
    train_lof = lrd[nn_idx].mean(axis=1) / lrd
    return LofModel(x, k_neighbors, kdist, lrd, train_lof)


def score_lof(model: LofModel, x: np.ndarray) -> np.ndarray:
    """LOF of new points relative to the training set (duplicates count as neighbours)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d = pairwise_distances(x, model.train)
    nn_idx = _neighbors(d, model.k_neighbors)
    reach = np.maximum(model.k_distance[nn_idx], np.take_along_axis(d, nn_idx, axis=1))
    lrd_x = 1.0 / reach.mean(axis=1)
    return model.lrd[nn_idx].mean(axis=1) / lrd_x


# ------------------------------------------------------------------------- OCSVM


@dataclass
class OcsvmModel:
    support_vectors: np.ndarray
    alpha: np.ndarray
    rho: float
    gamma: float
    nu: float
    iterations: int = 0
    kkt_gap: float = 0.0
    full_alpha: np.ndarray | None = field(default=None, repr=False)


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * pairwise_distances(a, b) ** 2)


def default_gamma(x: np.ndarray) -> float:
    var = float(np.asarray(x).var())
    return 1.0 / (x.shape[1] * var) if var > 0 else 1.0


def fit_ocsvm(
    train: np.ndarray,
    nu: float = 0.1,
    gamma: float | None = None,
    tol: float = 1e-9,
    max_iter: int = 1_000_000,
) -> OcsvmModel:
    """nu-one-class SVM via SMO on the dual.

    Dual: minimise 0.5 a'Ka subject to 0 <= a_i <= 1/(nu n), sum a = 1.
    """
    x = np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("OCSVM needs a non-empty 2-D training matrix")
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in (0, 1]")
    n = len(x)
    gamma = default_gamma(x) if gamma is None else float(gamma)
    K = np.ascontiguousarray(rbf_kernel(x, x, gamma))
    C = 1.0 / (nu * n)
    alpha = np.zeros(n)
    full = min(n, int(math.floor(nu * n + 1e-12)))
    alpha[:full] = C
    if full < n:
        alpha[full] = 1.0 - full * C
    iterations, gap = kernels.smo_solve(K, alpha, C, tol, max_iter)
    if gap >= tol and iterations >= max_iter:
        raise NoConvergence(f"SMO stopped after {iterations} iterations", kkt_violation=gap)
    G = K @ alpha
    free = (alpha > 0) & (alpha < C)
    if free.any():
        # free vectors agree on the offset to within tol; taking the lowest
        # keeps every one of them on (not just outside) the boundary
        sv = alpha > 0
        rho = float((rbf_kernel(x[free], x[sv], gamma) @ alpha[sv]).min())
    else:
        lo = G[alpha >= C].max(initial=-np.inf)
        hi = G[alpha <= 0].min(initial=np.inf)
        rho = float((lo + hi) / 2) if np.isfinite(lo) and np.isfinite(hi) else float(lo if np.isfinite(lo) else hi)
    sv = alpha > 0
    return OcsvmModel(x[sv], alpha[sv], rho, gamma, nu, iterations, gap, alpha)


def score_ocsvm(model: OcsvmModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return model.rho - rbf_kernel(x, model.support_vectors, model.gamma) @ model.alpha


# ---------------------------------------------------------------------------- AE


class _AutoEncoder(nn.Module):
    def __init__(self, width: int, hidden: int, bottleneck: int):
        super().__init__()
        self.encoder = nn.Sequential(nn.Linear(width, hidden), nn.ReLU(), nn.Linear(hidden, bottleneck))
        self.decoder = nn.Sequential(nn.Linear(bottleneck, hidden), nn.ReLU(), nn.Linear(hidden, width))

    def forward(self, x):
        return self.decoder(self.encoder(x))


@dataclass
class AeModel:
    net: _AutoEncoder
    standardizer: Standardizer
    bottleneck: int
    hidden: int
    history: list[float] = field(default_factory=list)


def fit_ae(
    train: np.ndarray,
    bottleneck: int | None = None,
    epochs: int = 300,
    seed: int = 0,
    lr: float = 1e-3,
    batch_size: int = 64,
    hidden: int | None = None,
) -> AeModel:
    x = np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("autoencoder needs at least two training rows")
    width = x.shape[1]
    bottleneck = bottleneck or max(1, width // 4)
    if bottleneck >= width:
        raise ValueError("bottleneck must be narrower than the input")
    hidden = hidden or max(2 * bottleneck, width // 2)
    # canonical row order makes the fit independent of input ordering
    x = x[np.lexsort(x.T[::-1])]
    std = Standardizer.fit(x)
    xs = std(x)
    data = torch.as_tensor(xs, dtype=torch.float64)

    torch.manual_seed(seed)
    net = _AutoEncoder(width, hidden, bottleneck).double()
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    gen = torch.Generator().manual_seed(seed)
    history = []
    for epoch in range(epochs):
        perm = torch.randperm(len(data), generator=gen)
        total = 0.0
        for lo in range(0, len(data), batch_size):
            batch = data[perm[lo : lo + batch_size]]
            value = ((net(batch) - batch) ** 2).sum(dim=1).mean()
            if not torch.isfinite(value):
                raise NonFiniteLoss(f"autoencoder loss diverged at epoch {epoch}", {"epoch": epoch})
            opt.zero_grad()
            value.backward()
            opt.step()
            total += value.item() * len(batch)
        history.append(total / len(data))
    net.eval()
    return AeModel(net, std, bottleneck, hidden, history)


def score_ae(model: AeModel, x: np.ndarray) -> np.ndarray:
    xs = torch.as_tensor(model.standardizer(np.atleast_2d(x)), dtype=torch.float64)
    with torch.no_grad():
        return ((model.net(xs) - xs) ** 2).sum(dim=1).numpy()


# ------------------------------------------------------------------ calibration


def calibrate(scores_normal, target_fpr: float) -> float:
    """Smallest order statistic whose strict exceedances stay within ``target_fpr``."""
    s = np.sort(np.asarray(scores_normal, dtype=np.float64))
    if s.size == 0:
        raise ValueError("calibration needs at least one score")
    if not 0 < target_fpr < 0.5:
        raise ValueError("target_fpr must lie in (0, 0.5)")
    allowed = int(math.floor(target_fpr * s.size + 1e-9))
    return float(s[s.size - allowed - 1])


@dataclass
class CalibratedDetector:
    kind: str
    level: str
    model: LofModel | OcsvmModel | AeModel
    threshold: float
    target_fpr: float
    width: int
    standardizer: Standardizer | None = None
    meta: dict = field(default_factory=dict)

    def score(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.width:
            raise WidthMismatch(f"detector expects width {self.width}, got {x.shape[1]}")
        if len(x) == 0:
            return np.zeros(0)
        if self.kind == "ae":
            return score_ae(self.model, x)
        xs = self.standardizer(x)
        if self.kind == "lof":
            return score_lof(self.model, xs)
        return score_ocsvm(self.model, xs)


def fit_detector(
    x: np.ndarray,
    kind: str,
    level: str = "global",
    target_fpr: float | None = None,
    calib_fraction: float = 0.25,
    seed: int = 0,
    max_train: int = 4000,
    **params,
) -> CalibratedDetector:
    """Fit on the leading rows and calibrate the threshold on the trailing
    ``calib_fraction`` (rows are expected in time order)."""
    x = np.asarray(x, dtype=np.float64)
    if kind not in DEFAULT_TARGET_FPR:
        raise ValueError(f"unknown detector {kind!r}")
    target_fpr = DEFAULT_TARGET_FPR[kind] if target_fpr is None else target_fpr
    n_cal = max(1, int(round(calib_fraction * len(x))))
    fit_x, cal_x = x[: len(x) - n_cal], x[len(x) - n_cal :]
    if len(fit_x) < 2:
        raise ValueError(f"{len(x)} rows leave too few to fit after holding out {n_cal} for calibration")
    if len(fit_x) > max_train and kind in ("lof", "ocsvm"):
        keep = np.sort(np.random.default_rng(seed).choice(len(fit_x), max_train, replace=False))
        fit_x = fit_x[keep]
    std = None
    if kind == "ae":
        model = fit_ae(fit_x, seed=seed, **params)
    else:
        std = Standardizer.fit(fit_x)
        if kind == "lof":
            k = min(params.get("k_neighbors", 20), len(fit_x) - 1)
            model = fit_lof(std(fit_x), k)
        else:
            model = fit_ocsvm(std(fit_x), nu=params.get("nu", 0.1), gamma=params.get("gamma"))
    det = CalibratedDetector(kind, level, model, 0.0, target_fpr, x.shape[1], std)
    det.threshold = calibrate(det.score(cal_x), target_fpr)
    det.meta.update(n_fit=len(fit_x), n_calibration=len(cal_x))
    return det


@dataclass(frozen=True)
class Verdict:
    entity: str
    score: float
    anomalous: bool


def edge_id(key: tuple[str, str]) -> str:
    return f"{key[0]}|{key[1]}"


def level_matrix(features, level: str) -> tuple[list[str], np.ndarray]:
    """Entity ids and stacked rows of one level of a HierarchicalFeatures."""
    if level == "global":
        return ["global"], np.atleast_2d(features.global_feature)
    if level == "node":
        ids = list(features.node_features)
        return ids, np.array([features.node_features[n] for n in ids]).reshape(len(ids), -1)
    if level == "edge":
        keys = list(features.edge_features)
        return [edge_id(k) for k in keys], np.array([features.edge_features[k] for k in keys]).reshape(len(keys), -1)
    raise ValueError(f"unknown level {level!r}")


def detect(detector: CalibratedDetector, features, level: str | None = None) -> list[Verdict]:
    level = level or detector.level
    if level != detector.level:
        raise ValueError(f"detector was fitted for level {detector.level!r}, not {level!r}")
    ids, x = level_matrix(features, level)
    if not ids:
        return []
    if x.shape[1] != detector.width:
        raise WidthMismatch(f"detector expects width {detector.width}, got {x.shape[1]}")
    scores = detector.score(x)
    return [Verdict(i, float(s), bool(s > detector.threshold)) for i, s in zip(ids, scores)]


# ------------------------------------------------------------------ persistence


def save_detector(path, det: CalibratedDetector, extra: dict | None = None) -> str:
    from .container import write_container

    meta = {
        "kind": det.kind,
        "level": det.level,
        "threshold": det.threshold,
        "target_fpr": det.target_fpr,
        "width": det.width,
        **det.meta,
        **(extra or {}),
    }
    arrays: dict[str, np.ndarray] = {}
    if det.standardizer is not None:
        arrays["std.mean"], arrays["std.scale"] = det.standardizer.mean, det.standardizer.scale
    m = det.model
    if det.kind == "lof":
        meta["k_neighbors"] = m.k_neighbors
        arrays.update({"lof.train": m.train, "lof.k_distance": m.k_distance, "lof.lrd": m.lrd, "lof.train_lof": m.train_lof})
    elif det.kind == "ocsvm":
        meta.update(rho=m.rho, gamma=m.gamma, nu=m.nu, iterations=m.iterations, kkt_gap=m.kkt_gap)
        arrays.update({"ocsvm.support_vectors": m.support_vectors, "ocsvm.alpha": m.alpha})
    else:
        meta.update(bottleneck=m.bottleneck, hidden=m.hidden, history=m.history)
        arrays.update({"ae.mean": m.standardizer.mean, "ae.scale": m.standardizer.scale})
        arrays.update({f"ae.net.{k}": v.numpy() for k, v in m.net.state_dict().items()})
    return write_container(path, "detector", meta, arrays)


def load_detector(path) -> CalibratedDetector:
    from .container import read_container

    meta, a = read_container(path, expect_kind="detector")
    kind = meta["kind"]
    std = Standardizer(a["std.mean"], a["std.scale"]) if "std.mean" in a else None
    if kind == "lof":
        model = LofModel(a["lof.train"], meta["k_neighbors"], a["lof.k_distance"], a["lof.lrd"], a["lof.train_lof"])
    elif kind == "ocsvm":
        model = OcsvmModel(a["ocsvm.support_vectors"], a["ocsvm.alpha"], meta["rho"], meta["gamma"], meta["nu"])
    else:
        width = meta["width"]
        net = _AutoEncoder(width, meta["hidden"], meta["bottleneck"]).double()
        prefix = "ae.net."
        net.load_state_dict({k[len(prefix) :]: torch.as_tensor(v) for k, v in a.items() if k.startswith(prefix)})
        net.eval()
        model = AeModel(net, Standardizer(a["ae.mean"], a["ae.scale"]), meta["bottleneck"], meta["hidden"], meta["history"])
    known = {"kind", "level", "threshold", "target_fpr", "width"}
    extra = {k: v for k, v in meta.items() if k not in known}
    return CalibratedDetector(kind, meta["level"], model, meta["threshold"], meta["target_fpr"], meta["width"], std, extra)
