"""Edge, node and global features for one window, all by summation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import UnknownNode
from .transformer import EncodedSequence


@dataclass
class HierarchicalFeatures:
    edge_features: dict[tuple[str, str], np.ndarray]
    node_features: dict[str, np.ndarray]
    global_feature: np.ndarray
    window_index: int = 0
    d_z: int = field(default=0)


def edge_feature(encoded: EncodedSequence | np.ndarray, d_z: int | None = None) -> np.ndarray:
    if isinstance(encoded, EncodedSequence):
        z = encoded.vectors[encoded.mask]
        d_z = encoded.vectors.shape[1]
    else:
        z = np.asarray(encoded, dtype=np.float64)
        d_z = z.shape[1] if z.ndim == 2 else d_z
    if len(z) == 0:
        return np.zeros(d_z)
    return z.sum(axis=0)


def node_feature(edge_map: Mapping[tuple[str, str], np.ndarray], node: str, nodes=None, d_z: int | None = None) -> np.ndarray:
    """Sum of the features of every edge incident to ``node``.

    ``nodes`` optionally lists the graph's node set so that an isolated node
    yields zeros instead of :class:`UnknownNode`.
    """
    incident = [v for (i, k), v in edge_map.items() if node in (i, k)]
    if not incident:
        if nodes is None or node not in nodes:
            raise UnknownNode(node)
        width = d_z if d_z is not None else next((len(v) for v in edge_map.values()), 0)
        return np.zeros(width)
    return np.sum(incident, axis=0)


def global_feature(edge_map: Mapping[tuple[str, str], np.ndarray], d_z: int) -> np.ndarray:
    if not edge_map:
        return np.zeros(d_z)
    return np.sum(list(edge_map.values()), axis=0)


def aggregate(
    edge_keys: list[tuple[str, str]], edge_matrix: np.ndarray, nodes: list[str], d_z: int, window_index: int = 0
) -> HierarchicalFeatures:
    """Vectorised node/global sums over a stacked ``(n_edges, d_z)`` matrix."""
    edge_matrix = np.asarray(edge_matrix, dtype=np.float64).reshape(len(edge_keys), d_z)
    index = {n: i for i, n in enumerate(nodes)}
    node_mat = np.zeros((len(nodes), d_z))
    if edge_keys:
        np.add.at(node_mat, np.array([index[i] for i, _ in edge_keys]), edge_matrix)
        np.add.at(node_mat, np.array([index[k] for _, k in edge_keys]), edge_matrix)
    return HierarchicalFeatures(
        edge_features={k: edge_matrix[n] for n, k in enumerate(edge_keys)},
        node_features={n: node_mat[i] for i, n in enumerate(nodes)},
        global_feature=edge_matrix.sum(axis=0) if edge_keys else np.zeros(d_z),
        window_index=window_index,
        d_z=d_z,
    )


def featurize_window(graph, model, schema=None, window_index: int = 0) -> HierarchicalFeatures:
    """Encode every edge of a :class:`~net_sentinel.windowing.CommGraph` and aggregate."""
    from .packet import encode_packets

    schema = schema or model.schema
    keys = list(graph.edges)
    rows = [encode_packets(graph.edges[k].packets, graph.edges[k].directions, schema) for k in keys]
    return featurize_rows(keys, rows, graph.nodes, model, window_index)


def featurize_rows(keys, rows, nodes, model, window_index: int = 0) -> HierarchicalFeatures:
    from .transformer import encode_many

    d_z = model.config.d_z
    z = encode_many(model, rows) if rows else []
    edges = np.array([zi.sum(axis=0) for zi in z]) if z else np.zeros((0, d_z))
    return aggregate(keys, edges, nodes, d_z, window_index)
