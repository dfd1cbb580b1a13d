"""Rolling packet windows and the per-window communication graph."""

from __future__ import annotations

import ipaddress
import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence, TypeVar

from .errors import TooShort, Undissectable
from .packet import ParsedPacket
from .pcap import RawRecord, dissect

DEFAULT_MAX_EDGE_LEN = 256

T = TypeVar("T")


@dataclass
class PacketWindow:
    window_index: int
    start_time: float
    end_time: float
    packets: list = field(default_factory=list)


def roll_windows(stream: Iterable, window_len: float, stride: float | None = None) -> Iterator[PacketWindow]:
    """Slice a time-ordered stream into ``[start, start + window_len)`` windows.

    Window ``j`` starts at ``t0 + j * stride`` where ``t0`` is the first
    timestamp; windows are produced until the start passes the last
    timestamp, empty ones included. Items only need a ``timestamp``.
    """
    stride = window_len if stride is None else stride
    if window_len <= 0 or not 0 < stride <= window_len:
        raise ValueError("need window_len > 0 and 0 < stride <= window_len")
    it = iter(stream)
    pending = next(it, None)
    if pending is None:
        return
    t0 = pending.timestamp
    last = t0
    buf: deque = deque()
    j = 0
    while True:
        start = t0 + j * stride
        end = start + window_len
        while pending is not None and pending.timestamp < end:
            buf.append(pending)
            last = pending.timestamp
            pending = next(it, None)
        while buf and buf[0].timestamp < start:
            buf.popleft()
        yield PacketWindow(j, start, end, list(buf))
        j += 1
        if pending is None and t0 + j * stride > last:
            return


@lru_cache(maxsize=65536)
def ip_sort_key(ip: str) -> tuple[int, bytes]:
    addr = ipaddress.ip_address(ip)
    return addr.version, addr.packed


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if ip_sort_key(a) <= ip_sort_key(b) else (b, a)


@dataclass
class Edge:
    packets: list[ParsedPacket] = field(default_factory=list)
    directions: list[int] = field(default_factory=list)
    truncated: int = 0

    @property
    def count(self) -> int:
        """Packets seen on the edge, including the truncated ones."""
        return len(self.packets) + self.truncated


@dataclass
class CommGraph:
    nodes: list[str] = field(default_factory=list)
    edges: dict[tuple[str, str], Edge] = field(default_factory=dict)
    undissectable: int = 0
    self_pairs: int = 0

    def packet_count(self) -> int:
        return sum(e.count for e in self.edges.values())


def build_graph(w: PacketWindow, max_edge_len: int | None = DEFAULT_MAX_EDGE_LEN) -> CommGraph:
    """Group a window's packets into an undirected graph keyed by IP pair.

    Raw records are dissected on the fly; failures and self-pairs are counted
    and dropped. Each edge keeps its ``max_edge_len`` most recent packets.
    """
    g = CommGraph()
    edges: dict[tuple[str, str], Edge] = {}
    for item in w.packets:
        if isinstance(item, RawRecord):
            try:
                p = dissect(item.frame, item.timestamp)
            except Undissectable:
                g.undissectable += 1
                continue
        else:
            p = item
        if p.src_ip == p.dst_ip:
            g.self_pairs += 1
            continue
        key = canonical_pair(p.src_ip, p.dst_ip)
        e = edges.get(key)
        if e is None:
            e = edges[key] = Edge()
        e.packets.append(p)
        e.directions.append(0 if p.src_ip == key[0] else 1)
    for key in sorted(edges, key=lambda k: (ip_sort_key(k[0]), ip_sort_key(k[1]))):
        e = edges[key]
        # stable sort keeps ingest order for equal timestamps
        order = sorted(range(len(e.packets)), key=lambda n: e.packets[n].timestamp)
        e.packets = [e.packets[n] for n in order]
        e.directions = [e.directions[n] for n in order]
        if max_edge_len is not None and len(e.packets) > max_edge_len:
            e.truncated = len(e.packets) - max_edge_len
            e.packets = e.packets[-max_edge_len:]
            e.directions = e.directions[-max_edge_len:]
        g.edges[key] = e
    nodes = {n for key in g.edges for n in key}
    g.nodes = sorted(nodes, key=ip_sort_key)
    return g


def split_sequence(packets: Sequence[T]) -> tuple[list[T], list[T]]:
    if len(packets) < 2:
        raise TooShort(f"need at least 2 packets to split, got {len(packets)}")
    k = math.ceil(len(packets) / 2)
    return list(packets[:k]), list(packets[k:])
