"""Packet representation, feature schemas and packet -> vector encoding."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import SchemaMismatch


class Protocol(str, enum.Enum):
    ARP = "ARP"
    IP = "IP"
    IPV6 = "IPv6"
    TCP = "TCP"
    UDP = "UDP"


PROTOCOLS = [p.value for p in Protocol]


class Service(str, enum.Enum):
    DNP3 = "DNP3"
    FTP = "FTP"
    HTTP = "HTTP"
    HTTPS = "HTTPS"
    GIT = "GIT"
    TELNET = "TELNET"
    SSH = "SSH"
    X11 = "X11"
    DNS = "DNS"
    NTP = "NTP"
    OTHER = "OTHER"


SERVICES = [s.value for s in Service]

_SERVICE_PORTS = {
    20000: Service.DNP3,
    20: Service.FTP,
    21: Service.FTP,
    80: Service.HTTP,
    443: Service.HTTPS,
    9418: Service.GIT,
    23: Service.TELNET,
    22: Service.SSH,
    53: Service.DNS,
    123: Service.NTP,
}
_SERVICE_PORTS.update({p: Service.X11 for p in range(6000, 6064)})


class TcpFlags(NamedTuple):
    syn: bool = False
    ack: bool = False
    psh: bool = False
    urg: bool = False


@dataclass(frozen=True, slots=True)
class ParsedPacket:
    """One dissected frame.

    ``ttl``, ``tcp_seq`` and ``tcp_window`` are extras needed by the TCP
    schema; they are ``None`` whenever the frame does not carry them.
    """

    timestamp: float
    src_ip: str
    dst_ip: str
    protocol: Protocol
    length: int
    raw_bytes: bytes = field(repr=False)
    src_port: int | None = None
    dst_port: int | None = None
    tcp_flags: TcpFlags | None = None
    ttl: int | None = None
    tcp_seq: int | None = None
    tcp_window: int | None = None


class ChannelKind(str, enum.Enum):
    BINARY = "binary"
    CATEGORICAL = "categorical"
    NUMERICAL = "numerical"


@dataclass(frozen=True)
class Channel:
    name: str
    kind: ChannelKind
    cardinality: int = 1
    normalization: str = "identity"

    @property
    def width(self) -> int:
        return self.cardinality if self.kind is ChannelKind.CATEGORICAL else 1


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    channels: tuple[Channel, ...]

    def __post_init__(self):
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise SchemaMismatch(f"duplicate channel names in schema {self.name!r}")

    @property
    def total_width(self) -> int:
        return sum(c.width for c in self.channels)

    def offsets(self) -> dict[str, slice]:
        out, pos = {}, 0
        for c in self.channels:
            out[c.name] = slice(pos, pos + c.width)
            pos += c.width
        return out

    def columns(self, kind: ChannelKind) -> np.ndarray:
        """Column indices of every channel of ``kind`` (categoricals flattened)."""
        offs = self.offsets()
        cols = [np.arange(offs[c.name].start, offs[c.name].stop) for c in self.channels if c.kind is kind]
        return np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)

    def categorical_slices(self) -> list[slice]:
        offs = self.offsets()
        return [offs[c.name] for c in self.channels if c.kind is ChannelKind.CATEGORICAL]

    def has(self, name: str, kind: ChannelKind | None = None) -> bool:
        return any(c.name == name and (kind is None or c.kind is kind) for c in self.channels)

    def manifest(self) -> dict:
        return {
            "name": self.name,
            "total_width": self.total_width,
            "channels": [
                {
                    "order": i,
                    "name": c.name,
                    "kind": c.kind.value,
                    "cardinality": c.cardinality,
                    "normalization": c.normalization,
                }
                for i, c in enumerate(self.channels)
            ],
        }

    @classmethod
    def from_manifest(cls, manifest: dict) -> "FeatureSchema":
        chans = sorted(manifest["channels"], key=lambda c: c["order"])
        return cls(
            manifest["name"],
            tuple(Channel(c["name"], ChannelKind(c["kind"]), c["cardinality"], c["normalization"]) for c in chans),
        )

    def hash(self) -> str:
        blob = json.dumps(self.manifest(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


N_BYTE_CHANNELS = 512

_B = ChannelKind.BINARY
_C = ChannelKind.CATEGORICAL
_N = ChannelKind.NUMERICAL


def tcp_schema() -> FeatureSchema:
    return FeatureSchema(
        "tcp",
        (
            Channel("direction", _B),
            Channel("tcp syn", _B),
            Channel("tcp ack", _B),
            Channel("tcp psh", _B),
            Channel("tcp urg", _B),
            Channel("protocol", _C, len(PROTOCOLS)),
            Channel("service", _C, len(SERVICES)),
            Channel("len", _N, normalization="log1p_len"),
            Channel("delta time", _N, normalization="log1p_clamp10"),
            Channel("source port", _N, normalization="div65535"),
            Channel("dest port", _N, normalization="div65535"),
            Channel("tcp seq", _N, normalization="div2pow32"),
            Channel("tcp ttl", _N, normalization="div255"),
            Channel("tcp window", _N, normalization="div65535"),
            Channel("port 22 len", _N, normalization="log1p_len"),
            Channel("port 23 len", _N, normalization="log1p_len"),
        ),
    )


def byte_schema() -> FeatureSchema:
    byte_channels = tuple(Channel(f"byte {i}", _N, normalization="div255") for i in range(N_BYTE_CHANNELS))
    return FeatureSchema(
        "byte",
        (
            Channel("direction", _B),
            Channel("protocol", _C, len(PROTOCOLS)),
            Channel("len", _N, normalization="log1p_len"),
            Channel("delta time", _N, normalization="log1p_clamp10"),
        )
        + byte_channels,
    )


def schema_by_name(name: str) -> FeatureSchema:
    if name == "tcp":
        return tcp_schema()
    if name == "byte":
        return byte_schema()
    raise SchemaMismatch(f"unknown schema {name!r}")


def infer_service(src_port: int | None, dst_port: int | None) -> Service:
    if src_port is None or dst_port is None:
        return Service.OTHER
    return _SERVICE_PORTS.get(min(src_port, dst_port), Service.OTHER)


_LOG_LEN_SCALE = math.log1p(65535)


def _normalize(name: str, values: np.ndarray) -> np.ndarray:
    if name == "log1p_len":
        return np.log1p(values) / _LOG_LEN_SCALE
    if name == "log1p_clamp10":
        return np.clip(np.log1p(np.maximum(values, 0.0)), 0.0, 10.0)
    if name == "div65535":
        return values / 65535.0
    if name == "div2pow32":
        return values / 4294967296.0
    if name == "div255":
        return values / 255.0
    if name == "identity":
        return values
    raise SchemaMismatch(f"unknown normalization {name!r}")


def _raw_columns(packets: Sequence[ParsedPacket], deltas: np.ndarray, directions: np.ndarray) -> dict[str, np.ndarray]:
    n = len(packets)
    f64 = np.float64
    length = np.fromiter((p.length for p in packets), f64, n)
    sport = np.fromiter((p.src_port or 0 for p in packets), f64, n)
    dport = np.fromiter((p.dst_port or 0 for p in packets), f64, n)
    flags = [p.tcp_flags or TcpFlags() for p in packets]
    on_22 = np.fromiter((22 in (p.src_port, p.dst_port) for p in packets), bool, n)
    on_23 = np.fromiter((23 in (p.src_port, p.dst_port) for p in packets), bool, n)
    return {
        "direction": directions.astype(f64),
        "tcp syn": np.fromiter((f.syn for f in flags), f64, n),
        "tcp ack": np.fromiter((f.ack for f in flags), f64, n),
        "tcp psh": np.fromiter((f.psh for f in flags), f64, n),
        "tcp urg": np.fromiter((f.urg for f in flags), f64, n),
        "len": length,
        "delta time": deltas,
        "source port": sport,
        "dest port": dport,
        "tcp seq": np.fromiter((p.tcp_seq or 0 for p in packets), f64, n),
        "tcp ttl": np.fromiter((p.ttl or 0 for p in packets), f64, n),
        "tcp window": np.fromiter((p.tcp_window or 0 for p in packets), f64, n),
        "port 22 len": np.where(on_22, length, 0.0),
        "port 23 len": np.where(on_23, length, 0.0),
    }


def _categorical_index(name: str, packets: Sequence[ParsedPacket]) -> np.ndarray:
    if name == "protocol":
        return np.fromiter((PROTOCOLS.index(Protocol(p.protocol).value) for p in packets), np.int64, len(packets))
    if name == "service":
        return np.fromiter(
            (SERVICES.index(infer_service(p.src_port, p.dst_port).value) for p in packets), np.int64, len(packets)
        )
    raise SchemaMismatch(f"no categorical source for channel {name!r}")


def encode_packets(
    packets: Sequence[ParsedPacket],
    directions: Sequence[int] | np.ndarray,
    schema: FeatureSchema,
    prev_timestamp: float | None = None,
) -> np.ndarray:
    """Encode a time-ordered run of packets (typically one edge) as rows.

    Delta time for row ``n`` is measured from row ``n - 1``; the first row
    uses ``prev_timestamp`` (its own timestamp when omitted, giving 0).
    """
    n = len(packets)
    out = np.zeros((n, schema.total_width), dtype=np.float64)
    if n == 0:
        return out
    directions = np.asarray(directions)
    if directions.shape != (n,):
        raise SchemaMismatch("one direction bit per packet is required")
    ts = np.fromiter((p.timestamp for p in packets), np.float64, n)
    prev = np.empty(n)
    prev[0] = ts[0] if prev_timestamp is None else prev_timestamp
    prev[1:] = ts[:-1]
    deltas = ts - prev
    raw = _raw_columns(packets, deltas, directions)
    offsets = schema.offsets()
    byte_block = None
    for ch in schema.channels:
        sl = offsets[ch.name]
        if ch.kind is ChannelKind.CATEGORICAL:
            idx = _categorical_index(ch.name, packets)
            if idx.max(initial=0) >= ch.cardinality:
                raise SchemaMismatch(f"channel {ch.name!r} cardinality too small")
            out[np.arange(n), sl.start + idx] = 1.0
        elif ch.name in raw:
            out[:, sl.start] = _normalize(ch.normalization, raw[ch.name])
        elif ch.name.startswith("byte "):
            if byte_block is None:
                byte_block = np.zeros((n, N_BYTE_CHANNELS))
                for r, p in enumerate(packets):
                    head = np.frombuffer(p.raw_bytes[:N_BYTE_CHANNELS], dtype=np.uint8)
                    byte_block[r, : head.size] = head
            out[:, sl.start] = _normalize(ch.normalization, byte_block[:, int(ch.name[5:])])
        else:
            raise SchemaMismatch(f"packet cannot populate channel {ch.name!r}")
    return out


@dataclass
class PacketVector:
    values: np.ndarray
    mask: bool = True


def encode_packet(p: ParsedPacket, prev_timestamp: float, direction: int, schema: FeatureSchema) -> PacketVector:
    if prev_timestamp > p.timestamp:
        raise ValueError("prev_timestamp must not exceed the packet timestamp")
    row = encode_packets([p], [direction], schema, prev_timestamp=prev_timestamp)[0]
    return PacketVector(row, True)
