"""Classic PCAP reading/writing and Ethernet frame dissection."""

from __future__ import annotations

import heapq
import logging
import socket
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, NamedTuple

from . import kernels
from .errors import BadMagic, Undissectable, UnsupportedFormat
from .packet import ParsedPacket, Protocol, TcpFlags

log = logging.getLogger(__name__)

MAGIC_MICRO = 0xA1B2C3D4
MAGIC_NANO = 0xA1B23C4D
PCAPNG_MAGIC = 0x0A0D0D0A
LINKTYPE_ETHERNET = 1
# largest record libpcap will ever write; anything bigger is corruption
MAX_RECORD = 262144

_GLOBAL_HDR = 24
_RECORD_HDR = 16


@dataclass(frozen=True)
class PcapHeader:
    magic: int
    version: tuple[int, int]
    snaplen: int
    link_type: int
    timestamp_resolution: str  # "micro" | "nano"
    endianness: str  # "little" | "big"

    @property
    def _fmt(self) -> str:
        return "<" if self.endianness == "little" else ">"


class RawRecord(NamedTuple):
    timestamp: float
    frame: bytes


def _parse_header(raw: bytes) -> PcapHeader:
    if len(raw) < 4:
        raise BadMagic("file too short to hold a PCAP magic number")
    (magic_le,) = struct.unpack("<I", raw[:4])
    (magic_be,) = struct.unpack(">I", raw[:4])
    if magic_le == PCAPNG_MAGIC:
        raise UnsupportedFormat("PCAPNG files are not supported; convert to classic PCAP (e.g. editcap -F pcap)")
    for magic, endian in ((magic_le, "little"), (magic_be, "big")):
        if magic in (MAGIC_MICRO, MAGIC_NANO):
            break
    else:
        raise BadMagic(f"not a classic PCAP file (magic 0x{magic_le:08x})")
    if len(raw) < _GLOBAL_HDR:
        raise BadMagic("truncated PCAP global header")
    fmt = "<" if endian == "little" else ">"
    _, major, minor, _zone, _sigfigs, snaplen, link = struct.unpack(fmt + "IHHiIII", raw[:_GLOBAL_HDR])
    if link != LINKTYPE_ETHERNET:
        raise UnsupportedFormat(f"unsupported link type {link} (only Ethernet/1)")
    return PcapHeader(
        magic=magic,
        version=(major, minor),
        snaplen=snaplen,
        link_type=link,
        timestamp_resolution="nano" if magic == MAGIC_NANO else "micro",
        endianness=endian,
    )


class CaptureStream:
    """Sequential single-consumer reader over one PCAP file.

    Iteration yields :class:`RawRecord` items. ``truncated`` counts records
    whose header or body was cut short; reading stops at the first one.
    ``reorder_window`` > 0 enables a bounded stable re-sort of records whose
    timestamps run backwards (``out_of_order`` counts any that escape it).
    """

    def __init__(self, path: str | Path, reorder_window: int = 4096):
        self.path = Path(path)
        self.reorder_window = reorder_window
        with open(self.path, "rb") as fh:
            self.header = _parse_header(fh.read(_GLOBAL_HDR))
        self.truncated = 0
        self.out_of_order = 0
        self.count = 0

    def _records(self, fh: BinaryIO) -> Iterator[RawRecord]:
        fmt = self.header._fmt + "IIII"
        scale = 1e-9 if self.header.timestamp_resolution == "nano" else 1e-6
        fh.seek(_GLOBAL_HDR)
        while True:
            rec = fh.read(_RECORD_HDR)
            if not rec:
                return
            if len(rec) < _RECORD_HDR:
                self._truncate("record header")
                return
            ts_sec, ts_sub, incl_len, _orig = struct.unpack(fmt, rec)
            if incl_len > MAX_RECORD:
                self._truncate(f"record length {incl_len}")
                return
            body = fh.read(incl_len)
            if len(body) < incl_len:
                self._truncate("record body")
                return
            yield RawRecord(ts_sec + ts_sub * scale, body)

    def _truncate(self, what: str):
        self.truncated += 1
        log.warning("%s: truncated %s after %d records", self.path, what, self.count)

    def __iter__(self) -> Iterator[RawRecord]:
        self.truncated = 0
        self.out_of_order = 0
        self.count = 0
        with open(self.path, "rb") as fh:
            if self.reorder_window <= 0:
                for r in self._records(fh):
                    self.count += 1
                    yield r
                return
            heap: list[tuple[float, int, bytes]] = []
            last = float("-inf")
            for seq, r in enumerate(self._records(fh)):
                heapq.heappush(heap, (r.timestamp, seq, r.frame))
                if len(heap) > self.reorder_window:
                    ts, _, frame = heapq.heappop(heap)
                    if ts < last:
                        self.out_of_order += 1
                    last = max(last, ts)
                    self.count += 1
                    yield RawRecord(ts, frame)
            while heap:
                ts, _, frame = heapq.heappop(heap)
                if ts < last:
                    self.out_of_order += 1
                last = max(last, ts)
                self.count += 1
                yield RawRecord(ts, frame)


def read_pcap(path: str | Path, reorder_window: int = 4096) -> CaptureStream:
    return CaptureStream(path, reorder_window)


def write_pcap(
    path: str | Path,
    records: Iterable[tuple[int, bytes]],
    snaplen: int = 65535,
) -> int:
    """Write ``(timestamp_us, frame)`` records as little-endian microsecond PCAP.

    Timestamps are integer microseconds so that the file is bit-exact for a
    given input. Returns the number of records written.
    """
    n = 0
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IHHiIII", MAGIC_MICRO, 2, 4, 0, 0, snaplen, LINKTYPE_ETHERNET))
        pack = struct.Struct("<IIII").pack
        for ts_us, frame in records:
            sec, usec = divmod(int(ts_us), 1_000_000)
            fh.write(pack(sec, usec, len(frame), len(frame)))
            fh.write(frame)
            n += 1
    return n


_PROTO = {
    kernels.ARP: Protocol.ARP,
    kernels.IP: Protocol.IP,
    kernels.IPV6: Protocol.IPV6,
    kernels.TCP: Protocol.TCP,
    kernels.UDP: Protocol.UDP,
}


def _ntop(raw: bytes) -> str:
    return socket.inet_ntop(socket.AF_INET if len(raw) == 4 else socket.AF_INET6, raw)


def dissect(frame: bytes, timestamp: float) -> ParsedPacket:
    if len(frame) < 14:
        raise Undissectable(f"frame of {len(frame)} bytes is shorter than an Ethernet header")
    fields = kernels.dissect_frame(frame)
    if fields is None:
        raise Undissectable("not an ARP/IPv4/IPv6 frame or malformed network header")
    code, src, dst, sport, dport, flags, ttl, seq, window = fields
    proto = _PROTO[code]
    tcp_flags = None
    if proto is Protocol.TCP:
        tcp_flags = TcpFlags(bool(flags & 0x02), bool(flags & 0x10), bool(flags & 0x08), bool(flags & 0x20))
    return ParsedPacket(
        timestamp=timestamp,
        src_ip=_ntop(src),
        dst_ip=_ntop(dst),
        protocol=proto,
        length=len(frame),
        raw_bytes=bytes(frame),
        src_port=sport if sport >= 0 else None,
        dst_port=dport if dport >= 0 else None,
        tcp_flags=tcp_flags,
        ttl=ttl if ttl >= 0 else None,
        tcp_seq=seq if seq >= 0 else None,
        tcp_window=window if window >= 0 else None,
    )
