import socket
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from net_sentinel import _pykernels, kernels
from net_sentinel.errors import BadMagic, Undissectable, UnsupportedFormat
from net_sentinel.packet import Protocol
from net_sentinel.pcap import MAGIC_MICRO, MAGIC_NANO, dissect, read_pcap, write_pcap
from net_sentinel.synth import ACK, FIN, PSH, SYN, URG, arp_frame, icmp_frame, tcp_frame, udp_frame
from oracles import reference_dissect, reference_read

A, B = "192.168.1.10", "192.168.1.20"


def _eth(ethertype: int, body: bytes) -> bytes:
    return b"\x02" * 6 + b"\x04" * 6 + struct.pack("!H", ethertype) + body


def _ipv6_tcp(src="fe80::1", dst="fe80::2", ext: bytes = b"", first_next=6) -> bytes:
    tcp = struct.pack("!HHIIBBHHH", 40000, 22, 7, 0, 5 << 4, SYN, 1024, 0, 0)
    payload = ext + tcp
    hdr = struct.pack("!IHBB", 6 << 28, len(payload), first_next, 64)
    hdr += socket.inet_pton(socket.AF_INET6, src) + socket.inet_pton(socket.AF_INET6, dst)
    return _eth(0x86DD, hdr + payload)


def _write_raw(path, records, magic=MAGIC_MICRO, endian="<", link=1):
    with open(path, "wb") as fh:
        fh.write(struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, 65535, link))
        for sec, sub, frame in records:
            fh.write(struct.pack(endian + "IIII", sec, sub, len(frame), len(frame)))
            fh.write(frame)


FRAMES = {
    "tcp_syn": tcp_frame(A, B, 51234, 22, 1, 0, SYN, 1024),
    "tcp_psh_ack": tcp_frame(A, B, 51234, 20000, 99, 7, PSH | ACK, 8192, b"x" * 20),
    "tcp_odd_flags": tcp_frame(A, B, 40000, 20000, 5, 0, SYN | FIN | PSH | URG, 256, options=b"\x01" * 20),
    "udp": udp_frame(A, B, 123, 123, b"n" * 48),
    "arp_request": arp_frame(A, B, 1),
    "arp_reply": arp_frame(B, A, 2, b"\x02" * 6),
    "icmp": icmp_frame(A, B, 8, 0, b"p" * 32),
}


class TestDissectAgainstReference:
    @pytest.mark.parametrize("name", sorted(FRAMES))
    def test_fields_match(self, name):
        frame = FRAMES[name]
        ref = reference_dissect(frame)
        p = dissect(frame, 1.5)
        assert p.protocol.value == ref["protocol"]
        assert (p.src_ip, p.dst_ip) == (ref["src"], ref["dst"])
        assert (p.src_port, p.dst_port) == (ref["sport"], ref["dport"])
        assert p.ttl == ref["ttl"]
        if ref["flags"] is None:
            assert p.tcp_flags is None
        else:
            assert tuple(p.tcp_flags) == ref["flags"]
            assert (p.tcp_seq, p.tcp_window) == (ref["seq"], ref["window"])
        assert p.length == len(frame) and p.raw_bytes == frame and p.timestamp == 1.5

    def test_syn_frame_is_54_bytes(self):
        p = dissect(FRAMES["tcp_syn"], 0.0)
        assert p.length == 54
        assert p.tcp_flags.syn and not p.tcp_flags.ack

    def test_ipv6_tcp(self):
        frame = _ipv6_tcp()
        ref = reference_dissect(frame)
        p = dissect(frame, 0.0)
        assert p.protocol is Protocol.TCP
        assert (p.src_ip, p.dst_ip, p.src_port, p.dst_port) == (ref["src"], ref["dst"], ref["sport"], ref["dport"])
        assert p.ttl == 64

    def test_ipv6_extension_header_walk(self):
        hop = bytes([6, 0]) + b"\0" * 6  # hop-by-hop, next = TCP
        p = dissect(_ipv6_tcp(ext=hop, first_next=0), 0.0)
        assert p.protocol is Protocol.TCP and p.dst_port == 22

    def test_ipv6_unknown_next_header(self):
        p = dissect(_ipv6_tcp(first_next=58), 0.0)
        assert p.protocol is Protocol.IPV6 and p.src_port is None

    def test_vlan_tag_skipped(self):
        plain = FRAMES["tcp_syn"]
        tagged = plain[:12] + b"\x81\x00\x00\x05" + plain[12:]
        a, b = dissect(plain, 0.0), dissect(tagged, 0.0)
        assert (a.protocol, a.src_ip, a.dst_ip, a.src_port, a.dst_port) == (b.protocol, b.src_ip, b.dst_ip, b.src_port, b.dst_port)

    def test_non_first_fragment_has_no_ports(self):
        f = bytearray(FRAMES["tcp_syn"])
        f[14 + 6:14 + 8] = struct.pack("!H", 0x0010)  # fragment offset 16
        p = dissect(bytes(f), 0.0)
        assert p.protocol is Protocol.IP
        assert p.src_port is None and p.tcp_flags is None and p.src_ip == A

    def test_truncated_transport_degrades(self):
        p = dissect(FRAMES["tcp_syn"][:40], 0.0)
        assert p.protocol is Protocol.IP and p.src_port is None

    def test_short_frame(self):
        with pytest.raises(Undissectable):
            dissect(b"\0" * 10, 0.0)

    def test_other_ethertype(self):
        with pytest.raises(Undissectable):
            dissect(_eth(0x88CC, b"\0" * 40), 0.0)


class TestReader:
    def test_single_record_matches_reference(self, tmp_path):
        path = tmp_path / "one.pcap"
        write_pcap(path, [(1_650_000_000_123_456, FRAMES["tcp_syn"])])
        got = list(read_pcap(path))
        ref = reference_read(path)
        assert len(got) == 1
        assert got[0].frame == ref[0][1]
        assert got[0].timestamp == pytest.approx(ref[0][0], abs=1e-6)

    def test_header_fields(self, tmp_path):
        path = tmp_path / "h.pcap"
        write_pcap(path, [])
        s = read_pcap(path)
        assert s.header.magic == MAGIC_MICRO
        assert s.header.endianness == "little" and s.header.timestamp_resolution == "micro"
        assert s.header.link_type == 1 and s.header.version == (2, 4)
        assert list(s) == []

    @pytest.mark.parametrize("magic,endian,scale", [
        (MAGIC_MICRO, "<", 1e-6), (MAGIC_MICRO, ">", 1e-6), (MAGIC_NANO, "<", 1e-9), (MAGIC_NANO, ">", 1e-9),
    ])
    def test_variants(self, tmp_path, magic, endian, scale):
        path = tmp_path / "v.pcap"
        recs = [(100, 250, FRAMES["udp"]), (101, 999, FRAMES["arp_request"])]
        _write_raw(path, recs, magic, endian)
        s = read_pcap(path)
        got = list(s)
        assert [r.frame for r in got] == [f for _, _, f in recs]
        for r, (sec, sub, _) in zip(got, recs):
            assert r.timestamp == pytest.approx(sec + sub * scale, abs=1e-9)
        assert s.header.endianness == ("little" if endian == "<" else "big")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.pcap"
        path.write_bytes(b"")
        with pytest.raises(BadMagic):
            read_pcap(path)

    def test_garbage_magic(self, tmp_path):
        path = tmp_path / "junk.pcap"
        path.write_bytes(b"\x00" * 64)
        with pytest.raises(BadMagic):
            read_pcap(path)

    def test_pcapng_rejected(self, tmp_path):
        path = tmp_path / "x.pcapng"
        path.write_bytes(struct.pack("<I", 0x0A0D0D0A) + b"\0" * 60)
        with pytest.raises(UnsupportedFormat):
            read_pcap(path)

    def test_non_ethernet_rejected(self, tmp_path):
        path = tmp_path / "raw.pcap"
        _write_raw(path, [], link=101)
        with pytest.raises(UnsupportedFormat):
            read_pcap(path)

    def test_truncated_mid_record(self, tmp_path):
        path = tmp_path / "t.pcap"
        write_pcap(path, [(i * 1000, FRAMES["tcp_syn"]) for i in range(5)])
        data = path.read_bytes()
        path.write_bytes(data[:-10])
        s = read_pcap(path)
        got = list(s)
        assert len(got) == 4
        assert s.truncated == 1
        assert [r.frame for r in got] == [f for _, f in reference_read_prefix(data, 4)]

    def test_truncated_record_header(self, tmp_path):
        path = tmp_path / "t2.pcap"
        write_pcap(path, [(0, FRAMES["udp"])])
        path.write_bytes(path.read_bytes() + b"\0" * 7)
        s = read_pcap(path)
        assert len(list(s)) == 1 and s.truncated == 1

    def test_reorder_buffer_sorts_stably(self, tmp_path):
        path = tmp_path / "ooo.pcap"
        frames = [tcp_frame(A, B, 1000 + i, 80, i, 0, SYN, 1) for i in range(6)]
        ts = [5, 3, 3, 9, 1, 3]
        write_pcap(path, [(t * 1_000_000, f) for t, f in zip(ts, frames)])
        got = list(read_pcap(path))
        assert [r.timestamp for r in got] == sorted(float(t) for t in ts)
        # equal timestamps keep file order
        threes = [r.frame for r in got if r.timestamp == 3.0]
        assert threes == [frames[1], frames[2], frames[5]]

    def test_reorder_window_bounded(self, tmp_path):
        path = tmp_path / "ooo2.pcap"
        write_pcap(path, [(t, FRAMES["udp"]) for t in (10, 20, 30, 1)])
        s = read_pcap(path, reorder_window=1)
        got = [r.timestamp for r in s]
        assert len(got) == 4 and s.out_of_order >= 1

    def test_stream_is_reiterable(self, tmp_path):
        path = tmp_path / "r.pcap"
        write_pcap(path, [(i, FRAMES["udp"]) for i in range(3)])
        s = read_pcap(path)
        assert len(list(s)) == len(list(s)) == 3


def reference_read_prefix(data: bytes, n: int):
    out, off = [], 24
    for _ in range(n):
        sec, usec, incl, _ = struct.unpack("<IIII", data[off:off + 16])
        out.append((sec + usec * 1e-6, data[off + 16:off + 16 + incl]))
        off += 16 + incl
    return out


@given(st.binary(min_size=0, max_size=200))
def test_random_frames_never_crash(frame):
    try:
        p = dissect(frame, 0.0)
    except Undissectable:
        return
    assert p.length == len(frame)
    assert (p.src_port is not None) == (p.protocol in (Protocol.TCP, Protocol.UDP))
    assert (p.tcp_flags is not None) == (p.protocol is Protocol.TCP)


@given(st.sampled_from(sorted(FRAMES)), st.lists(st.tuples(st.integers(0, 120), st.integers(0, 255)), max_size=6),
       st.integers(0, 120))
def test_backends_agree_on_mutations(name, flips, cut):
    frame = bytearray(FRAMES[name])
    for pos, val in flips:
        if pos < len(frame):
            frame[pos] = val
    frame = bytes(frame[: max(cut, 0)] if cut < len(frame) else frame)
    assert kernels.dissect_frame(frame) == _pykernels.dissect_frame(frame)
