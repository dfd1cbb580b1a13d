import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from net_sentinel.packet import (
    ChannelKind, FeatureSchema, ParsedPacket, Protocol, Service, TcpFlags, byte_schema, encode_packet,
    encode_packets, infer_service, schema_by_name, tcp_schema,
)
from net_sentinel.errors import SchemaMismatch
from oracles import IANA_TCP


def _tcp(ts=1.0, flags=TcpFlags(syn=True), sport=51234, dport=22, length=60):
    return ParsedPacket(ts, "10.0.0.1", "10.0.0.2", Protocol.TCP, length, bytes(range(length % 256)) * 1,
                        sport, dport, flags, 64, 1000, 8192)


def _arp(ts=1.0):
    return ParsedPacket(ts, "10.0.0.1", "10.0.0.2", Protocol.ARP, 42, b"\x01" * 42)


def _cols(schema, name, row):
    return row[schema.offsets()[name]]


class TestSchemas:
    def test_tcp_schema_has_16_features(self):
        s = tcp_schema()
        assert len(s.channels) == 16
        assert sum(c.kind is ChannelKind.BINARY for c in s.channels) == 5

    def test_tcp_schema_named_channels(self):
        s = tcp_schema()
        assert s.has("direction", ChannelKind.BINARY)
        assert s.has("port 22 len", ChannelKind.NUMERICAL)
        assert s.has("port 23 len", ChannelKind.NUMERICAL)

    def test_tcp_width(self):
        # 5 binary + 5 protocols + 11 services + 9 numerical
        assert tcp_schema().total_width == 5 + 5 + 11 + 9

    def test_byte_schema(self):
        s = byte_schema()
        assert sum(c.name.startswith("byte ") for c in s.channels) == 512
        assert s.has("delta time", ChannelKind.NUMERICAL)
        assert s.total_width == 1 + 5 + 2 + 512

    def test_width_is_sum_of_channel_widths(self):
        for s in (tcp_schema(), byte_schema()):
            assert s.total_width == sum(c.cardinality if c.kind is ChannelKind.CATEGORICAL else 1 for c in s.channels)

    def test_duplicate_names_rejected(self):
        ch = tcp_schema().channels[0]
        with pytest.raises(SchemaMismatch):
            FeatureSchema("dup", (ch, ch))

    def test_manifest_round_trip_and_hash(self):
        s = tcp_schema()
        back = FeatureSchema.from_manifest(s.manifest())
        assert back == s
        assert back.hash() == s.hash()
        assert tcp_schema().hash() != byte_schema().hash()

    def test_schema_by_name(self):
        assert schema_by_name("byte") == byte_schema()
        with pytest.raises(SchemaMismatch):
            schema_by_name("nope")


class TestInferService:
    @pytest.mark.parametrize("name,service", [
        ("ssh", Service.SSH), ("telnet", Service.TELNET), ("http", Service.HTTP), ("https", Service.HTTPS),
        ("ftp", Service.FTP), ("ftp-data", Service.FTP), ("git", Service.GIT), ("domain", Service.DNS),
        ("ntp", Service.NTP), ("x11", Service.X11), ("dnp", Service.DNP3),
    ])
    def test_matches_registry(self, name, service):
        assert infer_service(51234, IANA_TCP[name]) is service
        assert infer_service(IANA_TCP[name], 51234) is service

    def test_examples(self):
        assert infer_service(51234, 22) is Service.SSH
        assert infer_service(51234, 20000) is Service.DNP3
        assert infer_service(51234, 51235) is Service.OTHER

    def test_x11_range(self):
        assert infer_service(60000, 6063) is Service.X11
        assert infer_service(60000, 6064) is Service.OTHER

    def test_absent_ports(self):
        assert infer_service(None, None) is Service.OTHER


class TestEncode:
    def test_syn_only_flags(self):
        s = tcp_schema()
        v = encode_packet(_tcp(), 1.0, 0, s).values
        flags = [_cols(s, n, v)[0] for n in ("tcp syn", "tcp ack", "tcp psh", "tcp urg")]
        assert flags == [1, 0, 0, 0]

    def test_first_packet_delta_zero(self):
        s = tcp_schema()
        p = _tcp(ts=5.25)
        assert _cols(s, "delta time", encode_packet(p, p.timestamp, 0, s).values)[0] == 0.0

    def test_arp_absent_fields_zero(self):
        s = tcp_schema()
        v = encode_packet(_arp(), 1.0, 1, s).values
        for n in ("tcp syn", "tcp ack", "tcp psh", "tcp urg", "source port", "dest port", "tcp seq", "tcp window"):
            assert _cols(s, n, v)[0] == 0.0
        proto = _cols(s, "protocol", v)
        assert proto.tolist() == [1, 0, 0, 0, 0]
        assert _cols(s, "direction", v)[0] == 1.0

    def test_normalisations(self):
        s = tcp_schema()
        p = _tcp(ts=3.0, length=100, sport=51234, dport=22)
        v = encode_packet(p, 1.0, 0, s).values
        assert _cols(s, "len", v)[0] == pytest.approx(math.log1p(100) / math.log1p(65535))
        assert _cols(s, "delta time", v)[0] == pytest.approx(math.log1p(2.0))
        assert _cols(s, "source port", v)[0] == pytest.approx(51234 / 65535)
        assert _cols(s, "tcp seq", v)[0] == pytest.approx(1000 / 2**32)
        assert _cols(s, "tcp ttl", v)[0] == pytest.approx(64 / 255)
        assert _cols(s, "tcp window", v)[0] == pytest.approx(8192 / 65535)
        assert _cols(s, "port 22 len", v)[0] == _cols(s, "len", v)[0]
        assert _cols(s, "port 23 len", v)[0] == 0.0

    def test_delta_clamped(self):
        s = tcp_schema()
        v = encode_packet(_tcp(ts=1e9), 0.0, 0, s).values
        assert _cols(s, "delta time", v)[0] == 10.0

    def test_byte_channels(self):
        s = byte_schema()
        p = ParsedPacket(0.0, "a", "b", Protocol.IP, 3, b"\xff\x00\x80")
        v = encode_packet(p, 0.0, 0, s).values
        off = s.offsets()
        assert v[off["byte 0"]][0] == 1.0
        assert v[off["byte 2"]][0] == pytest.approx(128 / 255)
        assert v[off["byte 3"]][0] == 0.0 and v[off["byte 511"]][0] == 0.0

    def test_byte_channels_cut_at_512(self):
        s = byte_schema()
        raw = bytes([7]) * 600
        v = encode_packet(ParsedPacket(0.0, "a", "b", Protocol.IP, 600, raw), 0.0, 0, s).values
        assert np.allclose(v[-512:], 7 / 255)

    def test_prev_after_timestamp_rejected(self):
        with pytest.raises(ValueError):
            encode_packet(_tcp(ts=1.0), 2.0, 0, tcp_schema())

    def test_batch_matches_single(self):
        s = tcp_schema()
        ps = [_tcp(ts=1.0), _tcp(ts=1.5, flags=TcpFlags(ack=True)), _arp(ts=2.0)]
        rows = encode_packets(ps, [0, 1, 0], s)
        prev = [1.0, 1.0, 1.5]
        for r, p, pv, d in zip(rows, ps, prev, [0, 1, 0]):
            assert np.array_equal(r, encode_packet(p, pv, d, s).values)


_protocols = st.sampled_from(list(Protocol))


@st.composite
def packets(draw):
    proto = draw(_protocols)
    ported = proto in (Protocol.TCP, Protocol.UDP)
    raw = draw(st.binary(min_size=0, max_size=700))
    return ParsedPacket(
        draw(st.floats(0, 2e9, allow_nan=False)),
        "10.0.0.1", "10.0.0.2", proto, len(raw), raw,
        draw(st.integers(0, 65535)) if ported else None,
        draw(st.integers(0, 65535)) if ported else None,
        TcpFlags(*draw(st.tuples(st.booleans(), st.booleans(), st.booleans(), st.booleans())))
        if proto is Protocol.TCP else None,
        draw(st.integers(0, 255)) if proto is not Protocol.ARP else None,
        draw(st.integers(0, 2**32 - 1)) if proto is Protocol.TCP else None,
        draw(st.integers(0, 65535)) if proto is Protocol.TCP else None,
    )


@given(packets(), st.floats(0, 1e6, allow_nan=False), st.integers(0, 1), st.sampled_from(["tcp", "byte"]))
def test_encode_properties(p, back, direction, name):
    s = schema_by_name(name)
    prev = max(0.0, p.timestamp - back)
    v = encode_packet(p, prev, direction, s).values
    assert v.shape == (s.total_width,)
    assert np.all(np.isfinite(v))
    for sl in s.categorical_slices():
        assert v[sl].sum() == 1.0
    assert set(np.unique(v[s.columns(ChannelKind.BINARY)])) <= {0.0, 1.0}
    assert _cols(s, "delta time", v)[0] >= 0.0
    again = encode_packet(p, prev, direction, s).values
    assert v.tobytes() == again.tobytes()
