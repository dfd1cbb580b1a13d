import pytest
from hypothesis import given, strategies as st

from net_sentinel.errors import TooShort
from net_sentinel.packet import ParsedPacket, Protocol
from net_sentinel.pcap import RawRecord
from net_sentinel.windowing import (
    PacketWindow, build_graph, canonical_pair, ip_sort_key, roll_windows, split_sequence,
)

HOSTS = ["10.0.0.1", "10.0.0.2", "10.0.0.3", "10.0.0.10"]


def _pkt(ts, src="10.0.0.1", dst="10.0.0.2", sport=1000):
    return ParsedPacket(ts, src, dst, Protocol.UDP, 60, b"", sport, 53)


class TestRollWindows:
    def test_two_windows_of_thirty_seconds(self):
        ws = list(roll_windows([_pkt(1.0), _pkt(31.0)], 30, 30))
        assert len(ws) == 2
        assert [p.timestamp for p in ws[0].packets] == [1.0]
        assert [p.timestamp for p in ws[1].packets] == [31.0]

    def test_empty_stream(self):
        assert list(roll_windows([], 30, 30)) == []

    def test_overlapping_coverage(self):
        ws = list(roll_windows([_pkt(0.0), _pkt(20.0)], 30, 15))
        holders = [(w.start_time, w.end_time) for w in ws if any(p.timestamp == 20.0 for p in w.packets)]
        assert holders == [(0.0, 30.0), (15.0, 45.0)]

    def test_empty_windows_emitted(self):
        ws = list(roll_windows([_pkt(0.0), _pkt(100.0)], 10, 10))
        assert [w.window_index for w in ws] == list(range(11))
        assert sum(1 for w in ws if not w.packets) == 9

    @pytest.mark.parametrize("wl,stride", [(0, 1), (10, 0), (10, 11)])
    def test_bad_parameters(self, wl, stride):
        with pytest.raises(ValueError):
            list(roll_windows([_pkt(0.0)], wl, stride))

    def test_stride_defaults_to_length(self):
        ws = list(roll_windows([_pkt(0.0), _pkt(15.0)], 10))
        assert [(w.start_time, w.end_time) for w in ws] == [(0.0, 10.0), (10.0, 20.0)]


times = st.lists(st.floats(0, 500, allow_nan=False), min_size=0, max_size=80).map(sorted)


@given(times, st.floats(1, 60), st.floats(0.1, 1.0))
def test_window_bounds_and_coverage(ts, wl, frac):
    stride = wl * frac
    ws = list(roll_windows([_pkt(t) for t in ts], wl, stride))
    for w in ws:
        assert w.end_time - w.start_time == pytest.approx(wl)
        assert all(w.start_time <= p.timestamp < w.end_time for p in w.packets)
    for t in ts:
        covering = [w for w in ws if w.start_time <= t < w.end_time]
        assert covering
        assert all(any(p.timestamp == t for p in w.packets) for w in covering)


@given(times, st.floats(1, 60))
def test_stride_equal_length_partitions(ts, wl):
    pkts = [_pkt(t, sport=i) for i, t in enumerate(ts)]
    ws = list(roll_windows(pkts, wl, wl))
    seen = [p.src_port for w in ws for p in w.packets]
    assert sorted(seen) == list(range(len(ts)))


class TestBuildGraph:
    def test_direction_bits(self):
        g = build_graph(PacketWindow(0, 0, 30, [_pkt(1, "10.0.0.1", "10.0.0.2"), _pkt(2, "10.0.0.2", "10.0.0.1")]))
        assert list(g.edges) == [("10.0.0.1", "10.0.0.2")]
        assert g.edges[("10.0.0.1", "10.0.0.2")].directions == [0, 1]

    def test_empty(self):
        g = build_graph(PacketWindow(0, 0, 30, []))
        assert g.nodes == [] and g.edges == {}

    def test_triangle(self):
        a, b, c = HOSTS[:3]
        g = build_graph(PacketWindow(0, 0, 30, [_pkt(1, a, b), _pkt(2, b, c), _pkt(3, c, a)]))
        assert len(g.nodes) == 3 and len(g.edges) == 3

    def test_numeric_ordering_of_addresses(self):
        assert canonical_pair("10.0.0.10", "10.0.0.9") == ("10.0.0.9", "10.0.0.10")

    def test_self_pairs_and_undissectable_counted(self):
        raw = RawRecord(1.0, b"\0" * 5)
        g = build_graph(PacketWindow(0, 0, 30, [_pkt(1, "10.0.0.1", "10.0.0.1"), raw, _pkt(2)]))
        assert g.self_pairs == 1 and g.undissectable == 1 and g.packet_count() == 1

    def test_truncation_keeps_latest(self):
        pkts = [_pkt(float(i)) for i in range(300)]
        g = build_graph(PacketWindow(0, 0, 300, pkts), max_edge_len=256)
        e = g.edges[("10.0.0.1", "10.0.0.2")]
        assert len(e.packets) == 256 and e.truncated == 44
        assert e.packets[0].timestamp == 44.0 and e.count == 300


pairs = st.tuples(st.sampled_from(HOSTS), st.sampled_from(HOSTS))
windows = st.lists(st.tuples(st.integers(0, 5), pairs), max_size=60)


def _window(spec):
    spec = sorted(spec, key=lambda s: s[0])
    return [_pkt(float(t), s, d, sport=i) for i, (t, (s, d)) in enumerate(spec)]


@given(windows, st.sampled_from([None, 3]))
def test_graph_invariants(spec, cap):
    pkts = _window(spec)
    g = build_graph(PacketWindow(0, 0, 10, pkts), max_edge_len=cap)
    nodes = set(g.nodes)
    for (i, k), e in g.edges.items():
        assert i != k and i in nodes and k in nodes
        assert ip_sort_key(i) < ip_sort_key(k)
        ts = [p.timestamp for p in e.packets]
        assert ts == sorted(ts)
        assert all(d == (0 if p.src_ip == i else 1) for p, d in zip(e.packets, e.directions))
    assert nodes == {n for key in g.edges for n in key}
    kept = sum(len(e.packets) for e in g.edges.values())
    truncated = sum(e.truncated for e in g.edges.values())
    assert kept + truncated + g.self_pairs + g.undissectable == len(pkts)


@given(windows, st.randoms(use_true_random=False))
def test_canonical_under_reordering(spec, rnd):
    pkts = _window(spec)
    # scramble across timestamps; packets sharing a timestamp keep their ingest order
    keys = {id(p): rnd.random() for p in pkts}
    first = {}
    for p in pkts:
        first.setdefault(p.timestamp, keys[id(p)])
    scrambled = sorted(pkts, key=lambda p: (first[p.timestamp], p.src_port))
    a = build_graph(PacketWindow(0, 0, 10, pkts))
    b = build_graph(PacketWindow(0, 0, 10, scrambled))
    assert list(a.edges) == list(b.edges) and a.nodes == b.nodes
    for key in a.edges:
        assert [p.src_port for p in a.edges[key].packets] == [p.src_port for p in b.edges[key].packets]
        assert a.edges[key].directions == b.edges[key].directions


class TestSplit:
    def test_even(self):
        assert split_sequence(list(range(10))) == (list(range(5)), list(range(5, 10)))

    def test_odd(self):
        assert split_sequence([1, 2, 3]) == ([1, 2], [3])

    def test_too_short(self):
        with pytest.raises(TooShort):
            split_sequence([1])
