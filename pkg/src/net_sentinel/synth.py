"""Seeded synthetic ICS traffic: normal operation plus four attack scenarios.

The topology mirrors a small substation network: an RTAC polls two relays
and a power-quality meter over DNP3, a SCADA PC polls the RTAC, every
device syncs time against a network clock, and two attack PCs sit idle
until a scenario uses them. Payloads are structurally plausible only.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pcap import write_pcap

BASE_TIME_US = 1_650_000_000 * 1_000_000
SCENARIOS = ("normal", "flood", "scan", "failed_auth", "setting_change")

DNP3_PORT = 20000
NTP_PORT = 123
SSH_PORT = 22
TELNET_PORT = 23

# DNP3 master -> outstation pairs
POLL_PAIRS = (("RTAC", "Relay1"), ("RTAC", "Relay2"), ("RTAC", "Meter"), ("ScadaPC", "RTAC"))
NTP_CLIENTS = ("Relay1", "Relay2", "Meter", "RTAC", "ScadaPC")
ARP_PEERS = {
    "RTAC": ("Relay1", "Relay2", "Meter", "ScadaPC"),
    "Relay1": ("RTAC", "Clock"),
    "Relay2": ("RTAC", "Clock"),
    "Meter": ("RTAC", "Clock"),
    "ScadaPC": ("RTAC", "Clock"),
    "Clock": ("RTAC",),
}
OPEN_PORTS = (SSH_PORT, TELNET_PORT, 80, DNP3_PORT)


@dataclass(frozen=True)
class Topology:
    devices: dict[str, str] = field(
        default_factory=lambda: {
            "PC1": "192.168.10.101",
            "PC2": "192.168.10.102",
            "Relay1": "192.168.10.11",
            "Relay2": "192.168.10.12",
            "Meter": "192.168.10.13",
            "RTAC": "192.168.10.10",
            "Clock": "192.168.10.5",
            "ScadaPC": "192.168.10.20",
        }
    )
    # persistent sessions (DNP3 client ports, initial sequence numbers) belong
    # to the plant, not to one capture
    session_seed: int = 0

    def __post_init__(self):
        if len(set(self.devices.values())) != len(self.devices):
            raise ValueError("device IPs must be unique")

    def ip(self, name: str) -> str:
        return self.devices[name]

    def name_of(self, ip: str) -> str | None:
        return next((n for n, a in self.devices.items() if a == ip), None)


@dataclass
class ScenarioScript:
    scenario: str = "normal"
    duration: float = 300.0
    seed: int = 0
    poll_period: float = 2.0
    ntp_period: float = 16.0
    arp_period: float = 60.0
    flood_pps: float = 2000.0
    spoof_fraction: float = 0.5
    scan_rate: float = 5.0
    fingerprint_duration: float = 20.0
    episode_period: float | None = None
    attack_start: float = 0.0
    attack_end: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")


# ------------------------------------------------------------------ frame bytes

_ETH_IP = 0x0800
_ETH_ARP = 0x0806
_BROADCAST = b"\xff" * 6

FIN, SYN, RST, PSH, ACK, URG, ECE, CWR = 0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80


def _mac(ip: str) -> bytes:
    return b"\x02\x00" + socket.inet_aton(ip)


def _checksum(header: bytes) -> int:
    total = sum(struct.unpack(f"!{len(header) // 2}H", header))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _ipv4(src: str, dst: str, proto: int, payload: bytes, ttl: int, ident: int) -> bytes:
    hdr = struct.pack(
        "!BBHHHBBH4s4s", 0x45, 0, 20 + len(payload), ident & 0xFFFF, 0x4000, ttl, proto, 0,
        socket.inet_aton(src), socket.inet_aton(dst),
    )
    return hdr[:10] + struct.pack("!H", _checksum(hdr)) + hdr[12:] + payload


def _eth(src_ip: str, dst_ip: str | None, ethertype: int, body: bytes) -> bytes:
    dst = _BROADCAST if dst_ip is None else _mac(dst_ip)
    return dst + _mac(src_ip) + struct.pack("!H", ethertype) + body


def tcp_frame(src, dst, sport, dport, seq, ack, flags, window, payload=b"", ttl=64, ident=0, options=b"", eth_src=None):
    off = (20 + len(options)) // 4
    seg = struct.pack("!HHIIBBHHH", sport, dport, seq & 0xFFFFFFFF, ack & 0xFFFFFFFF, off << 4, flags, window, 0, 0)
    return _eth(eth_src or src, dst, _ETH_IP, _ipv4(src, dst, 6, seg + options + payload, ttl, ident))


def udp_frame(src, dst, sport, dport, payload, ttl=64, ident=0):
    seg = struct.pack("!HHHH", sport, dport, 8 + len(payload), 0) + payload
    return _eth(src, dst, _ETH_IP, _ipv4(src, dst, 17, seg, ttl, ident))


def icmp_frame(src, dst, icmp_type, code, payload=b"", ttl=64, ident=0):
    msg = struct.pack("!BBHI", icmp_type, code, 0, 0) + payload
    return _eth(src, dst, _ETH_IP, _ipv4(src, dst, 1, msg, ttl, ident))


def arp_frame(src_ip, dst_ip, op, target_mac=b"\x00" * 6):
    body = struct.pack("!HHBBH6s4s6s4s", 1, 0x0800, 6, 4, op, _mac(src_ip), socket.inet_aton(src_ip),
                       target_mac, socket.inet_aton(dst_ip))
    return _eth(src_ip, None if op == 1 else dst_ip, _ETH_ARP, body)


# ------------------------------------------------------------------ builder


class _Capture:
    """Collects (time, frame, is_attack) records in seconds-from-start."""

    def __init__(self, topo: Topology):
        self.topo = topo
        self.records: list[tuple[int, int, bytes, bool]] = []
        self._ident: dict[str, int] = {}
        self.events: list[dict] = []

    def ident(self, ip: str) -> int:
        self._ident[ip] = self._ident.get(ip, 0) + 1
        return self._ident[ip]

    def add(self, t: float, frame: bytes, attack: bool = False):
        self.records.append((int(round(t * 1e6)), len(self.records), frame, attack))


_TTL = {"ScadaPC": 128}
_WINDOW = {"Relay1": 8192, "Relay2": 8192, "Meter": 4096, "RTAC": 16384, "ScadaPC": 64240}


class _Flow:
    """Minimal TCP conversation state between a client and a server."""

    def __init__(self, cap: _Capture, client: str, server: str, cport: int, sport: int, rng, attack=False):
        self.cap, self.attack = cap, attack
        self.c, self.s = cap.topo.ip(client), cap.topo.ip(server)
        self.cname, self.sname = client, server
        self.cport, self.sport = cport, sport
        self.cseq = int(rng.integers(0, 2**32))
        self.sseq = int(rng.integers(0, 2**32))

    def send(self, t: float, from_client: bool, flags: int, payload: bytes = b"", options: bytes = b""):
        if from_client:
            src, dst, sp, dp, name = self.c, self.s, self.cport, self.sport, self.cname
            seq, ack = self.cseq, self.sseq
        else:
            src, dst, sp, dp, name = self.s, self.c, self.sport, self.cport, self.sname
            seq, ack = self.sseq, self.cseq
        frame = tcp_frame(
            src, dst, sp, dp, seq, ack if flags & ACK else 0, flags, _WINDOW.get(name, 29200), payload,
            ttl=_TTL.get(name, 64), ident=self.cap.ident(src), options=options,
        )
        self.cap.add(t, frame, self.attack)
        advance = len(payload) + (1 if flags & (SYN | FIN) else 0)
        if from_client:
            self.cseq += advance
        else:
            self.sseq += advance

    def handshake(self, t: float, rtt: float = 0.002) -> float:
        self.send(t, True, SYN)
        self.send(t + rtt, False, SYN | ACK)
        self.send(t + 1.5 * rtt, True, ACK)
        return t + 2 * rtt

    def close(self, t: float, rtt: float = 0.002, server_first: bool = True) -> float:
        first = not server_first
        self.send(t, first, FIN | ACK)
        self.send(t + rtt, not first, ACK)
        self.send(t + 1.5 * rtt, not first, FIN | ACK)
        self.send(t + 2.5 * rtt, first, ACK)
        return t + 3 * rtt


def _payload(rng, lo: int, hi: int) -> bytes:
    return rng.integers(0, 256, int(rng.integers(lo, hi + 1)), dtype=np.uint8).tobytes()


def _periodic(rng, start: float, end: float, period: float, jitter: float):
    t = start + float(rng.uniform(0, period))
    while t < end:
        yield max(start, t + float(rng.normal(0, jitter)))
        t += period


# ------------------------------------------------------------------ normal traffic


def _normal_background(cap: _Capture, script: ScenarioScript, seed_seq: np.random.SeedSequence) -> dict:
    rng_poll, rng_ntp, rng_arp = (np.random.default_rng(s) for s in seed_seq.spawn(3))
    rng_sess = np.random.default_rng(cap.topo.session_seed)
    end = script.duration
    flows = {}
    for master, outstation in POLL_PAIRS:
        flow = _Flow(cap, master, outstation, int(rng_sess.integers(49152, 65536)), DNP3_PORT, rng_sess)
        flow.handshake(0.001 + 0.01 * len(flows))
        flows[(master, outstation)] = flow
    for master, outstation in POLL_PAIRS:
        flow = flows[(master, outstation)]
        for t in _periodic(rng_poll, 0.05, end, script.poll_period, 0.02):
            flow.send(t, True, PSH | ACK, _payload(rng_poll, 18, 24))
            t_resp = t + float(rng_poll.uniform(0.004, 0.015))
            flow.send(t_resp, False, PSH | ACK, _payload(rng_poll, 40, 90))
            flow.send(t_resp + float(rng_poll.uniform(0.001, 0.003)), True, ACK)

    clock = cap.topo.ip("Clock")
    for client in NTP_CLIENTS:
        ip = cap.topo.ip(client)
        for t in _periodic(rng_ntp, 0.0, end, script.ntp_period, 0.5):
            cap.add(t, udp_frame(ip, clock, NTP_PORT, NTP_PORT, _payload(rng_ntp, 48, 48), _TTL.get(client, 64), cap.ident(ip)))
            cap.add(t + float(rng_ntp.uniform(0.0005, 0.002)),
                    udp_frame(clock, ip, NTP_PORT, NTP_PORT, _payload(rng_ntp, 48, 48), 64, cap.ident(clock)))

    for dev, peers in ARP_PEERS.items():
        ip = cap.topo.ip(dev)
        for n, t in enumerate(_periodic(rng_arp, 0.0, end, script.arp_period, 5.0)):
            peer = cap.topo.ip(peers[n % len(peers)])
            cap.add(t, arp_frame(ip, peer, 1))
            cap.add(t + float(rng_arp.uniform(0.0002, 0.001)), arp_frame(peer, ip, 2, _mac(ip)))
    return flows


def _alarm_burst(cap: _Capture, flow: _Flow, t: float, rng, n: int = 5) -> float:
    """Unsolicited DNP3 responses outstation -> RTAC, each confirmed."""
    saved, flow.attack = flow.attack, True
    for _ in range(n):
        flow.send(t, False, PSH | ACK, _payload(rng, 28, 40))
        flow.send(t + float(rng.uniform(0.003, 0.008)), True, PSH | ACK, _payload(rng, 14, 16))
        t += float(rng.uniform(0.1, 0.2))
    flow.attack = saved
    return t


# ------------------------------------------------------------------ attacks


def _random_spoof(rng) -> str:
    while True:
        a = int(rng.integers(1, 224))
        if a not in (10, 127, 192):
            return f"{a}.{int(rng.integers(0, 256))}.{int(rng.integers(0, 256))}.{int(rng.integers(1, 255))}"


def _flood(cap: _Capture, script: ScenarioScript, rng, start: float, end: float):
    pc1 = cap.topo.ip("PC1")
    targets = (cap.topo.ip("Relay1"), cap.topo.ip("Relay2"))
    n = int((end - start) * script.flood_pps)
    times = start + (np.arange(n) + rng.uniform(0, 1, n)) / script.flood_pps
    spoof = rng.uniform(0, 1, n) < script.spoof_fraction
    sports = rng.integers(1024, 65536, n)
    seqs = rng.integers(0, 2**32, n)
    for i in range(n):
        src = _random_spoof(rng) if spoof[i] else pc1
        dst = targets[i % 2]
        frame = tcp_frame(src, dst, int(sports[i]), 80, int(seqs[i]), 0, SYN, 512, ttl=64, ident=i, eth_src=pc1)
        cap.add(float(times[i]), frame, True)


# nmap-style OS detection probes: (flags, window, options length, port kind)
_FINGERPRINT = (
    (SYN, 1, 20, "open"), (SYN, 63, 20, "open"), (SYN, 4, 20, "open"), (SYN, 4, 16, "open"),
    (SYN, 16, 20, "open"), (SYN, 512, 16, "open"), (SYN | ECE | CWR, 3, 12, "open"),
    (0, 128, 20, "open"), (SYN | FIN | PSH | URG, 256, 20, "open"), (ACK, 1024, 20, "open"),
    (SYN, 31337, 20, "closed"), (ACK, 32768, 20, "closed"), (FIN | PSH | URG, 65535, 20, "closed"),
)


def _scan(cap: _Capture, script: ScenarioScript, rng, start: float, end: float):
    pc1 = cap.topo.ip("PC1")
    relays = (cap.topo.ip("Relay1"), cap.topo.ip("Relay2"))
    gap = 1.0 / script.scan_rate
    t = start
    fp_end = min(end, start + script.fingerprint_duration)
    k = 0
    while t < fp_end:
        relay = relays[(k // len(_FINGERPRINT)) % 2]
        flags, window, optlen, kind = _FINGERPRINT[k % len(_FINGERPRINT)]
        port = DNP3_PORT if kind == "open" else int(rng.integers(30000, 40000))
        sport = int(rng.integers(40000, 65536))
        opts = bytes(rng.integers(0, 256, optlen, dtype=np.uint8))
        cap.add(t, tcp_frame(pc1, relay, sport, port, int(rng.integers(0, 2**32)), 0, flags, window,
                             options=opts, ident=cap.ident(pc1)), True)
        rt = t + float(rng.uniform(0.001, 0.004))
        if kind == "open" and flags & SYN and not flags & FIN:
            reply = SYN | ACK
        else:
            reply = RST | ACK
        cap.add(rt, tcp_frame(relay, pc1, port, sport, int(rng.integers(0, 2**32)), 1, reply, 8192,
                              ident=cap.ident(relay)), True)
        if k % len(_FINGERPRINT) == len(_FINGERPRINT) - 1:
            # UDP probe to a closed port and two ICMP echoes close the round
            t += gap
            cap.add(t, udp_frame(pc1, relay, sport, int(rng.integers(30000, 40000)), b"C" * 300, ident=cap.ident(pc1)), True)
            cap.add(t + 0.002, icmp_frame(relay, pc1, 3, 3, b"\0" * 28, ident=cap.ident(relay)), True)
            t += gap
            cap.add(t, icmp_frame(pc1, relay, 8, 9, b"\0" * 120, ident=cap.ident(pc1)), True)
            cap.add(t + 0.002, icmp_frame(relay, pc1, 0, 0, b"\0" * 120, ident=cap.ident(relay)), True)
        t += gap
        k += 1

    ports = [rng.permutation(np.arange(1, 1025)) for _ in relays]
    cursor = [0, 0]
    k = 0
    sport = int(rng.integers(40000, 65536))
    while t < end:
        r = k % 2
        relay = relays[r]
        port = int(ports[r][cursor[r] % len(ports[r])])
        cursor[r] += 1
        cap.add(t, tcp_frame(pc1, relay, sport, port, int(rng.integers(0, 2**32)), 0, SYN, 1024,
                             ident=cap.ident(pc1)), True)
        rt = t + float(rng.uniform(0.001, 0.004))
        if port in OPEN_PORTS:
            cap.add(rt, tcp_frame(relay, pc1, port, sport, int(rng.integers(0, 2**32)), 1, SYN | ACK, 8192,
                                  ident=cap.ident(relay)), True)
            cap.add(rt + 0.0005, tcp_frame(pc1, relay, sport, port, 1, 0, RST, 0, ident=cap.ident(pc1)), True)
        else:
            cap.add(rt, tcp_frame(relay, pc1, port, sport, 0, 1, RST | ACK, 0, ident=cap.ident(relay)), True)
        t += gap
        k += 1


def _ssh_preamble(flow: _Flow, t: float, rng) -> float:
    flow.send(t, False, PSH | ACK, b"SSH-2.0-RelaySSH_1.0\r\n")
    flow.send(t + 0.01, True, PSH | ACK, b"SSH-2.0-OpenSSH_8.9p1\r\n")
    flow.send(t + 0.02, True, PSH | ACK, _payload(rng, 1000, 1400))
    flow.send(t + 0.03, False, PSH | ACK, _payload(rng, 700, 1000))
    flow.send(t + 0.05, True, PSH | ACK, _payload(rng, 40, 60))
    flow.send(t + 0.07, False, PSH | ACK, _payload(rng, 500, 700))
    return t + 0.1


def _failed_session(cap, flow: _Flow, alarm_flow: _Flow, t: float, rng, proto: str, episode: int) -> float:
    t = flow.handshake(t) + 0.01
    if proto == "ssh":
        t = _ssh_preamble(flow, t, rng)
    else:
        flow.send(t, False, PSH | ACK, b"\xff\xfd\x18\xff\xfd\x20login: ")
        t += 0.05
    for attempt in range(3):
        if proto == "ssh":
            flow.send(t, True, PSH | ACK, _payload(rng, 80, 120))
            flow.send(t + 0.3, False, PSH | ACK, _payload(rng, 30, 60))
        else:
            flow.send(t, True, PSH | ACK, b"admin\r\n")
            flow.send(t + 0.01, False, PSH | ACK, b"Password: ")
            flow.send(t + 0.4, True, PSH | ACK, _payload(rng, 8, 14))
            flow.send(t + 0.7, False, PSH | ACK, b"\r\nLogin incorrect\r\nlogin: ")
        cap.events.append({"kind": "auth_failure", "t": t, "relay": flow.sname, "proto": proto, "episode": episode})
        t += float(rng.uniform(0.8, 1.2))
    cap.events.append({"kind": "alarm", "t": t, "relay": flow.sname, "episode": episode, "reason": "failed_auth"})
    t_alarm_end = _alarm_burst(cap, alarm_flow, t, rng)
    # the attacker's teardown trails the alarm burst
    return flow.close(max(t_alarm_end, t) + 0.05, server_first=True) + 0.5


def _failed_auth(cap: _Capture, script: ScenarioScript, rng, start: float, end: float, dnp3: dict):
    period = script.episode_period or 30.0
    episode = 0
    t0 = start
    while t0 < end:
        t = t0
        for relay in ("Relay1", "Relay2"):
            for proto, port in (("ssh", SSH_PORT), ("telnet", TELNET_PORT)):
                flow = _Flow(cap, "PC2", relay, int(rng.integers(49152, 65536)), port, rng, attack=True)
                t = _failed_session(cap, flow, dnp3[("RTAC", relay)], t, rng, proto, episode)
                if t >= end:
                    return
        episode += 1
        t0 += period


def _setting_change(cap: _Capture, script: ScenarioScript, rng, start: float, end: float, dnp3: dict):
    period = script.episode_period or 60.0
    episode = 0
    t0 = start
    while t0 < end:
        t = t0
        for relay, (proto, port) in (("Relay1", ("ssh", SSH_PORT)), ("Relay2", ("telnet", TELNET_PORT))):
            flow = _Flow(cap, "PC2", relay, int(rng.integers(49152, 65536)), port, rng, attack=True)
            alarm_flow = dnp3[("RTAC", relay)]
            t = flow.handshake(t) + 0.01
            if proto == "ssh":
                t = _ssh_preamble(flow, t, rng)
                flow.send(t, True, PSH | ACK, _payload(rng, 80, 120))
                flow.send(t + 0.2, False, PSH | ACK, _payload(rng, 30, 50))
            else:
                flow.send(t, False, PSH | ACK, b"\xff\xfd\x18\xff\xfd\x20login: ")
                flow.send(t + 0.3, True, PSH | ACK, b"admin\r\n")
                flow.send(t + 0.35, False, PSH | ACK, b"Password: ")
                flow.send(t + 0.7, True, PSH | ACK, _payload(rng, 8, 14))
                flow.send(t + 0.9, False, PSH | ACK, _payload(rng, 200, 400))
            t += 1.0
            cap.events.append({"kind": "login", "t": t, "relay": relay, "proto": proto, "episode": episode})
            cap.events.append({"kind": "alarm", "t": t, "relay": relay, "episode": episode, "reason": "login"})
            t = _alarm_burst(cap, alarm_flow, t, rng) + 0.2
            for _ in range(30):
                flow.send(t, True, PSH | ACK, _payload(rng, 200, 600))
                flow.send(t + float(rng.uniform(0.02, 0.08)), False, PSH | ACK, _payload(rng, 300, 1200))
                t += float(rng.uniform(0.1, 0.3))
            cap.events.append({"kind": "setting_change", "t": t, "relay": relay, "episode": episode})
            cap.events.append({"kind": "alarm", "t": t, "relay": relay, "episode": episode, "reason": "change"})
            t = _alarm_burst(cap, alarm_flow, t, rng) + 0.05
            t = flow.close(t, server_first=False) + 0.5
            if t >= end:
                return
        episode += 1
        t0 += period


# ------------------------------------------------------------------ output


def attack_intervals(times_us: np.ndarray, merge_gap: float = 5.0) -> list[list[float]]:
    """Merge sorted attack-packet times (µs) into ``[start, end]`` second intervals."""
    if len(times_us) == 0:
        return []
    t = np.asarray(times_us, dtype=np.int64)
    breaks = np.nonzero(np.diff(t) > merge_gap * 1e6)[0]
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [len(t) - 1]])
    return [[float(t[a]) / 1e6, float(t[b]) / 1e6] for a, b in zip(starts, ends)]


def label_windows(first_ts: float, last_ts: float, intervals, scenario: str, window_len: float, stride: float):
    """Label each rolling window with ``scenario`` if it overlaps an attack interval."""
    out = []
    j = 0
    while first_ts + j * stride <= last_ts:
        s = first_ts + j * stride
        e = s + window_len
        hit = any(a < e and b >= s for a, b in intervals)
        out.append({"index": j, "start": s, "end": e, "scenario": scenario if hit else "normal"})
        j += 1
    return out


@dataclass
class SynthCapture:
    script: ScenarioScript
    topology: Topology
    records: list[tuple[int, bytes]]
    attack_mask: np.ndarray
    events: list[dict]
    attacker: str | None
    targets: list[str]

    @property
    def timestamps_us(self) -> np.ndarray:
        return np.fromiter((t for t, _ in self.records), np.int64, len(self.records))

    def labels(self, window_len: float = 30.0, stride: float | None = None) -> dict:
        stride = stride or window_len
        ts = self.timestamps_us
        intervals = attack_intervals(ts[self.attack_mask])
        windows = (
            label_windows(ts[0] / 1e6, ts[-1] / 1e6, intervals, self.script.scenario, window_len, stride)
            if len(ts) else []
        )
        return {
            "scenario": self.script.scenario,
            "attacker": self.attacker,
            "targets": self.targets,
            "seed": self.script.seed,
            "duration": self.script.duration,
            "window_len": window_len,
            "stride": stride,
            "attack_intervals": intervals,
            "windows": windows,
            "topology": self.topology.devices,
        }

    def write(self, path: str | Path, window_len: float = 30.0, stride: float | None = None) -> tuple[Path, Path]:
        path = Path(path)
        write_pcap(path, self.records)
        label_path = labels_path_for(path)
        label_path.write_text(json.dumps(self.labels(window_len, stride), indent=1, sort_keys=True))
        return path, label_path


def labels_path_for(pcap_path: str | Path) -> Path:
    p = Path(pcap_path)
    return p.with_name(p.stem + ".labels.json")


_ATTACKERS = {
    "normal": (None, []),
    "flood": ("PC1", ["Relay1", "Relay2"]),
    "scan": ("PC1", ["Relay1", "Relay2"]),
    "failed_auth": ("PC2", ["Relay1", "Relay2"]),
    "setting_change": ("PC2", ["Relay1", "Relay2"]),
}


def generate(script: ScenarioScript, topology: Topology | None = None) -> SynthCapture:
    topo = topology or Topology()
    cap = _Capture(topo)
    root = np.random.SeedSequence(script.seed)
    background_seq, attack_seq = root.spawn(2)
    dnp3 = _normal_background(cap, script, background_seq)
    rng = np.random.default_rng(attack_seq)
    start = script.attack_start
    end = script.duration if script.attack_end is None else min(script.attack_end, script.duration)
    if script.scenario == "flood":
        _flood(cap, script, rng, start, end)
    elif script.scenario == "scan":
        _scan(cap, script, rng, start, end)
    elif script.scenario == "failed_auth":
        _failed_auth(cap, script, rng, start, end, dnp3)
    elif script.scenario == "setting_change":
        _setting_change(cap, script, rng, start, end, dnp3)
    horizon = int(round(script.duration * 1e6))
    cap.records = sorted((r for r in cap.records if r[0] < horizon), key=lambda r: (r[0], r[1]))
    records = [(BASE_TIME_US + t, frame) for t, _, frame, _ in cap.records]
    mask = np.fromiter((a for *_, a in cap.records), bool, len(cap.records))
    attacker, targets = _ATTACKERS[script.scenario]
    return SynthCapture(script, topo, records, mask, cap.events, attacker, targets)


def gen_normal(topology: Topology | None = None, duration: float = 1800.0, seed: int = 0, **rates) -> SynthCapture:
    return generate(ScenarioScript("normal", duration, seed, **rates), topology)


def gen_flood(topology: Topology | None = None, duration: float = 120.0, seed: int = 0, pps: float = 2000.0, **rates) -> SynthCapture:
    return generate(ScenarioScript("flood", duration, seed, flood_pps=pps, **rates), topology)


def gen_scan(topology: Topology | None = None, duration: float = 180.0, seed: int = 0, **rates) -> SynthCapture:
    return generate(ScenarioScript("scan", duration, seed, **rates), topology)


def gen_failed_auth(topology: Topology | None = None, duration: float = 300.0, seed: int = 0, **rates) -> SynthCapture:
    return generate(ScenarioScript("failed_auth", duration, seed, **rates), topology)


def gen_setting_change(topology: Topology | None = None, duration: float = 300.0, seed: int = 0, **rates) -> SynthCapture:
    return generate(ScenarioScript("setting_change", duration, seed, **rates), topology)
