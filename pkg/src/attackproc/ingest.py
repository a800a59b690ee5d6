"""Packet capture parsing and flow assembly.

Reads classic libpcap files (either byte order, Ethernet link type) and NDJSON
flow logs, and groups packets into attacker -> victim flows using the FIN/RST,
inactivity-timeout and maximum-lifetime rules of low-interaction honeypots.
"""
from __future__ import annotations

import ipaddress
import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import BadMagic, CorruptHeader

log = logging.getLogger(__name__)

PCAP_MAGIC = 0xA1B2C3D4
LINKTYPE_ETHERNET = 1
MAX_RECORD = 262144

TCP_FLAG_BITS = {"FIN": 0x01, "SYN": 0x02, "RST": 0x04, "PSH": 0x08, "ACK": 0x10, "URG": 0x20}
PROTOCOLS = {6: "TCP", 17: "UDP"}
TERMINATIONS = ("FIN", "RST", "TIMEOUT", "LIFETIME", "END_OF_CAPTURE")

# IANA ports of the services a honeypot typically exposes
SERVICE_PORTS = {"SMB": 445, "NetBIOS": 139, "HTTP": 80, "MySQL": 3306, "SSH": 22}


@dataclass(frozen=True)
class PacketRecord:
    timestamp: float
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    protocol: str
    tcp_flags: frozenset = frozenset()
    payload_len: int = 0

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 65535:
                raise ValueError(f"port {port} out of range")
        if self.protocol not in ("TCP", "UDP"):
            raise ValueError(f"unsupported protocol {self.protocol!r}")
        if self.protocol == "UDP" and self.tcp_flags:
            raise ValueError("UDP packets carry no TCP flags")


@dataclass(frozen=True)
class FlowRecord:
    attacker_ip: str
    attacker_port: int
    victim_ip: str
    victim_port: int
    protocol: str
    start: float
    end: float
    packet_count: int
    termination: str

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("flow ends before it starts")
        if self.packet_count < 1:
            raise ValueError("packet_count must be >= 1")
        if self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.termination!r}")
        if self.protocol not in ("TCP", "UDP"):
            raise ValueError(f"unsupported protocol {self.protocol!r}")

    @property
    def key(self) -> tuple:
        return (self.attacker_ip, self.attacker_port, self.victim_ip, self.victim_port, self.protocol)

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_dict(cls, obj: dict) -> "FlowRecord":
        names = [f for f in cls.__dataclass_fields__]
        missing = [n for n in names if n not in obj]
        if missing:
            raise ValueError(f"missing fields {missing}")
        return cls(
            attacker_ip=str(ipaddress.IPv4Address(obj["attacker_ip"])),
            attacker_port=int(obj["attacker_port"]),
            victim_ip=str(ipaddress.IPv4Address(obj["victim_ip"])),
            victim_port=int(obj["victim_port"]),
            protocol=str(obj["protocol"]),
            start=float(obj["start"]),
            end=float(obj["end"]),
            packet_count=int(obj["packet_count"]),
            termination=str(obj["termination"]),
        )


@dataclass(frozen=True)
class AssemblyConfig:
    flow_timeout: float = 60.0
    flow_lifetime: float = 300.0
    production_ports: frozenset = frozenset()
    honeypot_nets: tuple = ()

    def __post_init__(self):
        if not 0 < self.flow_timeout <= self.flow_lifetime:
            raise ValueError("need 0 < flow_timeout <= flow_lifetime")
        object.__setattr__(self, "production_ports", frozenset(int(p) for p in self.production_ports))
        object.__setattr__(self, "honeypot_nets", tuple(str(n) for n in self.honeypot_nets))

    @classmethod
    def for_services(cls, names: Iterable[str], **kwargs) -> "AssemblyConfig":
        """Config keeping only the standard ports of the named services."""
        ports = {SERVICE_PORTS[name] for name in names}
        return cls(production_ports=frozenset(ports), **kwargs)

    def networks(self) -> list:
        return [ipaddress.IPv4Network(n, strict=False) for n in self.honeypot_nets]


class PacketList(list):
    """Parsed packets plus counts of what the parser skipped."""

    def __init__(self, items=(), skipped: int = 0, truncated: int = 0):
        super().__init__(items)
        self.skipped = skipped
        self.truncated = truncated


class FlowList(list):
    """Flows plus the number of input items that did not end up in any flow."""

    def __init__(self, items=(), skipped: int = 0, diagnostics: Optional[list] = None):
        super().__init__(items)
        self.skipped = skipped
        self.diagnostics = diagnostics if diagnostics is not None else []


# ---------------------------------------------------------------------------
# pcap


def parse_pcap(data: bytes) -> PacketList:
    """Decode IPv4 TCP/UDP packets from a classic pcap byte string."""
    if len(data) < 24:
        raise BadMagic("input shorter than a pcap global header")
    (magic,) = struct.unpack("<I", data[:4])
    if magic == PCAP_MAGIC:
        endian = "<"
    elif magic == 0xD4C3B2A1:
        endian = ">"
    else:
        raise BadMagic(f"unrecognized magic 0x{magic:08x}")
    _, _, _, _, snaplen, linktype = struct.unpack(endian + "HHiIII", data[4:24])
    if linktype != LINKTYPE_ETHERNET:
        raise CorruptHeader(f"unsupported link type {linktype}")
    limit = max(snaplen, MAX_RECORD)

    out = PacketList()
    pos = 24
    size = len(data)
    while pos < size:
        if size - pos < 16:
            out.truncated += 1
            break
        ts_sec, ts_usec, incl_len, _ = struct.unpack(endian + "IIII", data[pos : pos + 16])
        if incl_len > limit:
            raise CorruptHeader(f"record at offset {pos} claims {incl_len} bytes")
        body_start = pos + 16
        if body_start + incl_len > size:
            out.truncated += 1
            break
        frame = data[body_start : body_start + incl_len]
        pos = body_start + incl_len
        pkt = _decode_frame(frame, ts_sec + ts_usec / 1e6)
        if pkt is None:
            out.skipped += 1
        else:
            out.append(pkt)
    if out.truncated:
        log.warning("pcap: skipped %d truncated trailing record(s)", out.truncated)
    return out


def _decode_frame(frame: bytes, ts: float) -> Optional[PacketRecord]:
    if len(frame) < 14 + 20:
        return None
    (ethertype,) = struct.unpack("!H", frame[12:14])
    if ethertype != 0x0800:
        return None
    ip = frame[14:]
    version, ihl = ip[0] >> 4, (ip[0] & 0x0F) * 4
    if version != 4 or ihl < 20 or len(ip) < ihl:
        return None
    total_len, frag = struct.unpack("!H2xH", ip[2:8])
    if frag & 0x1FFF:
        return None
    proto = PROTOCOLS.get(ip[9])
    if proto is None:
        return None
    src = str(ipaddress.IPv4Address(ip[12:16]))
    dst = str(ipaddress.IPv4Address(ip[16:20]))
    l4 = ip[ihl:]
    if proto == "TCP":
        if len(l4) < 20:
            return None
        sport, dport = struct.unpack("!HH", l4[:4])
        off = (l4[12] >> 4) * 4
        bits = l4[13]
        flags = frozenset(name for name, bit in TCP_FLAG_BITS.items() if bits & bit)
        payload = max(0, total_len - ihl - off)
        return PacketRecord(ts, src, dst, sport, dport, "TCP", flags, payload)
    if len(l4) < 8:
        return None
    sport, dport, ulen = struct.unpack("!HHH", l4[:6])
    return PacketRecord(ts, src, dst, sport, dport, "UDP", frozenset(), max(0, ulen - 8))


# ---------------------------------------------------------------------------
# flow logs


def parse_flow_log(lines: Iterable[str]) -> FlowList:
    """Read NDJSON flow records; bad lines are counted in ``diagnostics``, never fatal."""
    out = FlowList()
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(FlowRecord.from_dict(json.loads(line)))
        except (ValueError, TypeError, KeyError, AttributeError) as exc:
            out.skipped += 1
            out.diagnostics.append(f"line {lineno}: {exc}")
    return out


def write_flow_log(flows: Iterable[FlowRecord]) -> str:
    return "".join(f.to_json() + "\n" for f in flows)


# ---------------------------------------------------------------------------
# assembly


def _orient(pkt: PacketRecord, nets: list) -> Optional[tuple]:
    """Flow key (attacker -> victim) for a packet, or None if direction is ambiguous."""
    if not nets:
        return (pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port, pkt.protocol)
    src_in = any(ipaddress.IPv4Address(pkt.src_ip) in n for n in nets)
    dst_in = any(ipaddress.IPv4Address(pkt.dst_ip) in n for n in nets)
    if dst_in and not src_in:
        return (pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port, pkt.protocol)
    if src_in and not dst_in:
        return (pkt.dst_ip, pkt.dst_port, pkt.src_ip, pkt.src_port, pkt.protocol)
    return None


def _emit(key, state, termination) -> FlowRecord:
    start, last, count = state
    return FlowRecord(key[0], key[1], key[2], key[3], key[4], start, last, count, termination)


def assemble_flows(packets: Sequence[PacketRecord], cfg: AssemblyConfig = AssemblyConfig()) -> FlowList:
    """Group packets into flows keyed by (attacker, attacker port, victim, victim port, protocol).

    A FIN or RST closes a TCP flow after that packet.  A silence longer than
    ``flow_timeout`` or an age beyond ``flow_lifetime`` closes it before the
    next packet, which opens a new flow.  Flows still open when the packets
    run out close as END_OF_CAPTURE, whatever their idle time, so the result
    for one key never depends on packets of other keys.
    """
    nets = cfg.networks()
    ordered = sorted(packets, key=lambda p: p.timestamp)
    active: dict = {}
    done: list = []
    out = FlowList()
    for pkt in ordered:
        key = _orient(pkt, nets)
        if key is None:
            out.skipped += 1
            out.diagnostics.append(f"{pkt.timestamp}: no attacker/victim orientation for {pkt.src_ip}->{pkt.dst_ip}")
            continue
        ts = pkt.timestamp
        state = active.get(key)
        if state is not None:
            start, last, _ = state
            if ts - last > cfg.flow_timeout:
                done.append(_emit(key, state, "TIMEOUT"))
                state = None
            elif ts - start > cfg.flow_lifetime:
                done.append(_emit(key, state, "LIFETIME"))
                state = None
        state = (ts, ts, 1) if state is None else (state[0], ts, state[2] + 1)
        if pkt.protocol == "TCP" and pkt.tcp_flags & {"FIN", "RST"}:
            done.append(_emit(key, state, "RST" if "RST" in pkt.tcp_flags else "FIN"))
            active.pop(key, None)
        else:
            active[key] = state
    for key, state in active.items():
        done.append(_emit(key, state, "END_OF_CAPTURE"))
    ports = cfg.production_ports
    for flow in sorted(done, key=lambda f: (f.start, f.key, f.end)):
        if ports and flow.victim_port not in ports:
            out.skipped += flow.packet_count
            continue
        out.append(flow)
    return out
