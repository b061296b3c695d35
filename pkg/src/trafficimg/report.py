"""Network-analysis summary of a flow: counts, flags, ports, sizes, TTL, errors."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Union

from .packet import FlowTrace, Packet, TransportKind, flow_key

FLAGS = ("SYN", "ACK", "FIN", "RST", "PSH", "URG")
SIZE_BINS = ((0, 499), (500, 999), (1000, 1499), (1500, 1999), (2000, None))
PROTOCOLS = ("TCP", "UDP", "ICMP")


def bin_label(lo: int, hi) -> str:
    return f"{lo}+" if hi is None else f"{lo}-{hi}"


def size_bin(size: int) -> str:
    for lo, hi in SIZE_BINS:
        if hi is None or size <= hi:
            return bin_label(lo, hi)
    raise AssertionError("unreachable")


@dataclass
class TrafficReport:
    packet_count: int = 0
    byte_count: int = 0
    avg_tcp_window: float = 0.0
    protocol_distribution: dict = field(default_factory=lambda: dict.fromkeys(PROTOCOLS, 0))
    flags_distribution: dict = field(default_factory=lambda: dict.fromkeys(FLAGS, 0))
    src_port_distribution: dict = field(default_factory=dict)
    dst_port_distribution: dict = field(default_factory=dict)
    packet_size_distribution: dict = field(
        default_factory=lambda: {bin_label(lo, hi): 0 for lo, hi in SIZE_BINS})
    src_ip_distribution: dict = field(default_factory=dict)
    dst_ip_distribution: dict = field(default_factory=dict)
    avg_ttl: float = 0.0
    sessions: int = 0
    checksum_errors: int = 0
    fragmented_packets: int = 0
    fragmented_datagrams: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        # JSON object keys must be strings
        for k in ("src_port_distribution", "dst_port_distribution"):
            d[k] = {str(p): n for p, n in d[k].items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _ranked(counter: Counter) -> dict:
    return dict(sorted(counter.items(), key=lambda kv: (-kv[1], str(kv[0]))))


def report(flow: Union[FlowTrace, Iterable[Packet]]) -> TrafficReport:
    """Tally one flow (or any packet sequence); an empty input gives all zeros."""
    packets = list(flow.packets if isinstance(flow, FlowTrace) else flow)
    r = TrafficReport()
    if not packets:
        return r
    r.packet_count = len(packets)
    r.byte_count = sum(p.size for p in packets)
    windows = [p.window for p in packets if p.transport_kind is TransportKind.TCP]
    r.avg_tcp_window = sum(windows) / len(windows) if windows else 0.0
    for p in packets:
        r.protocol_distribution[p.transport_kind.name] = r.protocol_distribution.get(
            p.transport_kind.name, 0) + 1
        if p.transport_kind is TransportKind.TCP:
            for name in FLAGS:
                r.flags_distribution[name] += p.has_flag(name.lower())
        r.packet_size_distribution[size_bin(p.size)] += 1
    ported = [p for p in packets if p.transport_kind in (TransportKind.TCP, TransportKind.UDP)]
    r.src_port_distribution = _ranked(Counter(p.sport for p in ported))
    r.dst_port_distribution = _ranked(Counter(p.dport for p in ported))
    r.src_ip_distribution = _ranked(Counter(p.src for p in packets))
    r.dst_ip_distribution = _ranked(Counter(p.dst for p in packets))
    r.avg_ttl = sum(p.ttl for p in packets) / len(packets)
    r.sessions = len({flow_key(p) for p in packets})
    r.checksum_errors = sum(not (p.ip_checksum_ok() and p.transport_checksum_ok())
                            for p in packets)
    frags = [p for p in packets if p.is_fragment]
    r.fragmented_packets = len(frags)
    r.fragmented_datagrams = len({(p.src, p.dst, p.protocol, p.ip_id) for p in frags})
    return r


def _fmt(value, key: str) -> str:
    if isinstance(value, float):
        return f"{value:.2f}"
    if isinstance(value, dict):
        if key in ("protocol_distribution", "flags_distribution", "packet_size_distribution"):
            return ", ".join(f"{k}: {v}" for k, v in value.items())
        return ", ".join(f"{k} ({v})" for k, v in value.items()) or "-"
    return str(value)


ROW_TITLES = {
    "packet_count": "Packet Count",
    "byte_count": "Byte Count",
    "avg_tcp_window": "Avg. TCP Window Size",
    "protocol_distribution": "Protocol Distribution",
    "flags_distribution": "Flags Distribution",
    "src_port_distribution": "Src Port Distribution",
    "dst_port_distribution": "Dest Port Distribution",
    "packet_size_distribution": "Packet Size Distribution",
    "src_ip_distribution": "Src IP Distribution",
    "dst_ip_distribution": "Dest IP Distribution",
    "avg_ttl": "Average TTL (hops)",
    "sessions": "Number of Sessions",
    "checksum_errors": "Checksum Errors",
    "fragmented_packets": "Fragmented Packets",
    "fragmented_datagrams": "Fragmented IP Datagrams",
}


def render_table(reports: dict[str, TrafficReport]) -> str:
    """Aligned text table, one column per named report (e.g. real, synthetic)."""
    names = list(reports)
    cells = [[ROW_TITLES[k]] + [_fmt(getattr(reports[n], k), k) for n in names]
             for k in ROW_TITLES]
    header = ["Metric"] + names
    widths = [max(len(row[i]) for row in [header] + cells) for i in range(len(header))]
    line = lambda row: "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
    return "\n".join([line(header), line(["-" * w for w in widths])] + [line(r) for r in cells])
