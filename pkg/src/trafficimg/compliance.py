"""Offline protocol-compliance checks for flows."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence, Union

from .packet import FlowTrace, Packet, TransportKind, flow_key, get_bits

TCP_OPTION_LENGTHS = {2: (4,), 3: (3,), 4: (2,), 5: (10, 18, 26, 34), 8: (10,)}


@dataclass(frozen=True)
class Violation:
    index: int          # packet (or source row) index; -1 for flow-level findings
    field: str
    rule: str
    description: str


@dataclass
class ComplianceReport:
    violations: list[Violation] = field(default_factory=list)
    repaired_fraction: float = 0.0
    notes: list[Violation] = field(default_factory=list)   # repair actions and warnings

    def __post_init__(self):
        if not 0.0 <= self.repaired_fraction <= 1.0:
            raise ValueError("repaired_fraction must lie in [0, 1]")

    @property
    def compliant(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "compliant": self.compliant,
            "violation_count": len(self.violations),
            "repaired_fraction": self.repaired_fraction,
            "violations": [asdict(v) for v in self.violations],
            "notes": [asdict(v) for v in self.notes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def load_rules() -> dict:
    """The shipped dependency-rule table (``data/rules.json``)."""
    text = resources.files("trafficimg").joinpath("data/rules.json").read_text()
    return json.loads(text)


def first_bad_option(opts: bytes, tcp: bool) -> Optional[int]:
    """Offset of the first malformed option byte, or None if the list parses.

    Bytes after an end-of-list option must be zero.
    """
    i, n = 0, len(opts)
    while i < n:
        kind = opts[i]
        if kind == 0:
            return None if not any(opts[i + 1:]) else i + 1 + next(
                k for k, b in enumerate(opts[i + 1:]) if b)
        if kind == 1:
            i += 1
            continue
        if i + 1 >= n:
            return i
        length = opts[i + 1]
        if length < 2 or i + length > n:
            return i
        if tcp and kind in TCP_OPTION_LENGTHS and length not in TCP_OPTION_LENGTHS[kind]:
            return i
        i += length
    return None


def packet_violations(p: Packet, index: int = 0) -> list[Violation]:
    """Intra-packet rule and checksum findings for one packet."""
    out = []

    def bad(fld, rule, msg):
        out.append(Violation(index, fld, rule, msg))

    ip = p.ip_header
    if get_bits(ip, 48, 1):
        bad("ipv4_rbit", "ipv4.rbit", "reserved IPv4 flag set")
    if p.is_fragment:
        bad("ipv4_foff", "ipv4.frag", "fragmented datagram")
    if first_bad_option(ip[20:], tcp=False) is not None:
        bad("ipv4_opt", "ipv4.opt", "malformed IPv4 option list")
    if not p.ip_checksum_ok():
        bad("ipv4_cksum", "ipv4.cksum", "IPv4 header checksum mismatch")
    kind = p.transport_kind
    th = p.transport_header
    if kind is TransportKind.OTHER:
        bad("ipv4_proto", "ipv4.proto", f"unsupported protocol {p.protocol}")
        return out
    if kind is TransportKind.TCP:
        if get_bits(th, 100, 3):
            bad("tcp_res", "tcp.res", "reserved TCP bits set")
        if first_bad_option(th[20:], tcp=True) is not None:
            bad("tcp_opt", "tcp.opt", "malformed TCP option list")
    if kind is TransportKind.UDP:
        ulen = int.from_bytes(th[4:6], "big")
        if ulen != 8 + p.payload_len:
            bad("udp_len", "udp.len", f"UDP length {ulen} != {8 + p.payload_len}")
    if not p.transport_checksum_ok():
        name = kind.name.lower()
        bad(f"{name}_cksum", f"{name}.cksum", f"{kind.name} checksum mismatch")
    return out


def _tcp_violations(packets: Sequence[Packet], fwd: tuple) -> list[Violation]:
    out = []

    def bad(i, fld, rule, msg):
        out.append(Violation(i, fld, rule, msg))

    handshake = packets[0].has_flag("syn")
    nxt: dict[bool, Optional[int]] = {True: None, False: None}
    fin_seen = {True: False, False: False}
    for i, p in enumerate(packets):
        d = p.endpoints == fwd
        syn, ack, fin, rst = (p.has_flag(f) for f in ("syn", "ack", "fin", "rst"))
        # handshake ordering
        if syn:
            if i == 0 and not ack and d:
                pass
            elif i == 1 and handshake and ack and not d:
                pass
            else:
                bad(i, "tcp_syn", "tcp.handshake", "SYN outside the opening handshake")
        elif handshake and i == 1:
            bad(i, "tcp_syn", "tcp.handshake", "second packet is not a SYN-ACK")
        if handshake and i == 2 and not d:
            bad(i, "tcp_syn", "tcp.handshake", "third packet does not come from the initiator")
        if i > 0 and not ack:
            bad(i, "tcp_ackf", "tcp.ack_flag", "ACK flag missing after the first packet")
        if not ack and p.ack != 0:
            bad(i, "tcp_ackn", "tcp.ackn", "non-zero acknowledgment number without ACK")
        # sequence walk
        if nxt[d] is not None and p.seq != nxt[d]:
            bad(i, "tcp_seq", "tcp.seq", f"seq {p.seq} != expected {nxt[d]}")
        if ack:
            if nxt[not d] is None:
                nxt[not d] = p.ack
            elif p.ack != nxt[not d]:
                bad(i, "tcp_ackn", "tcp.ackn", f"ack {p.ack} != peer next seq {nxt[not d]}")
        if fin_seen[d] and (p.payload_len or fin):
            bad(i, "tcp_fin", "tcp.teardown", "data or second FIN after FIN")
        fin_seen[d] |= fin
        nxt[d] = (p.seq + p.payload_len + syn + fin) & 0xFFFFFFFF
        if rst and i != len(packets) - 1:
            bad(i + 1, "tcp_rst", "tcp.teardown", "packets follow a RST")
    return out


def validate(flow: Union[FlowTrace, Iterable[Packet]]) -> ComplianceReport:
    """Check every packet rule, checksum, tuple uniformity, time order and TCP sequencing."""
    packets = list(flow.packets if isinstance(flow, FlowTrace) else flow)
    out: list[Violation] = []
    if not packets:
        return ComplianceReport(out)
    for i, p in enumerate(packets):
        out.extend(packet_violations(p, i))
    key = flow_key(packets[0])
    fwd = packets[0].endpoints
    for i, p in enumerate(packets):
        if flow_key(p) != key:
            out.append(Violation(i, "ipv4_src", "flow.five_tuple", f"packet belongs to {flow_key(p)}"))
    for i in range(1, len(packets)):
        if packets[i].timestamp_us < packets[i - 1].timestamp_us:
            out.append(Violation(i, "timestamp", "flow.time_order", "timestamp goes backwards"))
    same = [p for p in packets if flow_key(p) == key]
    if packets[0].transport_kind is TransportKind.TCP and len(same) == len(packets):
        out.extend(_tcp_violations(packets, fwd))
    out.sort(key=lambda v: (v.index, v.rule))
    return ComplianceReport(out)
