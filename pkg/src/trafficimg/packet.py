"""Packet and flow types for raw-IPv4 traffic."""
from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass
from typing import Iterable, Optional

from . import layout
from .checksum import internet_checksum, pseudo_header


class PacketError(ValueError):
    """A byte sequence or field set that does not form a valid packet."""


class TransportKind(enum.Enum):
    TCP = 6
    UDP = 17
    ICMP = 1
    OTHER = -1

    @classmethod
    def from_protocol(cls, proto: int) -> "TransportKind":
        try:
            return cls(proto)
        except ValueError:
            return cls.OTHER

    @property
    def region(self) -> Optional[layout.Region]:
        return {
            TransportKind.TCP: layout.TCP,
            TransportKind.UDP: layout.UDP,
            TransportKind.ICMP: layout.ICMP,
        }.get(self)


TCP_FLAG_NAMES = ("fin", "syn", "rst", "psh", "ack", "urg", "ece", "cwr")


def get_bits(data: bytes, offset: int, width: int) -> int:
    """Read ``width`` bits starting at bit ``offset`` (MSB-first)."""
    first, last = offset // 8, (offset + width - 1) // 8
    chunk = int.from_bytes(data[first:last + 1], "big")
    shift = (last + 1) * 8 - (offset + width)
    return (chunk >> shift) & ((1 << width) - 1)


def set_bits(data: bytearray, offset: int, width: int, value: int) -> None:
    first, last = offset // 8, (offset + width - 1) // 8
    nbytes = last - first + 1
    chunk = int.from_bytes(data[first:last + 1], "big")
    shift = nbytes * 8 - (offset - first * 8) - width
    mask = ((1 << width) - 1) << shift
    chunk = (chunk & ~mask) | ((value << shift) & mask)
    data[first:last + 1] = chunk.to_bytes(nbytes, "big")


def ip_str(value: int) -> str:
    return str(ipaddress.IPv4Address(value))


def ip_int(value: str | int) -> int:
    return int(ipaddress.IPv4Address(value))


@dataclass(frozen=True)
class Packet:
    """Header bytes of one raw-IPv4 packet plus timestamp and payload length.

    Payload bytes are never carried; ``to_bytes`` zero-fills them.
    """

    timestamp_us: int
    ip_header: bytes
    transport_kind: TransportKind
    transport_header: bytes
    payload_len: int

    def __post_init__(self):
        ip = self.ip_header
        if not 20 <= len(ip) <= 60:
            raise PacketError(f"IPv4 header length {len(ip)} outside 20..60")
        if ip[0] >> 4 != 4:
            raise PacketError(f"IP version {ip[0] >> 4} is not 4")
        if (ip[0] & 0x0F) * 4 != len(ip):
            raise PacketError(f"IHL {ip[0] & 0x0F} disagrees with header length {len(ip)}")
        if TransportKind.from_protocol(ip[9]) is not self.transport_kind:
            raise PacketError(
                f"protocol field {ip[9]} disagrees with transport {self.transport_kind.name}")
        if self.payload_len < 0:
            raise PacketError("negative payload length")
        expected = len(ip) + len(self.transport_header) + self.payload_len
        if self.total_length != expected:
            raise PacketError(
                f"total length {self.total_length} != header+transport+payload {expected}")
        th = self.transport_header
        if self.transport_kind is TransportKind.TCP:
            if len(th) < 20 or len(th) > 60 or (th[12] >> 4) * 4 != len(th):
                raise PacketError(f"bad TCP header length {len(th)}")
        elif self.transport_kind in (TransportKind.UDP, TransportKind.ICMP):
            if len(th) != 8:
                raise PacketError(f"{self.transport_kind.name} header must be 8 bytes")
        elif th:
            raise PacketError("OTHER packets carry no transport header")

    # construction -----------------------------------------------------------

    @classmethod
    def from_bytes(cls, data: bytes, timestamp_us: int = 0,
                   allow_fragments: bool = False) -> "Packet":
        """Parse a raw IPv4 datagram (captured bytes may omit the payload)."""
        if len(data) < 20:
            raise PacketError(f"{len(data)} bytes is too short for IPv4")
        if data[0] >> 4 != 4:
            raise PacketError(f"IP version {data[0] >> 4} is not 4")
        ihl = (data[0] & 0x0F) * 4
        if ihl < 20 or len(data) < ihl:
            raise PacketError(f"bad or truncated IPv4 header (IHL {ihl})")
        ip = bytes(data[:ihl])
        total = int.from_bytes(ip[2:4], "big")
        flags_frag = int.from_bytes(ip[6:8], "big")
        fragmented = bool(flags_frag & 0x2000) or (flags_frag & 0x1FFF) != 0
        if fragmented and not allow_fragments:
            raise PacketError("fragmented datagram (fragments are not supported)")
        kind = TransportKind.from_protocol(ip[9])
        if fragmented and (flags_frag & 0x1FFF):
            kind = TransportKind.OTHER  # non-first fragment has no transport header
        rest = data[ihl:]
        if kind is TransportKind.TCP:
            if len(rest) < 20:
                raise PacketError("truncated TCP header")
            thl = (rest[12] >> 4) * 4
            if thl < 20 or len(rest) < thl:
                raise PacketError(f"bad or truncated TCP header (data offset {thl})")
        elif kind in (TransportKind.UDP, TransportKind.ICMP):
            thl = 8
            if len(rest) < thl:
                raise PacketError(f"truncated {kind.name} header")
        else:
            thl = 0
        if kind is TransportKind.OTHER and ip[9] in (1, 6, 17):
            # keep the Packet invariant: protocol field must map to OTHER
            raise PacketError("non-first fragment cannot be represented")
        payload_len = total - ihl - thl
        if payload_len < 0:
            raise PacketError(f"total length {total} shorter than headers ({ihl + thl})")
        return cls(timestamp_us, ip, kind, bytes(rest[:thl]), payload_len)

    def to_bytes(self) -> bytes:
        return self.ip_header + self.transport_header + bytes(self.payload_len)

    def replace(self, **changes) -> "Packet":
        d = dict(timestamp_us=self.timestamp_us, ip_header=self.ip_header,
                 transport_kind=self.transport_kind,
                 transport_header=self.transport_header, payload_len=self.payload_len)
        d.update(changes)
        return Packet(**d)

    # field access -----------------------------------------------------------

    def header_bytes(self, region: layout.Region) -> Optional[bytes]:
        if region is layout.IPV4:
            return self.ip_header
        if self.transport_kind.region is region:
            return self.transport_header
        return None

    def field(self, name: str):
        """Value of a named layout field, or None if its region is absent.

        Option fields return the option bytes (possibly empty).
        """
        f = layout.FIELDS[name]
        data = self.header_bytes(f.region)
        if data is None:
            return None
        if f.is_options:
            return data[f.offset // 8:]
        return get_bits(data, f.offset, f.width)

    @property
    def size(self) -> int:
        return len(self.ip_header) + len(self.transport_header) + self.payload_len

    @property
    def total_length(self) -> int:
        return int.from_bytes(self.ip_header[2:4], "big")

    @property
    def protocol(self) -> int:
        return self.ip_header[9]

    @property
    def ttl(self) -> int:
        return self.ip_header[8]

    @property
    def ip_id(self) -> int:
        return int.from_bytes(self.ip_header[4:6], "big")

    @property
    def src(self) -> str:
        return ip_str(int.from_bytes(self.ip_header[12:16], "big"))

    @property
    def dst(self) -> str:
        return ip_str(int.from_bytes(self.ip_header[16:20], "big"))

    @property
    def is_fragment(self) -> bool:
        ff = int.from_bytes(self.ip_header[6:8], "big")
        return bool(ff & 0x2000) or (ff & 0x1FFF) != 0

    @property
    def sport(self) -> int:
        if self.transport_kind in (TransportKind.TCP, TransportKind.UDP):
            return int.from_bytes(self.transport_header[0:2], "big")
        return 0

    @property
    def dport(self) -> int:
        if self.transport_kind in (TransportKind.TCP, TransportKind.UDP):
            return int.from_bytes(self.transport_header[2:4], "big")
        return 0

    @property
    def tcp_flags(self) -> int:
        if self.transport_kind is not TransportKind.TCP:
            return 0
        return self.transport_header[13]

    def has_flag(self, name: str) -> bool:
        return bool(self.tcp_flags & (1 << TCP_FLAG_NAMES.index(name)))

    @property
    def seq(self) -> int:
        return int.from_bytes(self.transport_header[4:8], "big")

    @property
    def ack(self) -> int:
        return int.from_bytes(self.transport_header[8:12], "big")

    @property
    def window(self) -> int:
        return int.from_bytes(self.transport_header[14:16], "big")

    @property
    def endpoints(self) -> tuple:
        """Directed (src, dst, sport, dport, protocol)."""
        return (self.src, self.dst, self.sport, self.dport, self.protocol)

    # checksums --------------------------------------------------------------

    def ip_checksum_ok(self) -> bool:
        return internet_checksum(self.ip_header) == 0

    def transport_checksum_ok(self) -> bool:
        """True when the transport checksum verifies (OTHER: always True)."""
        kind = self.transport_kind
        if kind is TransportKind.OTHER:
            return True
        segment = self.transport_header + bytes(self.payload_len)
        if kind is TransportKind.ICMP:
            return internet_checksum(segment) == 0
        if kind is TransportKind.UDP and self.transport_header[6:8] == b"\x00\x00":
            return True  # checksum not used
        ph = pseudo_header(self.ip_header[12:16], self.ip_header[16:20],
                           self.protocol, len(segment))
        return internet_checksum(ph + segment) == 0


def flow_key(p: Packet) -> tuple:
    """Direction-free 5-tuple key used to group packets into flows."""
    a = (p.src, p.sport)
    b = (p.dst, p.dport)
    lo, hi = sorted((a, b), key=lambda e: (ip_int(e[0]), e[1]))
    return (lo[0], hi[0], lo[1], hi[1], p.protocol)


@dataclass(frozen=True)
class FlowTrace:
    """Packets of one bidirectional conversation.

    ``five_tuple`` is oriented by the first packet (its sender is the source).
    """

    packets: tuple[Packet, ...]
    five_tuple: tuple
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "packets", tuple(self.packets))
        fwd = tuple(self.five_tuple)
        rev = (fwd[1], fwd[0], fwd[3], fwd[2], fwd[4])
        object.__setattr__(self, "five_tuple", fwd)
        for i, p in enumerate(self.packets):
            if p.endpoints not in (fwd, rev):
                raise PacketError(f"packet {i} endpoints {p.endpoints} not in flow {fwd}")
        for i in range(1, len(self.packets)):
            if self.packets[i].timestamp_us < self.packets[i - 1].timestamp_us:
                raise PacketError(f"packet {i} timestamp goes backwards")

    @classmethod
    def from_packets(cls, packets: Iterable[Packet], label: Optional[str] = None) -> "FlowTrace":
        packets = tuple(packets)
        if not packets:
            raise PacketError("a flow needs at least one packet")
        return cls(packets, packets[0].endpoints, label)

    def __len__(self) -> int:
        return len(self.packets)

    def is_forward(self, p: Packet) -> bool:
        return p.endpoints == self.five_tuple

    def directions(self) -> dict[tuple, int]:
        """Packet counts per directed endpoint pair."""
        counts: dict[tuple, int] = {}
        for p in self.packets:
            counts[p.endpoints] = counts.get(p.endpoints, 0) + 1
        return counts

    def with_label(self, label: Optional[str]) -> "FlowTrace":
        return FlowTrace(self.packets, self.five_tuple, label)


def with_checksums(p: Packet) -> Packet:
    """Copy of ``p`` with IPv4 and transport checksums recomputed.

    UDP checksums that compute to zero are sent as 0xFFFF.
    """
    ip = bytearray(p.ip_header)
    ip[10:12] = b"\x00\x00"
    ip[10:12] = internet_checksum(bytes(ip)).to_bytes(2, "big")
    th = bytearray(p.transport_header)
    kind = p.transport_kind
    if kind is not TransportKind.OTHER:
        at = {TransportKind.TCP: 16, TransportKind.UDP: 6, TransportKind.ICMP: 2}[kind]
        th[at:at + 2] = b"\x00\x00"
        segment = bytes(th) + bytes(p.payload_len)
        if kind is TransportKind.ICMP:
            csum = internet_checksum(segment)
        else:
            csum = internet_checksum(
                pseudo_header(bytes(ip[12:16]), bytes(ip[16:20]), ip[9], len(segment)) + segment)
            if kind is TransportKind.UDP and csum == 0:
                csum = 0xFFFF
        th[at:at + 2] = csum.to_bytes(2, "big")
    return p.replace(ip_header=bytes(ip), transport_header=bytes(th))
