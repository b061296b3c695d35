"""Packets <-> tri-valued bit rows, flows <-> 1024x1088 matrices."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import layout
from .layout import MAX_ROWS, ROW_WIDTH, VACANT
from .packet import FlowTrace, Packet, PacketError, TransportKind


class RowError(ValueError):
    """A row that does not describe a packet; ``violations`` lists why."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        super().__init__("; ".join(f"{rule}: {msg}" for rule, msg in violations))


@dataclass
class NprintMatrix:
    """One flow as a (1024, 1088) int8 array of trits.

    ``timestamps_us`` is an in-memory side channel filled by
    ``encode_flow``; images do not carry it.
    """

    trits: np.ndarray
    n_real: int
    label: Optional[str] = None
    timestamps_us: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        t = np.asarray(self.trits, dtype=np.int8)
        if t.shape != (MAX_ROWS, ROW_WIDTH):
            raise ValueError(f"matrix shape {t.shape} != {(MAX_ROWS, ROW_WIDTH)}")
        self.trits = t
        if not 0 <= self.n_real <= MAX_ROWS:
            raise ValueError(f"n_real {self.n_real} out of range")

    @classmethod
    def from_rows(cls, rows, label=None, timestamps_us=None) -> "NprintMatrix":
        rows = np.asarray(rows, dtype=np.int8).reshape(-1, ROW_WIDTH)
        trits = np.full((MAX_ROWS, ROW_WIDTH), VACANT, dtype=np.int8)
        n = min(len(rows), MAX_ROWS)
        trits[:n] = rows[:n]
        return cls(trits, n, label, timestamps_us)

    @property
    def rows(self) -> np.ndarray:
        """The non-padding rows."""
        return self.trits[:self.n_real]

    def copy(self) -> "NprintMatrix":
        return NprintMatrix(self.trits.copy(), self.n_real, self.label, self.timestamps_us)

    def check(self) -> None:
        """Raise ValueError unless trits, padding and region exclusivity hold."""
        t = self.trits
        if not np.isin(t, (-1, 0, 1)).all():
            raise ValueError("matrix holds values outside {-1, 0, 1}")
        if (t[self.n_real:] != VACANT).any():
            raise ValueError("padding rows beyond n_real are not vacant")
        populated = np.stack([(t[:, r.columns] != VACANT).any(axis=1)
                              for r in layout.TRANSPORT_REGIONS], axis=1)
        bad = np.flatnonzero(populated.sum(axis=1) > 1)
        if bad.size:
            raise ValueError(f"rows {bad[:5].tolist()} populate more than one transport region")


def bytes_to_trits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8)).astype(np.int8)


def trits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def encode_packet(p: Packet) -> np.ndarray:
    """One packet as a 1088-trit row; absent bits are -1."""
    region = p.transport_kind.region
    if region is None:
        raise PacketError(f"cannot encode transport {p.transport_kind.name} (protocol {p.protocol})")
    row = np.full(ROW_WIDTH, VACANT, dtype=np.int8)
    ip = bytes_to_trits(p.ip_header)
    row[:len(ip)] = ip
    th = bytes_to_trits(p.transport_header)
    row[region.start:region.start + len(th)] = th
    return row


def populated_prefix(segment: np.ndarray) -> tuple[int, bool]:
    """(number of populated trits, whether they form a contiguous prefix)."""
    pop = segment != VACANT
    n = int(pop.sum())
    return n, bool(pop[:n].all())


def decode_packet(row, timestamp_us: int = 0) -> Packet:
    """Inverse of ``encode_packet``; raises RowError listing every violation."""
    row = np.asarray(row)
    if row.shape != (ROW_WIDTH,):
        raise RowError([("shape", f"row has shape {row.shape}")])
    if not np.isin(row, (-1, 0, 1)).all():
        raise RowError([("trit", "values outside {-1, 0, 1}")])
    if (row == VACANT).all():
        raise RowError([("padding", "padding row")])

    problems: list[tuple[str, str]] = []
    ip_n, ip_contig = populated_prefix(row[layout.IPV4.columns])
    if not ip_contig:
        problems.append(("ipv4.prefix", "IPv4 populated bits are not a contiguous prefix"))
    elif ip_n % 8:
        problems.append(("ipv4.prefix", f"IPv4 prefix of {ip_n} bits is not byte aligned"))
    elif ip_n < 160:
        problems.append(("ipv4.prefix", f"IPv4 prefix of {ip_n} bits is shorter than 20 bytes"))

    populated = []
    for region in layout.TRANSPORT_REGIONS:
        n, contig = populated_prefix(row[region.columns])
        if n:
            populated.append((region, n, contig))
    if len(populated) > 1:
        names = ", ".join(r.name for r, _, _ in populated)
        problems.append(("transport.exclusive", f"multiple transport regions populated: {names}"))
    elif not populated:
        problems.append(("transport.missing", "no transport region populated"))
    if problems:
        raise RowError(problems)

    region, t_n, t_contig = populated[0]
    if not t_contig or t_n % 8:
        problems.append((f"{region.name}.prefix",
                         f"{region.name} populated bits are not a byte-aligned prefix"))
        raise RowError(problems)

    ip = trits_to_bytes(row[:ip_n])
    th = trits_to_bytes(row[region.start:region.start + t_n])
    kind = {"tcp": TransportKind.TCP, "udp": TransportKind.UDP, "icmp": TransportKind.ICMP}[region.name]
    if ip[0] >> 4 != 4:
        problems.append(("ipv4.ver", f"version {ip[0] >> 4} is not 4"))
    if (ip[0] & 0x0F) * 4 != len(ip):
        problems.append(("ipv4.hl", f"IHL {ip[0] & 0x0F} disagrees with {len(ip)}-byte prefix"))
    if ip[9] != kind.value:
        problems.append(("ipv4.proto", f"protocol {ip[9]} disagrees with populated {region.name} region"))
    if kind is TransportKind.TCP:
        if t_n < 160:
            problems.append(("tcp.prefix", f"TCP prefix of {t_n} bits is shorter than 20 bytes"))
        elif (th[12] >> 4) * 4 != len(th):
            problems.append(("tcp.doff", f"data offset {th[12] >> 4} disagrees with {len(th)}-byte prefix"))
    elif t_n != 64:
        problems.append((f"{region.name}.prefix", f"{region.name} header must be 64 bits, got {t_n}"))
    total = int.from_bytes(ip[2:4], "big")
    payload = total - len(ip) - len(th)
    if payload < 0:
        problems.append(("ipv4.tl", f"total length {total} shorter than headers {len(ip) + len(th)}"))
    if kind is TransportKind.UDP and not problems:
        ulen = int.from_bytes(th[4:6], "big")
        if ulen != len(th) + payload:
            problems.append(("udp.len", f"UDP length {ulen} != {len(th) + payload}"))
    if problems:
        raise RowError(problems)
    return Packet(timestamp_us, ip, kind, th, payload)


def encode_flow(f: FlowTrace) -> NprintMatrix:
    """First 1024 packets of ``f`` as a matrix; shorter flows are padded."""
    if not f.packets:
        raise ValueError("cannot encode an empty flow")
    packets = f.packets[:MAX_ROWS]
    rows = np.stack([encode_packet(p) for p in packets])
    return NprintMatrix.from_rows(rows, f.label, tuple(p.timestamp_us for p in packets))


def decode_rows(rows: np.ndarray, timestamps: Optional[Sequence[int]] = None) -> list[Packet]:
    ts = timestamps if timestamps is not None else [0] * len(rows)
    return [decode_packet(r, t) for r, t in zip(rows, ts)]


def decode_flow(m: NprintMatrix) -> FlowTrace:
    """Non-padding rows back to a flow.

    Timestamps come from the in-memory side channel when present, else 0.
    """
    if m.n_real == 0:
        raise ValueError("matrix has no packet rows")
    packets = []
    for i, row in enumerate(m.rows):
        ts = m.timestamps_us[i] if m.timestamps_us is not None else 0
        try:
            packets.append(decode_packet(row, ts))
        except RowError as exc:
            raise RowError([(f"row {i}: {rule}", msg) for rule, msg in exc.violations]) from exc
    return FlowTrace.from_packets(packets, m.label)
