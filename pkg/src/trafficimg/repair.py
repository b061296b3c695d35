"""Turning generated matrices into protocol-compliant flows.

Order: structural intra-packet fixes, inter-packet fixes, checksums last,
then timestamps. Every step edits only critical fields (see
``data/rules.json``); flexible fields such as TTL, ToS or the TCP window
are passed through untouched. Rows that cannot be made legal are dropped
and noted, never invented.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import layout
from .compliance import ComplianceReport, Violation, first_bad_option, validate
from .generator import ClassProfile
from .layout import MAX_ROWS, ROW_WIDTH, VACANT
from .nprint import NprintMatrix, bytes_to_trits, decode_flow, decode_packet, trits_to_bytes
from .packet import (FlowTrace, Packet, TransportKind, get_bits, set_bits,
                     with_checksums)

_TCP_LENGTHS = tuple(range(160, 481, 32))
_IP_LENGTHS = tuple(range(160, 481, 32))

FIN, SYN, RST, PSH, ACK = 0x01, 0x02, 0x04, 0x08, 0x10

DEFAULT_FRACTION_BOUND = 0.15


@dataclass
class _Row:
    ip: bytearray
    th: bytearray
    kind: TransportKind
    payload: int
    src: int            # index of the generator row this came from

    @property
    def flags(self) -> int:
        return self.th[13]

    def set_flag(self, bit: int, on: bool) -> None:
        self.th[13] = (self.th[13] | bit) if on else (self.th[13] & ~bit)

    def fix_lengths(self) -> None:
        total = len(self.ip) + len(self.th) + self.payload
        self.ip[2:4] = total.to_bytes(2, "big")
        if self.kind is TransportKind.UDP:
            self.th[4:6] = (8 + self.payload).to_bytes(2, "big")

    def packet(self, ts: int = 0) -> Packet:
        return Packet(ts, bytes(self.ip), self.kind, bytes(self.th), self.payload)

    def trits(self) -> np.ndarray:
        row = np.full(ROW_WIDTH, VACANT, dtype=np.int8)
        ip = bytes_to_trits(bytes(self.ip))
        row[:len(ip)] = ip
        th = bytes_to_trits(bytes(self.th))
        start = self.kind.region.start
        row[start:start + len(th)] = th
        return row


def _note(notes, index, fld, rule, msg):
    if notes is not None:
        notes.append(Violation(index, fld, rule, msg))


# --- intra-packet ------------------------------------------------------------

def _best_prefix(seg: np.ndarray, lengths: Sequence[int]):
    """(length, cost) of the aligned header length needing fewest trit changes.

    None when no candidate has at least half its bits populated.
    """
    pop = np.concatenate([[0], np.cumsum(seg != VACANT)])
    total = int(pop[-1])
    best = None
    for n in lengths:
        have = int(pop[n])
        if 2 * have < n:
            continue
        cost = (n - have) + (total - have)
        if best is None or cost <= best[1]:
            best = (n, cost)
    return best


def _fill(seg: np.ndarray) -> bytes:
    return trits_to_bytes(np.where(seg == VACANT, 0, seg))


def _fix_options(buf: bytearray, start: int, tcp: bool) -> None:
    bad = first_bad_option(bytes(buf[start:]), tcp)
    if bad is not None:
        buf[start + bad:] = bytes(len(buf) - start - bad)


def _hamming16(a: int, b: int) -> int:
    return bin((a ^ b) & 0xFFFF).count("1")


def _intra_row(row: np.ndarray, index: int, notes) -> Optional[_Row]:
    if (row == VACANT).all():
        _note(notes, index, "row", "padding", "vacant row inside the flow dropped")
        return None
    ip_fit = _best_prefix(row[layout.IPV4.columns], _IP_LENGTHS)
    if ip_fit is None:
        _note(notes, index, "ipv4", "ipv4.prefix", "IPv4 region cannot hold a 20-byte header; row dropped")
        return None

    choice = None
    for region in layout.TRANSPORT_REGIONS:
        seg = row[region.columns]
        if not (seg != VACANT).any():
            continue
        fit = _best_prefix(seg, _TCP_LENGTHS if region is layout.TCP else (64,))
        if fit is None:
            continue
        others = sum(int((row[r.columns] != VACANT).sum())
                     for r in layout.TRANSPORT_REGIONS if r is not region)
        cost = fit[1] + others
        if choice is None or cost < choice[2]:
            choice = (region, fit[0], cost)
    if choice is None:
        _note(notes, index, "transport", "transport.exclusive",
              "no transport region can hold a header; row dropped")
        return None
    region, t_bits, _ = choice
    kind = {"tcp": TransportKind.TCP, "udp": TransportKind.UDP, "icmp": TransportKind.ICMP}[region.name]

    ip = bytearray(_fill(row[:ip_fit[0]]))
    th = bytearray(_fill(row[region.start:region.start + t_bits]))
    ip[0] = 0x40 | (len(ip) // 4)
    ip[9] = kind.value
    set_bits(ip, 48, 1, 0)          # reserved flag
    set_bits(ip, 50, 14, 0)         # MF + fragment offset
    _fix_options(ip, 20, tcp=False)
    if kind is TransportKind.TCP:
        th[12] = (len(th) // 4) << 4 | (th[12] & 0x01)   # data offset, reserved = 0, keep NS
        _fix_options(th, 20, tcp=True)

    headers = len(ip) + len(th)
    tl = int.from_bytes(ip[2:4], "big")
    candidates = []
    if tl >= headers:
        candidates.append(tl - headers)
    if kind is TransportKind.UDP:
        ulen = int.from_bytes(th[4:6], "big")
        if ulen >= 8 and len(ip) + ulen <= 0xFFFF:
            candidates.append(ulen - 8)

    def cost(payload):
        c = _hamming16(tl, headers + payload)
        if kind is TransportKind.UDP:
            c += _hamming16(int.from_bytes(th[4:6], "big"), 8 + payload)
        return c

    payload = min(candidates, key=lambda p: (cost(p), p)) if candidates else 0
    r = _Row(ip, th, kind, payload, index)
    r.fix_lengths()
    return r


def _intra(rows: np.ndarray, sources: Sequence[int], notes) -> list[_Row]:
    out = []
    for row, src in zip(rows, sources):
        r = _intra_row(row, src, notes)
        if r is not None:
            out.append(r)
    return out


# --- inter-packet ------------------------------------------------------------

def _endpoint_bits(r: _Row) -> tuple[int, int, int, int]:
    src = int.from_bytes(r.ip[12:16], "big")
    dst = int.from_bytes(r.ip[16:20], "big")
    if r.kind is TransportKind.ICMP:
        return src, dst, 0, 0
    return src, dst, int.from_bytes(r.th[0:2], "big"), int.from_bytes(r.th[2:4], "big")


def _ham(a: tuple, b: tuple) -> int:
    return sum(bin(x ^ y).count("1") for x, y in zip(a, b))


def _rev(t: tuple) -> tuple:
    return (t[1], t[0], t[3], t[2])


def _vote(values: Sequence[int], width: int) -> int:
    arr = np.array(values, dtype=np.uint64)
    bits = (arr[:, None] >> np.arange(width, dtype=np.uint64)[None, :]) & np.uint64(1)
    ones = bits.sum(axis=0)
    return int(sum(1 << k for k in range(width) if 2 * ones[k] > len(values)))


def _tuple_as_bits(t: tuple) -> tuple[int, int, int, int]:
    from .packet import ip_int
    return ip_int(t[0]), ip_int(t[1]), int(t[2]), int(t[3])


def _choose_tuple(rows: list[_Row], profile: Optional[ClassProfile], proto: int, notes):
    """Forward (src, dst, sport, dport) for the flow and per-row direction."""
    eps = [_endpoint_bits(r) for r in rows]
    first = eps[0]
    if all(e in (first, _rev(first)) for e in eps):
        return first, [e == first for e in eps]
    voted = tuple(_vote([e[k] for e in eps], 32 if k < 2 else 16) for k in range(4))
    samples = [] if profile is None else [
        _tuple_as_bits(t) for t in profile.tuple_samples if int(t[4]) == proto]
    if samples:
        target = min(samples, key=lambda t: min(_ham(t, voted), _ham(_rev(t), voted)))
    else:
        target = voted
        _note(notes, -1, "ipv4_src", "flow.five_tuple",
              "no real 5-tuple sample for this protocol; using the voted tuple")
    if proto == TransportKind.ICMP.value:
        target = (target[0], target[1], 0, 0)
    dirs = [_ham(e, target) <= _ham(e, _rev(target)) for e in eps]
    return target, dirs


def _write_endpoints(r: _Row, t: tuple, forward: bool) -> None:
    src, dst, sp, dp = t if forward else _rev(t)
    r.ip[12:16] = src.to_bytes(4, "big")
    r.ip[16:20] = dst.to_bytes(4, "big")
    if r.kind is not TransportKind.ICMP:
        r.th[0:2] = sp.to_bytes(2, "big")
        r.th[2:4] = dp.to_bytes(2, "big")


def _repair_ip_ids(rows: list[_Row], dirs: list[bool]) -> None:
    for d in (True, False):
        mine = [r for r, x in zip(rows, dirs) if x == d]
        if not mine:
            continue
        ids = [int.from_bytes(r.ip[4:6], "big") for r in mine]
        atomic = all(get_bits(r.ip, 49, 1) for r in mine)
        if atomic or len(set(ids)) == len(ids):
            continue
        for k, r in enumerate(mine):
            r.ip[4:6] = ((ids[0] + k) & 0xFFFF).to_bytes(2, "big")


def _repair_tcp(rows: list[_Row], dirs: list[bool], notes) -> tuple[list[_Row], list[bool]]:
    n = len(rows)
    handshake = n >= 3
    if not handshake:
        _note(notes, -1, "tcp_syn", "tcp.handshake",
              f"only {n} packets; flags repaired to a mid-stream pattern without handshake")
    if handshake:
        dirs[0], dirs[1], dirs[2] = True, False, True
        for k, want in ((0, SYN), (1, SYN | ACK)):
            r = rows[k]
            for bit in (SYN, ACK, FIN, RST):
                r.set_flag(bit, bool(want & bit))
            r.payload = 0
            r.fix_lengths()
        start = 2
    else:
        start = 0
    for k in range(start, n):
        rows[k].set_flag(SYN, False)
        if k > 0:
            rows[k].set_flag(ACK, True)

    rst = [k for k in range(start, n) if rows[k].flags & RST]
    if rst and rst[0] < n - 1:
        for r in rows[rst[0] + 1:]:
            _note(notes, r.src, "tcp_rst", "tcp.teardown", "row after RST dropped")
        rows, dirs = rows[:rst[0] + 1], dirs[:rst[0] + 1]
        n = len(rows)
    for d in (True, False):
        idx = [k for k in range(start, n) if dirs[k] == d]
        fins = [k for k in idx if rows[k].flags & FIN]
        if not fins:
            continue
        keep = fins[0]
        if any(rows[k].payload for k in idx if k > keep):
            keep = idx[-1]
        for k in idx:
            rows[k].set_flag(FIN, k == keep)

    nxt: dict[bool, Optional[int]] = {True: None, False: None}
    for r, d in zip(rows, dirs):
        seq = int.from_bytes(r.th[4:8], "big")
        if nxt[d] is None:
            nxt[d] = seq
        r.th[4:8] = nxt[d].to_bytes(4, "big")
        if r.flags & ACK:
            ack = int.from_bytes(r.th[8:12], "big")
            if nxt[not d] is None:
                nxt[not d] = ack
            r.th[8:12] = nxt[not d].to_bytes(4, "big")
        else:
            r.th[8:12] = bytes(4)
        grow = r.payload + bool(r.flags & SYN) + bool(r.flags & FIN)
        nxt[d] = (nxt[d] + grow) & 0xFFFFFFFF
    return rows, dirs


def _inter(rows: list[_Row], profile: Optional[ClassProfile], notes) -> list[_Row]:
    if not rows:
        return rows
    counts = {k: sum(r.kind is k for r in rows) for k in (TransportKind.TCP, TransportKind.UDP, TransportKind.ICMP)}
    kind = max(counts, key=lambda k: counts[k])   # ties keep TCP > UDP > ICMP order
    kept = []
    for r in rows:
        if r.kind is kind:
            kept.append(r)
        else:
            _note(notes, r.src, "ipv4_proto", "flow.protocol",
                  f"{r.kind.name} row in a {kind.name} flow dropped")
    rows = kept
    target, dirs = _choose_tuple(rows, profile, kind.value, notes)
    if kind is TransportKind.TCP:
        rows, dirs = _repair_tcp(rows, dirs, notes)
    for r, d in zip(rows, dirs):
        _write_endpoints(r, target, d)
    _repair_ip_ids(rows, dirs)
    return rows


# --- checksums ---------------------------------------------------------------

def _checksum(rows: list[_Row]) -> list[_Row]:
    out = []
    for r in rows:
        p = with_checksums(r.packet())
        out.append(_Row(bytearray(p.ip_header), bytearray(p.transport_header), r.kind, r.payload, r.src))
    return out


# --- matrix plumbing -----------------------------------------------------------

def _to_matrix(rows: list[_Row], label) -> NprintMatrix:
    trits = np.full((MAX_ROWS, ROW_WIDTH), VACANT, dtype=np.int8)
    for i, r in enumerate(rows):
        trits[i] = r.trits()
    return NprintMatrix(trits, len(rows), label)


def _from_matrix(m: NprintMatrix) -> list[_Row]:
    out = []
    for i, row in enumerate(m.rows):
        p = decode_packet(row)
        out.append(_Row(bytearray(p.ip_header), bytearray(p.transport_header),
                        p.transport_kind, p.payload_len, i))
    return out


def repair_intra(m: NprintMatrix, notes: Optional[list] = None) -> NprintMatrix:
    """Make each row a self-consistent header; rows beyond saving are dropped."""
    return _to_matrix(_intra(m.rows, range(m.n_real), notes), m.label)


def repair_inter(m: NprintMatrix, profile: Optional[ClassProfile] = None,
                 notes: Optional[list] = None) -> NprintMatrix:
    """Enforce one 5-tuple, TCP handshake/teardown, seq/ack chains and IP IDs.

    Expects ``repair_intra`` output (every row decodes).
    """
    return _to_matrix(_inter(_from_matrix(m), profile, notes), m.label)


def finalize_checksums(m: NprintMatrix) -> NprintMatrix:
    """Recompute IPv4, TCP, UDP and ICMP checksums (payload zero-filled)."""
    return _to_matrix(_checksum(_from_matrix(m)), m.label)


def assign_timestamps(f: FlowTrace, profile: ClassProfile, seed: int) -> FlowTrace:
    """First packet at 0, then i.i.d. inter-arrival times resampled from the class (min 1 us)."""
    samples = np.asarray(profile.inter_arrival_samples, dtype=np.int64)
    n = len(f.packets)
    if samples.size == 0:
        warnings.warn("profile has no inter-arrival samples; using 1 ms spacing", RuntimeWarning)
        deltas = np.full(max(n - 1, 0), 1000, dtype=np.int64)
    else:
        rng = np.random.default_rng(seed)
        # at least 1 us apart, so capture order survives any re-sort by time
        deltas = np.maximum(rng.choice(samples, size=max(n - 1, 0)), 1)
    ts = np.concatenate([[0], np.cumsum(deltas)]).astype(np.int64)
    packets = [p.replace(timestamp_us=int(t)) for p, t in zip(f.packets, ts)]
    return FlowTrace(packets, f.five_tuple, f.label)


@dataclass
class RepairResult:
    flow: Optional[FlowTrace]
    matrix: NprintMatrix
    report: ComplianceReport


def changed_fraction(before: np.ndarray, after_rows: Sequence[np.ndarray], sources: Sequence[int]) -> float:
    """Changed trits over populated trits of ``before``; dropped rows count fully."""
    populated = int((before != VACANT).sum())
    if populated == 0:
        return 0.0
    changed = 0
    kept = set(sources)
    for i in range(len(before)):
        if i not in kept:
            changed += int((before[i] != VACANT).sum())
    for row, src in zip(after_rows, sources):
        changed += int((before[src] != row).sum())
    return min(1.0, changed / populated)


def _already_compliant(m: NprintMatrix, profile: ClassProfile, seed: int) -> Optional[FlowTrace]:
    """The decoded flow if ``m`` needs no repair at all, else None."""
    if m.n_real == 0:
        return None
    try:
        flow = decode_flow(m)
    except ValueError:
        return None
    if m.timestamps_us is None:
        flow = assign_timestamps(flow, profile, seed)
    return flow if validate(flow).compliant else None


def repair(m: NprintMatrix, profile: ClassProfile, seed: int = 0) -> RepairResult:
    """Full pipeline: intra, inter, checksums, decode, timestamps, validate."""
    notes: list[Violation] = []
    done = _already_compliant(m, profile, seed)
    if done is not None:
        _note(notes, -1, "flow", "flow.compliant", "input already compliant; left unchanged")
        return RepairResult(done, m.copy(), ComplianceReport([], 0.0, notes))
    before = m.rows.copy()
    rows = _intra(before, range(m.n_real), notes)
    rows = _inter(rows, profile, notes)
    rows = _checksum(rows)
    matrix = _to_matrix(rows, m.label)
    fraction = changed_fraction(before, [r.trits() for r in rows], [r.src for r in rows])
    if not rows:
        report = ComplianceReport([Violation(-1, "row", "flow.empty", "no row could be repaired")],
                                  fraction, notes)
        return RepairResult(None, matrix, report)
    flow = FlowTrace.from_packets([r.packet() for r in rows], m.label)
    flow = assign_timestamps(flow, profile, seed)
    report = validate(flow)
    report.repaired_fraction = fraction
    report.notes = notes
    return RepairResult(flow, matrix, report)
