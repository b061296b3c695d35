"""Reference implementations written independently of the package.

They use plain Python loops and only the standard library, so they share no
code (and ideally no bugs) with the vectorized versions under test.
"""
import math
from collections import defaultdict


def rfc1071(data: bytes) -> int:
    """Internet checksum, the textbook way: 16-bit words, end-around carry."""
    if len(data) % 2:
        data = data + b"\x00"
    total = 0
    for i in range(0, len(data), 2):
        total += (data[i] << 8) | data[i + 1]
        while total > 0xFFFF:
            total = (total & 0xFFFF) + (total >> 16)
    return (~total) & 0xFFFF


def jsd(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    out = 0.0
    for k in keys:
        a, b = p.get(k, 0.0), q.get(k, 0.0)
        if a:
            out += 0.5 * a * math.log(2 * a / (a + b), 2)
        if b:
            out += 0.5 * b * math.log(2 * b / (a + b), 2)
    return out


def tvd(p: dict, q: dict) -> float:
    return sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in set(p) | set(q)) / 2


def hellinger(p: dict, q: dict) -> float:
    s = sum((math.sqrt(p.get(k, 0.0)) - math.sqrt(q.get(k, 0.0))) ** 2 for k in set(p) | set(q))
    return math.sqrt(s / 2)


def nearest_color(rgb) -> int:
    """Trit for one pixel: nearest of gray/red/green, ties to -1."""
    palette = {-1: (128, 128, 128), 0: (255, 0, 0), 1: (0, 255, 0)}
    rgb = [int(v) for v in rgb]
    d = {t: sum((a - b) ** 2 for a, b in zip(rgb, c)) for t, c in palette.items()}
    best = min(d.values())
    winners = [t for t, v in d.items() if v == best]
    return -1 if len(winners) > 1 else winners[0]


def group_flows(packets) -> list[list[int]]:
    """Indices of packets grouped by unordered 5-tuple, groups by first index."""
    groups = defaultdict(list)
    for i, p in enumerate(packets):
        ends = sorted([(p.src, p.sport), (p.dst, p.dport)])
        groups[(tuple(ends), p.protocol)].append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def seq_walk_errors(packets) -> list[int]:
    """Indices where a TCP seq or ack disagrees with what the peer has sent so far.

    Walks the flow keeping the next expected sequence number per sender
    (address, port); the first packet of each sender fixes its start.
    """
    expect = {}
    bad = []
    for i, p in enumerate(packets):
        me, peer = (p.src, p.sport), (p.dst, p.dport)
        th = p.transport_header
        flags = th[13]
        syn, fin, ackf = flags & 2, flags & 1, flags & 16
        seq = int.from_bytes(th[4:8], "big")
        ack = int.from_bytes(th[8:12], "big")
        ok = True
        if me in expect and expect[me] != seq:
            ok = False
        if ackf:
            if peer in expect:
                if expect[peer] != ack:
                    ok = False
            else:
                expect[peer] = ack
        if not ok:
            bad.append(i)
        expect[me] = (seq + p.payload_len + (1 if syn else 0) + (1 if fin else 0)) % 2 ** 32
    return bad


def bits_msb_first(data: bytes) -> list[int]:
    return [(b >> (7 - k)) & 1 for b in data for k in range(8)]
