"""Hypothesis strategies for crafted packets and flows."""
import numpy as np
from hypothesis import strategies as st

from trafficimg import craft
from trafficimg.packet import FlowTrace

u8 = st.integers(0, 0xFF)
u16 = st.integers(0, 0xFFFF)
u32 = st.integers(0, 0xFFFFFFFF)
addr = st.integers(1, 0xFFFFFFFE)
port = st.integers(1, 0xFFFF)


def _words(max_words: int):
    """Option bytes: a whole number of 32-bit words, arbitrary content."""
    return st.integers(0, max_words).flatmap(lambda n: st.binary(min_size=4 * n, max_size=4 * n))


ip_options = _words(10)
tcp_options = _words(10)
payload = st.integers(0, 1400)


@st.composite
def endpoints(draw):
    return draw(addr), draw(addr), draw(port), draw(port)


@st.composite
def tcp_packet(draw, ends=None, ts=0):
    src, dst, sp, dp = ends or draw(endpoints())
    return craft.tcp(src, dst, sp, dp, seq=draw(u32), ack=draw(u32), flags=draw(u8),
                     window=draw(u16), urg=draw(u16), options=draw(tcp_options),
                     payload_len=draw(payload), ts=ts, ttl=draw(u8), ip_id=draw(u16),
                     tos=draw(u8), df=draw(st.booleans()), ip_options=draw(ip_options),
                     checksums=draw(st.booleans()))


@st.composite
def udp_packet(draw, ends=None, ts=0):
    src, dst, sp, dp = ends or draw(endpoints())
    return craft.udp(src, dst, sp, dp, payload_len=draw(payload), ts=ts, ttl=draw(u8),
                     ip_id=draw(u16), tos=draw(u8), df=draw(st.booleans()),
                     ip_options=draw(ip_options), checksums=draw(st.booleans()))


@st.composite
def icmp_packet(draw, ends=None, ts=0):
    src, dst, _, _ = ends or draw(endpoints())
    return craft.icmp(src, dst, icmp_type=draw(u8), code=draw(u8), ident=draw(u16),
                      seqno=draw(u16), payload_len=draw(payload), ts=ts, ttl=draw(u8),
                      ip_id=draw(u16), tos=draw(u8), df=draw(st.booleans()),
                      checksums=draw(st.booleans()))


packet = st.one_of(tcp_packet(), udp_packet(), icmp_packet())

_BUILDERS = {"tcp": tcp_packet, "udp": udp_packet, "icmp": icmp_packet}


@st.composite
def flow(draw, max_packets=12):
    """One flow: fixed transport and endpoints, both directions, rising timestamps."""
    kind = draw(st.sampled_from(sorted(_BUILDERS)))
    src, dst, sp, dp = draw(endpoints())
    if kind == "icmp":
        sp = dp = 0
    gaps = draw(st.lists(st.integers(0, 2_000_000), min_size=1, max_size=max_packets))
    packets, t = [], 0
    for g in gaps:
        t += g
        ends = (src, dst, sp, dp) if draw(st.booleans()) else (dst, src, dp, sp)
        packets.append(draw(_BUILDERS[kind](ends=ends, ts=t)))
    return FlowTrace.from_packets(packets, draw(st.sampled_from([None, "a", "b"])))


@st.composite
def seeded_flow(draw, max_packets=16):
    """Cheaper flow strategy: structure drawn by hypothesis, field values by a seeded RNG."""
    kind = draw(st.sampled_from(["tcp", "udp", "icmp"]))
    n = draw(st.integers(1, max_packets))
    ip_words = draw(st.integers(0, 10))
    tcp_words = draw(st.integers(0, 10))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    r = lambda hi: int(rng.integers(0, hi))
    src, dst = r(2**32 - 2) + 1, r(2**32 - 2) + 1
    sp, dp = (0, 0) if kind == "icmp" else (r(65535) + 1, r(65535) + 1)
    packets, t = [], 0
    for _ in range(n):
        t += r(2_000_000)
        fwd = rng.random() < 0.5
        a, b, pa, pb = (src, dst, sp, dp) if fwd else (dst, src, dp, sp)
        common = dict(payload_len=r(1401), ts=t, ttl=r(256), ip_id=r(65536), tos=r(256),
                      df=bool(r(2)), checksums=bool(r(2)))
        ipo = rng.bytes(4 * r(ip_words + 1))
        if kind == "tcp":
            p = craft.tcp(a, b, pa, pb, seq=r(2**32), ack=r(2**32), flags=r(256),
                          window=r(65536), urg=r(65536), options=rng.bytes(4 * r(tcp_words + 1)),
                          ip_options=ipo, **common)
        elif kind == "udp":
            p = craft.udp(a, b, pa, pb, ip_options=ipo, **common)
        else:
            p = craft.icmp(a, b, icmp_type=r(256), code=r(256), ident=r(65536),
                           seqno=r(65536), **common)
        packets.append(p)
    return FlowTrace.from_packets(packets, draw(st.sampled_from([None, "a", "b"])))
