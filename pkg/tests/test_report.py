import dataclasses

import pytest
from hypothesis import given, settings

import strategies as S
from trafficimg import craft
from trafficimg.packet import FlowTrace, Packet
from trafficimg.report import TrafficReport, render_table, report


def five_packets():
    c, s = "192.168.1.2", "93.184.216.34"
    return FlowTrace.from_packets([
        craft.tcp(c, s, 5555, 443, seq=1, flags="S", window=1000, ttl=64, ts=0),          # 40 B
        craft.tcp(s, c, 443, 5555, seq=9, ack=2, flags="SA", window=2000, ttl=50, ts=1),  # 40 B
        craft.tcp(c, s, 5555, 443, seq=2, ack=10, flags="PA", window=3000, ttl=64,
                  payload_len=560, ts=2),                                                 # 600 B
        craft.tcp(s, c, 443, 5555, seq=10, ack=562, flags="UA", window=4000, ttl=50,
                  payload_len=1960, urg=1, ts=3),                                         # 2000 B
        craft.tcp(c, s, 5555, 443, seq=562, ack=1970, flags="FA", window=5000, ttl=64,
                  payload_len=1460, ts=4),                                                # 1500 B
    ])


def test_hand_tally():
    r = report(five_packets())
    assert r.packet_count == 5
    assert r.byte_count == 40 + 40 + 600 + 2000 + 1500
    assert r.avg_tcp_window == 3000.0
    assert r.protocol_distribution == {"TCP": 5, "UDP": 0, "ICMP": 0}
    assert r.flags_distribution == {"SYN": 2, "ACK": 4, "FIN": 1, "RST": 0, "PSH": 1, "URG": 1}
    assert r.src_port_distribution == {5555: 3, 443: 2}
    assert r.dst_port_distribution == {443: 3, 5555: 2}
    assert r.packet_size_distribution == {"0-499": 2, "500-999": 1, "1000-1499": 0,
                                          "1500-1999": 1, "2000+": 1}
    assert r.src_ip_distribution == {"192.168.1.2": 3, "93.184.216.34": 2}
    assert r.avg_ttl == pytest.approx((64 * 3 + 50 * 2) / 5)
    assert r.sessions == 1
    assert (r.checksum_errors, r.fragmented_packets, r.fragmented_datagrams) == (0, 0, 0)


def test_empty_is_zero():
    r = report([])
    assert r == TrafficReport()
    assert r.packet_count == 0 and sum(r.packet_size_distribution.values()) == 0


def test_reference_fixture(amazon):
    r = report(amazon)
    assert r.packet_count == 1024
    assert r.byte_count == 1100406
    assert round(r.avg_tcp_window, 2) == 32739.95
    assert r.protocol_distribution == {"TCP": 1024, "UDP": 0, "ICMP": 0}
    assert r.flags_distribution == {"SYN": 0, "ACK": 1023, "FIN": 0, "RST": 0, "PSH": 0, "URG": 16}
    assert r.src_port_distribution == {443: 721, 46508: 303}
    assert r.dst_port_distribution == {46508: 721, 443: 303}
    assert r.packet_size_distribution == {"0-499": 306, "500-999": 6, "1000-1499": 6,
                                          "1500-1999": 706, "2000+": 0}
    assert r.src_ip_distribution == {"54.182.199.148": 721, "192.168.43.37": 303}
    assert r.dst_ip_distribution == {"192.168.43.37": 721, "54.182.199.148": 303}
    assert round(r.avg_ttl, 2) == 186.51
    assert r.sessions == 1
    assert (r.checksum_errors, r.fragmented_packets, r.fragmented_datagrams) == (0, 0, 0)


def test_errors_and_fragments():
    p = craft.udp("10.0.0.1", "10.0.0.2", 1, 2, payload_len=100, ip_id=7)
    ip = bytearray(p.ip_header)
    ip[6] |= 0x20                                         # MF, checksum now stale
    frag = dataclasses.replace(p, ip_header=bytes(ip))
    frag2 = dataclasses.replace(frag, timestamp_us=1)
    bad = dataclasses.replace(p, transport_header=p.transport_header[:6] + b"\x00\x01")
    r = report([frag, frag2, bad])
    assert r.fragmented_packets == 2
    assert r.fragmented_datagrams == 1
    assert r.checksum_errors == 3


def test_sessions_count_tuples():
    a = craft.udp("10.0.0.1", "10.0.0.2", 1, 2)
    b = craft.udp("10.0.0.2", "10.0.0.1", 2, 1)
    c = craft.udp("10.0.0.1", "10.0.0.2", 1, 3)
    assert report([a, b, c]).sessions == 2


@settings(max_examples=40, deadline=None)
@given(S.flow())
def test_invariants(f):
    r = report(f)
    assert sum(r.packet_size_distribution.values()) == r.packet_count
    assert all(v <= r.packet_count for v in r.flags_distribution.values())
    assert report(f) == r


def test_json_and_table(amazon):
    real = report(amazon)
    synth = report(five_packets())
    assert '"443": 721' in real.to_json()
    table = render_table({"real": real, "synthetic": synth})
    lines = table.splitlines()
    assert lines[0].split() == ["Metric", "real", "synthetic"]
    assert "32739.95" in table and "186.51" in table
    assert "0-499: 306, 500-999: 6, 1000-1499: 6, 1500-1999: 706, 2000+: 0" in table
