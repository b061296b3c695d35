import struct

from hypothesis import given, strategies as st

from oracles import rfc1071
from trafficimg import craft
from trafficimg.checksum import internet_checksum, pseudo_header
from trafficimg.packet import with_checksums


def test_all_zero_header_gives_ffff():
    assert internet_checksum(bytes(20)) == 0xFFFF
    assert internet_checksum(b"") == 0xFFFF


def test_rfc1071_worked_example():
    # the sample data from RFC 1071 section 3: sum 0xddf2, checksum 0x220d
    data = bytes.fromhex("0001f203f4f5f6f7")
    assert internet_checksum(data) == 0x220D


def test_known_ipv4_header():
    # widely quoted example header; its checksum field holds 0xb861
    hdr = bytes.fromhex("450000730000400040110000c0a80001c0a800c7")
    assert internet_checksum(hdr) == 0xB861
    fixed = hdr[:10] + struct.pack("!H", 0xB861) + hdr[12:]
    assert internet_checksum(fixed) == 0


@given(st.binary(max_size=300))
def test_matches_reference(data):
    assert internet_checksum(data) == rfc1071(data)


def test_pseudo_header_layout():
    ph = pseudo_header(bytes([10, 0, 0, 1]), bytes([10, 0, 0, 2]), 6, 40)
    assert ph == bytes([10, 0, 0, 1, 10, 0, 0, 2, 0, 6, 0, 40])


def test_recompute_is_idempotent():
    p = craft.tcp("10.0.0.1", "10.0.0.2", 1000, 80, seq=5, payload_len=100)
    assert with_checksums(p) == p
    assert p.ip_checksum_ok() and p.transport_checksum_ok()


def test_udp_zero_checksum_sent_as_ffff():
    # find a datagram whose checksum computes to 0, then check it goes out as 0xFFFF
    for sport in range(1, 65536):
        p = craft.udp("10.0.0.1", "10.0.0.2", sport, 53, checksums=False)
        ph = pseudo_header(p.ip_header[12:16], p.ip_header[16:20], 17, 8)
        if rfc1071(ph + p.transport_header) == 0:
            q = with_checksums(p)
            assert q.transport_header[6:8] == b"\xff\xff"
            assert q.transport_checksum_ok()
            return
    raise AssertionError("no zero-checksum datagram found")
