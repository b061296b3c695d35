"""Hand-crafting of IPv4/TCP/UDP/ICMP packets from field values."""
from __future__ import annotations

import struct

from .packet import Packet, TransportKind, ip_int, with_checksums

TCP_FLAGS = {"F": 0x01, "S": 0x02, "R": 0x04, "P": 0x08, "A": 0x10, "U": 0x20, "E": 0x40, "C": 0x80}


def flag_bits(flags: str | int) -> int:
    if isinstance(flags, int):
        return flags
    return sum(TCP_FLAGS[c] for c in flags)


def _pad4(options: bytes) -> bytes:
    return options + b"\x00" * (-len(options) % 4)


def ipv4_header(src, dst, protocol: int, payload_total: int, *, ttl=64, ip_id=0,
                tos=0, df=True, options: bytes = b"") -> bytes:
    options = _pad4(options)
    ihl = 5 + len(options) // 4
    total = ihl * 4 + payload_total
    flags = 0x4000 if df else 0
    return struct.pack("!BBHHHBBH4s4s", 0x40 | ihl, tos, total, ip_id, flags, ttl,
                       protocol, 0, ip_int(src).to_bytes(4, "big"),
                       ip_int(dst).to_bytes(4, "big")) + options


def tcp(src, dst, sport, dport, *, seq=0, ack=0, flags="A", window=65535, urg=0,
        options: bytes = b"", payload_len=0, ts=0, ttl=64, ip_id=0, tos=0, df=True,
        ip_options: bytes = b"", checksums=True) -> Packet:
    options = _pad4(options)
    doff = 5 + len(options) // 4
    th = struct.pack("!HHIIBBHHH", sport, dport, seq & 0xFFFFFFFF, ack & 0xFFFFFFFF,
                     doff << 4, flag_bits(flags), window, 0, urg) + options
    ip = ipv4_header(src, dst, 6, len(th) + payload_len, ttl=ttl, ip_id=ip_id, tos=tos,
                     df=df, options=ip_options)
    p = Packet(ts, ip, TransportKind.TCP, th, payload_len)
    return with_checksums(p) if checksums else p


def udp(src, dst, sport, dport, *, payload_len=0, ts=0, ttl=64, ip_id=0, tos=0,
        df=False, ip_options: bytes = b"", checksums=True) -> Packet:
    th = struct.pack("!HHHH", sport, dport, 8 + payload_len, 0)
    ip = ipv4_header(src, dst, 17, 8 + payload_len, ttl=ttl, ip_id=ip_id, tos=tos,
                     df=df, options=ip_options)
    p = Packet(ts, ip, TransportKind.UDP, th, payload_len)
    return with_checksums(p) if checksums else p


def icmp(src, dst, *, icmp_type=8, code=0, ident=0, seqno=0, payload_len=56, ts=0,
         ttl=64, ip_id=0, tos=0, df=False, checksums=True) -> Packet:
    th = struct.pack("!BBHHH", icmp_type, code, 0, ident, seqno)
    ip = ipv4_header(src, dst, 1, 8 + payload_len, ttl=ttl, ip_id=ip_id, tos=tos, df=df)
    p = Packet(ts, ip, TransportKind.ICMP, th, payload_len)
    return with_checksums(p) if checksums else p


# common TCP option blocks
def opt_mss(mss=1460) -> bytes:
    return struct.pack("!BBH", 2, 4, mss)


def opt_timestamps(tsval, tsecr) -> bytes:
    return struct.pack("!BBII", 8, 10, tsval & 0xFFFFFFFF, tsecr & 0xFFFFFFFF)


def syn_options(tsval, tsecr=0, wscale=7, mss=1460) -> bytes:
    # MSS, SACK-permitted, TS, NOP, window scale: the common Linux layout
    return opt_mss(mss) + b"\x04\x02" + opt_timestamps(tsval, tsecr) + b"\x01" + bytes((3, 3, wscale))


def data_options(tsval, tsecr) -> bytes:
    return b"\x01\x01" + opt_timestamps(tsval, tsecr)
