"""Reading, writing and flow-splitting of raw-IP pcap files."""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .packet import FlowTrace, Packet, PacketError, flow_key

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D

LINKTYPE_RAW = 101
# 12/14 are DLT_RAW on some BSDs, 228 is LINKTYPE_IPV4; Wireshark displays
# the IPv4-only encapsulation as "rawip4" (129).
RAW_IP_LINKTYPES = frozenset({LINKTYPE_RAW, 12, 14, 129, 228})

SNAPLEN = 65535

_GLOBAL = struct.Struct("IHHiIII")
_RECORD = struct.Struct("IIII")


class PcapError(ValueError):
    """Malformed or unsupported capture file."""


def _endian(magic_bytes: bytes) -> tuple[str, int]:
    for order in ("<", ">"):
        (magic,) = struct.unpack(order + "I", magic_bytes)
        if magic == MAGIC_USEC:
            return order, 1
        if magic == MAGIC_NSEC:
            return order, 1000
    raise PcapError(f"unrecognized pcap magic {magic_bytes.hex()}")


def read_pcap(path, allow_fragments: bool = False) -> list[Packet]:
    """Read every record of a raw-IP capture.

    Timestamps are rebased so the first packet is at 0 microseconds.
    Raises PcapError on a bad global header, a non raw-IP link type, or a
    truncated/unparseable record (the message names the record index).
    """
    data = Path(path).read_bytes()
    if len(data) < _GLOBAL.size:
        raise PcapError(f"{path}: file shorter than the 24-byte global header")
    order, ts_div = _endian(data[:4])
    glob = struct.unpack(order + _GLOBAL.format, data[:_GLOBAL.size])
    linktype = glob[6] & 0x0FFFFFFF
    if linktype not in RAW_IP_LINKTYPES:
        raise PcapError(f"{path}: unsupported link type {linktype} (raw IP required)")
    rec = struct.Struct(order + _RECORD.format)
    packets: list[Packet] = []
    base = None
    pos, index = _GLOBAL.size, 0
    while pos < len(data):
        if pos + rec.size > len(data):
            raise PcapError(f"{path}: record {index}: truncated record header")
        ts_sec, ts_frac, incl_len, _orig_len = rec.unpack_from(data, pos)
        pos += rec.size
        if pos + incl_len > len(data):
            raise PcapError(f"{path}: record {index}: truncated packet data "
                            f"({len(data) - pos} of {incl_len} bytes)")
        ts = ts_sec * 1_000_000 + ts_frac // ts_div
        if base is None:
            base = ts
        try:
            packets.append(Packet.from_bytes(data[pos:pos + incl_len], ts - base,
                                             allow_fragments=allow_fragments))
        except PacketError as exc:
            raise PcapError(f"{path}: record {index}: {exc}") from exc
        pos += incl_len
        index += 1
    return packets


def pcap_bytes(packets: Iterable[Packet]) -> bytes:
    out = [_GLOBAL.pack(MAGIC_USEC, 2, 4, 0, 0, SNAPLEN, LINKTYPE_RAW)]
    for p in packets:
        raw = p.to_bytes()
        sec, usec = divmod(p.timestamp_us, 1_000_000)
        out.append(_RECORD.pack(sec, usec, len(raw), len(raw)))
        out.append(raw)
    return b"".join(out)


def atomic_write(path, data: bytes) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pcap(packets: Sequence[Packet], path) -> None:
    """Write little-endian, microsecond, LINKTYPE_RAW capture; payloads zero-filled."""
    atomic_write(path, pcap_bytes(packets))


def split_flows(packets: Iterable[Packet], label=None) -> list[FlowTrace]:
    """Partition packets by unordered 5-tuple, preserving packet order.

    Flows are ordered by their first packet's position in the input.
    """
    groups: dict[tuple, list[Packet]] = {}
    for p in packets:
        groups.setdefault(flow_key(p), []).append(p)
    return [FlowTrace.from_packets(g, label) for g in groups.values()]


def count_directional_flows(packets: Iterable[Packet]) -> int:
    """Distinct directed 5-tuples, the way replay tools count flows."""
    return len({p.endpoints for p in packets})
