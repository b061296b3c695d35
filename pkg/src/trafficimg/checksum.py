"""Internet checksum (ones' complement of the ones' complement sum)."""
from __future__ import annotations

import numpy as np


def ones_complement_sum(data: bytes) -> int:
    """16-bit ones' complement sum of ``data``; odd lengths are zero padded."""
    if len(data) % 2:
        data = bytes(data) + b"\x00"
    words = np.frombuffer(data, dtype=">u2")
    total = int(words.sum(dtype=np.uint64))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def internet_checksum(data: bytes) -> int:
    return ~ones_complement_sum(data) & 0xFFFF


def pseudo_header(src: bytes, dst: bytes, protocol: int, length: int) -> bytes:
    return src + dst + bytes((0, protocol)) + length.to_bytes(2, "big")
