"""Column layout of the 1088-bit packet row.

Every header bit has a fixed column. Regions are laid out IPv4, TCP, UDP,
ICMP; within a region header bytes are copied MSB-first, so column
``region.start + 8*i + k`` holds bit ``7-k`` of header byte ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass

ROW_WIDTH = 1088
MAX_ROWS = 1024

VACANT = -1


@dataclass(frozen=True)
class Region:
    name: str
    start: int
    width: int  # bits

    @property
    def stop(self) -> int:
        return self.start + self.width

    @property
    def columns(self) -> slice:
        return slice(self.start, self.stop)


IPV4 = Region("ipv4", 0, 480)
TCP = Region("tcp", 480, 480)
UDP = Region("udp", 960, 64)
ICMP = Region("icmp", 1024, 64)

REGIONS = (IPV4, TCP, UDP, ICMP)
TRANSPORT_REGIONS = (TCP, UDP, ICMP)

assert sum(r.width for r in REGIONS) == ROW_WIDTH


@dataclass(frozen=True)
class Field:
    """A header field: ``width`` bits at ``offset`` bits into ``region``."""

    name: str
    region: Region
    offset: int
    width: int

    @property
    def start(self) -> int:
        return self.region.start + self.offset

    @property
    def stop(self) -> int:
        return self.start + self.width

    @property
    def columns(self) -> slice:
        return slice(self.start, self.stop)

    @property
    def is_options(self) -> bool:
        return self.name.endswith("_opt")

    def column_names(self) -> list[str]:
        return [f"{self.name}_{i}" for i in range(self.width)]


def _fields(region: Region, widths: list[tuple[str, int]]) -> list[Field]:
    out, off = [], 0
    for name, width in widths:
        out.append(Field(f"{region.name}_{name}", region, off, width))
        off += width
    assert off == region.width, (region.name, off)
    return out


IPV4_FIELDS = _fields(IPV4, [
    ("ver", 4), ("hl", 4), ("tos", 8), ("tl", 16), ("id", 16),
    ("rbit", 1), ("dfbit", 1), ("mfbit", 1), ("foff", 13),
    ("ttl", 8), ("proto", 8), ("cksum", 16), ("src", 32), ("dst", 32),
    ("opt", 320),
])
TCP_FIELDS = _fields(TCP, [
    ("sprt", 16), ("dprt", 16), ("seq", 32), ("ackn", 32),
    ("doff", 4), ("res", 3), ("ns", 1), ("cwr", 1), ("ece", 1),
    ("urg", 1), ("ackf", 1), ("psh", 1), ("rst", 1), ("syn", 1), ("fin", 1),
    ("wsize", 16), ("cksum", 16), ("urp", 16), ("opt", 320),
])
UDP_FIELDS = _fields(UDP, [("sport", 16), ("dport", 16), ("len", 16), ("cksum", 16)])
ICMP_FIELDS = _fields(ICMP, [("type", 8), ("code", 8), ("cksum", 16), ("roh", 32)])

FIELDS: dict[str, Field] = {
    f.name: f for f in IPV4_FIELDS + TCP_FIELDS + UDP_FIELDS + ICMP_FIELDS
}


def column_names() -> list[str]:
    """nPrint-style names for all 1088 columns, in column order."""
    names: list[str] = []
    for f in FIELDS.values():
        names.extend(f.column_names())
    assert len(names) == ROW_WIDTH
    return names


def layout_table() -> str:
    """Markdown table of every field and its column span."""
    lines = [
        "| field | region | first column | last column | bits |",
        "|---|---|---:|---:|---:|",
    ]
    for f in FIELDS.values():
        lines.append(f"| {f.name} | {f.region.name} | {f.start} | {f.stop - 1} | {f.width} |")
    return "\n".join(lines)
