"""Per-class profiles and mask-constrained matrix sampling.

A profile records, for one traffic class, which columns real packets ever
populate (the region mask), which populated columns never change (frozen),
and the probability of a 1 in every other column. ``generate`` samples new
matrices from it: each row first picks a row template seen in the class
(transport, header lengths, direction), every allowed unfrozen column inside
that template's shape is an independent Bernoulli draw with the template's
probability, frozen columns take their fixed value and everything else stays
vacant. Templates of the chosen transport are drawn with their empirical
weights, so per-column frequencies match the class-wide marginals.

Seeding: ``SeedSequence(seed).spawn(1 + 1024)``; child 0 draws the matrix
length and transport protocol, child ``1 + i`` draws row ``i``. Rows can
therefore be sampled in any order or in parallel with identical output.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import layout
from .layout import MAX_ROWS, ROW_WIDTH, VACANT
from .nprint import NprintMatrix, encode_flow
from .packet import FlowTrace, TransportKind
from .pcap_io import atomic_write

PROFILE_FORMAT = "trafficimg.profile/1"
DEFAULT_TAU = 0.01


@dataclass
class RegionMask:
    """Columns a class may populate, plus columns pinned to one value."""

    allowed: np.ndarray                       # bool[1088]
    frozen: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self.allowed = np.asarray(self.allowed, dtype=bool)
        if self.allowed.shape != (ROW_WIDTH,):
            raise ValueError("mask must have 1088 columns")
        for col, v in self.frozen.items():
            if not self.allowed[col]:
                raise ValueError(f"frozen column {col} is not allowed")
            if v not in (0, 1):
                raise ValueError(f"frozen column {col} has value {v}")

    def frozen_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        cols = np.array(sorted(self.frozen), dtype=np.int64)
        vals = np.array([self.frozen[c] for c in cols], dtype=np.int8)
        return cols, vals


@dataclass
class RowTemplate:
    """Rows of one transport, header length pair and direction."""

    kind: str
    ip_bytes: int
    th_bytes: int
    forward: bool
    count: int
    marginals: np.ndarray                     # P(1) per column within the template

    def __post_init__(self):
        self.marginals = np.asarray(self.marginals, dtype=np.float64)

    @property
    def key(self) -> tuple:
        return (self.kind, self.ip_bytes, self.th_bytes, self.forward)

    def columns(self) -> np.ndarray:
        cols = np.zeros(ROW_WIDTH, dtype=bool)
        cols[:self.ip_bytes * 8] = True
        region = TransportKind[self.kind].region
        cols[region.start:region.start + self.th_bytes * 8] = True
        return cols


@dataclass
class ClassProfile:
    label: str
    column_marginals: np.ndarray              # P(1 | populated), float[1088]
    mask: RegionMask
    inter_arrival_samples: list[int]
    tuple_samples: list[tuple]
    length_rows: list[int]
    # transport -> flow count
    protocol_mix: dict[str, int]
    templates: list["RowTemplate"] = field(default_factory=list)

    def __post_init__(self):
        m = np.asarray(self.column_marginals, dtype=np.float64)
        if m.shape != (ROW_WIDTH,) or (m < 0).any() or (m > 1).any():
            raise ValueError("marginals must be 1088 probabilities")
        self.column_marginals = m
        if not self.tuple_samples:
            raise ValueError("profile needs at least one 5-tuple sample")
        if any(d < 0 for d in self.inter_arrival_samples):
            raise ValueError("negative inter-arrival sample")
        self.tuple_samples = [tuple(t) for t in self.tuple_samples]

    # serialization ------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "format": PROFILE_FORMAT,
            "label": self.label,
            "column_marginals": [float(x) for x in self.column_marginals],
            "allowed": [int(x) for x in self.mask.allowed],
            "frozen": {str(k): int(v) for k, v in sorted(self.mask.frozen.items())},
            "inter_arrival_samples": [int(x) for x in self.inter_arrival_samples],
            "tuple_samples": [list(t) for t in self.tuple_samples],
            "length_rows": [int(x) for x in self.length_rows],
            "protocol_mix": dict(sorted(self.protocol_mix.items())),
            "templates": [
                {"kind": t.kind, "ip_bytes": t.ip_bytes, "th_bytes": t.th_bytes,
                 "forward": t.forward, "count": t.count,
                 "marginals": [float(x) for x in t.marginals]}
                for t in self.templates],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ClassProfile":
        doc = json.loads(text)
        if doc.get("format") != PROFILE_FORMAT:
            raise ValueError(f"unsupported profile format {doc.get('format')!r}")
        mask = RegionMask(np.array(doc["allowed"], dtype=bool),
                          {int(k): int(v) for k, v in doc["frozen"].items()})
        return cls(
            label=doc["label"],
            column_marginals=np.array(doc["column_marginals"]),
            mask=mask,
            inter_arrival_samples=doc["inter_arrival_samples"],
            tuple_samples=[tuple(t) for t in doc["tuple_samples"]],
            length_rows=doc["length_rows"],
            protocol_mix=doc["protocol_mix"],
            templates=[RowTemplate(**t) for t in doc["templates"]],
        )

    def save(self, path) -> None:
        atomic_write(path, self.to_json().encode())

    @classmethod
    def load(cls, path) -> "ClassProfile":
        return cls.from_json(Path(path).read_text())


def _real_rows(flows: Sequence[FlowTrace]) -> np.ndarray:
    return np.concatenate([encode_flow(f).rows for f in flows])


def derive_region_mask(flows: Sequence[FlowTrace], tau: float = DEFAULT_TAU,
                       rows: Optional[np.ndarray] = None) -> RegionMask:
    """Allow a column iff it is populated in at least ``tau`` of real rows.

    Populated columns whose value never varies are frozen.
    """
    if not flows and rows is None:
        raise ValueError("need at least one flow")
    if rows is None:
        rows = _real_rows(flows)
    populated = (rows != VACANT).sum(axis=0)
    ones = (rows == 1).sum(axis=0)
    allowed = populated >= tau * len(rows)
    allowed &= populated > 0
    frozen = {}
    for col in np.flatnonzero(allowed):
        if ones[col] == populated[col]:
            frozen[int(col)] = 1
        elif ones[col] == 0:
            frozen[int(col)] = 0
    return RegionMask(allowed, frozen)


def build_class_profile(flows: Sequence[FlowTrace], label: str,
                        tau: float = DEFAULT_TAU) -> ClassProfile:
    if not flows:
        raise ValueError("cannot build a profile from zero flows")
    for f in flows:
        if f.label is not None and f.label != label:
            raise ValueError(f"flow labelled {f.label!r} in profile for {label!r}")
    rows = _real_rows(flows)
    populated = (rows != VACANT).sum(axis=0)
    ones = (rows == 1).sum(axis=0)
    marginals = np.divide(ones, populated, out=np.zeros(ROW_WIDTH), where=populated > 0)

    deltas: list[int] = []
    mix: Counter = Counter()
    keys = []
    for f in flows:
        packets = f.packets[:MAX_ROWS]
        ts = [p.timestamp_us for p in packets]
        deltas.extend(int(b - a) for a, b in zip(ts, ts[1:]))
        mix[packets[0].transport_kind.name] += 1
        keys.extend((p.transport_kind.name, len(p.ip_header), len(p.transport_header),
                     p.endpoints == f.five_tuple) for p in packets)
    templates = []
    for key in sorted(set(keys)):
        sel = np.array([k == key for k in keys])
        t_rows = rows[sel]
        templates.append(RowTemplate(*key, count=int(sel.sum()),
                                     marginals=(t_rows == 1).mean(axis=0)))
    return ClassProfile(
        label=label,
        column_marginals=marginals,
        mask=derive_region_mask(flows, tau, rows=rows),
        inter_arrival_samples=deltas,
        tuple_samples=[f.five_tuple for f in flows],
        length_rows=[min(len(f), MAX_ROWS) for f in flows],
        protocol_mix=dict(mix),
        templates=templates,
    )


def _templates_by_kind(profile: ClassProfile) -> dict[str, tuple[list, np.ndarray]]:
    """Per transport: templates whose shape touches the allowed mask, with weights."""
    out: dict[str, tuple[list, list]] = {}
    for t in profile.templates:
        if not (t.columns() & profile.mask.allowed).any():
            continue
        ts, weights = out.setdefault(t.kind, ([], []))
        ts.append(t)
        weights.append(t.count)
    return {k: (ts, np.array(w, dtype=float) / sum(w)) for k, (ts, w) in out.items()}


def generate(profile: ClassProfile, seed: int) -> NprintMatrix:
    """Sample one matrix; deterministic in (profile, seed)."""
    children = np.random.SeedSequence(seed).spawn(1 + MAX_ROWS)
    top = np.random.default_rng(children[0])
    by_kind = _templates_by_kind(profile)
    kinds = [k for k in sorted(profile.protocol_mix) if k in by_kind]
    trits = np.full((MAX_ROWS, ROW_WIDTH), VACANT, dtype=np.int8)
    if not kinds:
        return NprintMatrix(trits, 0, profile.label)
    flow_w = np.array([profile.protocol_mix[k] for k in kinds], dtype=float)
    kind = kinds[top.choice(len(kinds), p=flow_w / flow_w.sum())]
    n_real = int(top.choice(np.asarray(profile.length_rows)))
    templates, weights = by_kind[kind]
    # a template's rare columns may fall outside the mask; those stay vacant
    shapes = [t.columns() & profile.mask.allowed for t in templates]
    fcols, fvals = profile.mask.frozen_arrays()
    for i in range(n_real):
        rng = np.random.default_rng(children[1 + i])
        j = rng.choice(len(templates), p=weights)
        bits = (rng.random(ROW_WIDTH) < templates[j].marginals).astype(np.int8)
        bits[fcols] = fvals
        trits[i] = np.where(shapes[j], bits, VACANT)
    return NprintMatrix(trits, n_real, profile.label)


def uniform_random_matrix(seed: int, n_rows: int = MAX_ROWS) -> NprintMatrix:
    """Baseline: every column of ``n_rows`` rows a fair random bit, nothing vacant."""
    if not 0 <= n_rows <= MAX_ROWS:
        raise ValueError(f"n_rows must lie in [0, {MAX_ROWS}]")
    rng = np.random.default_rng(seed)
    trits = np.full((MAX_ROWS, ROW_WIDTH), VACANT, dtype=np.int8)
    trits[:n_rows] = rng.integers(0, 2, size=(n_rows, ROW_WIDTH), dtype=np.int8)
    return NprintMatrix(trits, n_rows, "random")
