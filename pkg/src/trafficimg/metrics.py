"""Distributional similarity between real and synthetic traffic.

Two feature universes are supported:

``field``  every header field is a categorical variable over its decoded
           integer value (option fields: over the whole option trit
           pattern); packets lacking the field's protocol are skipped.
``bit``    every one of the 1088 columns is a categorical variable over
           {-1, 0, 1}.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from . import layout
from .layout import ROW_WIDTH, VACANT
from .nprint import NprintMatrix, encode_packet
from .packet import FlowTrace, TransportKind

MODES = ("field", "bit")
PROTOCOL_FIELD = "ipv4_proto"

Traffic = Union[FlowTrace, NprintMatrix]


@dataclass(frozen=True)
class FieldDistribution:
    field: str
    probs: dict
    count: int

    def __post_init__(self):
        if self.probs:
            total = sum(self.probs.values())
            if abs(total - 1.0) > 1e-9 or min(self.probs.values()) < 0:
                raise ValueError(f"{self.field}: not a probability distribution (sum {total})")

    @classmethod
    def from_values(cls, name: str, values: Sequence) -> "FieldDistribution":
        if len(values) == 0:
            return cls(name, {}, 0)
        uniq, counts = np.unique(np.asarray(values), return_counts=True)
        n = int(counts.sum())
        return cls(name, {_plain(u): c / n for u, c in zip(uniq, counts)}, n)


def _plain(v):
    return v.item() if hasattr(v, "item") else v


def _rows(items: Iterable[Traffic]) -> np.ndarray:
    chunks = []
    for it in items:
        if isinstance(it, NprintMatrix):
            chunks.append(it.rows)
        else:
            chunks.extend(encode_packet(p)[None, :] for p in it.packets
                          if p.transport_kind is not TransportKind.OTHER)
    if not chunks:
        return np.empty((0, ROW_WIDTH), dtype=np.int8)
    return np.concatenate(chunks).astype(np.int8)


def field_values(rows: np.ndarray, name: str) -> np.ndarray:
    """Decoded values of ``name`` in every row that carries it."""
    try:
        f = layout.FIELDS[name]
    except KeyError:
        raise KeyError(f"unknown field id {name!r}") from None
    seg = rows[:, f.columns]
    if f.is_options:
        present = rows[:, f.region.start] != VACANT
        return np.array([s.tobytes() for s in seg[present]], dtype=object)
    present = (seg != VACANT).all(axis=1)
    weights = (1 << np.arange(f.width - 1, -1, -1, dtype=np.int64))
    return seg[present].astype(np.int64) @ weights


def field_distribution(items: Iterable[Traffic], name: str) -> FieldDistribution:
    items = list(items)
    if not items:
        raise ValueError("need at least one flow")
    return FieldDistribution.from_values(name, field_values(_rows(items), name))


def column_distribution(rows: np.ndarray, col: int) -> FieldDistribution:
    return FieldDistribution.from_values(layout.column_names()[col], rows[:, col])


def _aligned(p: FieldDistribution, q: FieldDistribution) -> tuple[np.ndarray, np.ndarray]:
    if p.field != q.field:
        raise ValueError(f"field mismatch: {p.field} vs {q.field}")
    keys = list(p.probs.keys() | q.probs.keys())
    return (np.array([p.probs.get(k, 0.0) for k in keys]),
            np.array([q.probs.get(k, 0.0) for k in keys]))


def _clip(x: float) -> float:
    return min(1.0, max(0.0, float(x)))


def jsd(p: FieldDistribution, q: FieldDistribution) -> float:
    """Jensen-Shannon divergence with log base 2, so it lies in [0, 1]."""
    a, b = _aligned(p, q)
    s = a + b           # x / ((a + b) / 2) written as 2x / s: no underflow for tiny x

    def kl(x):
        nz = x > 0
        return float((x[nz] * np.log2(2 * x[nz] / s[nz])).sum())

    return _clip(0.5 * kl(a) + 0.5 * kl(b))


def tvd(p: FieldDistribution, q: FieldDistribution) -> float:
    a, b = _aligned(p, q)
    return _clip(0.5 * np.abs(a - b).sum())


def hellinger(p: FieldDistribution, q: FieldDistribution) -> float:
    a, b = _aligned(p, q)
    return _clip(math.sqrt(((np.sqrt(a) - np.sqrt(b)) ** 2).sum()) / math.sqrt(2))


def _score(p: FieldDistribution, q: FieldDistribution) -> tuple[float, float, float]:
    if not p.probs and not q.probs:
        raise ValueError("both distributions empty")
    if not p.probs or not q.probs:
        return 1.0, 1.0, 1.0   # only one side has the feature at all
    return jsd(p, q), tvd(p, q), hellinger(p, q)


@dataclass
class SimilarityReport:
    mode: str
    per_feature: dict[str, tuple[float, float, float]]
    protocol: tuple[float, float, float]
    n_real_rows: int = 0
    n_synth_rows: int = 0

    @property
    def averages(self) -> tuple[float, float, float]:
        scores = np.array(list(self.per_feature.values()))
        if scores.size == 0:
            return 0.0, 0.0, 0.0
        return tuple(float(x) for x in scores.mean(axis=0))

    def to_dict(self) -> dict:
        avg = self.averages
        return {
            "mode": self.mode,
            "real_rows": self.n_real_rows,
            "synthetic_rows": self.n_synth_rows,
            "all_features": {"jsd": avg[0], "tvd": avg[1], "hd": avg[2],
                             "feature_count": len(self.per_feature)},
            "protocol": dict(zip(("jsd", "tvd", "hd"), self.protocol)),
            "per_feature": {k: dict(zip(("jsd", "tvd", "hd"), v))
                            for k, v in self.per_feature.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_text(self, name: str = "synthetic") -> str:
        avg, pr = self.averages, self.protocol
        head = (f"{'Generation':<14}{'All features (' + self.mode + ')':^30}"
                f"{'Protocol':^30}")
        sub = f"{'':<14}" + "".join(f"{h:>10}" for h in ("Avg. JSD", "Avg. TVD", "Avg. HD") * 2)
        row = f"{name:<14}" + "".join(f"{v:>10.2f}" for v in (*avg, *pr))
        return "\n".join([head, sub, row])


def compare(real: Iterable[Traffic], synth: Iterable[Traffic], mode: str = "field") -> SimilarityReport:
    """Score every feature of ``mode`` plus the IPv4 protocol field."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    real_rows, synth_rows = _rows(real), _rows(synth)
    if len(real_rows) == 0 or len(synth_rows) == 0:
        raise ValueError("both traffic sets must contain packets")
    per: dict[str, tuple[float, float, float]] = {}
    if mode == "field":
        for name in layout.FIELDS:
            p = FieldDistribution.from_values(name, field_values(real_rows, name))
            q = FieldDistribution.from_values(name, field_values(synth_rows, name))
            if p.probs or q.probs:
                per[name] = _score(p, q)
    else:
        names = layout.column_names()
        for col in range(ROW_WIDTH):
            p = FieldDistribution.from_values(names[col], real_rows[:, col])
            q = FieldDistribution.from_values(names[col], synth_rows[:, col])
            per[names[col]] = _score(p, q)
    proto = _score(
        FieldDistribution.from_values(PROTOCOL_FIELD, field_values(real_rows, PROTOCOL_FIELD)),
        FieldDistribution.from_values(PROTOCOL_FIELD, field_values(synth_rows, PROTOCOL_FIELD)))
    return SimilarityReport(mode, per, proto, len(real_rows), len(synth_rows))
