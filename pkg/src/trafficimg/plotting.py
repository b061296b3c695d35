"""Matplotlib figures for reports and similarity scores, written to files."""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import SimilarityReport  # noqa: E402
from .pcap_io import atomic_write  # noqa: E402
from .report import FLAGS, TrafficReport  # noqa: E402


def _save(fig, path) -> None:
    buf = io.BytesIO()
    # no Software/date metadata so reruns are byte-identical
    fig.savefig(buf, format="png", dpi=100, metadata={"Software": None})
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def plot_reports(reports: dict[str, TrafficReport], path) -> None:
    """Packet-size histogram and TCP flag counts, one bar group per report."""
    fig, (ax_size, ax_flags) = plt.subplots(1, 2, figsize=(11, 4))
    names = list(reports)
    width = 0.8 / max(len(names), 1)
    for k, name in enumerate(names):
        r = reports[name]
        bins = list(r.packet_size_distribution)
        x = np.arange(len(bins))
        ax_size.bar(x + k * width, [r.packet_size_distribution[b] for b in bins], width, label=name)
        ax_size.set_xticks(x + width * (len(names) - 1) / 2, bins)
        x = np.arange(len(FLAGS))
        ax_flags.bar(x + k * width, [r.flags_distribution[f] for f in FLAGS], width, label=name)
        ax_flags.set_xticks(x + width * (len(names) - 1) / 2, FLAGS)
    ax_size.set_title("Packet size (bytes)")
    ax_size.set_ylabel("packets")
    ax_flags.set_title("TCP flags")
    ax_flags.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_similarity(rep: SimilarityReport, path) -> None:
    """Per-feature JSD, TVD and HD."""
    names = list(rep.per_feature)
    scores = np.array([rep.per_feature[n] for n in names]).reshape(-1, 3)
    if rep.mode == "bit":
        fig, ax = plt.subplots(figsize=(12, 4))
        for j, label in enumerate(("JSD", "TVD", "HD")):
            ax.plot(scores[:, j], lw=0.7, label=label)
        ax.set_xlabel("column")
    else:
        fig, ax = plt.subplots(figsize=(12, 5))
        x = np.arange(len(names))
        for j, label in enumerate(("JSD", "TVD", "HD")):
            ax.bar(x + (j - 1) * 0.27, scores[:, j], 0.27, label=label)
        ax.set_xticks(x, names, rotation=90, fontsize=7)
    ax.set_ylim(0, 1.02)
    ax.set_ylabel("distance")
    ax.set_title(f"Real vs synthetic ({rep.mode} features)")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
