"""Packet flows as tri-valued header-bit matrices and lossless images.

Core pieces: ``pcap_io`` (capture files), ``nprint`` (flow <-> matrix),
``image`` (matrix <-> PNG), ``generator`` (class profiles and sampling),
``repair`` and ``compliance`` (protocol fixes and checks), ``metrics``
(distribution distances) and ``report`` (traffic-analysis tallies).
"""

__version__ = "0.1.0"

from .compliance import ComplianceReport, Violation, validate
from .generator import ClassProfile, RegionMask, build_class_profile, derive_region_mask, generate
from .image import image_to_matrix, matrix_to_image
from .metrics import FieldDistribution, SimilarityReport, compare, field_distribution, hellinger, jsd, tvd
from .nprint import NprintMatrix, decode_flow, decode_packet, encode_flow, encode_packet
from .packet import FlowTrace, Packet, TransportKind
from .pcap_io import read_pcap, split_flows, write_pcap
from .repair import RepairResult
from .report import TrafficReport
