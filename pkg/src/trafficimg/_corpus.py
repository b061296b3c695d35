"""Simulated captures used as the labelled fixture corpus.

Three traffic classes with realistic header behaviour:

* ``streaming``    - HTTPS bulk download over TCP (handshake, TS options,
                     delayed ACKs, optional FIN teardown)
* ``conferencing`` - bidirectional media over UDP
* ``diagnostics``  - ICMP echo request/reply

plus ``reference_flow``, a 1024-packet mid-stream TCP capture whose aggregate
statistics are pinned to a fixed reference tally.
"""
from __future__ import annotations

import numpy as np

from . import craft
from .packet import FlowTrace, ip_str

CLASSES = ("streaming", "conferencing", "diagnostics")

# Captures come from a handful of lab devices talking to a service's
# server pool, as in per-application collections.
_CLIENTS = ("192.168.43.37", "192.168.43.12", "192.168.43.101", "192.168.1.20")
_SERVER_POOLS = {
    "streaming": (0x36B6C700, 0x36B6C800),      # 54.182.199.0/24, 54.182.200.0/24
    "conferencing": (0x0D6B4000, 0x0D6B4100),   # 13.107.64.0/24, 13.107.65.0/24
    "diagnostics": (0x08080800, 0x01010100),    # 8.8.8.0/24, 1.1.1.0/24
}


def _client_ip(rng) -> str:
    return _CLIENTS[int(rng.integers(len(_CLIENTS)))]


def _server_ip(rng, label: str) -> str:
    pool = _SERVER_POOLS[label]
    return ip_str(pool[int(rng.integers(len(pool)))] | int(rng.integers(1, 17)) * 8)


def _clock(rng, mean_us: float):
    t = 0

    def tick(scale: float = 1.0) -> int:
        nonlocal t
        t += 1 + int(rng.exponential(mean_us * scale))   # capture clocks never repeat a stamp
        return t

    return tick


def streaming_flow(rng: np.random.Generator) -> FlowTrace:
    c, s = _client_ip(rng), _server_ip(rng, "streaming")
    cp, sp = int(rng.integers(32768, 61000)), 443
    c_ttl, s_ttl = 64, int(rng.integers(48, 60))
    seq = {"c": int(rng.integers(2**32)), "s": int(rng.integers(2**32))}
    ipid = {"c": int(rng.integers(2**16)), "s": int(rng.integers(2**16))}
    tsv = {"c": int(rng.integers(2**31)), "s": int(rng.integers(2**31))}
    tick = _clock(rng, 400.0)
    pkts = []

    def send(side, flags, payload=0, options=None, syn=False):
        src, dst, spt, dpt, ttl = (c, s, cp, sp, c_ttl) if side == "c" else (s, c, sp, cp, s_ttl)
        other = "s" if side == "c" else "c"
        tsv[side] += int(rng.integers(0, 3))
        if options is None:
            options = craft.data_options(tsv[side], tsv[other])
        ack = seq[other] if "A" in flags else 0
        window = int(rng.integers(1000, 3000)) if side == "c" else int(rng.integers(400, 600))
        if syn:
            window = 64240 if side == "c" else 65160
        pkts.append(craft.tcp(src, dst, spt, dpt, seq=seq[side], ack=ack, flags=flags,
                              window=window, options=options, payload_len=payload,
                              ts=tick(30 if syn else 1), ttl=ttl, ip_id=ipid[side]))
        ipid[side] = (ipid[side] + 1) & 0xFFFF
        seq[side] = (seq[side] + payload + ("S" in flags) + ("F" in flags)) & 0xFFFFFFFF

    send("c", "S", options=craft.syn_options(tsv["c"]), syn=True)
    send("s", "SA", options=craft.syn_options(tsv["s"], tsv["c"]), syn=True)
    send("c", "A")
    n_target = int(rng.integers(100, 400))
    while len(pkts) < n_target:
        send("c", "PA", payload=int(rng.integers(300, 700)))
        for k in range(int(rng.integers(4, 40))):
            send("s", "A" if k % 5 else "PA", payload=1448 if rng.random() < 0.9 else int(rng.integers(100, 1448)))
            if k % 2:
                send("c", "A")
    if rng.random() < 0.5:
        send("s", "FA")
        send("c", "FA")
        send("s", "A")
    return FlowTrace.from_packets(pkts, "streaming")


def conferencing_flow(rng: np.random.Generator) -> FlowTrace:
    c, s = _client_ip(rng), _server_ip(rng, "conferencing")
    cp, sp = int(rng.integers(49152, 65535)), int(rng.choice([3478, 8801, 19305]))
    c_ttl, s_ttl = 64, int(rng.integers(44, 58))
    ipid = {"c": int(rng.integers(2**16)), "s": int(rng.integers(2**16))}
    tick = _clock(rng, 9000.0)
    pkts = []
    for _ in range(int(rng.integers(80, 300))):
        side = "c" if rng.random() < 0.45 else "s"
        size = int(rng.integers(120, 260)) if rng.random() < 0.6 else int(rng.integers(900, 1200))
        if side == "c":
            p = craft.udp(c, s, cp, sp, payload_len=size, ts=tick(), ttl=c_ttl, ip_id=ipid["c"])
        else:
            p = craft.udp(s, c, sp, cp, payload_len=size, ts=tick(), ttl=s_ttl, ip_id=ipid["s"])
        ipid[side] = (ipid[side] + 1) & 0xFFFF
        pkts.append(p)
    return FlowTrace.from_packets(pkts, "conferencing")


def diagnostics_flow(rng: np.random.Generator) -> FlowTrace:
    c, s = _client_ip(rng), _server_ip(rng, "diagnostics")
    s_ttl = int(rng.integers(40, 60))
    ident = int(rng.integers(2**16))
    ipid = int(rng.integers(2**16))
    tick = _clock(rng, 250_000.0)
    pkts = []
    for n in range(int(rng.integers(10, 60))):
        t = max(tick(), pkts[-1].timestamp_us + 1000 if pkts else 0)
        pkts.append(craft.icmp(c, s, icmp_type=8, ident=ident, seqno=n + 1, ts=t, ip_id=ipid + n & 0xFFFF))
        pkts.append(craft.icmp(s, c, icmp_type=0, ident=ident, seqno=n + 1,
                               ts=t + int(rng.integers(8000, 30000)), ttl=s_ttl))
    return FlowTrace.from_packets(pkts, "diagnostics")


_BUILDERS = {"streaming": streaming_flow, "conferencing": conferencing_flow,
             "diagnostics": diagnostics_flow}


def class_flows(label: str, n: int, seed: int = 0) -> list[FlowTrace]:
    rng = np.random.default_rng([seed, CLASSES.index(label)])
    return [_BUILDERS[label](rng) for _ in range(n)]


def corpus(n_per_class: int = 50, seed: int = 0) -> dict[str, list[FlowTrace]]:
    return {label: class_flows(label, n_per_class, seed) for label in CLASSES}


# --- reference-tally fixture --------------------------------------------------

REFERENCE_TALLY = dict(
    packet_count=1024,
    byte_count=1100406,
    avg_tcp_window=32739.95,
    duration_us=602296,
    client=("192.168.43.37", 46508, 303),
    server=("54.182.199.148", 443, 721),
    ack=1023,
    urg=16,
    size_bins={"0-499": 306, "500-999": 6, "1000-1499": 6, "1500-1999": 706, "2000+": 0},
    avg_ttl=186.51,
)


def reference_flow() -> FlowTrace:
    """1024-packet HTTPS download captured mid-stream.

    Built so its tallies equal the reference values: 303
    client / 721 server packets, ACK on all but the first, 16 URG,
    1,100,406 bytes, mean window 32739.95, mean TTL 186.51 (64 and 238),
    duration 602,296 us.
    """
    rng = np.random.default_rng(8)
    (c, cp, n_c), (s, sp, n_s) = REFERENCE_TALLY["client"], REFERENCE_TALLY["server"]
    n = n_c + n_s
    # direction pattern: client first, then roughly 5 server segments per 2 client ACKs
    sides = ["c"] + sorted(["c"] * (n_c - 1) + ["s"] * n_s, key=lambda _: rng.random())
    # sizes: 706 x 1500, 6 x 1200, 6 x 700 (server); 306 small, 40 of which carry data
    sizes = {}
    server_idx = [i for i, d in enumerate(sides) if d == "s"]
    client_idx = [i for i, d in enumerate(sides) if d == "c"]
    for j, i in enumerate(server_idx):
        sizes[i] = 1500 if j < 706 else 1200 if j < 712 else 700 if j < 718 else 52
    for i in client_idx:
        sizes[i] = 52
    small = [i for i in range(n) if sizes[i] == 52][:40]
    for k, i in enumerate(small):
        sizes[i] += 350 if k < 39 else 444
    assert sum(sizes.values()) == REFERENCE_TALLY["byte_count"]

    windows = np.where(np.array(sides) == "c", rng.integers(20000, 45000, n),
                       rng.integers(25000, 40000, n))
    target = 33525709  # 32739.95 * 1024 rounded to an integer sum
    diff = target - int(windows.sum())
    windows += diff // n
    windows[: diff % n] += 1
    assert windows.sum() == target and windows.min() >= 0 and windows.max() <= 65535

    urg = set(server_idx[100:100 + 15]) | {0}
    times = np.sort(rng.integers(0, REFERENCE_TALLY["duration_us"], n))
    times[0], times[-1] = 0, REFERENCE_TALLY["duration_us"]

    seq = {"c": 0x1A2B3C4D, "s": 0x99887766}
    ipid = {"c": 0x4000, "s": 0x1200}
    pkts = []
    for i, side in enumerate(sides):
        other = "s" if side == "c" else "c"
        payload = sizes[i] - 52
        flags = "A"
        if i in urg:
            flags = "U" if i == 0 else "UA"
        src, dst, spt, dpt, ttl = (c, s, cp, sp, 64) if side == "c" else (s, c, sp, cp, 238)
        pkts.append(craft.tcp(src, dst, spt, dpt, seq=seq[side],
                              ack=seq[other] if "A" in flags else 0, flags=flags,
                              window=int(windows[i]), urg=1 if "U" in flags and payload else 0,
                              options=craft.data_options(1000 + i, 2000 + i), payload_len=payload,
                              ts=int(times[i]), ttl=ttl, ip_id=ipid[side]))
        seq[side] = (seq[side] + payload) & 0xFFFFFFFF
        ipid[side] += 1
    return FlowTrace.from_packets(pkts, "amazon")
