"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or invalid
input, or a flow that fails validation). Errors go to stderr as one JSON
object. ``TRAFFICIMG_SEED``, ``TRAFFICIMG_PROFILE`` and ``TRAFFICIMG_OUT_DIR``
supply defaults for ``--seed``, ``--profile`` and ``--out-dir``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .compliance import validate
from .generator import DEFAULT_TAU, ClassProfile, build_class_profile, generate
from .image import image_to_matrix, matrix_to_image
from .metrics import MODES, compare
from .nprint import NprintMatrix, decode_flow, encode_flow
from .pcap_io import atomic_write, read_pcap, split_flows, write_pcap
from .repair import DEFAULT_FRACTION_BOUND, repair
from .report import render_table, report

USAGE, DATA = 1, 2

# output-file arguments per subcommand; their parent directories are created
_OUTPUTS = {"encode": ("image",), "decode": ("pcap",), "profile": ("out",),
            "repair": ("pcap", "report"), "compare": ("out",), "report": ("out",),
            "validate": ("out",)}


class DataError(Exception):
    def __init__(self, message: str, path=None):
        super().__init__(message)
        self.path = None if path is None else str(path)


@dataclass
class PipelineConfig:
    seed: int = 0
    label: Optional[str] = None
    tau: float = DEFAULT_TAU
    fraction_bound: float = DEFAULT_FRACTION_BOUND
    mode: str = "field"
    strict_image: bool = True
    paths: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args) -> "PipelineConfig":
        paths = {k: str(v) for k, v in vars(args).items()
                 if isinstance(v, (str, Path)) and k not in ("command", "label", "mode")}
        return cls(seed=getattr(args, "seed", 0), label=getattr(args, "label", None),
                   tau=getattr(args, "tau", DEFAULT_TAU),
                   fraction_bound=getattr(args, "bound", DEFAULT_FRACTION_BOUND),
                   mode=getattr(args, "mode", "field"),
                   strict_image=not getattr(args, "lenient", False), paths=paths)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("usage", message)
        sys.exit(USAGE)


def _emit_error(kind: str, message: str, path=None) -> None:
    doc = {"error": kind, "message": message}
    if path is not None:
        doc["file"] = str(path)
    print(json.dumps(doc), file=sys.stderr)


def _write_json(path, doc) -> None:
    atomic_write(path, (json.dumps(doc, indent=1) + "\n").encode())


def _load(path, fn, *args):
    """Run a loader, attaching the file name to any data error."""
    try:
        return fn(path, *args)
    except FileNotFoundError:
        raise DataError("file not found", path) from None
    except (ValueError, OSError) as exc:
        raise DataError(f"{type(exc).__name__}: {exc}", path) from exc


def _flows_from_pcap(path, label=None):
    flows = split_flows(_load(path, read_pcap), label)
    if not flows:
        raise DataError("no packets", path)
    return flows


def _traffic_dir(path, strict=True) -> list:
    """Flows from every pcap and matrices from every image in a directory."""
    path = Path(path)
    if not path.is_dir():
        raise DataError("not a directory", path)
    items = []
    for p in sorted(path.iterdir()):
        if p.suffix == ".pcap":
            items.extend(_flows_from_pcap(p))
        elif p.suffix.lower() in (".png", ".bmp", ".ppm", ".tif", ".tiff"):
            items.append(_load(p, image_to_matrix, strict))
    if not items:
        raise DataError("no .pcap or image files", path)
    return items


def cmd_encode(args) -> int:
    flows = _flows_from_pcap(args.pcap, args.label)
    if not 0 <= args.flow < len(flows):
        raise DataError(f"flow index {args.flow} out of range ({len(flows)} flows)", args.pcap)
    matrix_to_image(encode_flow(flows[args.flow]), args.image)
    return 0


def cmd_decode(args) -> int:
    m = _load(args.image, image_to_matrix, not args.lenient)
    try:
        flow = decode_flow(m)
    except ValueError as exc:
        raise DataError(str(exc), args.image) from exc
    write_pcap(flow.packets, args.pcap)
    return 0


def cmd_profile(args) -> int:
    src = Path(args.pcap_dir)
    files = sorted(src.glob("*.pcap")) if src.is_dir() else []
    if not files:
        raise DataError("no .pcap files", src)
    flows = [f for p in files for f in _flows_from_pcap(p, args.label)]
    try:
        prof = build_class_profile(flows, args.label, args.tau)
    except ValueError as exc:
        raise DataError(str(exc), src) from exc
    prof.save(args.out)
    return 0


def _profile(path) -> ClassProfile:
    if path is None:
        raise DataError("no profile given (--profile or TRAFFICIMG_PROFILE)")
    return _load(path, ClassProfile.load)


def cmd_generate(args) -> int:
    prof = _profile(args.profile)
    if args.count < 0:
        raise DataError("--count must be non-negative")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        matrix_to_image(generate(prof, args.seed + k), out / f"{prof.label}_{args.seed + k:06d}.png")
    return 0


def cmd_repair(args) -> int:
    prof = _profile(args.profile)
    m = _load(args.image, image_to_matrix, not args.lenient)
    res = repair(m, prof, seed=args.seed)
    doc = res.report.to_dict()
    doc["fraction_bound"] = args.bound
    doc["within_bound"] = res.report.repaired_fraction <= args.bound
    doc["config"] = asdict(PipelineConfig.from_args(args))
    if res.flow is not None:
        write_pcap(res.flow.packets, args.pcap)
    _write_json(args.report, doc)
    if not res.report.compliant:
        raise DataError(f"{len(res.report.violations)} violations remain after repair", args.image)
    return 0


def cmd_compare(args) -> int:
    real = _traffic_dir(args.real_dir, not args.lenient)
    synth = _traffic_dir(args.synth_dir, not args.lenient)
    try:
        rep = compare(real, synth, args.mode)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    _write_json(args.out, rep.to_dict())
    print(rep.to_text(Path(args.synth_dir).name))
    if not args.no_figure:
        from .plotting import plot_similarity
        plot_similarity(rep, Path(args.out).with_suffix(".png"))
    return 0


def cmd_report(args) -> int:
    reports = {Path(args.pcap).stem: report(_load(args.pcap, read_pcap, True))}
    if args.against:
        reports[Path(args.against).stem] = report(_load(args.against, read_pcap, True))
    if len(reports) < (2 if args.against else 1):
        raise DataError("both inputs have the same name; rename one")
    _write_json(args.out, {k: r.to_dict() for k, r in reports.items()})
    print(render_table(reports))
    if not args.no_figure:
        from .plotting import plot_reports
        plot_reports(reports, Path(args.out).with_suffix(".png"))
    return 0


def cmd_validate(args) -> int:
    flows = _flows_from_pcap(args.pcap)
    results = [validate(f).to_dict() | {"five_tuple": list(f.five_tuple)} for f in flows]
    bad = sum(r["violation_count"] for r in results)
    _write_json(args.out, {"flows": results, "violation_count": bad, "compliant": bad == 0})
    if bad:
        raise DataError(f"{bad} violations", args.pcap)
    return 0


def build_parser() -> argparse.ArgumentParser:
    env = os.environ
    seed_default = int(env.get("TRAFFICIMG_SEED", "0"))
    ap = _Parser(prog="trafficimg", description="Traffic flows as images: encode, generate, repair, score.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def lenient(p):
        p.add_argument("--lenient", action="store_true",
                       help="also accept lossy image formats such as JPEG")

    p = sub.add_parser("encode", help="pcap flow -> PNG")
    p.add_argument("--pcap", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--flow", type=int, default=0, help="which flow of the capture (default 0)")
    p.add_argument("--label")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="PNG -> pcap")
    p.add_argument("--image", required=True)
    p.add_argument("--pcap", required=True)
    lenient(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("profile", help="directory of pcaps -> class profile")
    p.add_argument("--pcap-dir", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("generate", help="profile -> synthetic PNGs")
    p.add_argument("--profile", default=env.get("TRAFFICIMG_PROFILE"))
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out-dir", default=env.get("TRAFFICIMG_OUT_DIR"), required="TRAFFICIMG_OUT_DIR" not in env)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("repair", help="generated PNG -> compliant pcap + report")
    p.add_argument("--image", required=True)
    p.add_argument("--profile", default=env.get("TRAFFICIMG_PROFILE"))
    p.add_argument("--pcap", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--bound", type=float, default=DEFAULT_FRACTION_BOUND,
                   help="repaired-fraction bound recorded in the report")
    lenient(p)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("compare", help="real dir vs synthetic dir similarity")
    p.add_argument("--real-dir", required=True)
    p.add_argument("--synth-dir", required=True)
    p.add_argument("--out", required=True, help="JSON output; the figure goes next to it as .png")
    p.add_argument("--mode", choices=MODES, default="field")
    p.add_argument("--no-figure", action="store_true")
    lenient(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="traffic-analysis metrics of a pcap")
    p.add_argument("--pcap", required=True)
    p.add_argument("--against", help="second pcap shown side by side")
    p.add_argument("--out", required=True, help="JSON output; the figure goes next to it as .png")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="protocol compliance of every flow in a pcap")
    p.add_argument("--pcap", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ValueError as exc:        # bad TRAFFICIMG_SEED
        _emit_error("usage", str(exc))
        return USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        for name in _OUTPUTS.get(args.command, ()):
            Path(getattr(args, name)).parent.mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except DataError as exc:
        _emit_error("data", str(exc), exc.path)
        return DATA
    except (ValueError, OSError) as exc:
        _emit_error("data", f"{type(exc).__name__}: {exc}")
        return DATA


if __name__ == "__main__":
    sys.exit(main())
