"""Command-line interface: ``evsync {sync,density,gen,bounds}``.

Exit codes: 0 success, 1 error, 2 some stream was not synchronized
(its offset estimate was rejected), 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .density import density_distribution, percentile_timestamp
from .errors import EvsyncError, InvalidConfig, InvalidDuration
from .estimator import (
    ANCHORS,
    SyncConfig,
    dissimilarity_curve,
    feasible_bounds,
    search_bounds,
    window_start,
)
from .events import SensorGeometry
from .formats import export_density_table, read_events_csv, write_events_csv, write_report_json
from .synchronizer import synchronize
from .synthgen import PROFILE_KINDS, GeneratorConfig, make_profile, sample_streams

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2
EXIT_USAGE = 64

log = logging.getLogger("evsync")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_sync_options(p):
    p.add_argument("--tau-us", type=int, default=1000, help="bin width in microseconds")
    p.add_argument("--window-s", type=float, default=10.0, help="analysis window length T")
    p.add_argument("--percentile", type=float, default=50.0)
    p.add_argument("--anchor", choices=ANCHORS, default="first-event",
                   help="first window starts at each stream's first event or at t=0")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evsync", description="Hardware-free event camera synchronization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("sync", help="estimate offsets and rewrite streams onto the first one's clock")
    p.add_argument("streams", nargs="+", metavar="CSV", help="reference stream, then the others")
    _add_sync_options(p)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--max-windows", type=int, default=6)
    p.add_argument("--min-overlap-bins", type=int, default=1000)
    p.add_argument("--min-overlap-mass", type=float, default=0.05,
                   help="fraction of each window's events a candidate overlap must hold")
    p.add_argument("--percentile-only", action="store_true",
                   help="search only the percentile-derived range")
    p.add_argument("--out-dir", type=Path, default=Path("."))
    p.add_argument("--report", type=Path)

    p = sub.add_parser("density", help="export a stream's normalized event density")
    p.add_argument("stream", metavar="CSV")
    p.add_argument("--tau-us", type=int, default=1000)
    p.add_argument("--window-s", type=float, help="first N seconds only (default: whole stream)")
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("gen", help="generate synthetic streams with known offsets")
    p.add_argument("--cameras", type=int, required=True)
    p.add_argument("--offsets-us", type=_int_list, required=True)
    p.add_argument("--duration-s", type=float, default=30.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0, help="relative count noise")
    p.add_argument("--jitter-us", type=float, default=0.0, help="timestamp jitter std dev")
    p.add_argument("--gains", type=_float_list)
    p.add_argument("--kind", choices=PROFILE_KINDS, default="random-walk")
    p.add_argument("--contrast", type=float, default=0.05, help="contrast threshold C")
    p.add_argument("--width", type=int, default=346)
    p.add_argument("--height", type=int, default=260)
    p.add_argument("--tau-us", type=int, default=1000)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("bounds", help="print percentile timestamps and the search range")
    p.add_argument("first", metavar="A.csv")
    p.add_argument("second", metavar="B.csv")
    _add_sync_options(p)
    p.add_argument("--fallback-us", type=int, default=500_000)
    p.add_argument("--min-overlap-bins", type=int, default=1000)
    p.add_argument("--curve", type=Path,
                   help="also write delta_ms,dissimilarity over every feasible shift")
    return parser


def _cmd_sync(args) -> int:
    if len(args.streams) < 2:
        raise UsageError("sync: need a reference stream and at least one other stream")
    try:
        cfg = SyncConfig(tau=args.tau_us, window_s=args.window_s, epsilon=args.epsilon,
                         percentile=args.percentile, max_windows=args.max_windows,
                         min_overlap_bins=args.min_overlap_bins,
                         min_overlap_mass=args.min_overlap_mass, anchor=args.anchor,
                         widen_search=not args.percentile_only)
    except InvalidConfig as exc:
        raise UsageError(f"sync: {exc}")
    streams = [read_events_csv(p) for p in args.streams]
    labels = [s.label for s in streams]
    if len(set(labels)) != len(labels):
        raise EvsyncError(f"stream labels must be unique, got {labels}")
    synced, report = synchronize(streams, 0, cfg)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for s, entry in zip(synced, report.entries):
        write_events_csv(s, args.out_dir / f"{s.label}.synced.csv")
        status = "accepted" if entry.accepted else "REJECTED"
        print(f"{entry.label}\tdelta_us={entry.delta_vs_reference}\t"
              f"D={entry.min_dissimilarity:.6g}\twindows={entry.windows_consumed}\t{status}")
    if args.report:
        write_report_json(report, report.estimates, args.report)
    return EXIT_OK if report.all_accepted else EXIT_REJECTED


def _cmd_density(args) -> int:
    stream = read_events_csv(args.stream)
    tau = args.tau_us
    if tau <= 0:
        raise UsageError("density: --tau-us must be positive")
    if len(stream) == 0:
        start, length = 0, tau
    else:
        start = int(stream.t[0]) // tau * tau
        if args.window_s is not None:
            length = int(round(args.window_s * 1e6))
        else:
            length = math.ceil((int(stream.t[-1]) + 1 - start) / tau) * tau
    dist = density_distribution(stream, start, length, tau)
    export_density_table(dist, args.output)
    print(f"{len(dist)} bins, {dist.total_events} events -> {args.output}")
    return EXIT_OK


def _cmd_gen(args) -> int:
    if args.cameras < 1:
        raise UsageError("gen: --cameras must be at least 1")
    if len(args.offsets_us) != args.cameras:
        raise UsageError(f"gen: {args.cameras} cameras but {len(args.offsets_us)} offsets")
    if args.gains is not None and len(args.gains) != args.cameras:
        raise UsageError(f"gen: {args.cameras} cameras but {len(args.gains)} gains")
    duration = int(round(args.duration_s * 1e6))
    try:
        cfg = GeneratorConfig(
            offsets=tuple(args.offsets_us), contrast_threshold_C=args.contrast,
            geometry=SensorGeometry(args.width, args.height), count_noise=args.noise,
            timestamp_jitter=args.jitter_us,
            gains=tuple(args.gains) if args.gains else None,
        )
    except (InvalidConfig, ValueError) as exc:
        raise UsageError(f"gen: {exc}")
    try:
        profile = make_profile(args.seed, duration, args.tau_us, args.kind)
    except InvalidDuration as exc:
        raise UsageError(f"gen: {exc}")
    streams = sample_streams(profile, cfg)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for s in streams:
        write_events_csv(s, args.out_dir / f"{s.label}.csv")
    truth = {
        "seed": args.seed,
        "kind": args.kind,
        "duration_us": duration,
        "tau_us": args.tau_us,
        "labels": [s.label for s in streams],
        "offsets_us": list(cfg.offsets),
        "delta_vs_first_us": cfg.true_deltas(0),
        "events": [len(s) for s in streams],
    }
    (args.out_dir / "ground_truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    print(f"wrote {len(streams)} streams to {args.out_dir}")
    return EXIT_OK


def _cmd_bounds(args) -> int:
    a = read_events_csv(args.first)
    b = read_events_csv(args.second)
    try:
        cfg = SyncConfig(tau=args.tau_us, window_s=args.window_s, percentile=args.percentile,
                         min_overlap_bins=args.min_overlap_bins, anchor=args.anchor)
    except InvalidConfig as exc:
        raise UsageError(f"bounds: {exc}")
    if len(a) == 0 or len(b) == 0:
        raise EvsyncError("bounds: both streams need events")
    tau, T = cfg.tau, cfg.window_us
    m1 = density_distribution(a, window_start(a, cfg), T, tau)
    m2 = density_distribution(b, window_start(b, cfg), T, tau)
    q1 = percentile_timestamp(m1, cfg.percentile)
    q2 = percentile_timestamp(m2, cfg.percentile)
    sb = search_bounds(m1, m2, cfg.percentile, args.fallback_us)
    print(f"Q1_us={q1}\nQ2_us={q2}\na_us={sb.a}\nb_us={sb.b}")
    if args.curve:
        deltas, scores = dissimilarity_curve(m1, m2, feasible_bounds(m1, m2, cfg.min_overlap_bins), cfg)
        rows = ["delta_ms,dissimilarity"]
        rows += [f"{d / 1000:g},{s!r}" for d, s in zip(deltas.tolist(), scores.tolist())
                 if s == s]
        args.curve.write_text("\n".join(rows) + "\n")
    return EXIT_OK


_COMMANDS = {"sync": _cmd_sync, "density": _cmd_density, "gen": _cmd_gen, "bounds": _cmd_bounds}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("evsync: a subcommand is required (sync, density, gen, bounds)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (EvsyncError, OSError) as exc:
        print(f"evsync: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
