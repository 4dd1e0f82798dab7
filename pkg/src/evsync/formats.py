"""Event CSV files, sync report JSON and density tables.

Event files carry one header line followed by ``t_us,x,y,p`` rows::

    # evsync v1 width=346 height=260 label=left
    0,5,5,1
    1000,6,5,-1
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .density import DensityDistribution
from .errors import IoFailure, MalformedHeader, MalformedRow
from .estimator import OffsetEstimate
from .events import EventStream, SensorGeometry
from .synchronizer import SyncReport

FORMAT_VERSION = 1
_HEADER_RE = re.compile(
    r"^# evsync v(?P<version>\d+) width=(?P<width>\d+) height=(?P<height>\d+) label=(?P<label>.*)$"
)
_CHUNK = 200_000


@dataclass(frozen=True)
class EventFileHeader:
    format_version: int
    width: int
    height: int
    label: str

    def render(self) -> str:
        return (f"# evsync v{self.format_version} width={self.width} "
                f"height={self.height} label={self.label}")

    @classmethod
    def parse(cls, line: str) -> "EventFileHeader":
        m = _HEADER_RE.match(line.rstrip("\r\n"))
        if not m:
            raise MalformedHeader(f"not an evsync header: {line.rstrip()!r}")
        version = int(m["version"])
        if version != FORMAT_VERSION:
            raise MalformedHeader(f"unsupported format version {version}")
        return cls(version, int(m["width"]), int(m["height"]), m["label"])


def _parse_rows_slow(lines: Sequence[str], first_line_number: int) -> np.ndarray:
    rows = []
    for i, line in enumerate(lines):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split(",")
        if len(parts) != 4:
            raise MalformedRow(first_line_number + i, text, f"expected 4 fields, got {len(parts)}")
        try:
            rows.append([int(v) for v in parts])
        except ValueError:
            raise MalformedRow(first_line_number + i, text, "fields must be integers") from None
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def read_events_csv(path) -> EventStream:
    """Parse an evsync event file and validate it as a stream.

    Raises:
        MalformedHeader: missing or unsupported header line.
        MalformedRow: a data row that is not four integers (1-based line number).
        IoFailure: the file cannot be read.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    header_line, _, body = text.partition("\n")
    header = EventFileHeader.parse(header_line)
    data = None
    if body.strip():
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                data = np.loadtxt(body.splitlines(), delimiter=",", dtype=np.int64,
                                  comments="#", ndmin=2)
            if data.size and data.shape[1] != 4:
                data = None
        except ValueError:
            data = None
        if data is None:
            # slow path pinpoints the offending line
            data = _parse_rows_slow(body.splitlines(), first_line_number=2)
    else:
        data = np.empty((0, 4), dtype=np.int64)
    geometry = SensorGeometry(header.width, header.height)
    t, x, y, p = data.T
    return EventStream.from_arrays(t, x, y, p, geometry, header.label)


def write_events_csv(stream: EventStream, path) -> None:
    """Write ``stream`` in the evsync v1 format; reading it back is lossless."""
    if "\n" in stream.label or "\r" in stream.label:
        raise ValueError("stream label must be a single line")
    header = EventFileHeader(FORMAT_VERSION, stream.geometry.width,
                             stream.geometry.height, stream.label)
    path = Path(path)
    try:
        with path.open("w", newline="\n") as fh:
            fh.write(header.render() + "\n")
            cols = np.column_stack([stream.t, stream.x, stream.y, stream.p]).astype(np.int64)
            for start in range(0, len(cols), _CHUNK):
                chunk = cols[start:start + _CHUNK].tolist()
                fh.write("".join(f"{t},{x},{y},{p}\n" for t, x, y, p in chunk))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _finite_or_none(v: float):
    return None if v is None or not math.isfinite(v) else float(v)


def report_dict(report: SyncReport,
                estimates: Sequence[OffsetEstimate | None] | None = None) -> dict:
    if estimates is None:
        estimates = report.estimates
    if len(estimates) != len(report.entries):
        raise ValueError("need one estimate slot (or None) per report entry")
    entries = []
    for entry, est in zip(report.entries, estimates):
        bounds = None
        if est is not None:
            bounds = {"a_us": int(est.bounds.a), "b_us": int(est.bounds.b)}
        entries.append({
            "label": entry.label,
            "delta_us": int(entry.delta_vs_reference),
            "min_dissimilarity": _finite_or_none(entry.min_dissimilarity),
            "accepted": bool(entry.accepted),
            "windows_consumed": int(entry.windows_consumed),
            "bounds": bounds,
        })
    return {"reference": report.reference_label, "entries": entries}


def write_report_json(report: SyncReport,
                      estimates: Sequence[OffsetEstimate | None] | None,
                      path) -> None:
    """Stable-key JSON report; identical inputs give identical bytes."""
    text = json.dumps(report_dict(report, estimates), indent=2, ensure_ascii=True) + "\n"
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _format_ms(us: int) -> str:
    ms, rem = divmod(int(us), 1000)
    if rem == 0:
        return str(ms)
    return repr(us / 1000)


def export_density_table(dist: DensityDistribution, path) -> None:
    """Write ``t_ms,mass`` rows, one per bin (left edge in ms).

    An empty distribution (no events) produces only the header.
    """
    path = Path(path)
    lines = ["t_ms,mass"]
    if dist.total_events > 0:
        for t, m in zip(dist.bin_starts().tolist(), dist.bins.tolist()):
            lines.append(f"{_format_ms(t)},{m!r}")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
