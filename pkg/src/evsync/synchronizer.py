"""Rewrite several camera streams onto one reference timeline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EvsyncError, TooFewStreams
from .estimator import OffsetEstimate, SyncConfig, estimate_offset
from .events import EventStream

log = logging.getLogger(__name__)


def apply_offset(stream: EventStream, delta_t21: int) -> EventStream:
    """Map a camera-2 stream onto camera 1's clock: ``t -> t + delta_t21``.

    Events that would land before zero are dropped; how many is recorded in
    the returned stream's ``dropped`` field (added to any earlier drops).
    """
    delta_t21 = int(delta_t21)
    if delta_t21 == 0:
        return stream
    t = stream.t + delta_t21
    if delta_t21 > 0:
        return stream.with_timestamps(t, dropped=stream.dropped)
    keep = t >= 0
    lost = int(len(t) - np.count_nonzero(keep))
    return stream.with_timestamps(t[keep], keep=keep, dropped=stream.dropped + lost)


@dataclass(frozen=True)
class SyncEntry:
    label: str
    delta_vs_reference: int
    min_dissimilarity: float
    accepted: bool
    windows_consumed: int
    error: str | None = None


@dataclass
class SyncReport:
    reference_label: str
    entries: list[SyncEntry] = field(default_factory=list)
    # one per entry, None for the reference and for failed streams
    estimates: list[OffsetEstimate | None] = field(default_factory=list)

    @property
    def all_accepted(self) -> bool:
        return all(e.accepted for e in self.entries)


def synchronize(streams: Sequence[EventStream], reference_index: int = 0,
                cfg: SyncConfig | None = None) -> tuple[list[EventStream], SyncReport]:
    """Estimate every stream's offset against the reference and apply it.

    Streams whose estimate is not accepted (or whose estimation raised)
    are returned unchanged and flagged in the report; one failing stream
    does not abort the others. Output order matches input order.
    """
    cfg = cfg or SyncConfig()
    if len(streams) < 2:
        raise TooFewStreams(f"need at least 2 streams, got {len(streams)}")
    if not 0 <= reference_index < len(streams):
        raise IndexError(f"reference index {reference_index} out of range")
    ref = streams[reference_index]
    report = SyncReport(ref.label)
    out: list[EventStream] = []
    for i, s in enumerate(streams):
        if i == reference_index:
            out.append(s)
            report.entries.append(SyncEntry(s.label, 0, 0.0, True, 0))
            report.estimates.append(None)
            continue
        try:
            est = estimate_offset(ref, s, cfg)
        except EvsyncError as exc:
            log.warning("estimation failed for %s: %s", s.label, exc)
            out.append(s)
            report.entries.append(SyncEntry(s.label, 0, float("nan"), False, 0, str(exc)))
            report.estimates.append(None)
            continue
        log.info("%s: delta=%d us D=%.3g accepted=%s windows=%d", s.label,
                 est.delta_t21, est.min_dissimilarity, est.accepted, est.windows_consumed)
        out.append(apply_offset(s, est.delta_t21) if est.accepted else s)
        report.entries.append(SyncEntry(s.label, est.delta_t21, est.min_dissimilarity,
                                        est.accepted, est.windows_consumed))
        report.estimates.append(est)
    return out, report
