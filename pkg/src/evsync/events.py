"""Event, sensor geometry and validated per-camera event streams.

Streams are stored column-wise (numpy arrays) so that million-event
recordings can be binned and shifted without Python-level loops. The
arrays are marked read-only on construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import (
    EmptyStream,
    InvalidEvent,
    OutOfBoundsPixel,
    OutOfOrderTimestamps,
)


class Event(NamedTuple):
    """One camera event. ``t`` is in microseconds since the camera's own start."""

    x: int
    y: int
    t: int
    p: int


@dataclass(frozen=True)
class SensorGeometry:
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError(
                f"sensor geometry must be at least 1x1, got {self.width}x{self.height}"
            )

    @property
    def pixel_count(self) -> int:
        return self.width * self.height


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-ordered events from one camera.

    Do not build directly; use :func:`build_stream` or
    :meth:`EventStream.from_arrays`, which validate ordering and bounds.

    ``dropped`` counts events discarded by a timestamp shift that would
    have produced negative times (see :func:`evsync.synchronizer.apply_offset`).
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    geometry: SensorGeometry
    label: str
    dropped: int = field(default=0)

    @classmethod
    def from_arrays(
        cls,
        t,
        x,
        y,
        p,
        geometry: SensorGeometry,
        label: str,
        dropped: int = 0,
    ) -> "EventStream":
        t, x, y, p = (np.asarray(c, dtype=np.int64).reshape(-1) for c in (t, x, y, p))
        n = len(t)
        if not (len(x) == len(y) == len(p) == n):
            raise ValueError("event columns differ in length")
        _validate(t, x, y, p, geometry)
        return cls(
            _readonly(t.copy()),
            _readonly(x.astype(np.int32)),
            _readonly(y.astype(np.int32)),
            _readonly(p.astype(np.int8)),
            geometry, str(label), int(dropped),
        )

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for x, y, t, p in zip(self.x.tolist(), self.y.tolist(),
                              self.t.tolist(), self.p.tolist()):
            yield Event(x, y, t, p)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), int(self.t[i]), int(self.p[i]))

    def __repr__(self) -> str:
        g = self.geometry
        return (f"EventStream(label={self.label!r}, events={len(self)}, "
                f"geometry={g.width}x{g.height})")

    def same_events(self, other: "EventStream") -> bool:
        """Field-by-field equality of events, geometry and label."""
        return (
            self.label == other.label
            and self.geometry == other.geometry
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    def with_timestamps(self, t: np.ndarray, keep: np.ndarray | None = None,
                        dropped: int = 0) -> "EventStream":
        """Copy of this stream with new timestamps, optionally masking events."""
        x, y, p = self.x, self.y, self.p
        if keep is not None:
            x, y, p = x[keep], y[keep], p[keep]
        return EventStream.from_arrays(t, x, y, p, self.geometry, self.label, dropped)


def _validate(t, x, y, p, geometry: SensorGeometry) -> None:
    if len(t) == 0:
        return
    neg = np.flatnonzero(t < 0)
    if neg.size:
        i = int(neg[0])
        raise InvalidEvent(f"event {i} has negative timestamp {int(t[i])}")
    bad_p = np.flatnonzero((p != 1) & (p != -1))
    if bad_p.size:
        i = int(bad_p[0])
        raise InvalidEvent(f"event {i} has polarity {int(p[i])}, expected +1 or -1")
    back = np.flatnonzero(np.diff(t) < 0)
    if back.size:
        i = int(back[0]) + 1
        raise OutOfOrderTimestamps(i, int(t[i - 1]), int(t[i]))
    oob = np.flatnonzero((x < 0) | (x >= geometry.width) | (y < 0) | (y >= geometry.height))
    if oob.size:
        i = int(oob[0])
        raise OutOfBoundsPixel(i, int(x[i]), int(y[i]), geometry.width, geometry.height)


def build_stream(
    events: Sequence[Event] | Iterable[Event],
    geometry: SensorGeometry,
    label: str = "",
) -> EventStream:
    """Validate a sequence of events and pack it into an :class:`EventStream`.

    Events are never reordered: an out-of-order timestamp raises
    :class:`OutOfOrderTimestamps` naming the first offending index, and a
    pixel outside the sensor raises :class:`OutOfBoundsPixel`. An empty
    sequence yields a valid empty stream.
    """
    events = list(events)
    if events:
        arr = np.array([(e.x, e.y, e.t, e.p) for e in events], dtype=np.int64)
        x, y, t, p = arr.T
    else:
        x = y = t = p = np.empty(0, dtype=np.int64)
    return EventStream.from_arrays(t, x, y, p, geometry, label)


def duration(stream: EventStream) -> int:
    """Microseconds between the first and last event."""
    if len(stream) == 0:
        raise EmptyStream(f"stream {stream.label!r} has no events")
    return int(stream.t[-1] - stream.t[0])
