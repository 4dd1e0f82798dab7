"""Normalized event-density distributions and percentile timestamps.

A density distribution splits an analysis window into bins of width
``tau`` microseconds and stores, per bin, the fraction of the window's
events that fall into it. Bin ``k`` covers ``[origin + k*tau,
origin + (k+1)*tau)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDistribution, InvalidBinWidth, WindowNotMultipleOfTau
from .events import EventStream

DEFAULT_TAU_US = 1000


@dataclass(frozen=True, eq=False)
class DensityDistribution:
    """Per-bin event mass over one analysis window.

    ``counts`` keeps the raw integer per-bin counts when the distribution
    was built from events; it is ``None`` for distributions assembled
    directly from masses. ``total_events`` is the window-local normalizer.
    """

    bins: np.ndarray
    tau: int = DEFAULT_TAU_US
    origin: int = 0
    total_events: int = 0
    counts: np.ndarray | None = None

    @classmethod
    def from_masses(cls, masses, tau: int = DEFAULT_TAU_US, origin: int = 0,
                    total_events: int | None = None) -> "DensityDistribution":
        """Wrap precomputed bin masses (tests, plotting, hand-built cases).

        ``total_events`` defaults to 1 when any mass is positive, so that
        percentile queries work on the distribution.
        """
        if tau <= 0:
            raise InvalidBinWidth(f"tau must be positive, got {tau}")
        bins = np.asarray(masses, dtype=np.float64).reshape(-1).copy()
        if np.any(bins < 0) or not np.all(np.isfinite(bins)):
            raise ValueError("bin masses must be finite and non-negative")
        if total_events is None:
            total_events = 1 if bins.sum() > 0 else 0
        bins.setflags(write=False)
        return cls(bins, int(tau), int(origin), int(total_events), None)

    @classmethod
    def from_counts(cls, counts, tau: int = DEFAULT_TAU_US,
                    origin: int = 0) -> "DensityDistribution":
        if tau <= 0:
            raise InvalidBinWidth(f"tau must be positive, got {tau}")
        counts = np.asarray(counts, dtype=np.int64).reshape(-1).copy()
        if np.any(counts < 0):
            raise ValueError("bin counts must be non-negative")
        total = int(counts.sum())
        bins = counts / total if total else np.zeros(len(counts))
        bins.setflags(write=False)
        counts.setflags(write=False)
        return cls(bins, int(tau), int(origin), total, counts)

    def __len__(self) -> int:
        return len(self.bins)

    @property
    def end(self) -> int:
        """Right edge (exclusive) of the last bin."""
        return self.origin + len(self.bins) * self.tau

    def bin_starts(self) -> np.ndarray:
        return self.origin + self.tau * np.arange(len(self.bins), dtype=np.int64)

    def weights(self) -> np.ndarray:
        """Raw counts when available, otherwise the masses."""
        return self.bins if self.counts is None else self.counts


def density_distribution(
    stream: EventStream,
    window_start: int,
    window_len: int,
    tau: int = DEFAULT_TAU_US,
) -> DensityDistribution:
    """Bin the events of ``stream`` inside ``[window_start, window_start + window_len)``.

    Both polarities count. Events outside the window are ignored and the
    masses are normalized by the number of events inside the window; an
    empty window gives all-zero bins with ``total_events == 0``.

    Raises:
        InvalidBinWidth: ``tau <= 0``.
        WindowNotMultipleOfTau: ``window_len`` is not a positive multiple of ``tau``.
    """
    tau = int(tau)
    window_start = int(window_start)
    window_len = int(window_len)
    if tau <= 0:
        raise InvalidBinWidth(f"tau must be positive, got {tau}")
    if window_len < tau or window_len % tau:
        raise WindowNotMultipleOfTau(
            f"window length {window_len} is not a positive multiple of tau={tau}"
        )
    nbins = window_len // tau
    t = stream.t
    lo = np.searchsorted(t, window_start, side="left")
    hi = np.searchsorted(t, window_start + window_len, side="left")
    idx = (t[lo:hi] - window_start) // tau
    counts = np.bincount(idx, minlength=nbins).astype(np.int64)
    return DensityDistribution.from_counts(counts, tau=tau, origin=window_start)


def percentile_timestamp(dist: DensityDistribution, p: float) -> int:
    """Left edge of the first bin at which the cumulative mass reaches ``p`` percent.

    No interpolation inside bins. ``p`` must lie in the open interval (0, 100).
    """
    if not 0 < p < 100:
        raise ValueError(f"percentile must be in (0, 100), got {p}")
    if dist.total_events <= 0 or len(dist) == 0:
        raise EmptyDistribution("percentile of an empty distribution")
    if dist.counts is not None:
        cum = np.cumsum(dist.counts)
        target = p / 100.0 * cum[-1]
        k = int(np.searchsorted(cum, target, side="left"))
    else:
        cum = np.cumsum(dist.bins)
        if cum[-1] <= 0:
            raise EmptyDistribution("percentile of an all-zero distribution")
        # masses may not sum exactly to one; tolerate rounding in the cumsum
        target = p / 100.0 * cum[-1] - 1e-12
        k = int(np.searchsorted(cum, target, side="left"))
    k = min(k, len(dist) - 1)
    return dist.origin + k * dist.tau
