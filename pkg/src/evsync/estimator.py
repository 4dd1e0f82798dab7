"""Start-time offset estimation between two event streams.

Sign convention: ``delta`` (``delta_t21``) is camera 2's start time minus
camera 1's start time in world time, so a camera-2 timestamp ``t2`` maps to
camera 1's clock as ``t2 + delta``. Equivalently the density of camera 2,
shifted right by ``delta``, lines up with camera 1's:
``M1(t) == M2(t - delta)``.

The dissimilarity of a candidate shift is the sum of squared differences
between the two distributions over their overlapping bins, each side
renormalized to unit mass on that overlap. Renormalizing on the overlap
(rather than on the whole window) makes two windows that see the same
events over the overlap score exactly zero, whatever each window sees
outside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve

from .density import DensityDistribution, density_distribution, percentile_timestamp
from .errors import (
    EmptyStream,
    InvalidConfig,
    MismatchedTau,
    NoOverlap,
    NoValidCandidate,
    StreamExhausted,
)
from .events import EventStream


ANCHORS = ("first-event", "zero")


@dataclass(frozen=True)
class SyncConfig:
    """Estimator settings.

    Attributes:
        tau: bin width in microseconds.
        window_s: length T of each analysis window in seconds.
        epsilon: a window's estimate is accepted when its minimum
            dissimilarity is strictly below this.
        percentile: percentile p (in percent) used for the search bounds.
        max_windows: cap on the number of T-second windows tried.
        min_overlap_bins: candidates overlapping fewer bins are skipped.
        min_overlap_mass: candidates are also skipped unless the overlap
            holds at least this fraction of each window's events. Both
            sides are renormalized on the overlap, so without this guard a
            shift that overlaps only a sliver of sparse activity (a few
            lone events on each side) can score a spurious zero.
        bound_fallback_halfwidth: half-width (us) of the search range used
            when both percentile timestamps coincide.
        anchor: where each stream's first window starts.
            ``"first-event"`` (the default) starts at the stream's first
            event, floored to the bin grid, so adding a constant to every
            timestamp of a stream moves its windows with it and the
            estimate changes by exactly that constant. ``"zero"`` starts at
            running time 0, the camera's own start; it keeps two cameras'
            windows exactly ``delta`` apart in world time, which helps
            when a camera sees nothing for a while after it starts.
        widen_search: search every shift leaving ``min_overlap_bins`` of
            overlap in addition to the percentile range. The percentile
            range alone misses the offset whenever scene activity is
            roughly stationary over the window, because both percentile
            timestamps then sit near the window's middle.
    """

    tau: int = 1000
    window_s: float = 10.0
    epsilon: float = 1e-4
    percentile: float = 50.0
    max_windows: int = 6
    min_overlap_bins: int = 1000
    min_overlap_mass: float = 0.05
    bound_fallback_halfwidth: int = 500_000
    widen_search: bool = True
    anchor: str = "first-event"

    def __post_init__(self):
        if self.tau <= 0:
            raise InvalidConfig(f"tau must be positive, got {self.tau}")
        window_us = self.window_s * 1e6
        if window_us <= 0 or window_us != round(window_us) or round(window_us) % self.tau:
            raise InvalidConfig(
                f"window of {self.window_s}s is not a positive multiple of tau={self.tau}us"
            )
        if not self.epsilon >= 0 or math.isnan(self.epsilon):
            raise InvalidConfig(f"epsilon must be non-negative, got {self.epsilon}")
        if not 0 < self.percentile < 100:
            raise InvalidConfig(f"percentile must be in (0, 100), got {self.percentile}")
        if self.max_windows < 1:
            raise InvalidConfig("max_windows must be at least 1")
        if self.min_overlap_bins < 1:
            raise InvalidConfig("min_overlap_bins must be at least 1")
        if not 0 <= self.min_overlap_mass <= 1:
            raise InvalidConfig(f"min_overlap_mass must be in [0, 1], got {self.min_overlap_mass}")
        if self.bound_fallback_halfwidth < 0:
            raise InvalidConfig("bound_fallback_halfwidth must be non-negative")
        if self.anchor not in ANCHORS:
            raise InvalidConfig(f"anchor must be one of {ANCHORS}, got {self.anchor!r}")

    @property
    def window_us(self) -> int:
        return int(round(self.window_s * 1e6))


@dataclass(frozen=True)
class SearchBounds:
    a: int
    b: int

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError(f"empty search range [{self.a}, {self.b}]")

    def __contains__(self, delta: int) -> bool:
        return self.a <= delta <= self.b

    @property
    def width(self) -> int:
        return self.b - self.a

    def widened(self, factor: float) -> "SearchBounds":
        """Same center, ``factor`` times the width (rounded outward to integers)."""
        center = (self.a + self.b) / 2
        half = self.width * factor / 2
        return SearchBounds(math.floor(center - half), math.ceil(center + half))


@dataclass(frozen=True)
class Candidate:
    delta: int
    score: float
    overlap_bins: int

    @property
    def mean_score(self) -> float:
        return self.score / self.overlap_bins

    def key(self):
        # lowest score, then smallest |delta|, then smaller delta
        return (self.score, abs(self.delta), self.delta)


@dataclass(frozen=True)
class OffsetEstimate:
    """Recovered offset for one camera pair.

    ``bounds`` is the range actually searched; ``percentile_bounds`` the
    range derived from the percentile timestamps (they differ only when the
    search was widened).
    """

    delta_t21: int
    min_dissimilarity: float
    bounds: SearchBounds
    windows_consumed: int
    accepted: bool
    mean_dissimilarity: float = 0.0
    overlap_bins: int = 0
    percentile_bounds: SearchBounds | None = None
    widened: bool = False


def _check_grid(m1: DensityDistribution, m2: DensityDistribution) -> int:
    if m1.tau != m2.tau:
        raise MismatchedTau(f"tau differs: {m1.tau} vs {m2.tau}")
    if (m2.origin - m1.origin) % m1.tau:
        raise MismatchedTau(
            f"origins {m1.origin} and {m2.origin} are not on a common {m1.tau}us grid"
        )
    return m1.tau


def _weights(m1: DensityDistribution, m2: DensityDistribution):
    # integer counts keep the renormalized masses bit-identical when the
    # overlapping content is identical; mixed inputs fall back to masses
    if m1.counts is not None and m2.counts is not None:
        return m1.counts.astype(np.float64), m2.counts.astype(np.float64)
    return m1.bins, m2.bins


def _bin_shift(m1: DensityDistribution, m2: DensityDistribution, delta: int) -> int:
    tau = m1.tau
    num = m2.origin + delta - m1.origin
    if num % tau:
        raise MismatchedTau(f"delta {delta} is not on the {tau}us grid of the distributions")
    return num // tau


def _overlap(n1: int, n2: int, s: int) -> tuple[int, int]:
    return max(0, s), min(n1, n2 + s)


def _direct_score(a: np.ndarray, b: np.ndarray, s: int) -> tuple[float, int, float, float]:
    """Sum of squared differences over the overlap for bin shift ``s``.

    Returns (score, overlap_bins, mass_a, mass_b). A side with no mass on
    the overlap contributes zeros.
    """
    lo, hi = _overlap(len(a), len(b), s)
    if hi <= lo:
        return math.nan, 0, 0.0, 0.0
    ua = a[lo:hi]
    vb = b[lo - s:hi - s]
    sa = float(ua.sum())
    sb = float(vb.sum())
    u = ua / sa if sa > 0 else np.zeros_like(ua)
    v = vb / sb if sb > 0 else np.zeros_like(vb)
    d = u - v
    return float(np.dot(d, d)), hi - lo, sa, sb


def dissimilarity(m1: DensityDistribution, m2: DensityDistribution, delta: int,
                  reduction: str = "sum") -> float:
    """Squared-difference dissimilarity of ``m1`` and ``m2`` shifted right by ``delta``.

    ``reduction="sum"`` returns the summed squared error over the overlap
    (the quantity compared against ``SyncConfig.epsilon``); ``"mean"``
    divides it by the number of overlapping bins.
    """
    _check_grid(m1, m2)
    a, b = _weights(m1, m2)
    s = _bin_shift(m1, m2, delta)
    score, n, _, _ = _direct_score(a, b, s)
    if n == 0:
        raise NoOverlap(f"no overlapping bins at delta={delta}")
    if reduction == "sum":
        return score
    if reduction == "mean":
        return score / n
    raise ValueError(f"unknown reduction {reduction!r}")


def search_bounds(m1: DensityDistribution, m2: DensityDistribution, p: float = 50.0,
                  fallback_halfwidth: int = 500_000) -> SearchBounds:
    """Offset search range from the p-th percentile timestamps of both distributions.

    With ``d = Q1 - Q2`` (the offset the percentiles alone suggest) and
    ``w = 2|Q1 - Q2|`` the range is ``[d - w, d + w]``, snapped outward to
    the bin grid. When ``Q1 == Q2`` the range is ``d`` plus or minus
    ``fallback_halfwidth``.
    """
    tau = _check_grid(m1, m2)
    q1 = percentile_timestamp(m1, p)
    q2 = percentile_timestamp(m2, p)
    d = q1 - q2
    w = 2 * abs(d)
    if w == 0:
        w = int(fallback_halfwidth)
    # candidate grid is the set of deltas that keep bins aligned
    phase = (m1.origin - m2.origin) % tau
    a = math.floor((d - w - phase) / tau) * tau + phase
    b = math.ceil((d + w - phase) / tau) * tau + phase
    return SearchBounds(int(a), int(b))


def feasible_bounds(m1: DensityDistribution, m2: DensityDistribution,
                    min_overlap_bins: int = 1) -> SearchBounds:
    """Every shift leaving at least ``min_overlap_bins`` bins of overlap."""
    tau = _check_grid(m1, m2)
    n1, n2 = len(m1), len(m2)
    s_lo = -(n2 - min_overlap_bins)
    s_hi = n1 - min_overlap_bins
    if s_lo > s_hi:
        raise NoValidCandidate(
            f"windows of {n1} and {n2} bins cannot overlap by {min_overlap_bins}"
        )
    off = m1.origin - m2.origin
    return SearchBounds(s_lo * tau + off, s_hi * tau + off)


def _candidate_shifts(m1, m2, bounds: SearchBounds) -> np.ndarray:
    tau = m1.tau
    off = m1.origin - m2.origin
    s_lo = math.ceil((bounds.a - off) / tau)
    s_hi = math.floor((bounds.b - off) / tau)
    return np.arange(s_lo, s_hi + 1, dtype=np.int64)


def _valid(n_ov, sa, sb, cfg: SyncConfig, total_a: float, total_b: float):
    return ((n_ov >= cfg.min_overlap_bins) & (sa > 0) & (sb > 0)
            & (sa >= cfg.min_overlap_mass * total_a) & (sb >= cfg.min_overlap_mass * total_b))


def _fast_scores(a: np.ndarray, b: np.ndarray, shifts: np.ndarray, exact_ints: bool):
    """Vectorized scores for many shifts via prefix sums and one FFT correlation.

    Used only to shortlist; the winner is always recomputed directly.
    """
    n1, n2 = len(a), len(b)
    A = np.concatenate(([0.0], np.cumsum(a)))
    AA = np.concatenate(([0.0], np.cumsum(a * a)))
    B = np.concatenate(([0.0], np.cumsum(b)))
    BB = np.concatenate(([0.0], np.cumsum(b * b)))
    corr = fftconvolve(a, b[::-1], mode="full")
    if exact_ints:
        corr = np.rint(corr)
    lo = np.maximum(0, shifts)
    hi = np.minimum(n1, n2 + shifts)
    n_ov = np.maximum(hi - lo, 0)
    ok = n_ov > 0
    lo = np.where(ok, lo, 0)
    hi = np.where(ok, hi, 0)
    sa = A[hi] - A[lo]
    saa = AA[hi] - AA[lo]
    sb = B[np.clip(hi - shifts, 0, n2)] - B[np.clip(lo - shifts, 0, n2)]
    sbb = BB[np.clip(hi - shifts, 0, n2)] - BB[np.clip(lo - shifts, 0, n2)]
    sab = corr[np.clip(shifts + n2 - 1, 0, len(corr) - 1)]
    sa = np.where(ok, sa, 0.0)
    sb = np.where(ok, sb, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = saa / (sa * sa)
        tb = sbb / (sb * sb)
        score = ta + tb - 2.0 * sab / (sa * sb)
    return score, n_ov, sa, sb, ta + tb


def argmin_offset(m1: DensityDistribution, m2: DensityDistribution,
                  bounds: SearchBounds, cfg: SyncConfig | None = None) -> Candidate:
    """Lowest-dissimilarity shift among the grid points of ``bounds``.

    Candidates overlapping fewer than ``cfg.min_overlap_bins`` bins, or
    holding less than ``cfg.min_overlap_mass`` of either window's mass on
    the overlap (or none at all), are skipped. Ties go to the
    smallest ``|delta|``, then to the smaller delta. The result is identical
    to :func:`exhaustive_offset` over the same range.

    Raises:
        NoValidCandidate: every candidate was skipped.
    """
    cfg = cfg or SyncConfig()
    _check_grid(m1, m2)
    a, b = _weights(m1, m2)
    exact = m1.counts is not None and m2.counts is not None
    shifts = _candidate_shifts(m1, m2, bounds)
    if shifts.size == 0:
        raise NoValidCandidate(f"no grid point inside [{bounds.a}, {bounds.b}]")
    score, n_ov, sa, sb, scale = _fast_scores(a, b, shifts, exact)
    valid = _valid(n_ov, sa, sb, cfg, float(a.sum()), float(b.sum()))
    if not valid.any():
        raise NoValidCandidate(
            f"no candidate in [{bounds.a}, {bounds.b}] overlaps by "
            f"{cfg.min_overlap_bins} bins with enough mass on both sides"
        )
    score = np.where(valid, score, np.inf)
    best = float(score.min())
    # shortlist anything within rounding distance of the fast minimum
    tol = 1e-9 * float(np.max(scale[valid])) + 1e-15
    shortlist = shifts[score <= best + tol]
    off = m1.origin - m2.origin
    cands = []
    for s in shortlist.tolist():
        sc, n, _, _ = _direct_score(a, b, s)
        cands.append(Candidate(s * m1.tau + off, sc, n))
    return min(cands, key=Candidate.key)


def exhaustive_offset(m1: DensityDistribution, m2: DensityDistribution,
                      bounds: SearchBounds, cfg: SyncConfig | None = None) -> Candidate:
    """Plain linear scan of every grid candidate in ``bounds``.

    Reference implementation for :func:`argmin_offset`; same skipping and
    tie-breaking rules, no vectorization.
    """
    cfg = cfg or SyncConfig()
    _check_grid(m1, m2)
    a, b = _weights(m1, m2)
    off = m1.origin - m2.origin
    total_a, total_b = float(a.sum()), float(b.sum())
    best = None
    for s in _candidate_shifts(m1, m2, bounds).tolist():
        sc, n, sa, sb = _direct_score(a, b, s)
        if n < cfg.min_overlap_bins or sa <= 0 or sb <= 0:
            continue
        if sa < cfg.min_overlap_mass * total_a or sb < cfg.min_overlap_mass * total_b:
            continue
        c = Candidate(s * m1.tau + off, sc, n)
        if best is None or c.key() < best.key():
            best = c
    if best is None:
        raise NoValidCandidate(f"no valid candidate in [{bounds.a}, {bounds.b}]")
    return best


def dissimilarity_curve(m1: DensityDistribution, m2: DensityDistribution,
                        bounds: SearchBounds, cfg: SyncConfig | None = None):
    """Dissimilarity for every grid candidate in ``bounds``, for plotting.

    Returns ``(deltas, scores)``; skipped candidates score NaN. Scores come
    from the vectorized path and may differ from :func:`dissimilarity` in
    the last few ulps.
    """
    cfg = cfg or SyncConfig()
    _check_grid(m1, m2)
    a, b = _weights(m1, m2)
    shifts = _candidate_shifts(m1, m2, bounds)
    exact = m1.counts is not None and m2.counts is not None
    score, n_ov, sa, sb, _ = _fast_scores(a, b, shifts, exact)
    valid = _valid(n_ov, sa, sb, cfg, float(a.sum()), float(b.sum()))
    deltas = shifts * m1.tau + (m1.origin - m2.origin)
    return deltas, np.where(valid, np.maximum(score, 0.0), np.nan)


def _window_estimate(m1, m2, cfg: SyncConfig):
    """Search one pair of window densities.

    Returns (candidate, searched_bounds, percentile_bounds).
    """
    pbounds = search_bounds(m1, m2, cfg.percentile, cfg.bound_fallback_halfwidth)
    searched = pbounds
    if cfg.widen_search:
        try:
            full = feasible_bounds(m1, m2, cfg.min_overlap_bins)
            searched = SearchBounds(min(full.a, pbounds.a), max(full.b, pbounds.b))
        except NoValidCandidate:
            pass
    return argmin_offset(m1, m2, searched, cfg), searched, pbounds


def window_start(stream: EventStream, cfg: SyncConfig) -> int:
    """Start of the first analysis window of ``stream`` under ``cfg.anchor``."""
    if cfg.anchor == "zero" or len(stream) == 0:
        return 0
    return int(stream.t[0]) // cfg.tau * cfg.tau


def estimate_offset(stream1: EventStream, stream2: EventStream,
                    cfg: SyncConfig | None = None) -> OffsetEstimate:
    """Estimate camera 2's start offset relative to camera 1.

    Densities are built over consecutive T-second windows of each stream,
    the first one starting where ``cfg.anchor`` says. A window
    whose best dissimilarity is below ``epsilon`` is accepted and the loop
    stops; otherwise the next window pair is tried, up to
    ``cfg.max_windows``. The lowest-scoring estimate seen is returned,
    flagged ``accepted=False`` if none passed.

    Raises:
        EmptyStream: either stream has no events.
        StreamExhausted: a stream ran out of events before any window
            produced a candidate.
        NoValidCandidate: windows were available but none produced a
            valid candidate.
    """
    cfg = cfg or SyncConfig()
    if len(stream1) == 0 or len(stream2) == 0:
        raise EmptyStream("both streams need events")
    tau, T = cfg.tau, cfg.window_us
    base1 = window_start(stream1, cfg)
    base2 = window_start(stream2, cfg)
    best = None
    last_error = None
    consumed = 0
    exhausted = False
    for k in range(cfg.max_windows):
        s1 = base1 + k * T
        s2 = base2 + k * T
        if stream1.t[-1] < s1 or stream2.t[-1] < s2:
            exhausted = True
            break
        consumed = k + 1
        m1 = density_distribution(stream1, s1, T, tau)
        m2 = density_distribution(stream2, s2, T, tau)
        if m1.total_events == 0 or m2.total_events == 0:
            continue
        try:
            cand, searched, pbounds = _window_estimate(m1, m2, cfg)
        except NoValidCandidate as exc:
            last_error = exc
            continue
        est = OffsetEstimate(
            delta_t21=cand.delta,
            min_dissimilarity=cand.score,
            bounds=searched,
            windows_consumed=consumed,
            accepted=cand.score < cfg.epsilon,
            mean_dissimilarity=cand.mean_score,
            overlap_bins=cand.overlap_bins,
            percentile_bounds=pbounds,
            widened=searched != pbounds,
        )
        if best is None or (est.min_dissimilarity, abs(est.delta_t21)) < (
            best.min_dissimilarity, abs(best.delta_t21)
        ):
            best = est
        if est.accepted:
            break
    if best is None:
        if exhausted or last_error is None:
            raise StreamExhausted(
                f"streams {stream1.label!r}/{stream2.label!r} ran out of events after "
                f"{consumed} window(s) without producing a candidate"
                + (f" (last: {last_error})" if last_error else "")
            )
        raise NoValidCandidate(f"no window produced a candidate: {last_error}")
    return replace(best, windows_consumed=consumed)
