"""Synthetic multi-camera event streams with known start offsets.

The forward model is temporal only. A scalar scene-activity profile
``a(t)`` stands in for the image-gradient/velocity product that drives
event production; camera ``j`` emits ``floor(gain_j * a / C)`` events per
bin, optionally perturbed, at uniformly random times inside the bin.
Each camera starts recording ``offsets[j]`` later in world time (relative
to the other cameras) and stamps events with its own running time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidConfig, InvalidDuration
from .events import EventStream, SensorGeometry

PROFILE_KINDS = ("random-walk", "bursts", "sinusoid")
MIN_ACTIVE_FRACTION = 0.10


@dataclass(frozen=True, eq=False)
class ActivityProfile:
    """Non-negative per-bin scene activity in world time, normalized to mean 1."""

    samples: np.ndarray
    tau: int
    duration: int
    seed: int
    kind: str = "random-walk"

    def __post_init__(self):
        if np.any(self.samples < 0):
            raise ValueError("activity samples must be non-negative")
        if np.mean(self.samples > 0) < MIN_ACTIVE_FRACTION:
            raise ValueError("fewer than 10% of activity samples are positive")

    def __len__(self) -> int:
        return len(self.samples)


def _random_walk(rng: np.random.Generator, n: int) -> np.ndarray:
    # mean-reverting walk (~100 ms memory) so the level does not drift off to zero
    theta = 0.01
    sigma = 1.8 * np.sqrt(2 * theta)
    level0 = 1.0 + 1.8 * rng.standard_normal()
    drive = theta * 1.0 + sigma * rng.standard_normal(n)
    x, _ = lfilter([1.0], [1.0, -(1.0 - theta)], drive, zi=[(1.0 - theta) * level0])
    return np.clip(x, 0.0, None)


def _bursts(rng: np.random.Generator, n: int, tau: int) -> np.ndarray:
    bins_per_s = 1e6 / tau
    x = np.full(n, 0.05)
    n_bursts = rng.poisson(2.0 * n / bins_per_s) + 1
    starts = rng.integers(0, n, size=n_bursts)
    for s in starts:
        amp = rng.exponential(4.0)
        rise = max(1, int(rng.uniform(0.002, 0.02) * bins_per_s))
        decay = max(1, int(rng.uniform(0.02, 0.3) * bins_per_s))
        length = min(n - s, rise + 5 * decay)
        k = np.arange(length)
        shape = np.where(k < rise, k / rise, np.exp(-(k - rise) / decay))
        x[s:s + length] += amp * shape
    return x


def _sinusoid(rng: np.random.Generator, n: int, tau: int) -> np.ndarray:
    t = np.arange(n) * (tau / 1e6)
    x = np.zeros(n)
    for _ in range(3):
        f = rng.uniform(0.3, 3.0)
        x += rng.uniform(0.5, 1.5) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return np.clip(x, 0.0, None)


def make_profile(seed: int, duration: int, tau: int = 1000,
                 kind: str = "random-walk") -> ActivityProfile:
    """Deterministic activity profile covering ``duration`` microseconds.

    Raises:
        InvalidDuration: ``duration`` is not a positive multiple of ``tau``.
    """
    if tau <= 0 or duration <= 0 or duration % tau:
        raise InvalidDuration(f"duration {duration} is not a positive multiple of tau={tau}")
    if kind not in PROFILE_KINDS:
        raise ValueError(f"unknown profile kind {kind!r}; expected one of {PROFILE_KINDS}")
    n = duration // tau
    ss = np.random.SeedSequence([int(seed), PROFILE_KINDS.index(kind)])
    for rng in map(np.random.default_rng, ss.spawn(16)):
        if kind == "random-walk":
            x = _random_walk(rng, n)
        elif kind == "bursts":
            x = _bursts(rng, n, tau)
        else:
            x = _sinusoid(rng, n, tau)
        if np.mean(x > 0) >= MIN_ACTIVE_FRACTION and x.sum() > 0:
            break
    else:
        raise RuntimeError(f"could not draw an active {kind} profile for seed {seed}")
    x = x / x.mean()
    x.setflags(write=False)
    return ActivityProfile(x, int(tau), int(duration), int(seed), kind)


@dataclass(frozen=True)
class GeneratorConfig:
    """Camera model for :func:`sample_streams`.

    Attributes:
        offsets: per-camera start offset in us; ``offsets[j] - offsets[0]``
            is the ground-truth ``delta_t21`` of camera j against camera 0.
        contrast_threshold_C: events per bin are ``floor(gain * activity / C)``;
            with the unit-mean profiles from :func:`make_profile` the mean
            rate is ``gain / C`` events per bin.
        count_noise: relative spread of a gamma-Poisson perturbation of each
            bin's count (0 disables it).
        timestamp_jitter: standard deviation (us) of Gaussian noise added
            to every timestamp.
        gains: per-camera sensitivity multipliers; defaults to all ones.
        seed: sampling seed; defaults to the profile's seed.
    """

    offsets: tuple[int, ...] = (0, 0)
    contrast_threshold_C: float = 0.05
    geometry: SensorGeometry = field(default_factory=lambda: SensorGeometry(346, 260))
    count_noise: float = 0.0
    timestamp_jitter: float = 0.0
    gains: tuple[float, ...] | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(int(o) for o in self.offsets))
        if self.gains is None:
            object.__setattr__(self, "gains", (1.0,) * len(self.offsets))
        else:
            object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        if not self.offsets:
            raise InvalidConfig("need at least one camera")
        if len(self.gains) != len(self.offsets):
            raise InvalidConfig(
                f"{len(self.offsets)} offsets but {len(self.gains)} gains"
            )
        if not self.contrast_threshold_C > 0:
            raise InvalidConfig("contrast threshold C must be positive")
        if any(not g > 0 for g in self.gains):
            raise InvalidConfig("gains must be positive")
        if self.count_noise < 0 or self.timestamp_jitter < 0:
            raise InvalidConfig("noise levels must be non-negative")

    @property
    def n_cameras(self) -> int:
        return len(self.offsets)

    def true_deltas(self, reference: int = 0) -> list[int]:
        return [o - self.offsets[reference] for o in self.offsets]


def expected_counts(profile: ActivityProfile, gain: float, C: float) -> np.ndarray:
    """Noise-free per-bin event counts, ``floor(gain * activity / C)``."""
    return np.floor(gain * profile.samples / C).astype(np.int64)


def _sample_camera(profile: ActivityProfile, cfg: GeneratorConfig, j: int,
                   start: int, rng: np.random.Generator) -> EventStream:
    tau = profile.tau
    counts = expected_counts(profile, cfg.gains[j], cfg.contrast_threshold_C)
    if cfg.count_noise > 0:
        r2 = cfg.count_noise ** 2
        mult = rng.gamma(1.0 / r2, r2, size=len(counts))
        counts = rng.poisson(counts * mult)
    # bins entirely before this camera starts never produce events
    first_bin = max(0, (start - int(4 * cfg.timestamp_jitter)) // tau)
    counts[:first_bin] = 0
    bin_idx = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    t = bin_idx * tau + rng.integers(0, tau, size=bin_idx.size)
    if cfg.timestamp_jitter > 0:
        t = t + np.rint(rng.normal(0.0, cfg.timestamp_jitter, size=t.size)).astype(np.int64)
    t = t - start
    keep = (t >= 0) & (t < profile.duration - start)
    t = np.sort(t[keep], kind="stable")
    n = t.size
    g = cfg.geometry
    x = rng.integers(0, g.width, size=n)
    y = rng.integers(0, g.height, size=n)
    p = np.where(rng.random(n) < 0.5, 1, -1)
    return EventStream.from_arrays(t, x, y, p, g, f"cam{j}")


def sample_streams(profile: ActivityProfile, cfg: GeneratorConfig) -> list[EventStream]:
    """One stream per camera, each in its own running time.

    Camera ``j`` starts at world time ``offsets[j] - min(offsets)`` and
    records until the end of the profile; events before its start are
    lost, as with a camera that is switched on late.
    """
    first = min(cfg.offsets)
    starts = [o - first for o in cfg.offsets]
    if max(starts) >= profile.duration:
        raise InvalidConfig("an offset leaves a camera with no recording time")
    seed = profile.seed if cfg.seed is None else cfg.seed
    ss = np.random.SeedSequence([int(seed), 0x5EED])
    rngs = [np.random.default_rng(s) for s in ss.spawn(cfg.n_cameras)]
    return [_sample_camera(profile, cfg, j, starts[j], rngs[j])
            for j in range(cfg.n_cameras)]
