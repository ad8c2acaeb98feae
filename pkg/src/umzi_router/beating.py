"""Spatial-beating two-photon interference behind a 50/50 recombiner.

The coincidence probability versus relative delay d is

    1 - v0 * sinc(sigma * d) * cos(2 pi f d)

with the unnormalized sinc and f = |nu_i - nu_s| for the antibunched state or
nu_i + nu_s for the bunched one.  The 2 pi in the cosine is what makes an
800 GHz spacing beat with a 1.25 ps period.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .coincidence import DEFAULT_FILTER_WIDTH, DetectorModel
from .interferometer import UmziConfig, evolve_umzi, postselect_central
from .source import C, SourceModel


@dataclass(frozen=True)
class BeatingConfig:
    mode: str = "antibunched"
    nu_i: float = 193.5e12  # Hz
    nu_s: float = 192.7e12  # Hz
    sigma: float = 2 * math.pi * 32e9  # rad/s
    v0: float = 1.0
    delay_grid: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.mode not in ("antibunched", "bunched"):
            raise ValueError(f"mode must be 'antibunched' or 'bunched', got {self.mode!r}")
        if not (self.nu_i > 0 and self.nu_s > 0):
            raise ValueError("frequencies must be positive")
        if not 0 <= self.v0 <= 1:
            raise ValueError(f"v0 must lie in [0, 1], got {self.v0}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "delay_grid", tuple(float(d) for d in self.delay_grid))

    @property
    def beat_frequency(self) -> float:
        if self.mode == "antibunched":
            return abs(self.nu_i - self.nu_s)
        return self.nu_i + self.nu_s

    @classmethod
    def from_source(cls, source: SourceModel, **kw) -> "BeatingConfig":
        kw.setdefault("sigma", source.signal.angular_bandwidth)
        return cls(nu_i=source.idler.center_frequency, nu_s=source.signal.center_frequency, **kw)


def sinc(x):
    """sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x) / np.pi)


def beating_probability(cfg: BeatingConfig, delta_tau):
    d = np.asarray(delta_tau, dtype=float)
    out = 1 - cfg.v0 * sinc(cfg.sigma * d) * np.cos(2 * np.pi * cfg.beat_frequency * d)
    return float(out) if out.ndim == 0 else out


def beating_period(cfg: BeatingConfig) -> tuple[float, float]:
    """Beat period (s) and the equivalent optical path length (m); inf when degenerate."""
    f = cfg.beat_frequency
    if f == 0:
        return math.inf, math.inf
    return 1 / f, C / f


def envelope_first_zero(sigma: float) -> float:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return math.pi / sigma


def fidelity_from_visibility(v0: float) -> float:
    if not 0 <= v0 <= 1:
        raise ValueError(f"visibility must lie in [0, 1], got {v0}")
    return (1 + v0) / 2


@dataclass
class BeatingScan:
    delta_taus: np.ndarray
    counts: np.ndarray
    prediction: np.ndarray  # expected counts including accidentals
    accidental: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta_tau_ps", "counts", "prediction"])
            for d, n, p in zip(self.delta_taus, self.counts, self.prediction):
                w.writerow([f"{d * 1e12:.6f}", int(n), f"{p:.6f}"])


def beating_rates(
    source: SourceModel,
    det_s: DetectorModel,
    det_i: DetectorModel,
    umzi: UmziConfig,
    window: float = DEFAULT_FILTER_WIDTH,
) -> tuple[float, float]:
    """(base coincidence rate far from zero delay, accidental rate) in counts/s.

    The base rate takes the post-selected antibunched pairs of the router and
    the 1/2 splitting probability of distinguishable photons at the recombiner.
    """
    state = postselect_central(evolve_umzi(umzi))
    p = state.probabilities().sum(axis=2)
    p_anti = p[0, 1] + p[1, 0]
    t = umzi.transmission
    es, ei = det_s.efficiency * t, det_i.efficiency * t
    base = source.pair_rate * p_anti * es * ei * 0.5
    # each photon reaches its own filtered detector half the time
    r_s = source.pair_rate * 0.5 * es + source.accidental_singles_rate[0] + det_s.dark_count_rate
    r_i = source.pair_rate * 0.5 * ei + source.accidental_singles_rate[1] + det_i.dark_count_rate
    return base, r_s * r_i * window


def simulate_beating_scan(
    cfg: BeatingConfig,
    source: SourceModel,
    det_s: DetectorModel,
    det_i: DetectorModel,
    umzi: UmziConfig,
    duration: float,
    seed: int,
    window: float = DEFAULT_FILTER_WIDTH,
) -> BeatingScan:
    """Poisson counts at each delay around the closed-form beating curve."""
    if not cfg.delay_grid:
        raise ValueError("delay_grid is empty")
    base, acc = beating_rates(source, det_s, det_i, umzi, window)
    d = np.array(cfg.delay_grid)
    mean = base * duration * np.atleast_1d(beating_probability(cfg, d)) + acc * duration
    seeds = np.random.SeedSequence(seed).spawn(d.size)
    counts = np.array([np.random.default_rng(s).poisson(m) for s, m in zip(seeds, mean)], dtype=np.int64)
    return BeatingScan(d, counts, mean, acc * duration)


def default_beating_config(source: SourceModel, v0: float, n_delays: int = 64, max_delay: float = 5e-12):
    grid = np.linspace(0.0, max_delay, n_delays)
    return BeatingConfig.from_source(source, v0=v0, delay_grid=tuple(grid))

