"""Monte Carlo detection, time-resolved coincidence counting and CAR estimation."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .interferometer import PORTS, SLOTS, TwoPhotonState, UmziConfig, evolve_umzi
from .source import SourceModel

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))

DEFAULT_BIN_WIDTH = 4e-12
DEFAULT_WINDOW = 800e-12  # full width, i.e. +/-400 ps
DEFAULT_FILTER_WIDTH = 88e-12
DEFAULT_BACKGROUND_OFFSETS = (-350e-12, -250e-12, 250e-12, 350e-12)

# Acquisitions are cut into fixed blocks, each with its own seed derived from
# the master seed.  Worker chunks only group blocks, so the merged streams do
# not depend on the chunk count.
BLOCK_DURATION = 1.0

# Physical output ports -> (photon, UMZI output mode).
PORT_MAP = {
    "D": ("signal", "c"),
    "E": ("idler", "c"),
    "F": ("signal", "d"),
    "G": ("idler", "d"),
}
PORT_PAIRS = ("DE", "FG", "EF", "DG")


def resolve_port_pair(pair: str) -> tuple[int, int]:
    """Map a two-letter port pair such as ``"EF"`` to (signal mode, idler mode) indices."""
    pair = pair.upper()
    if pair not in PORT_PAIRS and pair[::-1] not in PORT_PAIRS:
        raise ValueError(f"unknown port pair {pair!r}; expected one of {PORT_PAIRS}")
    sig = idl = None
    for p in pair:
        photon, mode = PORT_MAP[p]
        if photon == "signal":
            sig = PORTS.index(mode)
        else:
            idl = PORTS.index(mode)
    return sig, idl


def is_bunched_pair(pair: str) -> bool:
    s, i = resolve_port_pair(pair)
    return s == i


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_count_rate: float = 0.0  # counts/s
    jitter_fwhm: float = 0.0  # s
    id: str = ""

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if self.dark_count_rate < 0:
            raise ValueError("dark_count_rate must be non-negative")
        if self.jitter_fwhm < 0:
            raise ValueError("jitter_fwhm must be non-negative")

    @property
    def jitter_sigma(self) -> float:
        return self.jitter_fwhm * FWHM_TO_SIGMA

    def to_dict(self) -> dict:
        return {
            "efficiency": self.efficiency,
            "dark_count_rate_hz": self.dark_count_rate,
            "jitter_fwhm_s": self.jitter_fwhm,
            "id": self.id,
        }


def reference_detectors() -> tuple[DetectorModel, DetectorModel]:
    return (
        DetectorModel(0.06, 10.0, 25e-12, "SNSPD1"),
        DetectorModel(0.04, 10.0, 44e-12, "SNSPD2"),
    )


@dataclass(frozen=True)
class CoincidenceEvent:
    t_signal: float
    t_idler: float

    @property
    def delta_t(self) -> float:
        return self.t_signal - self.t_idler


@dataclass
class TimestampStreams:
    """Detector click times, quantized to ``resolution`` and sorted."""

    signal: np.ndarray
    idler: np.ndarray
    duration: float
    resolution: float


@dataclass
class CoincidenceHistogram:
    """Counts of delta_t = t_s - t_i; bin k is centered on ``origin + (k + 0.5) * bin_width``."""

    bin_width: float
    origin: float
    counts: np.ndarray
    acquisition_time: float = 0.0
    total_singles: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin_width must be > 0")
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise ValueError("histogram counts must be non-negative")

    @property
    def centers(self) -> np.ndarray:
        return self.origin + (np.arange(self.counts.size) + 0.5) * self.bin_width

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta_t_ps", "counts"])
            for x, n in zip(self.centers, self.counts):
                w.writerow([f"{x * 1e12:.3f}", int(n)])


@dataclass(frozen=True)
class TimeFilter:
    center: float = 0.0
    width: float = DEFAULT_FILTER_WIDTH

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("filter width must be > 0")

    def shifted(self, offset: float) -> "TimeFilter":
        return TimeFilter(self.center + offset, self.width)


@dataclass(frozen=True)
class CarEstimate:
    car: float  # math.inf when no accidentals were seen
    error: float
    signal_counts: int
    background_mean: float

    @property
    def infinite(self) -> bool:
        return math.isinf(self.car)


@dataclass
class FringeScan:
    phis: np.ndarray
    coincidences: np.ndarray
    singles_s: np.ndarray
    singles_i: np.ndarray
    side_minus: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    side_plus: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    port_pair: str = ""
    duration: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phi_rad", "coincidences", "singles_s", "singles_i"])
            for row in zip(self.phis, self.coincidences, self.singles_s, self.singles_i):
                w.writerow([f"{row[0]:.9f}", int(row[1]), int(row[2]), int(row[3])])


# --- simulation -------------------------------------------------------------


def _outcome_table(
    state: TwoPhotonState,
    ports: tuple[int, int],
    eta_s: float,
    eta_i: float,
):
    """Joint (slot, signal clicked, idler clicked) probabilities for one emitted pair."""
    p = state.probabilities()
    sp, ip = ports
    cats = []  # (slot, sig_clicks, idl_clicks, prob)
    for k, slot in enumerate(SLOTS):
        for a in range(2):
            for b in range(2):
                w = p[a, b, k]
                if w <= 0:
                    continue
                ps = eta_s if a == sp else 0.0
                pi = eta_i if b == ip else 0.0
                for ds in (0, 1):
                    for di in (0, 1):
                        if ds == 0 and di == 0:
                            continue
                        q = w * (ps if ds else 1 - ps) * (pi if di else 1 - pi)
                        if q > 0:
                            cats.append((slot, ds, di, q))
    return cats


def _simulate_block(
    rng: np.random.Generator,
    t_start: float,
    t_len: float,
    pair_rate: float,
    cats,
    tau: float,
    bg_s: float,
    bg_i: float,
    sig_jit: float,
    idl_jit: float,
    resolution: float,
):
    sig_parts, idl_parts = [], []
    if cats and pair_rate > 0:
        probs = np.array([c[3] for c in cats])
        p_any = probs.sum()
        n = rng.poisson(pair_rate * p_any * t_len)
        if n:
            idx = rng.choice(len(cats), size=n, p=probs / p_any)
            t0 = t_start + rng.random(n) * t_len
            slot = np.array([c[0] for c in cats])[idx]
            ds = np.array([c[1] for c in cats], dtype=bool)[idx]
            di = np.array([c[2] for c in cats], dtype=bool)[idx]
            # delta_t = -tau: signal short, idler long; +tau: the reverse.
            ts = t0 + np.where(slot > 0, tau, 0.0)
            ti = t0 + np.where(slot < 0, tau, 0.0)
            sig_parts.append(ts[ds])
            idl_parts.append(ti[di])
    n_bs = rng.poisson(bg_s * t_len)
    n_bi = rng.poisson(bg_i * t_len)
    sig_parts.append(t_start + rng.random(n_bs) * t_len)
    idl_parts.append(t_start + rng.random(n_bi) * t_len)
    ts = np.concatenate(sig_parts)
    ti = np.concatenate(idl_parts)
    if sig_jit > 0:
        ts = ts + rng.normal(0.0, sig_jit, ts.size)
    if idl_jit > 0:
        ti = ti + rng.normal(0.0, idl_jit, ti.size)
    # TCSPC quantization after jitter
    return np.floor(ts / resolution), np.floor(ti / resolution)


def simulate_run(
    state: TwoPhotonState,
    source: SourceModel,
    det_s: DetectorModel,
    det_i: DetectorModel,
    duration: float,
    seed: int,
    *,
    port_pair: str = "EF",
    tau: float = 100e-12,
    insertion_loss_db: float = 0.0,
    resolution: float = DEFAULT_BIN_WIDTH,
    chunks: int = 1,
) -> TimestampStreams:
    """Sample detector click streams for one acquisition.

    Pairs arrive as a Poisson process at ``source.pair_rate``.  Only pairs
    that produce at least one click are drawn (Poisson thinning), which has
    the same distribution as sampling every pair and discarding the lost
    photons.  Noise (source accidentals + dark counts) is an independent
    Poisson process per channel.  Output is identical for any ``chunks``.
    """
    if not duration > 0:
        raise ValueError("duration must be > 0")
    if state.total_probability() <= 0:
        raise ValueError("state has no amplitude")
    ports = resolve_port_pair(port_pair)
    trans = 10 ** (-insertion_loss_db / 10)
    cats = _outcome_table(state, ports, det_s.efficiency * trans, det_i.efficiency * trans)
    bg_s = source.accidental_singles_rate[0] + det_s.dark_count_rate
    bg_i = source.accidental_singles_rate[1] + det_i.dark_count_rate

    n_blocks = max(1, math.ceil(duration / BLOCK_DURATION - 1e-12))
    seeds = np.random.SeedSequence(seed).spawn(n_blocks)

    def run(k: int):
        start = k * BLOCK_DURATION
        length = min(BLOCK_DURATION, duration - start)
        return _simulate_block(
            np.random.default_rng(seeds[k]), start, length, source.pair_rate, cats, tau,
            bg_s, bg_i, det_s.jitter_sigma, det_i.jitter_sigma, resolution,
        )

    if chunks > 1:
        groups = np.array_split(np.arange(n_blocks), chunks)
        with ThreadPoolExecutor(max_workers=chunks) as ex:
            grouped = list(ex.map(lambda g: [run(k) for k in g], groups))
        parts = [r for g in grouped for r in g]
    else:
        parts = [run(k) for k in range(n_blocks)]
    ts = np.sort(np.concatenate([p[0] for p in parts])) * resolution
    ti = np.sort(np.concatenate([p[1] for p in parts])) * resolution
    return TimestampStreams(ts, ti, duration, resolution)


# --- correlation ------------------------------------------------------------


def _check_sorted(x: np.ndarray, name: str):
    if x.size > 1 and np.any(np.diff(x) < 0):
        raise ValueError(f"{name} timestamps must be sorted")


def pair_differences(ts_signal, ts_idler, half_window: float) -> np.ndarray:
    """All t_s - t_i with |t_s - t_i| <= half_window, via a sorted sweep."""
    ts = np.asarray(ts_signal, dtype=float)
    ti = np.asarray(ts_idler, dtype=float)
    _check_sorted(ts, "signal")
    _check_sorted(ti, "idler")
    if ts.size == 0 or ti.size == 0:
        return np.zeros(0)
    eps = 1e-6 * half_window
    lo = np.searchsorted(ti, ts - half_window - eps, side="left")
    hi = np.searchsorted(ti, ts + half_window + eps, side="right")
    n = hi - lo
    total = int(n.sum())
    if total == 0:
        return np.zeros(0)
    owner = np.repeat(np.arange(ts.size), n)
    offsets = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
    dt = ts[owner] - ti[lo[owner] + offsets]
    return dt[np.abs(dt) <= half_window + eps]


def correlate(
    ts_signal,
    ts_idler,
    bin_width: float = DEFAULT_BIN_WIDTH,
    window: float = DEFAULT_WINDOW,
    *,
    acquisition_time: float = 0.0,
    tau: float | None = None,
) -> CoincidenceHistogram:
    """Start-multistop histogram of t_s - t_i over +/- window/2.

    Bins are centered on integer multiples of ``bin_width``.
    """
    if not bin_width > 0 or not window > 0:
        raise ValueError("bin_width and window must be > 0")
    if tau is not None and window / 2 < 2 * tau:
        raise ValueError("window must span at least +/-2 tau")
    n_half = int(round(window / 2 / bin_width))
    dt = pair_differences(ts_signal, ts_idler, n_half * bin_width)
    k = np.rint(dt / bin_width).astype(np.int64) + n_half
    k = k[(k >= 0) & (k <= 2 * n_half)]
    counts = np.bincount(k, minlength=2 * n_half + 1)
    return CoincidenceHistogram(
        bin_width=bin_width,
        origin=-(n_half + 0.5) * bin_width,
        counts=counts,
        acquisition_time=acquisition_time,
        total_singles=(len(ts_signal), len(ts_idler)),
    )


def correlate_streams(streams: TimestampStreams, bin_width=DEFAULT_BIN_WIDTH, window=DEFAULT_WINDOW):
    return correlate(streams.signal, streams.idler, bin_width, window, acquisition_time=streams.duration)


def _filter_bins(h: CoincidenceHistogram, f: TimeFilter) -> slice:
    # half-open [center - w/2, center + w/2) on bin centers; 88 ps / 4 ps -> 22 bins
    first_center = h.origin + 0.5 * h.bin_width
    lo = math.ceil((f.center - f.width / 2 - first_center) / h.bin_width - 1e-9)
    hi = math.ceil((f.center + f.width / 2 - first_center) / h.bin_width - 1e-9)
    if lo < 0 or hi > h.counts.size:
        raise ValueError(
            f"filter [{(f.center - f.width / 2) * 1e12:.1f}, {(f.center + f.width / 2) * 1e12:.1f}) ps "
            "lies outside the histogram range"
        )
    return slice(lo, hi)


def filtered_counts(h: CoincidenceHistogram, f: TimeFilter) -> int:
    return int(h.counts[_filter_bins(h, f)].sum())


def estimate_car(
    h: CoincidenceHistogram,
    signal_filter: TimeFilter = TimeFilter(),
    background_offsets: Sequence[float] = DEFAULT_BACKGROUND_OFFSETS,
    tau: float = 100e-12,
) -> CarEstimate:
    """Coincidence-to-accidental ratio from shifted copies of the time filter.

    The error combines Poisson noise of the signal window and of the summed
    background windows.
    """
    if not background_offsets:
        raise ValueError("need at least one background offset")
    peaks = (-tau, 0.0, tau)
    for off in background_offsets:
        c = signal_filter.center + off
        for p in peaks:
            if abs(c - (signal_filter.center + p)) < signal_filter.width:
                raise ValueError(
                    f"background window at offset {off * 1e12:.1f} ps overlaps the peak at {p * 1e12:.1f} ps"
                )
    sig = filtered_counts(h, signal_filter)
    bg = [filtered_counts(h, signal_filter.shifted(o)) for o in background_offsets]
    bg_total = sum(bg)
    mean = bg_total / len(bg)
    if bg_total == 0:
        return CarEstimate(math.inf, math.inf, sig, 0.0)
    car = sig / mean
    rel = math.sqrt((1.0 / sig if sig else 0.0) + 1.0 / bg_total)
    return CarEstimate(car, car * rel, sig, mean)


# --- analytic expectations --------------------------------------------------


def _window_fraction(center: float, sigma: float, f: TimeFilter, bin_width: float) -> float:
    """Probability that a peak at ``center`` lands in the filter's bins."""
    lo = f.center - f.width / 2 - bin_width / 2
    hi = f.center + f.width / 2 - bin_width / 2
    if sigma == 0:
        return float(lo <= center < hi)
    return float(ndtr((hi - center) / sigma) - ndtr((lo - center) / sigma))


@dataclass(frozen=True)
class ExpectedCounts:
    central: float  # true coincidences from the delta_t = 0 slot landing in the filter
    side_leak: float  # true coincidences from the +/-tau slots landing in the filter
    accidental: float
    singles_s: float
    singles_i: float
    side_minus: float  # true counts of the -tau slot in a filter centered on -tau
    side_plus: float

    @property
    def window_total(self) -> float:
        return self.central + self.side_leak + self.accidental

    @property
    def car(self) -> float:
        return math.inf if self.accidental == 0 else self.window_total / self.accidental


def expected_counts(
    state: TwoPhotonState,
    source: SourceModel,
    det_s: DetectorModel,
    det_i: DetectorModel,
    duration: float,
    *,
    port_pair: str = "EF",
    tau: float = 100e-12,
    insertion_loss_db: float = 0.0,
    f: TimeFilter = TimeFilter(),
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> ExpectedCounts:
    """Closed-form mean counts from state probabilities and detector parameters."""
    sp, ip = resolve_port_pair(port_pair)
    trans = 10 ** (-insertion_loss_db / 10)
    es, ei = det_s.efficiency * trans, det_i.efficiency * trans
    p = state.probabilities()
    R = source.pair_rate * duration
    coinc = R * es * ei * p[sp, ip, :]  # per slot
    # quantization of both stamps adds bin_width^2/12 variance each
    sigma = math.sqrt(det_s.jitter_sigma**2 + det_i.jitter_sigma**2 + (
        bin_width**2 / 6 if (det_s.jitter_sigma or det_i.jitter_sigma) else 0.0))
    frac = [_window_fraction(s * tau, sigma, f, bin_width) for s in SLOTS]
    singles_s = R * es * p[sp].sum() + (source.accidental_singles_rate[0] + det_s.dark_count_rate) * duration
    singles_i = R * ei * p[:, ip].sum() + (source.accidental_singles_rate[1] + det_i.dark_count_rate) * duration
    acc = singles_s * singles_i * f.width / duration
    side_frac = [_window_fraction(s * tau, sigma, f.shifted(s * tau), bin_width) for s in (-1, 1)]
    return ExpectedCounts(
        central=coinc[1] * frac[1],
        side_leak=coinc[0] * frac[0] + coinc[2] * frac[2],
        accidental=acc,
        singles_s=singles_s,
        singles_i=singles_i,
        side_minus=coinc[0] * side_frac[0],
        side_plus=coinc[2] * side_frac[1],
    )


def combined_fwhm(det_s: DetectorModel, det_i: DetectorModel, bin_width: float = DEFAULT_BIN_WIDTH) -> float:
    """Peak FWHM expected from two Gaussian jitters plus timestamp quantization."""
    sigma2 = det_s.jitter_sigma**2 + det_i.jitter_sigma**2 + bin_width**2 / 6
    return math.sqrt(sigma2) / FWHM_TO_SIGMA


# --- phase sweep ------------------------------------------------------------


def phase_sweep(
    cfg_base: UmziConfig,
    source: SourceModel,
    det_s: DetectorModel,
    det_i: DetectorModel,
    port_pair: str,
    phases: Sequence[float],
    duration: float,
    seed: int,
    *,
    f: TimeFilter = TimeFilter(),
    bin_width: float = DEFAULT_BIN_WIDTH,
    window: float = DEFAULT_WINDOW,
    chunks: int = 1,
) -> FringeScan:
    phases = np.asarray(phases, dtype=float)
    if phases.size == 0:
        raise ValueError("phase list is empty")
    seeds = np.random.SeedSequence(seed).generate_state(phases.size, dtype=np.uint64)
    coinc, ss, si, sm, spl = [], [], [], [], []
    for phi, s in zip(phases, seeds):
        cfg = cfg_base.with_phase(float(phi))
        streams = simulate_run(
            evolve_umzi(cfg), source, det_s, det_i, duration, int(s),
            port_pair=port_pair, tau=cfg.tau, insertion_loss_db=cfg.insertion_loss_db,
            resolution=bin_width, chunks=chunks,
        )
        h = correlate_streams(streams, bin_width, window)
        coinc.append(filtered_counts(h, f))
        sm.append(filtered_counts(h, f.shifted(-cfg.tau)))
        spl.append(filtered_counts(h, f.shifted(cfg.tau)))
        ss.append(streams.signal.size)
        si.append(streams.idler.size)
    return FringeScan(
        phis=phases,
        coincidences=np.array(coinc, dtype=np.int64),
        singles_s=np.array(ss, dtype=np.int64),
        singles_i=np.array(si, dtype=np.int64),
        side_minus=np.array(sm, dtype=np.int64),
        side_plus=np.array(spl, dtype=np.int64),
        port_pair=port_pair,
        duration=duration,
    )
