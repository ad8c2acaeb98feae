"""Entangled-pair source parameters and the quantities derived from them.

All frequencies are stored in Hz (not rad/s) unless the name says
``angular``.  Wavelengths are vacuum wavelengths in nm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

C = 299_792_458.0  # m/s

# |2 nu_p - nu_s - nu_i| must stay below this (Hz).
ENERGY_TOLERANCE_HZ = 1e9


def wavelength_to_frequency(wavelength_nm: float) -> float:
    return C / (wavelength_nm * 1e-9)


def frequency_to_wavelength(frequency_hz: float) -> float:
    return C / frequency_hz * 1e9


@dataclass(frozen=True)
class SpectralMode:
    """One filtered photon channel (signal or idler)."""

    center_wavelength: float  # nm
    bandwidth_3db: float  # Hz
    filter_order: int = 3

    def __post_init__(self):
        if not self.center_wavelength > 0:
            raise ValueError(f"center_wavelength must be > 0, got {self.center_wavelength}")
        if not self.bandwidth_3db > 0:
            raise ValueError(f"bandwidth_3db must be > 0, got {self.bandwidth_3db}")
        if int(self.filter_order) != self.filter_order or self.filter_order < 1:
            raise ValueError(f"filter_order must be a positive integer, got {self.filter_order}")

    @property
    def center_frequency(self) -> float:
        return wavelength_to_frequency(self.center_wavelength)

    @property
    def angular_frequency(self) -> float:
        return 2 * math.pi * self.center_frequency

    @property
    def angular_bandwidth(self) -> float:
        """Filter bandwidth in rad/s, the envelope rate used by the beating model."""
        return 2 * math.pi * self.bandwidth_3db

    @property
    def single_photon_coherence_time(self) -> float:
        # order-of-magnitude estimate, 32 GHz -> 31.25 ps
        return 1.0 / self.bandwidth_3db

    def to_dict(self) -> dict:
        return {
            "center_wavelength_nm": self.center_wavelength,
            "bandwidth_3db_hz": self.bandwidth_3db,
            "filter_order": self.filter_order,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralMode":
        return cls(
            center_wavelength=float(d["center_wavelength_nm"]),
            bandwidth_3db=float(d["bandwidth_3db_hz"]),
            filter_order=int(d.get("filter_order", 3)),
        )


@dataclass(frozen=True)
class SourceModel:
    """Frequency-nondegenerate energy-time entangled pair source.

    ``accidental_singles_rate`` is a per-channel detected noise rate
    (Raman photons plus pump leakage) that is added on top of the detector
    dark counts; it is not scaled by detector efficiency.
    """

    pump_wavelength: float  # nm
    signal: SpectralMode
    idler: SpectralMode
    two_photon_coherence_time: float = 10e-6  # s
    pair_rate: float = 1e6  # pairs/s
    accidental_singles_rate: tuple[float, float] = field(default=(0.0, 0.0))  # (signal, idler) counts/s

    def __post_init__(self):
        object.__setattr__(
            self, "accidental_singles_rate", tuple(float(r) for r in self.accidental_singles_rate)
        )
        if len(self.accidental_singles_rate) != 2:
            raise ValueError("accidental_singles_rate needs one entry per channel")
        if any(r < 0 for r in self.accidental_singles_rate):
            raise ValueError("accidental_singles_rate must be non-negative")
        if not self.pump_wavelength > 0:
            raise ValueError("pump_wavelength must be > 0")
        if not self.two_photon_coherence_time > 0:
            raise ValueError("two_photon_coherence_time must be > 0")
        if self.pair_rate < 0:
            raise ValueError("pair_rate must be non-negative")
        mismatch = self.energy_mismatch
        if mismatch >= ENERGY_TOLERANCE_HZ:
            raise ValueError(
                f"energy conservation violated: |2 nu_p - nu_s - nu_i| = {mismatch:.4g} Hz "
                f"(tolerance {ENERGY_TOLERANCE_HZ:.0g} Hz)"
            )
        tcoh = max(self.signal.single_photon_coherence_time, self.idler.single_photon_coherence_time)
        if not self.two_photon_coherence_time > 100 * tcoh:
            raise ValueError(
                "two_photon_coherence_time must greatly exceed the single-photon coherence time"
            )

    @property
    def pump_frequency(self) -> float:
        return wavelength_to_frequency(self.pump_wavelength)

    @property
    def pump_angular_frequency(self) -> float:
        return 2 * math.pi * self.pump_frequency

    @property
    def energy_mismatch(self) -> float:
        """|2 nu_p - nu_s - nu_i| in Hz."""
        return abs(2 * self.pump_frequency - self.signal.center_frequency - self.idler.center_frequency)

    @property
    def frequency_sum(self) -> float:
        return self.signal.center_frequency + self.idler.center_frequency

    def to_dict(self) -> dict:
        return {
            "pump_wavelength_nm": self.pump_wavelength,
            "signal": self.signal.to_dict(),
            "idler": self.idler.to_dict(),
            "two_photon_coherence_time_s": self.two_photon_coherence_time,
            "pair_rate_hz": self.pair_rate,
            "accidental_singles_rate_hz": list(self.accidental_singles_rate),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SourceModel":
        return cls(
            pump_wavelength=float(d["pump_wavelength_nm"]),
            signal=SpectralMode.from_dict(d["signal"]),
            idler=SpectralMode.from_dict(d["idler"]),
            two_photon_coherence_time=float(d["two_photon_coherence_time_s"]),
            pair_rate=float(d["pair_rate_hz"]),
            accidental_singles_rate=tuple(d["accidental_singles_rate_hz"]),
        )


def pump_wavelength_for(signal_nm: float, idler_nm: float) -> float:
    """Pump wavelength (nm) that satisfies 2 nu_p = nu_s + nu_i exactly."""
    nu = 0.5 * (wavelength_to_frequency(signal_nm) + wavelength_to_frequency(idler_nm))
    return frequency_to_wavelength(nu)


# Nominal lab values.  The quoted pump (1552.16 nm) sits ~92 GHz away from the
# midpoint of the quoted filter centers, so the default source derives the pump
# from the signal/idler pair instead (1552.53 nm).
NOMINAL_PUMP_NM = 1552.16
SIGNAL_NM = 1555.75
IDLER_NM = 1549.32
FILTER_BANDWIDTH_HZ = 32e9


def reference_source(
    pair_rate: float = 2e7,
    accidental_singles_rate: tuple[float, float] = (0.0, 0.0),
    filter_order: int = 3,
) -> SourceModel:
    signal = SpectralMode(SIGNAL_NM, FILTER_BANDWIDTH_HZ, filter_order)
    idler = SpectralMode(IDLER_NM, FILTER_BANDWIDTH_HZ, filter_order)
    return SourceModel(
        pump_wavelength=pump_wavelength_for(SIGNAL_NM, IDLER_NM),
        signal=signal,
        idler=idler,
        two_photon_coherence_time=10e-6,
        pair_rate=pair_rate,
        accidental_singles_rate=accidental_singles_rate,
    )


def frequency_spacing(m: SourceModel) -> float:
    """|nu_i - nu_s| in Hz."""
    return abs(m.idler.center_frequency - m.signal.center_frequency)
