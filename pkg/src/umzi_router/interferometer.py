"""Two-photon amplitude propagation through an unbalanced Mach-Zehnder interferometer.

Conventions
-----------
Couplers: the bar (straight-through) amplitude is ``sqrt(r)`` and the cross
amplitude is ``1j * sqrt(1 - r)``.  Input mode ``a`` goes bar into the short
arm S; the short arm goes bar to output ``c`` and the long arm L goes bar to
output ``d``.

Phase: every photon that takes the long arm picks up ``exp(1j * (theta0/2 + phi))``.
A bunched LL pair therefore carries ``exp(1j * (theta0 + 2*phi))`` relative to
SS, which is where the pi-periodic fringe in phi comes from.  Splitting
``theta0`` evenly between the two photons only fixes the (unobservable) global
phase of each side slot, and makes every amplitude depend on ``phi`` and
``theta0`` solely through ``theta0 + 2*phi``.

Time slots are indexed by ``delta_t = t_signal - t_idler`` in units of tau:
slot 0 is ``-tau`` (signal short, idler long), slot 1 is ``0``, slot 2 is ``+tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .source import SourceModel

PORTS = ("c", "d")
SLOTS = (-1, 0, 1)
CENTRAL = 1

BUNCHED = "bunched"
ANTIBUNCHED = "antibunched"


@dataclass(frozen=True)
class UmziConfig:
    tau: float = 100e-12  # s
    phi: float = 0.0  # rad
    theta0: float = 0.0  # rad, (omega_s + omega_i) * tau mod 2 pi
    coupler_ratio: float = 0.5
    coherence_factor: float = 1.0
    insertion_loss_db: float = 4.2

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not 0 < self.coupler_ratio < 1:
            raise ValueError(f"coupler_ratio must lie in (0, 1), got {self.coupler_ratio}")
        if not 0 <= self.coherence_factor <= 1:
            raise ValueError(f"coherence_factor must lie in [0, 1], got {self.coherence_factor}")
        if self.insertion_loss_db < 0:
            raise ValueError("insertion_loss_db must be non-negative")

    @property
    def total_phase(self) -> float:
        return self.theta0 + 2 * self.phi

    @property
    def transmission(self) -> float:
        return 10 ** (-self.insertion_loss_db / 10)

    def with_phase(self, phi: float) -> "UmziConfig":
        return replace(self, phi=phi)

    def to_dict(self) -> dict:
        return {
            "tau_s": self.tau,
            "phi_rad": self.phi,
            "theta0_rad": self.theta0,
            "coupler_ratio": self.coupler_ratio,
            "coherence_factor": self.coherence_factor,
            "insertion_loss_db": self.insertion_loss_db,
        }


@dataclass
class TwoPhotonState:
    """Output state over (signal port, idler port, delta_t slot).

    ``amplitudes`` holds the coherent part; ``incoherent`` holds probability
    that reaches the central slot without interfering (partial two-photon
    coherence).  Both arrays have shape (2, 2, 3).
    """

    amplitudes: np.ndarray
    incoherent: np.ndarray = field(default_factory=lambda: np.zeros((2, 2, 3)))
    normalized: bool = True

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def probabilities(self) -> np.ndarray:
        """Detection probability of each basis label (coherent + incoherent)."""
        return np.abs(self.amplitudes) ** 2 + self.incoherent

    def total_probability(self) -> float:
        return float(self.probabilities().sum())

    def amplitude(self, signal_port: str, idler_port: str, slot: int) -> complex:
        return complex(self.amplitudes[PORTS.index(signal_port), PORTS.index(idler_port), SLOTS.index(slot)])

    def as_dict(self) -> dict:
        return {
            (s, i, t): complex(self.amplitudes[a, b, k])
            for a, s in enumerate(PORTS)
            for b, i in enumerate(PORTS)
            for k, t in enumerate(SLOTS)
        }


@dataclass(frozen=True)
class RoutingProbabilities:
    p_bunched: float
    p_antibunched: float


def _coupler(ratio: float) -> np.ndarray:
    # rows: input (0 = bar-side mode), cols: output
    t = math.sqrt(ratio)
    x = 1j * math.sqrt(1 - ratio)
    return np.array([[t, x], [x, t]], dtype=complex)


def first_coupler_state(ratio: float = 0.5) -> dict[str, complex]:
    """Arm amplitudes after the first coupler for both photons entering mode ``a``.

    Keys are ``<signal arm><idler arm>`` with S = short, L = long.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"coupler ratio must lie in (0, 1), got {ratio}")
    a = _coupler(ratio)[0]
    arms = "SL"
    return {arms[p] + arms[q]: complex(a[p] * a[q]) for p in range(2) for q in range(2)}


def evolve_umzi(cfg: UmziConfig, source: SourceModel | None = None) -> TwoPhotonState:
    if source is not None:
        tcoh = max(source.signal.single_photon_coherence_time, source.idler.single_photon_coherence_time)
        if not cfg.tau > tcoh:
            raise ValueError(
                f"tau ({cfg.tau:.3g} s) must exceed the single-photon coherence time ({tcoh:.3g} s)"
            )
    first = _coupler(cfg.coupler_ratio)[0]
    second = _coupler(cfg.coupler_ratio)
    arm_phase = np.array([1.0, np.exp(1j * (cfg.theta0 / 2 + cfg.phi))])
    # arm amplitude of a single photon entering at mode a, then exiting port
    # single[arm, port]
    single = (first * arm_phase)[:, None] * second

    # pair[s_arm, i_arm, s_port, i_port]
    pair = np.einsum("ap,bq->abpq", single, single)
    gamma = cfg.coherence_factor

    amps = np.zeros((2, 2, 3), dtype=complex)
    incoherent = np.zeros((2, 2, 3))
    # slot index = 1 + (s_arm - i_arm)
    amps[:, :, 0] = pair[0, 1]
    amps[:, :, 2] = pair[1, 0]
    amps[:, :, 1] = math.sqrt(gamma) * (pair[0, 0] + pair[1, 1])
    incoherent[:, :, 1] = (1 - gamma) * (np.abs(pair[0, 0]) ** 2 + np.abs(pair[1, 1]) ** 2)
    return TwoPhotonState(amps, incoherent, normalized=True)


def postselect_central(state: TwoPhotonState) -> TwoPhotonState:
    """Keep only the delta_t = 0 slot; the result is sub-normalized."""
    amps = np.zeros_like(state.amplitudes)
    inc = np.zeros_like(state.incoherent)
    amps[:, :, CENTRAL] = state.amplitudes[:, :, CENTRAL]
    inc[:, :, CENTRAL] = state.incoherent[:, :, CENTRAL]
    return TwoPhotonState(amps, inc, normalized=False)


def conditional_probabilities(state: TwoPhotonState) -> RoutingProbabilities:
    """Bunched/antibunched split of whatever probability the state carries."""
    p = state.probabilities().sum(axis=2)
    total = p.sum()
    if total <= 0:
        raise ValueError("state carries no probability")
    bunched = (p[0, 0] + p[1, 1]) / total
    return RoutingProbabilities(float(bunched), float(1 - bunched))


def routing_probabilities(cfg: UmziConfig) -> RoutingProbabilities:
    """Closed-form routing split for balanced couplers, conditioned on post-selection.

    The coherence factor scales the fringe: P1 = (1 + gamma cos(theta0 + 2 phi)) / 2.
    """
    c = cfg.coherence_factor * math.cos(cfg.total_phase)
    return RoutingProbabilities(0.5 * (1 + c), 0.5 * (1 - c))


def pure_state_phase(port: str, k: int = 0, theta0: float = 0.0) -> float:
    """Modulator phase that sends all post-selected pairs to ``port``."""
    if port == BUNCHED:
        target = 0.0
    elif port == ANTIBUNCHED:
        target = math.pi
    else:
        raise ValueError(f"port must be {BUNCHED!r} or {ANTIBUNCHED!r}, got {port!r}")
    return (target - theta0) / 2 + k * math.pi


def coherence_factor(coherence_time: float, tau: float) -> float:
    """Linear-overlap model: 0 for T_c <= tau, tending to 1 for T_c >> tau."""
    if not coherence_time > 0 or not tau > 0:
        raise ValueError("coherence time and tau must both be positive")
    return max(0.0, 1.0 - tau / coherence_time)


def singles_marginals(state: TwoPhotonState) -> tuple[np.ndarray, np.ndarray]:
    """Per-port detection probability of the signal and the idler photon."""
    p = state.probabilities()
    return p.sum(axis=(1, 2)), p.sum(axis=(0, 2))
