"""Simulation of a phase-controlled two-photon router built from an unbalanced Mach-Zehnder interferometer."""

__version__ = "0.1.0"

from .source import SourceModel, SpectralMode, reference_source, frequency_spacing  # noqa: E402
from .interferometer import (  # noqa: E402
    RoutingProbabilities,
    TwoPhotonState,
    UmziConfig,
    coherence_factor,
    evolve_umzi,
    first_coupler_state,
    postselect_central,
    pure_state_phase,
    routing_probabilities,
)
from .coincidence import (  # noqa: E402
    CoincidenceHistogram,
    DetectorModel,
    TimeFilter,
    correlate,
    estimate_car,
    filtered_counts,
    phase_sweep,
    simulate_run,
)
from .beating import BeatingConfig, beating_period, beating_probability, fidelity_from_visibility  # noqa: E402
from .fitting import FitResult, fit_beating, fit_fringe, fit_gaussian_peaks, off_ratio_db  # noqa: E402
