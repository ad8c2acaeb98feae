"""JSON experiment configuration: defaults, dotted-path overrides, strict validation.

Every key in a user file must exist in ``DEFAULTS``; anything else is an
error that names the full dotted path and the closest known key.
"""

from __future__ import annotations

import copy
import difflib
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .coincidence import DetectorModel, PORT_PAIRS, TimeFilter
from .interferometer import UmziConfig, coherence_factor
from .source import SourceModel, SpectralMode, pump_wavelength_for

SCENARIOS = ("fig3", "fig4", "fig5", "sweep", "simulate")

DEFAULTS: dict = {
    "seed": 2014,
    "source": {
        # null: derive from the signal/idler pair by energy conservation
        "pump_wavelength_nm": None,
        "signal": {"center_wavelength_nm": 1555.75, "bandwidth_3db_hz": 32e9, "filter_order": 3},
        "idler": {"center_wavelength_nm": 1549.32, "bandwidth_3db_hz": 32e9, "filter_order": 3},
        "two_photon_coherence_time_s": 10e-6,
        "pair_rate_hz": 2e7,
        "accidental_singles_rate_hz": [6e5, 6e5],
    },
    "umzi": {
        "tau_s": 100e-12,
        "phi_rad": 0.0,
        "theta0_rad": 0.0,
        "coupler_ratio": 0.5,
        # null: derive from the two-photon coherence time and tau
        "coherence_factor": None,
        "insertion_loss_db": 4.2,
    },
    "detectors": {
        "signal": {"efficiency": 0.06, "dark_count_rate_hz": 10.0, "jitter_fwhm_s": 25e-12, "id": "SNSPD1"},
        "idler": {"efficiency": 0.04, "dark_count_rate_hz": 10.0, "jitter_fwhm_s": 44e-12, "id": "SNSPD2"},
    },
    "acquisition": {
        "bin_width_s": 4e-12,
        "window_s": 800e-12,
        "filter_width_s": 88e-12,
        "background_offsets_s": [-350e-12, -250e-12, 250e-12, 350e-12],
        "chunks": 1,
    },
    "fig3": {
        "phases_rad": [math.pi / 2, math.pi],
        "duration_s": 10.0,
        "port_pair": "EF",
        "n_peaks": 3,
    },
    "fig4": {
        "n_phases": 24,
        "duration_s": 1.0,
        "antibunched_pair": "EF",
        "bunched_pair": "DE",
    },
    "fig5": {
        "v0": 0.99,
        "n_delays": 64,
        "max_delay_s": 5e-12,
        "duration_s": 1.0,
        "k": 1,
        # noise level of the beating measurement, separate from the router runs
        "accidental_singles_rate_hz": [0.0, 0.0],
    },
    "sweep": {
        "port_pair": "EF",
        "n_phases": 24,
        "duration_s": 1.0,
    },
    "simulate": {
        "port_pair": "EF",
        "duration_s": 1.0,
    },
}

# Keys whose default is null but which accept a number.
_NULLABLE_NUMBERS = {"source.pump_wavelength_nm", "umzi.coherence_factor"}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


@dataclass
class ExperimentConfig:
    source: SourceModel
    umzi: UmziConfig
    det_s: DetectorModel
    det_i: DetectorModel
    raw: dict
    scenario: str | None = None
    seed: int = 0
    bin_width: float = 4e-12
    window: float = 800e-12
    time_filter: TimeFilter = field(default_factory=TimeFilter)
    background_offsets: tuple[float, ...] = ()
    chunks: int = 1

    def section(self, name: str) -> dict:
        return self.raw[name]

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


# --- merging ----------------------------------------------------------------


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


_UNITS = ("s", "rad", "hz", "nm", "db")


def _closest(key: str, known: list[str]) -> str | None:
    """Best fuzzy match, also scoring each known key with its unit suffix removed."""
    def score(k):
        stem, _, unit = k.rpartition("_")
        stems = [k, stem] if stem and unit in _UNITS else [k]
        return max(difflib.SequenceMatcher(None, key.lower(), c.lower()).ratio() for c in stems)

    best = max(known, key=score, default=None)
    return best if best is not None and score(best) >= 0.5 else None


def _merge(base: dict, user: dict, prefix: str, problems: list[str]) -> dict:
    out = copy.deepcopy(base)
    for key, value in user.items():
        path = f"{prefix}{key}"
        if key not in base:
            close = _closest(key, list(base))
            hint = f"; did you mean '{prefix}{close}'?" if close else ""
            problems.append(f"{path}: unknown key{hint}")
            continue
        default = base[key]
        if isinstance(default, dict):
            if not isinstance(value, dict):
                problems.append(f"{path}: expected an object")
                continue
            out[key] = _merge(default, value, path + ".", problems)
            continue
        if default is None:
            if value is not None and not (path in _NULLABLE_NUMBERS and _is_number(value)):
                problems.append(f"{path}: expected a number or null")
                continue
        elif _is_number(default):
            if not _is_number(value):
                problems.append(f"{path}: expected a number, got {type(value).__name__}")
                continue
            if isinstance(default, int) and not isinstance(value, int):
                if float(value).is_integer():
                    value = int(value)
                else:
                    problems.append(f"{path}: expected an integer")
                    continue
        elif isinstance(default, str):
            if not isinstance(value, str):
                problems.append(f"{path}: expected a string")
                continue
        elif isinstance(default, list):
            if not isinstance(value, list) or not all(_is_number(v) for v in value):
                problems.append(f"{path}: expected a list of numbers")
                continue
        out[key] = value
    return out


def _set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError([f"{dotted}: '{k}' is not an object"])
    cur[keys[-1]] = value


def parse_override(item: str) -> tuple[str, object]:
    """``key.path=value``; the value is read as JSON when possible, else as a string."""
    if "=" not in item:
        raise ConfigError([f"--set {item!r}: expected key=value"])
    key, text = item.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return key.strip(), value


# --- validation -------------------------------------------------------------


def _check_ranges(c: dict, problems: list[str]) -> None:
    def need(path, ok, msg):
        if not ok:
            problems.append(f"{path}: {msg}")

    s = c["source"]
    for ch in ("signal", "idler"):
        m = s[ch]
        need(f"source.{ch}.center_wavelength_nm", m["center_wavelength_nm"] > 0, "must be > 0")
        need(f"source.{ch}.bandwidth_3db_hz", m["bandwidth_3db_hz"] > 0, "must be > 0")
        need(f"source.{ch}.filter_order", m["filter_order"] >= 1, "must be >= 1")
    if s["pump_wavelength_nm"] is not None:
        need("source.pump_wavelength_nm", s["pump_wavelength_nm"] > 0, "must be > 0")
    need("source.two_photon_coherence_time_s", s["two_photon_coherence_time_s"] > 0, "must be > 0")
    need("source.pair_rate_hz", s["pair_rate_hz"] >= 0, "must be >= 0")
    rates = s["accidental_singles_rate_hz"]
    need("source.accidental_singles_rate_hz", len(rates) == 2 and min(rates) >= 0,
         "needs two non-negative rates [signal, idler]")

    u = c["umzi"]
    need("umzi.tau_s", u["tau_s"] > 0, "must be > 0")
    need("umzi.coupler_ratio", 0 < u["coupler_ratio"] < 1, f"must lie in (0, 1), got {u['coupler_ratio']}")
    if u["coherence_factor"] is not None:
        need("umzi.coherence_factor", 0 <= u["coherence_factor"] <= 1, "must lie in [0, 1]")
    need("umzi.insertion_loss_db", u["insertion_loss_db"] >= 0, "must be >= 0")

    for ch in ("signal", "idler"):
        d = c["detectors"][ch]
        need(f"detectors.{ch}.efficiency", 0 <= d["efficiency"] <= 1, "must lie in [0, 1]")
        need(f"detectors.{ch}.dark_count_rate_hz", d["dark_count_rate_hz"] >= 0, "must be >= 0")
        need(f"detectors.{ch}.jitter_fwhm_s", d["jitter_fwhm_s"] >= 0, "must be >= 0")

    a = c["acquisition"]
    need("acquisition.bin_width_s", a["bin_width_s"] > 0, "must be > 0")
    need("acquisition.filter_width_s", a["filter_width_s"] > 0, "must be > 0")
    need("acquisition.window_s", a["window_s"] >= 4 * u["tau_s"], "must span at least +/-2 tau")
    need("acquisition.chunks", a["chunks"] >= 1, "must be >= 1")
    need("acquisition.background_offsets_s", len(a["background_offsets_s"]) > 0, "must not be empty")

    for name in ("fig3", "fig4", "fig5", "sweep", "simulate"):
        need(f"{name}.duration_s", c[name]["duration_s"] > 0, "must be > 0")
    for path, pair in (("fig3.port_pair", c["fig3"]["port_pair"]),
                       ("fig4.antibunched_pair", c["fig4"]["antibunched_pair"]),
                       ("fig4.bunched_pair", c["fig4"]["bunched_pair"]),
                       ("sweep.port_pair", c["sweep"]["port_pair"]),
                       ("simulate.port_pair", c["simulate"]["port_pair"])):
        need(path, pair.upper() in PORT_PAIRS, f"must be one of {', '.join(PORT_PAIRS)}")
    need("fig3.phases_rad", len(c["fig3"]["phases_rad"]) >= 1, "must not be empty")
    need("fig3.n_peaks", c["fig3"]["n_peaks"] >= 1, "must be >= 1")
    need("fig4.n_phases", c["fig4"]["n_phases"] >= 6, "must be >= 6")
    need("sweep.n_phases", c["sweep"]["n_phases"] >= 6, "must be >= 6")
    f5 = c["fig5"]
    need("fig5.v0", 0 <= f5["v0"] <= 1, "must lie in [0, 1]")
    need("fig5.n_delays", f5["n_delays"] >= 8, "must be >= 8")
    need("fig5.max_delay_s", f5["max_delay_s"] > 0, "must be > 0")
    need("fig5.accidental_singles_rate_hz", len(f5["accidental_singles_rate_hz"]) == 2
         and min(f5["accidental_singles_rate_hz"]) >= 0, "needs two non-negative rates")


def _build(c: dict, problems: list[str]) -> ExperimentConfig | None:
    s = c["source"]
    try:
        signal = SpectralMode.from_dict(s["signal"])
        idler = SpectralMode.from_dict(s["idler"])
        pump = s["pump_wavelength_nm"]
        if pump is None:
            pump = pump_wavelength_for(signal.center_wavelength, idler.center_wavelength)
        source = SourceModel(
            pump_wavelength=float(pump),
            signal=signal,
            idler=idler,
            two_photon_coherence_time=s["two_photon_coherence_time_s"],
            pair_rate=s["pair_rate_hz"],
            accidental_singles_rate=tuple(s["accidental_singles_rate_hz"]),
        )
    except ValueError as e:
        problems.append(f"source: {e}")
        return None
    u = c["umzi"]
    gamma = u["coherence_factor"]
    if gamma is None:
        gamma = coherence_factor(source.two_photon_coherence_time, u["tau_s"])
    try:
        umzi = UmziConfig(
            tau=u["tau_s"], phi=u["phi_rad"], theta0=u["theta0_rad"], coupler_ratio=u["coupler_ratio"],
            coherence_factor=gamma, insertion_loss_db=u["insertion_loss_db"],
        )
    except ValueError as e:
        problems.append(f"umzi: {e}")
        return None
    tcoh = max(signal.single_photon_coherence_time, idler.single_photon_coherence_time)
    if not umzi.tau > tcoh:
        problems.append(f"umzi.tau_s: must exceed the single-photon coherence time ({tcoh:.3g} s)")
    dets = []
    for ch in ("signal", "idler"):
        d = c["detectors"][ch]
        dets.append(DetectorModel(d["efficiency"], d["dark_count_rate_hz"], d["jitter_fwhm_s"], d["id"]))
    a = c["acquisition"]
    tf = TimeFilter(0.0, a["filter_width_s"])
    for off in a["background_offsets_s"]:
        for peak in (-umzi.tau, 0.0, umzi.tau):
            if abs(off - peak) < tf.width:
                problems.append(
                    f"acquisition.background_offsets_s: offset {off:.3g} s overlaps the peak at {peak:.3g} s"
                )
        if abs(off) + tf.width / 2 > a["window_s"] / 2:
            problems.append(f"acquisition.background_offsets_s: offset {off:.3g} s falls outside the window")
    return ExperimentConfig(
        source=source, umzi=umzi, det_s=dets[0], det_i=dets[1], raw=c, seed=int(c["seed"]),
        bin_width=a["bin_width_s"], window=a["window_s"], time_filter=tf,
        background_offsets=tuple(a["background_offsets_s"]), chunks=int(a["chunks"]),
    )


def build_config(user: dict | None = None, overrides: list[str] | None = None,
                 seed: int | None = None, scenario: str | None = None) -> ExperimentConfig:
    """Merge defaults < file < overrides, validate, and build the typed config."""
    problems: list[str] = []
    user = copy.deepcopy(user or {})
    if not isinstance(user, dict):
        raise ConfigError(["<root>: expected a JSON object"])
    for item in overrides or []:
        key, value = parse_override(item)
        _set_path(user, key, value)
    if seed is not None:
        user["seed"] = seed
    merged = _merge(DEFAULTS, user, "", problems)
    if problems:
        raise ConfigError(problems)
    _check_ranges(merged, problems)
    if problems:
        raise ConfigError(problems)
    cfg = _build(merged, problems)
    if problems:
        raise ConfigError(problems)
    cfg.scenario = scenario
    return cfg


def validate_and_load(path, overrides=None, seed=None, scenario=None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError([f"{path}: {e.strerror or e}"]) from e
    try:
        user = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"{path}:{e.lineno}:{e.colno}: malformed JSON ({e.msg})"]) from e
    if not isinstance(user, dict):
        raise ConfigError([f"{path}: top level must be a JSON object"])
    return build_config(user, overrides, seed, scenario)


def default_config_dict() -> dict:
    return copy.deepcopy(DEFAULTS)
