"""Scenario runners behind the CLI.  Each returns a report dict and writes its files to ``out``."""

from __future__ import annotations

import json
import math
import platform
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy
from scipy.stats import chi2

from . import __version__
from .beating import (
    beating_period,
    beating_rates,
    default_beating_config,
    fidelity_from_visibility,
    simulate_beating_scan,
)
from .coincidence import (
    combined_fwhm,
    correlate_streams,
    estimate_car,
    expected_counts,
    filtered_counts,
    phase_sweep,
    simulate_run,
)
from .config import ExperimentConfig
from .fitting import fit_beating, fit_fringe, fit_gaussian_peaks, off_ratio_db, visibility_off_ratio_db
from .interferometer import ANTIBUNCHED, evolve_umzi, pure_state_phase, routing_probabilities
from .source import frequency_spacing


def _seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)]


def _jsonable(obj):
    # strict JSON has no inf/nan
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_manifest(out: Path, cfg: ExperimentConfig, outputs: list[str]) -> None:
    _write_json(out / f"{cfg.scenario}_manifest.json", {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "config": cfg.raw,
        "outputs": outputs,
        "versions": {
            "umzi_router": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    })


def flatness_pvalue(counts) -> float:
    """Chi-square p-value of ``counts`` against a constant (Poisson) model."""
    c = np.asarray(counts, dtype=float)
    mean = c.mean()
    if mean == 0:
        return 1.0
    stat = float(np.sum((c - mean) ** 2) / mean)
    return float(chi2.sf(stat, c.size - 1))


def _simulate_hist(cfg: ExperimentConfig, phi: float, port_pair: str, duration: float, seed: int):
    umzi = cfg.umzi.with_phase(phi)
    state = evolve_umzi(umzi, cfg.source)
    streams = simulate_run(
        state, cfg.source, cfg.det_s, cfg.det_i, duration, seed,
        port_pair=port_pair, tau=umzi.tau, insertion_loss_db=umzi.insertion_loss_db,
        resolution=cfg.bin_width, chunks=cfg.chunks,
    )
    h = correlate_streams(streams, cfg.bin_width, cfg.window)
    exp = expected_counts(
        state, cfg.source, cfg.det_s, cfg.det_i, duration, port_pair=port_pair, tau=umzi.tau,
        insertion_loss_db=umzi.insertion_loss_db, f=cfg.time_filter, bin_width=cfg.bin_width,
    )
    return h, exp


def run_fig3(cfg: ExperimentConfig, out: Path) -> dict:
    """Coincidence histograms at each configured phase; peak fit and CAR on the first."""
    sec = cfg.section("fig3")
    phases = sec["phases_rad"]
    pair = sec["port_pair"]
    outputs, runs, hists = [], [], []
    for i, (phi, s) in enumerate(zip(phases, _seeds(cfg.seed, len(phases)))):
        h, exp = _simulate_hist(cfg, phi, pair, sec["duration_s"], s)
        name = f"fig3_histogram_{i}.csv"
        h.to_csv(out / name)
        outputs.append(name)
        hists.append(h)
        car = estimate_car(h, cfg.time_filter, cfg.background_offsets, cfg.umzi.tau)
        central = filtered_counts(h, cfg.time_filter)
        background = exp.accidental + exp.side_leak
        runs.append({
            "phi_rad": phi,
            "histogram": name,
            "central_counts": central,
            "expected_central_counts": exp.window_total,
            "expected_background_counts": background,
            "background_z": (central - background) / math.sqrt(background) if background > 0 else None,
            "car": car.car,
            "car_err": car.error,
            "expected_car": exp.car,
        })
    fit = fit_gaussian_peaks(hists[0], sec["n_peaks"])
    n = sec["n_peaks"]
    centers = [fit[f"center_{k}"] for k in range(n)]
    report = {
        "scenario": "fig3",
        "port_pair": pair,
        "runs": runs,
        "peak_fit": fit.to_dict(),
        "peak_centers_ps": [c * 1e12 for c in centers],
        "peak_spacing_ps": float(np.mean(np.diff(centers)) * 1e12) if n > 1 else None,
        "peak_fwhm_ps": [fit[f"fwhm_{k}"] * 1e12 for k in range(n)],
        "expected_fwhm_ps": combined_fwhm(cfg.det_s, cfg.det_i, cfg.bin_width) * 1e12,
    }
    _write_json(out / "fig3_report.json", report)
    outputs.append("fig3_report.json")
    write_manifest(out, cfg, outputs)
    return report


def _fringe_report(scan, fit, fit_free) -> dict:
    c = scan.coincidences
    ratio, ratio_err = off_ratio_db(float(c.max()), float(c.min())) if c.max() > 0 else (None, None)
    return {
        "port_pair": scan.port_pair,
        "fit": fit.to_dict(),
        "fit_free_period": fit_free.to_dict(),
        "visibility": fit.visibility,
        "visibility_err": fit.visibility_err,
        "off_ratio_db": ratio,
        "off_ratio_err_db": ratio_err,
        "visibility_off_ratio_db": visibility_off_ratio_db(fit.visibility),
        "singles_s_flatness_p": flatness_pvalue(scan.singles_s),
        "singles_i_flatness_p": flatness_pvalue(scan.singles_i),
        "side_minus_flatness_p": flatness_pvalue(scan.side_minus),
        "side_plus_flatness_p": flatness_pvalue(scan.side_plus),
    }


def _sweep(cfg: ExperimentConfig, pair: str, phases, duration: float, seed: int):
    scan = phase_sweep(
        cfg.umzi, cfg.source, cfg.det_s, cfg.det_i, pair, phases, duration, seed,
        f=cfg.time_filter, bin_width=cfg.bin_width, window=cfg.window, chunks=cfg.chunks,
    )
    return scan, fit_fringe(scan.phis, scan.coincidences), fit_fringe(scan.phis, scan.coincidences, free_period=True)


def run_fig4(cfg: ExperimentConfig, out: Path) -> dict:
    """Phase sweeps of an antibunched and a bunched port pair."""
    sec = cfg.section("fig4")
    phases = np.linspace(0, 2 * np.pi, sec["n_phases"], endpoint=False)
    s_anti, s_bunch = _seeds(cfg.seed, 2)
    anti, fa, fa_free = _sweep(cfg, sec["antibunched_pair"], phases, sec["duration_s"], s_anti)
    bunch, fb, fb_free = _sweep(cfg, sec["bunched_pair"], phases, sec["duration_s"], s_bunch)
    anti.to_csv(out / "fig4_antibunched.csv")
    bunch.to_csv(out / "fig4_bunched.csv")
    offset = math.remainder(fb["phase"] - fa["phase"], 2 * math.pi)
    report = {
        "scenario": "fig4",
        "antibunched": _fringe_report(anti, fa, fa_free),
        "bunched": _fringe_report(bunch, fb, fb_free),
        "phase_offset_rad": offset,
        "grid_step_2phi_rad": 2 * (phases[1] - phases[0]),
    }
    _write_json(out / "fig4_report.json", report)
    write_manifest(out, cfg, ["fig4_antibunched.csv", "fig4_bunched.csv", "fig4_report.json"])
    return report


def run_fig5(cfg: ExperimentConfig, out: Path) -> dict:
    """Spatial-beating delay scan of the pure antibunched state."""
    sec = cfg.section("fig5")
    phi = pure_state_phase(ANTIBUNCHED, sec["k"], cfg.umzi.theta0)
    umzi = cfg.umzi.with_phase(phi)
    source = replace(cfg.source, accidental_singles_rate=tuple(sec["accidental_singles_rate_hz"]))
    bcfg = default_beating_config(source, sec["v0"], sec["n_delays"], sec["max_delay_s"])
    scan = simulate_beating_scan(bcfg, source, cfg.det_s, cfg.det_i, umzi, sec["duration_s"], cfg.seed,
                                 cfg.time_filter.width)
    scan.to_csv(out / "fig5_beating.csv")
    fit = fit_beating(scan.delta_taus, scan.counts, bcfg.sigma, frequency_spacing(source))
    base, acc = beating_rates(source, cfg.det_s, cfg.det_i, umzi, cfg.time_filter.width)
    period, length = beating_period(bcfg)
    b_period, b_length = beating_period(replace(bcfg, mode="bunched"))
    report = {
        "scenario": "fig5",
        "phi_rad": phi,
        "p_antibunched": routing_probabilities(umzi).p_antibunched,
        "fit": fit.to_dict(),
        "v0_configured": sec["v0"],
        "v0_fitted": fit.visibility,
        "v0_err": fit.visibility_err,
        "v0_expected_with_accidentals": sec["v0"] * base / (base + acc),
        "fidelity": fidelity_from_visibility(fit.visibility),
        "period_fitted_ps": fit.extra["period"] * 1e12,
        "period_closed_form_ps": period * 1e12,
        "period_length_um": length * 1e6,
        "bunched_period_fs": b_period * 1e15,
        "bunched_period_length_nm": b_length * 1e9,
    }
    _write_json(out / "fig5_report.json", report)
    write_manifest(out, cfg, ["fig5_beating.csv", "fig5_report.json"])
    return report


def run_sweep(cfg: ExperimentConfig, out: Path) -> dict:
    sec = cfg.section("sweep")
    phases = np.linspace(0, 2 * np.pi, sec["n_phases"], endpoint=False)
    scan, fit, fit_free = _sweep(cfg, sec["port_pair"], phases, sec["duration_s"], cfg.seed)
    name = f"sweep_{scan.port_pair}.csv"
    scan.to_csv(out / name)
    report = {"scenario": "sweep", **_fringe_report(scan, fit, fit_free)}
    _write_json(out / "sweep_report.json", report)
    write_manifest(out, cfg, [name, "sweep_report.json"])
    return report


def run_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    sec = cfg.section("simulate")
    h, exp = _simulate_hist(cfg, cfg.umzi.phi, sec["port_pair"], sec["duration_s"], cfg.seed)
    h.to_csv(out / "simulate_histogram.csv")
    car = estimate_car(h, cfg.time_filter, cfg.background_offsets, cfg.umzi.tau)
    rp = routing_probabilities(cfg.umzi)
    report = {
        "scenario": "simulate",
        "phi_rad": cfg.umzi.phi,
        "port_pair": sec["port_pair"],
        "p_bunched": rp.p_bunched,
        "p_antibunched": rp.p_antibunched,
        "central_counts": filtered_counts(h, cfg.time_filter),
        "expected_central_counts": exp.window_total,
        "singles": list(h.total_singles),
        "expected_singles": [exp.singles_s, exp.singles_i],
        "car": car.car,
        "car_err": car.error,
        "expected_car": exp.car,
    }
    _write_json(out / "simulate_report.json", report)
    write_manifest(out, cfg, ["simulate_histogram.csv", "simulate_report.json"])
    return report


RUNNERS = {
    "fig3": run_fig3,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "sweep": run_sweep,
    "simulate": run_simulate,
}
