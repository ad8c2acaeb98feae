"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line through the ``acceptance_report`` fixture;
the lines are printed in the "acceptance criteria" section of the pytest
summary.  Tolerances and runtime limits are the contract values.
"""

import hashlib
import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq

from umzi_router.beating import fidelity_from_visibility
from umzi_router.cli import main
from umzi_router.coincidence import (
    DetectorModel,
    TimeFilter,
    correlate_streams,
    estimate_car,
    expected_counts,
    reference_detectors,
    phase_sweep,
    simulate_run,
)
from umzi_router.config import build_config
from umzi_router.experiments import flatness_pvalue, run_fig3, run_fig5
from umzi_router.fitting import (
    beating_jacobian,
    beating_model,
    fit_fringe,
    fringe_jacobian,
    fringe_model,
    gaussian_peaks_jacobian,
    gaussian_peaks_model,
)
from umzi_router.interferometer import (
    UmziConfig,
    coherence_factor,
    conditional_probabilities,
    evolve_umzi,
    postselect_central,
    routing_probabilities,
    singles_marginals,
)
from umzi_router.source import reference_source

PS = 1e-12
TAU = 100e-12


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_01_routing_closed_form(acceptance_report):
    rng = np.random.default_rng(1)
    theta0 = rng.uniform(-2 * math.pi, 2 * math.pi, 1000)
    phi = rng.uniform(-2 * math.pi, 2 * math.pi, 1000)
    err_sum = err_closed = err_full = 0.0
    with Timer() as t:
        for a, b in zip(theta0, phi):
            cfg = UmziConfig(phi=b, theta0=a)
            r = routing_probabilities(cfg)
            full = conditional_probabilities(postselect_central(evolve_umzi(cfg)))
            err_sum = max(err_sum, abs(r.p_bunched + r.p_antibunched - 1))
            err_closed = max(err_closed, abs(r.p_bunched - (1 + math.cos(a + 2 * b)) / 2))
            err_full = max(err_full, abs(full.p_bunched - r.p_bunched), abs(full.p_antibunched - r.p_antibunched))
    worst = max(err_sum, err_closed, err_full)
    ok = worst <= 1e-12 and t.elapsed < 1.0
    acceptance_report(1, "routing closed form", ok, f"max err {worst:.1e}, {t.elapsed:.2f} s")
    assert ok


def test_criterion_02_postselection_norm(acceptance_report):
    rng = np.random.default_rng(2)
    worst = 0.0
    with Timer() as t:
        for _ in range(1000):
            gamma = rng.uniform(0, 1)
            cfg = UmziConfig(phi=rng.uniform(-7, 7), theta0=rng.uniform(-7, 7), coherence_factor=gamma,
                             tau=rng.uniform(50e-12, 500e-12))
            worst = max(worst, abs(postselect_central(evolve_umzi(cfg)).norm() - gamma / 2))
        exact = postselect_central(evolve_umzi(UmziConfig(phi=0.3))).norm()
    ok = worst <= 1e-12 and abs(exact - 0.5) <= 1e-12 and t.elapsed < 1.0
    acceptance_report(2, "post-selection norm", ok, f"max err {worst:.1e}, gamma=1 norm {exact:.15f}, {t.elapsed:.2f} s")
    assert ok


def test_criterion_03_singles_and_side_peaks_flat(acceptance_report):
    phases = np.linspace(0, 2 * math.pi, 24, endpoint=False)
    with Timer() as t:
        worst = 0.0
        for phi in phases:
            sig, idl = singles_marginals(evolve_umzi(UmziConfig(phi=phi)))
            worst = max(worst, np.abs(sig - 0.5).max(), np.abs(idl - 0.5).max())
        # 2e6 pairs/s x 0.02 s = 4e4 expected pairs per point
        src = reference_source(pair_rate=2e6, accidental_singles_rate=(1e3, 1e3))
        dets = (DetectorModel(1.0, 10.0, 25e-12, "s"), DetectorModel(1.0, 10.0, 44e-12, "i"))
        scan = phase_sweep(UmziConfig(), src, *dets, "EF", phases, 0.02, 33)
        pvals = {name: flatness_pvalue(getattr(scan, name))
                 for name in ("singles_s", "singles_i", "side_minus", "side_plus")}
    ok = worst <= 1e-12 and min(pvals.values()) > 0.05 and t.elapsed < 60
    detail = ", ".join(f"{k} p={v:.2f}" for k, v in pvals.items())
    acceptance_report(3, "singles and side-peak flatness", ok, f"analytic err {worst:.1e}; {detail}; {t.elapsed:.1f} s")
    assert ok


def test_criterion_04_histogram_geometry(acceptance_report, tmp_path):
    cfg = build_config(scenario="fig3")
    with Timer() as t:
        report = run_fig3(cfg, tmp_path)
    centers = report["peak_centers_ps"]
    center_err = max(abs(c - e) for c, e in zip(centers, (-100, 0, 100)))
    z = report["runs"][1]["background_z"]
    expected = report["expected_fwhm_ps"]
    fwhm_err = max(abs(w / expected - 1) for w in report["peak_fwhm_ps"])
    ok = center_err <= 2 and abs(z) <= 4 and fwhm_err <= 0.05 and t.elapsed < 60
    acceptance_report(4, "histogram geometry", ok,
                      f"centers {[round(c, 1) for c in centers]} ps, phi=pi z={z:.2f}, "
                      f"FWHM {[round(w, 1) for w in report['peak_fwhm_ps']]} vs {expected:.2f} ps, {t.elapsed:.1f} s")
    assert ok


def test_criterion_05_car_pipeline(acceptance_report):
    cfg = build_config()
    umzi = cfg.umzi.with_phase(math.pi / 2)
    state = evolve_umzi(umzi)
    duration = 10.0

    def analytic_car(noise):
        src = replace(cfg.source, accidental_singles_rate=(noise, noise))
        return expected_counts(state, src, cfg.det_s, cfg.det_i, duration, tau=umzi.tau,
                               insertion_loss_db=umzi.insertion_loss_db).car

    with Timer() as t:
        noise = brentq(lambda n: analytic_car(n) - 32.0, 1e3, 1e8, xtol=1e-6)
        src = replace(cfg.source, accidental_singles_rate=(noise, noise))
        streams = simulate_run(state, src, cfg.det_s, cfg.det_i, duration, 55, tau=umzi.tau,
                               insertion_loss_db=umzi.insertion_loss_db)
        car = estimate_car(correlate_streams(streams), TimeFilter(), tau=umzi.tau)
    ok = abs(analytic_car(noise) - 32) < 1e-6 and abs(car.car - 32) <= 3 * car.error and t.elapsed < 60
    acceptance_report(5, "CAR pipeline", ok,
                      f"noise {noise:.4g} /s, CAR {car.car:.2f} +/- {car.error:.2f} vs 32, {t.elapsed:.1f} s")
    assert ok


def test_criterion_06_noiseless_fringes(acceptance_report):
    # noiseless: no jitter, no dark counts, no uncorrelated photons; 20 s per
    # point keeps the Poisson error on V well below the 1e-3 margin
    src = reference_source(pair_rate=2e6)
    dets = (DetectorModel(0.06, 0.0, 0.0, "s"), DetectorModel(0.04, 0.0, 0.0, "i"))
    phases = np.linspace(0, 2 * math.pi, 24, endpoint=False)
    step_2phi = 2 * (phases[1] - phases[0])
    with Timer() as t:
        fits = {}
        for pair, seed in (("EF", 61), ("DE", 62)):
            scan = phase_sweep(UmziConfig(), src, *dets, pair, phases, 20.0, seed)
            fits[pair] = (fit_fringe(phases, scan.coincidences),
                          fit_fringe(phases, scan.coincidences, free_period=True))
    vis = {p: f[0].visibility for p, f in fits.items()}
    periods = {p: f[1]["period"] for p, f in fits.items()}
    offset = math.remainder(fits["DE"][0]["phase"] - fits["EF"][0]["phase"] - math.pi, 2 * math.pi)
    ok = (min(vis.values()) >= 0.999 and all(abs(P / math.pi - 1) < 0.01 for P in periods.values())
          and abs(offset) <= step_2phi and t.elapsed < 120)
    acceptance_report(6, "noiseless fringes", ok,
                      f"V {', '.join(f'{p}={v:.5f}' for p, v in vis.items())}; period/pi "
                      f"{', '.join(f'{p}={P / math.pi:.4f}' for p, P in periods.items())}; "
                      f"offset-pi {offset:+.3f} rad (step {step_2phi:.3f}); {t.elapsed:.1f} s")
    assert ok


def test_criterion_07_beating(acceptance_report, tmp_path):
    cfg = build_config(scenario="fig5")
    with Timer() as t:
        r = run_fig5(cfg, tmp_path)
    v, err = r["v0_fitted"], r["v0_err"]
    ok = (abs(v - 0.99) <= 2 * err
          and abs(r["period_fitted_ps"] / 1.25 - 1) <= 0.01
          and r["fidelity"] == (1 + v) / 2 == fidelity_from_visibility(v)
          and abs(r["bunched_period_fs"] / 2.586 - 1) <= 0.01
          and t.elapsed < 60)
    acceptance_report(7, "spatial beating", ok,
                      f"V0 {v:.4f} +/- {err:.4f}, period {r['period_fitted_ps']:.4f} ps, "
                      f"fidelity {r['fidelity']:.4f}, bunched {r['bunched_period_fs']:.4f} fs, {t.elapsed:.1f} s")
    assert ok


def _fd_error(fun, jac, p):
    h = 1e-5 * np.maximum(np.abs(p), 1e-2)
    num = np.column_stack([(fun(p + e) - fun(p - e)) / (2 * hk) for e, hk in zip(np.diag(h), h)])
    ana = jac(p)
    return float(np.abs(ana - num).max() / np.maximum(np.abs(ana), np.abs(num)).max())


def test_criterion_08_jacobians(acceptance_report):
    rng = np.random.default_rng(8)
    x = np.linspace(-400, 400, 201)
    phis = np.linspace(0, 2 * math.pi, 48)
    d = np.linspace(0, 5, 64)
    sigma = 2 * math.pi * 32e9 * PS
    worst = {"gaussian": 0.0, "fringe": 0.0, "beating": 0.0}
    with Timer() as t:
        for _ in range(100):
            pg = np.concatenate([np.column_stack([rng.uniform(10, 2000, 3), rng.uniform(-150, 150, 3),
                                                  rng.uniform(5, 40, 3)]).ravel(), [rng.uniform(0, 50)]])
            pf = np.array([rng.uniform(10, 2000), rng.uniform(0, 1), rng.uniform(-3, 3), rng.uniform(2.5, 3.8)])
            pb = np.array([rng.uniform(10, 2000), rng.uniform(0, 1), rng.uniform(0.5, 1.2), rng.uniform(-3, 3)])
            worst["gaussian"] = max(worst["gaussian"], _fd_error(
                lambda q: gaussian_peaks_model(x, q), lambda q: gaussian_peaks_jacobian(x, q), pg))
            worst["fringe"] = max(worst["fringe"], _fd_error(
                lambda q: fringe_model(phis, q), lambda q: fringe_jacobian(phis, q), pf),
                _fd_error(lambda q: fringe_model(phis, q), lambda q: fringe_jacobian(phis, q), pf[:3]))
            worst["beating"] = max(worst["beating"], _fd_error(
                lambda q: beating_model(d, q, sigma), lambda q: beating_jacobian(d, q, sigma), pb))
    ok = max(worst.values()) <= 1e-6 and t.elapsed < 5
    acceptance_report(8, "fit Jacobians", ok,
                      ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {t.elapsed:.2f} s")
    assert ok


FAST = ["--set", "fig3.duration_s=0.5", "--set", "fig4.duration_s=0.1", "--set", "fig4.n_phases=12",
        "--set", "sweep.duration_s=0.1", "--set", "sweep.n_phases=12", "--set", "simulate.duration_s=0.5"]


def _csv_digests(out):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(out.glob("*.csv"))}


def test_criterion_09_determinism(acceptance_report, tmp_path):
    mismatched = []
    for scenario in ("fig3", "fig4", "fig5", "sweep", "simulate"):
        runs = []
        for tag, extra in (("a", []), ("b", []), ("chunked", ["--set", "acquisition.chunks=3"])):
            out = tmp_path / f"{scenario}_{tag}"
            assert main([scenario, "--seed", "99", "--out", str(out), *FAST, *extra]) == 0
            runs.append(_csv_digests(out))
        if not runs[0] or runs[0] != runs[1] or runs[0] != runs[2]:
            mismatched.append(scenario)
    ok = not mismatched
    acceptance_report(9, "determinism", ok,
                      "all scenarios byte-identical across reruns and chunk counts" if ok else f"differs: {mismatched}")
    assert ok


def test_criterion_10_coherence_regimes(acceptance_report):
    phases = np.linspace(0, 2 * math.pi, 24, endpoint=False)
    gamma0 = coherence_factor(TAU, TAU)
    with Timer():
        cfg0 = UmziConfig(coherence_factor=gamma0)
        scan = phase_sweep(cfg0, reference_source(), *reference_detectors(), "EF", phases, 0.5, 10)
    c = scan.coincidences.astype(float)
    z = np.abs(c - c.mean()) / math.sqrt(c.mean())
    fit = fit_fringe(phases, c)
    analytic_flat = max(abs(routing_probabilities(cfg0.with_phase(p)).p_bunched - 0.5) for p in phases)
    gamma_long = coherence_factor(10e-6, TAU)
    diff = 0.0
    for p in np.linspace(0, 2 * math.pi, 97):
        a = routing_probabilities(UmziConfig(phi=p, coherence_factor=gamma_long))
        b = routing_probabilities(UmziConfig(phi=p, coherence_factor=1.0))
        diff = max(diff, abs(a.p_bunched - b.p_bunched), abs(a.p_antibunched - b.p_antibunched))
    ok = (gamma0 == 0.0 and z.max() <= 4 and fit.visibility_raw <= 4 * fit.visibility_err
          and analytic_flat <= 1e-12 and diff <= 1e-4)
    acceptance_report(10, "coherence regimes", ok,
                      f"gamma=0: max |z| {z.max():.2f}, V {fit.visibility_raw:.4f} +/- {fit.visibility_err:.4f}; "
                      f"gamma(10 us) vs 1: max dP {diff:.1e}")
    assert ok
