import cmath
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from umzi_router.interferometer import (
    ANTIBUNCHED,
    BUNCHED,
    UmziConfig,
    coherence_factor,
    conditional_probabilities,
    evolve_umzi,
    first_coupler_state,
    postselect_central,
    pure_state_phase,
    routing_probabilities,
    singles_marginals,
)
from umzi_router.source import reference_source

angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
ratios = st.floats(0.05, 0.95)


def operator_expansion(theta0, phi, ratio):
    """Independent oracle: expand the creation-operator product a_s+ a_i+ through both couplers.

    Output operators are tagged with the arrival time (0 or tau); monomials are
    keyed by (signal port, idler port, t_s - t_i), and terms sharing a key add
    coherently (two-photon coherence time >> tau).
    """
    t, x = sp.sqrt(sp.Rational(str(ratio))), sp.I * sp.sqrt(1 - sp.Rational(str(ratio)))
    chi = sp.exp(sp.I * (sp.Float(theta0, 30) / 2 + sp.Float(phi, 30)))
    ops, gens = {}, []
    for photon in ("s", "i"):
        c0, d0, c1, d1 = sp.symbols(f"c0{photon} d0{photon} c1{photon} d1{photon}", commutative=True)
        gens += [c0, d0, c1, d1]
        short = t * c0 + x * d0
        long_ = chi * (x * c1 + t * d1)
        ops[photon] = t * short + x * long_
    poly = sp.Poly(sp.expand(ops["s"] * ops["i"]), *gens)
    out = {}
    for monom, coeff in zip(poly.monoms(), poly.coeffs()):
        names = [str(g) for g, e in zip(poly.gens, monom) if e]
        s_name = next(n for n in names if n.endswith("s"))
        i_name = next(n for n in names if n.endswith("i"))
        key = (s_name[0], i_name[0], int(s_name[1]) - int(i_name[1]))
        out[key] = out.get(key, 0) + complex(sp.N(coeff, 30))
    return out


@pytest.mark.parametrize("theta0,phi,ratio", [
    (0.0, 0.0, 0.5), (0.3, 1.1, 0.5), (2.0, -0.7, 0.3), (-1.2, 2.5, 0.8), (math.pi, math.pi / 4, 0.65),
])
def test_evolution_matches_operator_expansion(theta0, phi, ratio):
    state = evolve_umzi(UmziConfig(phi=phi, theta0=theta0, coupler_ratio=ratio))
    oracle = operator_expansion(theta0, phi, ratio)
    got = state.as_dict()
    for key, amp in got.items():
        assert amp == pytest.approx(oracle.get(key, 0.0), abs=1e-12)


def test_first_coupler_state_balanced():
    s = first_coupler_state(0.5)
    assert s["SS"] == pytest.approx(0.5)
    assert s["LL"] == pytest.approx(-0.5)
    assert s["SL"] == pytest.approx(0.5j)
    assert s["LS"] == pytest.approx(0.5j)


def test_first_coupler_bunched_share_is_half():
    s = first_coupler_state(0.5)
    # <psi1'| = (<SS| - <LL|)/sqrt2
    overlap = (s["SS"] - s["LL"]) / math.sqrt(2)
    assert abs(overlap) ** 2 == pytest.approx(0.5, abs=1e-15)


def test_first_coupler_transparent_limit():
    s = first_coupler_state(1 - 1e-12)
    assert abs(s["SS"]) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.1, 1.5])
def test_first_coupler_rejects_bad_ratio(ratio):
    with pytest.raises(ValueError):
        first_coupler_state(ratio)


def test_central_slot_matches_closed_form_output():
    # selected state is (1/2) x [(1 + e^{iT}) psi1 + i (1 - e^{iT}) psi2] / sqrt2
    for total in np.linspace(0, 2 * math.pi, 13):
        st_ = evolve_umzi(UmziConfig(theta0=total))
        e = cmath.exp(1j * total)
        assert st_.amplitude("c", "c", 0) == pytest.approx((1 + e) / 4, abs=1e-15)
        assert st_.amplitude("d", "d", 0) == pytest.approx(-(1 + e) / 4, abs=1e-15)
        assert st_.amplitude("c", "d", 0) == pytest.approx(1j * (1 - e) / 4, abs=1e-15)
        assert st_.amplitude("d", "c", 0) == pytest.approx(1j * (1 - e) / 4, abs=1e-15)


def test_zero_total_phase_gives_pure_bunching():
    s = evolve_umzi(UmziConfig(phi=0.0, theta0=0.0))
    assert abs(s.amplitude("c", "d", 0)) < 1e-15
    assert abs(s.amplitude("d", "c", 0)) < 1e-15
    assert abs(s.amplitude("c", "c", 0)) > 0.4


@pytest.mark.parametrize("phi", np.linspace(0, math.pi, 7))
def test_side_slots_carry_half_the_norm(phi):
    s = evolve_umzi(UmziConfig(phi=phi))
    side = np.sum(np.abs(s.amplitudes[:, :, [0, 2]]) ** 2)
    assert side == pytest.approx(0.5, abs=1e-12)
    assert np.abs(s.amplitudes[:, :, [0, 2]]) ** 2 == pytest.approx(np.full((2, 2, 2), 1 / 16), abs=1e-12)


@pytest.mark.parametrize("phi", np.linspace(0, 2 * math.pi, 9))
def test_postselection_norm_is_half(phi):
    assert postselect_central(evolve_umzi(UmziConfig(phi=phi))).norm() == pytest.approx(0.5, abs=1e-12)


def test_incoherent_regime_has_no_coherent_central_part():
    s = postselect_central(evolve_umzi(UmziConfig(phi=0.4, coherence_factor=0.0)))
    assert s.norm() == pytest.approx(0.0, abs=1e-15)
    # residue stays as phi-independent probability
    assert s.total_probability() == pytest.approx(0.5, abs=1e-12)
    r = conditional_probabilities(s)
    assert r.p_bunched == pytest.approx(0.5, abs=1e-12)


def test_total_phase_pi_leaves_only_antibunched():
    s = postselect_central(evolve_umzi(UmziConfig(phi=math.pi / 2)))
    c = s.amplitudes[:, :, 1]
    assert abs(c[0, 0]) < 1e-15 and abs(c[1, 1]) < 1e-15
    assert abs(c[0, 1]) ** 2 + abs(c[1, 0]) ** 2 == pytest.approx(0.5)


def test_routing_examples():
    r = routing_probabilities(UmziConfig(phi=0.0))
    assert (r.p_bunched, r.p_antibunched) == (1.0, 0.0)
    r = routing_probabilities(UmziConfig(phi=math.pi / 2))
    assert r.p_bunched == pytest.approx(0.0, abs=1e-15)
    assert r.p_antibunched == pytest.approx(1.0)


def test_pure_state_phases():
    phi = pure_state_phase(ANTIBUNCHED, 1, 0.0)
    assert phi == pytest.approx(3 * math.pi / 2)
    assert routing_probabilities(UmziConfig(phi=phi)).p_antibunched == pytest.approx(1.0, abs=1e-15)
    assert pure_state_phase(BUNCHED, 0, 0.0) == 0.0
    phi = pure_state_phase(ANTIBUNCHED, 0, math.pi / 3)
    assert phi == pytest.approx(math.pi / 3)
    assert routing_probabilities(UmziConfig(phi=phi, theta0=math.pi / 3)).p_antibunched == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pure_state_phase("sideways")


def test_coherence_factor_regimes():
    assert coherence_factor(100e-12, 100e-12) == 0.0
    assert coherence_factor(50e-12, 100e-12) == 0.0
    assert coherence_factor(10e-6, 100e-12) == pytest.approx(1 - 1e-5, abs=1e-15)
    assert coherence_factor(1e30, 100e-12) == pytest.approx(1.0)
    for bad in [(0, 1e-10), (1e-6, 0), (-1, 1)]:
        with pytest.raises(ValueError):
            coherence_factor(*bad)


def test_config_validation():
    for kw in [dict(tau=0), dict(coupler_ratio=1.0), dict(coherence_factor=1.5), dict(insertion_loss_db=-1)]:
        with pytest.raises(ValueError):
            UmziConfig(**kw)


def test_tau_must_exceed_single_photon_coherence():
    with pytest.raises(ValueError, match="coherence time"):
        evolve_umzi(UmziConfig(tau=10e-12), reference_source())
    evolve_umzi(UmziConfig(tau=100e-12), reference_source())


# --- properties -------------------------------------------------------------


@given(angles, angles, ratios)
def test_unitarity(theta0, phi, ratio):
    s = evolve_umzi(UmziConfig(phi=phi, theta0=theta0, coupler_ratio=ratio))
    assert s.norm() == pytest.approx(1.0, abs=1e-12)


@given(angles, angles, st.floats(0, 1), st.floats(-3, 3))
def test_depends_only_on_total_phase(theta0, phi, gamma, delta):
    a = evolve_umzi(UmziConfig(phi=phi, theta0=theta0, coherence_factor=gamma))
    b = evolve_umzi(UmziConfig(phi=phi - delta, theta0=theta0 + 2 * delta, coherence_factor=gamma))
    np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-12)
    np.testing.assert_allclose(a.incoherent, b.incoherent, atol=1e-12)


@given(angles, angles, st.floats(0, 1))
def test_conditional_probabilities_match_closed_form(theta0, phi, gamma):
    cfg = UmziConfig(phi=phi, theta0=theta0, coherence_factor=gamma)
    full = conditional_probabilities(postselect_central(evolve_umzi(cfg)))
    closed = routing_probabilities(cfg)
    assert full.p_bunched == pytest.approx(closed.p_bunched, abs=1e-12)
    assert full.p_antibunched == pytest.approx(closed.p_antibunched, abs=1e-12)


@given(angles, angles, st.floats(0, 1))
def test_singles_are_flat(theta0, phi, gamma):
    s = evolve_umzi(UmziConfig(phi=phi, theta0=theta0, coherence_factor=gamma))
    sig, idl = singles_marginals(s)
    np.testing.assert_allclose(sig, 0.5, atol=1e-12)
    np.testing.assert_allclose(idl, 0.5, atol=1e-12)


@settings(max_examples=50)
@given(angles, angles, angles)
def test_side_peaks_do_not_depend_on_phi(theta0, phi1, phi2):
    a = evolve_umzi(UmziConfig(phi=phi1, theta0=theta0)).probabilities()[:, :, [0, 2]]
    b = evolve_umzi(UmziConfig(phi=phi2, theta0=theta0)).probabilities()[:, :, [0, 2]]
    np.testing.assert_allclose(a, b, atol=1e-12)


@given(angles, angles)
def test_complementary_ports(theta0, phi):
    p2 = routing_probabilities(UmziConfig(phi=phi, theta0=theta0)).p_antibunched
    p1 = routing_probabilities(UmziConfig(phi=phi + math.pi / 2, theta0=theta0)).p_bunched
    assert p2 == pytest.approx(p1, abs=1e-12)


@given(angles, angles)
def test_fringe_period_is_pi(theta0, phi):
    a = routing_probabilities(UmziConfig(phi=phi, theta0=theta0))
    b = routing_probabilities(UmziConfig(phi=phi + math.pi, theta0=theta0))
    assert a.p_antibunched == pytest.approx(b.p_antibunched, abs=1e-12)
    assert a.p_bunched + a.p_antibunched == pytest.approx(1.0, abs=1e-12)
