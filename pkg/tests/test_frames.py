import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coldreact.errors import DomainError
from coldreact.frames import (
    ChemCoords,
    MassTriple,
    ScalingParams,
    SimCoords,
    channel_params,
    chi_1,
    design_report,
    from_sim,
    initial_velocity,
    mass_factors,
    momentum_to_sim,
    s_1,
    scale_potential,
    solve_l,
    to_chem,
    to_sim,
)
from coldreact.potentials import DiatomSpec, LepsSurface, harmonic_params, leps_energy

A = 1e-10
masses_st = st.tuples(*[st.floats(1e-27, 1e-24)] * 3).map(lambda m: MassTriple(*m))


def test_mass_factors_reference_values(ref):
    f = mass_factors(ref.masses)
    assert f.a == pytest.approx(5.48e-14, rel=5e-3)
    assert f.b == pytest.approx(3.98e-14, rel=5e-3)
    assert math.degrees(f.beta_angle) == pytest.approx(46.45, abs=0.1)


def test_mass_factors_equal_masses():
    f = mass_factors(MassTriple(1e-26, 1e-26, 1e-26))
    assert math.tan(f.beta_angle) == pytest.approx(math.sqrt(3), rel=1e-14)
    assert math.degrees(f.beta_angle) == pytest.approx(60.0, rel=1e-14)
    assert f.a == f.b


@given(st.floats(1e-27, 1e-24), st.floats(1e-27, 1e-24))
def test_a_equals_b_when_end_atoms_match(mA, mB):
    f = mass_factors(MassTriple(mA, mB, mA))
    assert f.a == f.b


@given(masses_st)
def test_mass_factor_invariants(m):
    f = mass_factors(m)
    M = m.m_A + m.m_B + m.m_C
    assert f.a == pytest.approx(math.sqrt(m.m_A * (m.m_B + m.m_C) / M), rel=1e-12)
    assert f.b == pytest.approx(math.sqrt(m.m_C * (m.m_A + m.m_B) / M), rel=1e-12)
    assert math.tan(f.beta_angle) == pytest.approx(math.sqrt(m.m_B * M / (m.m_A * m.m_C)), rel=1e-12)
    assert 0 < f.beta_angle < math.pi / 2


def test_invalid_masses():
    with pytest.raises(DomainError):
        MassTriple(-1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ScalingParams(1e-26, 0.0)


def test_length_mapping(ref, factors):
    sc = ScalingParams(ref.m_tilde, ref.l)
    q2 = 0.742 * A
    Q0 = to_sim(ChemCoords(2 * A, q2), factors, sc)
    Q1 = to_sim(ChemCoords(3 * A, q2), factors, sc)
    assert Q1.Q1 - Q0.Q1 == pytest.approx(7.8e-6, rel=1e-2)
    assert Q1.Q2 == Q0.Q2
    origin = to_sim(ChemCoords(0.0, 0.0), factors, sc)
    assert origin.Q1 == 0.0 and origin.Q2 == 0.0


def test_round_trips_random_points(ref, factors):
    sc = ScalingParams(ref.m_tilde, ref.l)
    rng = np.random.default_rng(5)
    Q = rng.uniform(-50e-6, 50e-6, size=(1000, 2))
    for R in (0.0, 3e-9):
        xA, xB, xC = from_sim(SimCoords(Q[:, 0], Q[:, 1]), ref.masses, factors, sc, R_CM=R)
        back = to_sim(ChemCoords(xB - xA, xC - xB), factors, sc)
        scale = np.max(np.abs(Q))
        assert np.max(np.abs(back.Q1 - Q[:, 0])) < 1e-12 * scale
        assert np.max(np.abs(back.Q2 - Q[:, 1])) < 1e-12 * scale
        m = ref.masses
        cm = (m.m_A * xA + m.m_B * xB + m.m_C * xC) / m.M
        assert np.max(np.abs(cm - R)) < 1e-12 * max(np.max(np.abs(xA)), 1e-30)
    c = to_chem(SimCoords(Q[:, 0], Q[:, 1]), factors, sc)
    Q2 = to_sim(c, factors, sc)
    assert np.allclose(Q2.Q1, Q[:, 0], rtol=0, atol=1e-12 * scale)


def test_from_sim_origin(ref, factors):
    x = from_sim(SimCoords(0.0, 0.0), ref.masses, factors, ScalingParams(ref.m_tilde, ref.l))
    assert x == (0.0, 0.0, 0.0)


def test_kinetic_energy_identity(ref, factors):
    sc = ScalingParams(ref.m_tilde, ref.l)
    m = ref.masses
    rng = np.random.default_rng(9)
    p = rng.normal(size=(1000, 3)) * 1e-23
    PCM, P1, P2 = momentum_to_sim(p[:, 0], p[:, 1], p[:, 2], m, factors, sc)
    lhs = p[:, 0] ** 2 / (2 * m.m_A) + p[:, 1] ** 2 / (2 * m.m_B) + p[:, 2] ** 2 / (2 * m.m_C)
    rhs = PCM**2 / (2 * m.M) + (P1**2 + P2**2) / (2 * sc.m_tilde * sc.l**2)
    assert np.max(np.abs(lhs - rhs) / lhs) < 1e-12


def test_momentum_special_cases(ref, factors):
    sc = ScalingParams(ref.m_tilde, ref.l)
    m = ref.masses
    assert momentum_to_sim(0.0, 0.0, 0.0, m, factors, sc) == (0.0, 0.0, 0.0)
    v = 3.0
    PCM, P1, P2 = momentum_to_sim(m.m_A * v, m.m_B * v, m.m_C * v, m, factors, sc)
    assert PCM == pytest.approx(m.M * v, rel=1e-14)
    assert abs(P1) < 1e-14 * PCM and abs(P2) < 1e-14 * PCM


@given(st.floats(-1e-4, 1e-4), st.floats(-1e-4, 1e-4))
def test_chi1_is_rotation(Q1, Q2):
    from coldreact.reference import fh2_masses

    f = mass_factors(fh2_masses())
    lhs = chi_1(Q1, Q2, f) ** 2 + s_1(Q1, Q2, f) ** 2
    assert lhs == pytest.approx(Q1**2 + Q2**2, rel=1e-12, abs=1e-300)


def test_scale_potential(ref, factors):
    sc = ScalingParams(ref.m_tilde, ref.l)
    V = scale_potential(ref.surface, factors, sc)
    s = ref.surface
    # reactant equilibrium image sits at the valley floor
    far = to_sim(ChemCoords(40 * A, s.bc.q0), factors, sc)
    assert V(far.Q1, far.Q2) - s.channel_floor(2) * sc.l**2 == pytest.approx(0.0, abs=1e-12 * s.bc.D * sc.l**2)
    assert s.bc.D * sc.l**2 == pytest.approx(3.26e-29, rel=2e-3)
    rng = np.random.default_rng(1)
    q = rng.uniform(0.6, 4, size=(100, 2)) * A
    Q = to_sim(ChemCoords(q[:, 0], q[:, 1]), factors, sc)
    assert np.allclose(V(Q.Q1, Q.Q2), sc.l**2 * leps_energy(s, q[:, 0], q[:, 1]), rtol=1e-12, atol=0)


def test_channel_params_reference_values(ref, factors):
    ch = channel_params(ref.surface, ref.masses, factors, ScalingParams(ref.m_tilde, ref.l))
    assert ch.nu_tilde_2 == pytest.approx(5.66e3, rel=1e-2)
    assert ch.nu_tilde_1 == pytest.approx(5.34e3, rel=1e-2)
    for K, nu in ((ch.K_tilde_1, ch.nu_tilde_1), (ch.K_tilde_2, ch.nu_tilde_2)):
        assert math.sqrt(K / ref.m_tilde) / (2 * math.pi) == pytest.approx(nu, rel=1e-10)


def test_asymptotic_harmonic_match(ref, factors):
    sc = ScalingParams(ref.m_tilde, ref.l)
    s = ref.surface
    ch = channel_params(s, ref.masses, factors, sc)
    for dq in (-0.05 * A, 0.02 * A, 0.1 * A):
        # reactant valley: chi_2 = Q2
        Q = to_sim(ChemCoords(40 * A, s.bc.q0 + dq), factors, sc)
        sim = 0.5 * ch.K_tilde_2 * (Q.Q2 - ch.chi_20) ** 2
        chem = sc.l**2 * 0.5 * harmonic_params(s.bc)["K"] * dq**2
        assert sim == pytest.approx(chem, rel=1e-10)
        # product valley: chi_1 rotated
        Q = to_sim(ChemCoords(s.ab.q0 + dq, 40 * A), factors, sc)
        sim = 0.5 * ch.K_tilde_1 * (chi_1(Q.Q1, Q.Q2, factors) - ch.chi_10) ** 2
        chem = sc.l**2 * 0.5 * harmonic_params(s.ab)["K"] * dq**2
        assert sim == pytest.approx(chem, rel=1e-10)


def test_solve_l(ref):
    l = solve_l(5.657e3, 2, ref.surface, ref.masses, ref.m_tilde)
    assert l == pytest.approx(6.55e-6, rel=5e-3)
    assert solve_l(4 * 5.657e3, 2, ref.surface, ref.masses) == pytest.approx(2 * l, rel=1e-14)
    ch = channel_params(ref.surface, ref.masses, mass_factors(ref.masses), ScalingParams(ref.m_tilde, l))
    assert ch.nu_tilde_2 == pytest.approx(5.657e3, rel=1e-12)
    with pytest.raises(DomainError):
        solve_l(0.0, 2, ref.surface, ref.masses)
    with pytest.raises(DomainError):
        solve_l(1e3, 3, ref.surface, ref.masses)


def test_initial_velocity(ref, factors):
    sc = ScalingParams(ref.m_tilde, ref.l)
    v = initial_velocity(298.0, ref.masses, factors, sc)
    assert v["v_Q1"] == pytest.approx(5e-3, rel=2e-2)
    assert v["v_Q2"] == 0.0
    assert initial_velocity(0.0, ref.masses, factors, sc)["v_Q1"] == 0.0
    assert initial_velocity(4 * 298.0, ref.masses, factors, sc)["v_Q1"] == pytest.approx(2 * v["v_Q1"], rel=1e-14)
    with pytest.raises(DomainError):
        initial_velocity(-1.0, ref.masses, factors, sc)


def test_design_report(ref):
    rep = design_report(ref.surface, ref.masses, ref.m_tilde, l=ref.l, T=298.0)
    assert rep.nu_tilde_2 == pytest.approx(5.66e3, rel=1e-2)
    assert rep.nu_tilde_1 == pytest.approx(5.34e3, rel=1e-2)
    assert rep.V_tilde_2_uK == pytest.approx(2.4, rel=2e-2)
    assert rep.V_tilde_1_uK == pytest.approx(3.0, rel=3e-2)
    assert rep.v_Q1 == pytest.approx(5e-3, rel=2e-2)
    assert rep.tau_scale == pytest.approx(1 / ref.l**2, rel=1e-14)
    assert rep.tau_scale == pytest.approx(2.33e10, rel=1e-3)
    d = json.loads(rep.to_json())
    assert sorted(d) == sorted(
        [
            "nu_tilde_1_hz",
            "nu_tilde_2_hz",
            "v_tilde_1_uK",
            "v_tilde_2_uK",
            "v_q1_mm_s",
            "l",
            "m_tilde_kg",
            "tau_scale",
            "chi_10_m",
            "chi_20_m",
            "k_tilde_1_n_per_m",
            "k_tilde_2_n_per_m",
        ]
    )
    assert all(v > 0 for v in d.values())
    assert "kHz" in rep.table()


def test_design_report_target_frequency_path(ref):
    a = design_report(ref.surface, ref.masses, ref.m_tilde, target_frequency=5.657e3, T=298.0)
    assert a.nu_tilde_2 == pytest.approx(5.657e3, rel=1e-12)
    b = design_report(ref.surface, ref.masses, ref.m_tilde, l=a.l, T=298.0)
    assert a.to_dict() == b.to_dict()
    with pytest.raises(DomainError):
        design_report(ref.surface, ref.masses, ref.m_tilde)
    with pytest.raises(DomainError):
        design_report(ref.surface, ref.masses, ref.m_tilde, l=1e-6, target_frequency=1e3)


def test_identity_reaction_symmetric_design():
    m = MassTriple(1.66e-27, 1.66e-27, 1.66e-27)
    hh = DiatomSpec(7.608e-19, 1.942e10, 0.742e-10, m.mu_AB)
    s = LepsSurface((hh, hh, DiatomSpec(7.608e-19, 1.942e10, 0.742e-10, m.mu_AC)), 0.1)
    rep = design_report(s, m, 1.1526e-26, l=6.55e-6)
    assert rep.nu_tilde_1 == pytest.approx(rep.nu_tilde_2, rel=1e-14)
    assert rep.V_tilde_1 == rep.V_tilde_2
