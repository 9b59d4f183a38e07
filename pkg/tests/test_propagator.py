import math

import numpy as np
import pytest

from coldreact.config import build_simulation, bundled_config, load_config
from coldreact.errors import ConfigurationError, DomainError, ResolutionError
from coldreact.fit import BranchingPreset
from coldreact.propagator import (
    PRODUCT,
    REACTANT,
    CAPSpec,
    CapRaster,
    Grid2D,
    SplitOperator,
    WavePacketSpec,
    Wavefunction,
    energy_expectation,
    harmonic_state,
    init_wavepacket,
    mean_momentum,
    mean_position,
    propagate,
    read_snapshot,
    snapshot_name,
    step,
    step_from_name,
    write_snapshot,
)


@pytest.fixture(scope="module")
def shipped():
    return load_config(bundled_config("fh2_li7.cfg"))


@pytest.fixture(scope="module")
def sim(shipped):
    return build_simulation(shipped)


def reactant_grid(wg, n1=64, n2=128, half_width=5e-6, length=60e-6):
    chi0 = wg.frames[REACTANT].chi0
    return Grid2D(20e-6, 20e-6 + length, chi0 - half_width, chi0 + half_width, n1, n2)


def transverse_harmonic(wg, grid, channel=REACTANT, clip=None):
    fr = wg.frames[channel]
    Q1, Q2 = grid.mesh()
    V = 0.5 * fr.K * (fr.across(Q1, Q2) - fr.chi0) ** 2
    return np.minimum(V, wg.v_clip if clip is None else clip)


# -- grids, packets and guards ------------------------------------------------


@pytest.mark.parametrize("n1,n2", [(63, 64), (96, 64), (32, 64), (64, 100)])
def test_grid_sizes_must_be_powers_of_two(n1, n2):
    with pytest.raises(ConfigurationError):
        Grid2D(0, 1, 0, 1, n1, n2)


def test_grid_geometry():
    g = Grid2D(0.0, 64e-6, -1e-6, 1e-6, 128, 64)
    assert g.dx1 == pytest.approx(0.5e-6)
    assert g.x1[0] == 0.0 and g.x1[-1] == pytest.approx(64e-6 - g.dx1)
    assert g.k1.shape == (128,) and g.k1[1] == pytest.approx(2 * math.pi / 64e-6)
    with pytest.raises(ConfigurationError):
        Grid2D(1.0, 0.0, 0, 1, 64, 64)


def test_init_norm_and_momentum(sim):
    wg = sim.waveguide
    for channel, center, width in ((REACTANT, 50e-6, 4e-6), (PRODUCT, 20e-6, 2e-6)):
        spec = WavePacketSpec(channel, center, width, 4.93e-3)
        wf = init_wavepacket(spec, sim.grid, wg, sim.cap)
        assert abs(wf.norm() - 1.0) < 1e-12
        P1, P2 = mean_momentum(wf)
        fr = wg.frames[channel]
        v_along = (P1 * fr.direction[0] + P2 * fr.direction[1]) / wg.m_tilde
        v_across = (P1 * fr.normal[0] + P2 * fr.normal[1]) / wg.m_tilde
        # inbound velocity points towards decreasing `along`
        assert abs(v_along + spec.velocity) < 1e-6 * spec.velocity
        assert abs(v_across) < 1e-6 * spec.velocity


def test_init_errors(sim):
    wg = sim.waveguide
    with pytest.raises(ConfigurationError):
        init_wavepacket(WavePacketSpec(REACTANT, 90e-6, 4e-6, 0.0), sim.grid, wg, sim.cap)
    with pytest.raises(ConfigurationError):
        init_wavepacket(WavePacketSpec(REACTANT, 500e-6, 4e-6, 0.0), sim.grid, wg, sim.cap)
    coarse = Grid2D(2e-6, 100e-6, 0.0, 24e-6, 64, 64)
    with pytest.raises(ResolutionError):
        init_wavepacket(WavePacketSpec(REACTANT, 50e-6, 4e-6, 0.0), coarse, wg)
    with pytest.raises(ResolutionError):
        init_wavepacket(WavePacketSpec(REACTANT, 50e-6, 4e-6, 0.0, vib_index=6), sim.grid, wg)
    for bad in (dict(width=0.0), dict(channel="middle"), dict(vib_index=-1)):
        kw = dict(channel=REACTANT, center=50e-6, width=4e-6, velocity=0.0)
        kw.update(bad)
        with pytest.raises(ConfigurationError):
            WavePacketSpec(**kw)


def test_cap_validation(sim):
    with pytest.raises(ConfigurationError):
        CAPSpec(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        CAPSpec(1e-6, -1.0)
    with pytest.raises(ConfigurationError):
        CapRaster.build(CAPSpec(1e-6, 1e-30), sim.grid)  # fewer than 10 cells


def test_phase_wrap_guard(sim):
    V = sim.waveguide.raster(sim.grid)
    dt_max = 0.5 * 1.054571817e-34 / np.max(np.abs(V))
    SplitOperator(sim.grid, V, sim.waveguide.m_tilde, 0.9 * dt_max)
    with pytest.raises(ConfigurationError):
        SplitOperator(sim.grid, V, sim.waveguide.m_tilde, 1.1 * dt_max)
    with pytest.raises(ConfigurationError):
        SplitOperator(sim.grid, V, sim.waveguide.m_tilde, 0.0)
    with pytest.raises(ConfigurationError):
        SplitOperator(sim.grid, V[:, :-1], sim.waveguide.m_tilde, 1e-7)


# -- dynamics invariants ---------------------------------------------------------


@pytest.mark.parametrize("sigma,v", [(1.5e-6, 0.0), (2e-6, 4.93e-3), (3e-6, -2e-3)])
def test_free_dispersion(sim, sigma, v):
    wg = sim.waveguide
    m = wg.m_tilde
    g = Grid2D(0.0, 100e-6, -10e-6, 10e-6, 512, 128)
    wf = init_wavepacket(WavePacketSpec(REACTANT, 50e-6, sigma, v), g, wg)
    op = SplitOperator(g, np.zeros(g.shape), m, 2e-4)
    traj = propagate(wf, op, 10, stride=1)
    hbar = 1.054571817e-34
    for snap in traj.snapshots[1:]:
        marg = np.sum(snap.density(), axis=1)
        marg /= marg.sum()
        mu = np.sum(g.x1 * marg)
        width = math.sqrt(np.sum((g.x1 - mu) ** 2 * marg))
        exact = sigma * math.sqrt(1 + (hbar * snap.time / (2 * m * sigma**2)) ** 2)
        assert width == pytest.approx(exact, rel=1e-3)
        assert mu == pytest.approx(50e-6 - v * snap.time, abs=1e-3 * sigma)


def test_norm_conserved_without_cap():
    cfg = load_config(bundled_config("fh2_li7_smoke.cfg"))
    sim = build_simulation(cfg)
    wf = init_wavepacket(sim.packet, sim.grid, sim.waveguide)
    op = SplitOperator(sim.grid, sim.waveguide.raster(sim.grid), sim.waveguide.m_tilde, sim.dt, units=sim.waveguide.units)
    traj = propagate(wf, op, 10_000, stride=1000, keep_snapshots=False)
    assert max(abs(n - 1.0) for n in traj.norms) < 1e-10
    assert op.absorbed == {REACTANT: 0.0, PRODUCT: 0.0}


@pytest.mark.parametrize("n", [0, 1, 2])
def test_transverse_eigenstate_retention(sim, n):
    wg = sim.waveguide
    fr = wg.frames[REACTANT]
    g = reactant_grid(wg)
    V = transverse_harmonic(wg, g)
    wf = init_wavepacket(WavePacketSpec(REACTANT, 50e-6, 6e-6, 0.0, vib_index=n), g, wg)
    period = 1.0 / sim.report.nu_tilde_2
    op = SplitOperator(g, V, wg.m_tilde, sim.dt, units=wg.units)
    steps = int(round(10 * period / sim.dt))
    final = propagate(wf, op, steps, stride=steps, keep_snapshots=False).final
    phi = harmonic_state(n, g.x2, fr.chi0, fr.K, wg.m_tilde)
    overlap = final.amplitudes @ phi * g.dx2  # one amplitude per column
    retained = np.sum(np.abs(overlap) ** 2) * g.dx1 / final.norm()
    assert retained > 0.999


def test_ehrenfest_period(sim):
    wg = sim.waveguide
    fr = wg.frames[REACTANT]
    g = reactant_grid(wg)
    V = transverse_harmonic(wg, g)
    wf = init_wavepacket(WavePacketSpec(REACTANT, 50e-6, 6e-6, 0.0), g, wg)
    Q1, Q2 = g.mesh()
    shift = 0.5e-6
    wf.amplitudes = wf.amplitudes * (
        harmonic_state(0, Q2, fr.chi0 + shift, fr.K, wg.m_tilde) / harmonic_state(0, Q2, fr.chi0, fr.K, wg.m_tilde)
    )
    dt = sim.dt / 4
    op = SplitOperator(g, V, wg.m_tilde, dt, units=wg.units)
    xs = []

    def watch(k, w):
        xs.append(mean_position(w)[1] - fr.chi0)

    watch.stride = 1
    propagate(wf, op, int(4.2e-3 / dt), stride=10**6, observers=[watch], keep_snapshots=False)
    x = np.array(xs)
    i = np.flatnonzero((x[:-1] > 0) & (x[1:] <= 0))
    crossings = (i + x[i] / (x[i] - x[i + 1])) * dt
    period = np.mean(np.diff(crossings))
    assert len(crossings) >= 20
    assert 1.0 / period == pytest.approx(5.66e3, rel=5e-3)
    assert 1.0 / period == pytest.approx(sim.report.nu_tilde_2, rel=1e-3)


def test_zero_steps_leaves_state_unchanged(sim):
    wf = init_wavepacket(sim.packet, sim.grid, sim.waveguide, sim.cap)
    op = SplitOperator(sim.grid, sim.waveguide.raster(sim.grid), sim.waveguide.m_tilde, sim.dt, sim.cap)
    traj = propagate(wf, op, 0)
    assert np.array_equal(traj.final.amplitudes, wf.amplitudes)
    assert traj.final.time == wf.time
    assert traj.steps == [0]
    with pytest.raises(DomainError):
        propagate(wf, op, -1)


def test_single_step_wrapper_matches_operator(sim):
    g = reactant_grid(sim.waveguide)
    V = transverse_harmonic(sim.waveguide, g)
    wf = init_wavepacket(WavePacketSpec(REACTANT, 50e-6, 6e-6, 1e-3), g, sim.waveguide)
    a = step(wf, sim.dt, V, None, sim.waveguide.m_tilde)
    b = SplitOperator(g, V, sim.waveguide.m_tilde, sim.dt).step(wf)
    assert np.array_equal(a.amplitudes, b.amplitudes)
    assert a.time == sim.dt


def test_bookkeeping_with_cap():
    cfg = load_config(bundled_config("fh2_li7_smoke.cfg"))
    sim = build_simulation(cfg)
    wf = init_wavepacket(sim.packet, sim.grid, sim.waveguide, sim.cap)
    op = SplitOperator(sim.grid, sim.waveguide.raster(sim.grid), sim.waveguide.m_tilde, sim.dt, sim.cap, sim.waveguide.units)
    traj = propagate(wf, op, 3000, stride=500, keep_snapshots=False)
    assert sum(op.absorbed.values()) > 0.01
    for norm, absorbed in zip(traj.norms, traj.absorbed):
        assert abs(norm + sum(absorbed.values()) - 1.0) < 1e-6
        assert 0 < norm <= 1 + 1e-9


def test_energy_conserved_before_absorption(sim):
    # no absorber, so nothing leaves; the step is a quarter-thousandth of the
    # fastest transverse period (the Strang error scales as dt^2)
    wg = sim.waveguide
    g = Grid2D(2e-6, 52e-6, 0.0, 24e-6, 256, 128)
    V = wg.raster(g)
    wf = init_wavepacket(WavePacketSpec(REACTANT, 30e-6, 2e-6, sim.report.v_Q1), g, wg)
    T_fast = 1.0 / max(sim.report.nu_tilde_1, sim.report.nu_tilde_2)
    dt = T_fast / 4000
    op = SplitOperator(g, V, wg.m_tilde, dt, units=wg.units)
    n = int(0.5e-3 / dt)
    traj = propagate(wf, op, n, stride=n // 10)
    E0 = energy_expectation(wf, V, wg.m_tilde)
    drift = max(abs(energy_expectation(s, V, wg.m_tilde) / E0 - 1.0) for s in traj.snapshots)
    assert drift < 1e-8


def _cap_run(sim, shipped, channel, grid, center, width, speed, dt, duration, clip, chunks=6):
    """Largest reflected and final transmitted probability for an outgoing packet."""
    wg = sim.waveguide
    c = shipped.blocks["cap"]
    cap = CapRaster.build(
        CAPSpec(c["reactant_width"], c["reactant_strength"]), grid, CAPSpec(c["product_width"], c["product_strength"])
    )
    wf = init_wavepacket(WavePacketSpec(channel, center, width, -speed), grid, wg, cap)
    op = SplitOperator(grid, transverse_harmonic(wg, grid, channel, clip), wg.m_tilde, dt, cap, wg.units)
    fr = wg.frames[channel]
    k_along = fr.direction[0] * grid.k1[:, None] + fr.direction[1] * grid.k2[None, :]
    n = int(duration / dt / chunks)
    reflected = 0.0
    for _ in range(chunks):
        wf = propagate(wf, op, n, stride=n, keep_snapshots=False).final
        w = np.abs(np.fft.fft2(wf.amplitudes)) ** 2
        w *= wf.norm() / w.sum()
        reflected = max(reflected, w[k_along < 0].sum())
    return reflected, w[k_along > 0].sum()


@pytest.mark.slow
def test_shipped_reactant_cap_absorbs(sim, shipped):
    # outgoing packet at the design speed; the grid is periodic, so whatever is
    # left moving outward at the end has either crossed the absorber or not
    # reached it yet, and both count as transmitted
    wg = sim.waveguide
    chi0 = wg.frames[REACTANT].chi0
    g = Grid2D(30e-6, 130e-6, chi0 - 4e-6, chi0 + 12e-6, 512, 128)
    R, T = _cap_run(sim, shipped, REACTANT, g, 65e-6, 8e-6, sim.report.v_Q1, 2e-6, 30e-3, 5 * wg.units.energy)
    assert R < 1e-4
    assert T < 1e-4


@pytest.mark.slow
def test_shipped_product_cap_absorbs(sim, shipped):
    # product leaves with about half a reactant quantum of kinetic energy
    wg = sim.waveguide
    speed = math.sqrt(wg.units.energy / wg.m_tilde)
    g = Grid2D(2e-6, 72e-6, 0.0, 24e-6, 512, 128)
    R, T = _cap_run(sim, shipped, PRODUCT, g, 15e-6, 3e-6, speed, 1e-6, 4.5e-3, 10 * wg.units.energy)
    assert R < 1e-4
    assert T < 1e-4


@pytest.fixture(scope="module")
def preset(ref):
    from coldreact.frames import design_report

    rep = design_report(ref.surface, ref.masses, ref.m_tilde, l=ref.l, T=298.0)
    return BranchingPreset(ref.masses, ref.m_tilde, ref.l, rep.v_Q1)


@pytest.fixture(scope="module")
def preset_result(preset, ref):
    return preset.run(ref.surface)


@pytest.mark.slow
def test_time_step_convergence(preset, preset_result, ref):
    from dataclasses import replace

    half = replace(preset, dt=preset.dt / 2, n_steps=2 * preset.n_steps).run(ref.surface)
    assert abs(half - preset_result) < 1e-4


@pytest.mark.slow
def test_grid_convergence(preset, preset_result, ref):
    from dataclasses import replace

    g = list(preset.grid)
    g[4] *= 2
    g[5] *= 2
    fine = replace(preset, grid=tuple(g)).run(ref.surface)
    assert abs(fine - preset_result) < 1e-3


# -- snapshot files -------------------------------------------------------------


def test_snapshot_round_trip(tmp_path, sim):
    g = Grid2D(0.0, 1e-5, 0.0, 1e-5, 64, 64)
    rng = np.random.default_rng(3)
    psi = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    wf = Wavefunction(psi, g, 1.25e-3)
    path = tmp_path / snapshot_name(1200)
    write_snapshot(wf, path)
    assert path.name == "snap_00001200.csv"
    assert step_from_name(path) == 1200
    back = read_snapshot(path, g, time=1.25e-3)
    assert np.array_equal(back.amplitudes, psi)
    text = path.read_bytes()
    assert b"\r" not in text
    assert text.splitlines()[0] == b"Q1_m,Q2_m,re_psi,im_psi,abs_psi_sq"
    with pytest.raises(ConfigurationError):
        read_snapshot(path, Grid2D(0.0, 2e-5, 0.0, 1e-5, 64, 64))
    with pytest.raises(ConfigurationError):
        step_from_name(tmp_path / "other.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("Q1_m,Q2_m,re_psi,im_psi,abs_psi_sq\n0,0,x,0,0\n")
    with pytest.raises(ConfigurationError):
        read_snapshot(bad, g)
