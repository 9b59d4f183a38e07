"""Observables: saddle point, channel populations, vibrational distributions,
and contour rasters of the surface."""

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.ndimage import map_coordinates

from coldreact.constants import CONSTANTS
from coldreact.errors import (
    ClassificationError,
    ConfigurationError,
    DomainError,
    SearchError,
    TruncationWarning,
)
from coldreact.frames import ChemCoords, SimCoords, to_chem, to_sim
from coldreact.potentials import harmonic_params, leps_energy, leps_gradient, leps_hessian
from coldreact.propagator import CHANNELS, PRODUCT, REACTANT, harmonic_state

# -- saddle point ------------------------------------------------------------


@dataclass(frozen=True)
class SaddleInfo:
    q1: float  # m
    q2: float  # m
    energy: float  # J
    barrier: float  # J, relative to the reactant valley floor
    hessian_eigenvalues: tuple  # J/m^2, ascending
    gradient_norm: float  # J/m
    iterations: int
    Q1: float = None  # m, simulation frame (when a scaling was supplied)
    Q2: float = None

    def to_dict(self):
        return {
            "q1_m": self.q1,
            "q2_m": self.q2,
            "energy_J": self.energy,
            "barrier_J": self.barrier,
            "hessian_eigenvalues_J_per_m2": list(self.hessian_eigenvalues),
            "gradient_norm_J_per_m": self.gradient_norm,
            "iterations": self.iterations,
            "Q1_m": self.Q1,
            "Q2_m": self.Q2,
        }


def guess_saddle(surface, n1=241, n2=481):
    """Coarse minimax estimate of the entrance-channel saddle.

    Along each q1 the energy is minimized over q2; the saddle is the interior
    maximum of that valley-floor profile. Returns None when the profile has no
    interior maximum (barrierless surface).
    """
    q10, q20 = surface.ab.q0, surface.bc.q0
    q1 = np.linspace(0.8 * q10, 6.0 * max(q10, q20), n1)
    q2 = np.linspace(0.6 * q20, 6.0 * max(q10, q20), n2)
    V = leps_energy(surface, q1[:, None], q2[None, :])
    jmin = np.argmin(V, axis=1)
    f = V[np.arange(n1), jmin]
    interior = np.flatnonzero((f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:])) + 1
    if interior.size == 0:
        return None
    i = interior[np.argmax(f[interior])]
    return float(q1[i]), float(q2[jmin[i]])


def find_saddle(surface, guess=None, scaling=None, factors=None, tol=None, max_iter=200):
    """Newton-type search for a first-order saddle of the LEPS surface.

    ``guess`` is (q1, q2) in metres; by default a coarse minimax scan picks
    it. ``tol`` bounds the gradient norm (default 1e-12 D2 / q20).
    """
    D2, q20 = surface.bc.D, surface.bc.q0
    tol = tol if tol is not None else 1e-12 * D2 / q20
    if guess is None:
        guess = guess_saddle(surface)
        if guess is None:
            raise SearchError("no entrance-channel barrier on this surface")
    x = np.array(guess, dtype=float)
    max_step = 0.1 * q20
    for it in range(1, max_iter + 1):
        g = np.array(leps_gradient(surface, x[0], x[1]))
        if np.hypot(*g) < tol:
            break
        # eigenvector following: uphill along the softest mode, downhill along
        # the other; equal to a Newton step wherever the signature is (-, +)
        lam, vec = np.linalg.eigh(leps_hessian(surface, x[0], x[1]))
        gm = vec.T @ g
        dx = vec @ (np.array([1.0, -1.0]) * gm / np.abs(lam))
        n = np.hypot(*dx)
        if n > max_step:
            dx *= max_step / n
        x = x + dx
        if np.any(x <= 0):
            raise SearchError(f"saddle search left the physical region at {x}")
    else:
        raise SearchError(f"saddle search did not converge in {max_iter} iterations")
    H = leps_hessian(surface, x[0], x[1])
    ev = np.linalg.eigvalsh(H)
    if not (ev[0] < 0 < ev[1]):
        kind = "minimum" if ev[0] > 0 else "maximum"
        raise ClassificationError(f"stationary point at {x} is a {kind}, not a saddle")
    E = leps_energy(surface, x[0], x[1])
    Q1 = Q2 = None
    if scaling is not None:
        if factors is None:
            raise DomainError("factors are needed together with scaling")
        sim = to_sim(ChemCoords(x[0], x[1]), factors, scaling)
        Q1, Q2 = sim.Q1, sim.Q2
    return SaddleInfo(
        q1=float(x[0]),
        q2=float(x[1]),
        energy=E,
        barrier=E - surface.channel_floor(2),
        hessian_eigenvalues=(float(ev[0]), float(ev[1])),
        gradient_norm=float(np.hypot(*leps_gradient(surface, x[0], x[1]))),
        iterations=it,
        Q1=Q1,
        Q2=Q2,
    )


def is_advanced(saddle, surface, fraction=0.2):
    """Early barrier: BC still near its equilibrium, A not yet bound."""
    return abs(saddle.q2 - surface.bc.q0) <= fraction * surface.bc.q0 and saddle.q1 > surface.ab.q0


def exoergicity(surface):
    """Energy released going from the reactant to the product valley floor (J)."""
    return surface.channel_floor(2) - surface.channel_floor(1)


# -- channel partition ---------------------------------------------------------


@dataclass(frozen=True)
class ChannelPartition:
    """Dividing lines in the simulation frame (metres).

    The reactant region is Q1 >= ``reactant_line``; the product region is
    ``along >= product_line`` with ``along`` the product valley coordinate.
    Each region only takes points nearer its own valley axis than the other
    one. The flux analysis lines sit further out, at line + offset.
    """

    reactant_line: float
    product_line: float
    reactant_offset: float = 0.0
    product_offset: float = 0.0

    def line(self, channel):
        return self.reactant_line if channel == REACTANT else self.product_line

    def analysis_line(self, channel):
        if channel == REACTANT:
            return self.reactant_line + self.reactant_offset
        return self.product_line + self.product_offset

    def masks(self, grid, waveguide):
        Q1, Q2 = grid.mesh()
        fr_r = waveguide.frames[REACTANT]
        fr_p = waveguide.frames[PRODUCT]
        nearer_r = np.abs(fr_r.across(Q1, Q2) - fr_r.chi0) <= np.abs(fr_p.across(Q1, Q2) - fr_p.chi0)
        r = (fr_r.along(Q1, Q2) >= self.reactant_line) & nearer_r
        p = (fr_p.along(Q1, Q2) >= self.product_line) & ~nearer_r
        return {REACTANT: r, PRODUCT: p, "interaction": ~(r | p)}

    def check(self, grid, waveguide, cap):
        """Raise if a dividing or analysis line runs through an absorber."""
        if cap is None:
            return
        active = cap.gamma > 0
        Q1, Q2 = grid.mesh()
        for ch in CHANNELS:
            fr = waveguide.frames[ch]
            along = fr.along(Q1, Q2)
            near_axis = np.abs(fr.across(Q1, Q2) - fr.chi0) < 4 * _osc_length(fr, waveguide.m_tilde)
            for pos in (self.line(ch), self.analysis_line(ch)):
                on_line = near_axis & (np.abs(along - pos) <= max(grid.dx1, grid.dx2))
                if np.any(active & on_line):
                    raise ConfigurationError(f"{ch} analysis line at {pos:.4g} m lies inside the CAP")


def _osc_length(frame, m_tilde):
    return math.sqrt(CONSTANTS.hbar / (m_tilde * frame.omega(m_tilde)))


def channel_populations(source, partition=None, waveguide=None, cap=None):
    """Reactant / product / interaction probabilities.

    ``source`` is either a Wavefunction (region integration with
    ``partition``) or a mapping of absorbed probability per zone plus an
    optional ``"remaining"`` norm (CAP ledger accounting).
    """
    if isinstance(source, dict):
        r = float(source.get(REACTANT, 0.0))
        p = float(source.get(PRODUCT, 0.0))
        rest = float(source.get("remaining", 1.0 - r - p))
        return {REACTANT: r, PRODUCT: p, "interaction": rest}
    wf = source
    if partition is None or waveguide is None:
        raise DomainError("region integration needs a partition and a waveguide")
    partition.check(wf.grid, waveguide, cap)
    rho = wf.density() * wf.grid.dA
    masks = partition.masks(wf.grid, waveguide)
    return {name: float(np.sum(rho[m])) for name, m in masks.items()}


# -- transverse bases ----------------------------------------------------------


@dataclass(frozen=True)
class MorseStates:
    energies: np.ndarray  # closed-form bound-state energies above the valley floor (J)
    grid_energies: np.ndarray  # same levels from diagonalization on the grid (J)
    functions: np.ndarray  # (n_states, n_points), normalized on the grid (1/sqrt(m))
    x: np.ndarray  # grid (m)
    n_bound: int


def morse_level_count(D, beta, mass):
    lam = math.sqrt(2.0 * mass * D) / (CONSTANTS.hbar * beta)
    return int(math.floor(lam - 0.5)) + 1 if lam > 0.5 else 0


def morse_bound_states(D, beta, x0, mass, n_max, x=None):
    """Bound states n = 0..n_max of D[1 - exp(-beta (x - x0))]^2.

    Energies come from the closed form hw(n+1/2) - [hw(n+1/2)]^2 / (4D);
    eigenfunctions from a sinc-DVR diagonalization on the uniform grid ``x``
    (built around x0 when omitted). Requesting more states than the well
    supports truncates with a :class:`TruncationWarning`.
    """
    if not (D > 0 and beta > 0 and mass > 0):
        raise DomainError("Morse parameters must be positive")
    n_bound = morse_level_count(D, beta, mass)
    if n_bound == 0:
        raise DomainError("Morse well supports no bound state")
    if n_max + 1 > n_bound:
        warnings.warn(
            f"requested {n_max + 1} Morse states, only {n_bound} are bound", TruncationWarning, stacklevel=2
        )
        n_max = n_bound - 1
    hw = CONSTANTS.hbar * beta * math.sqrt(2.0 * D / mass)
    n = np.arange(n_max + 1)
    energies = hw * (n + 0.5) - (hw * (n + 0.5)) ** 2 / (4.0 * D)
    if x is None:
        L = math.sqrt(CONSTANTS.hbar / (mass * hw / CONSTANTS.hbar))
        x = np.arange(x0 - 8 * L, x0 + 8 * L + 6.0 / beta, L / 8)
    x = np.asarray(x, dtype=float)
    h = x[1] - x[0]
    if not np.allclose(np.diff(x), h, rtol=1e-9, atol=0):
        raise DomainError("Morse grid must be uniform")
    arg = np.minimum(-beta * (x - x0), 60.0)
    V = D * (1.0 - np.exp(arg)) ** 2
    N = x.size
    i = np.arange(N)
    dij = i[:, None] - i[None, :]
    # Colbert-Miller sinc-DVR kinetic matrix
    T = np.where(dij == 0, math.pi**2 / 3.0, 2.0 * (-1.0) ** np.abs(dij) / np.where(dij == 0, 1, dij) ** 2)
    T *= CONSTANTS.hbar**2 / (2.0 * mass * h * h)
    w, v = scipy.linalg.eigh(T + np.diag(V), subset_by_index=[0, n_max])
    funcs = v.T / math.sqrt(h)
    # fix the sign convention: positive lobe on the inner (wall) side
    for k in range(funcs.shape[0]):
        j = np.argmax(np.abs(funcs[k]) > 1e-3 * np.max(np.abs(funcs[k])))
        if funcs[k, j] < 0:
            funcs[k] *= -1
    return MorseStates(energies, w, funcs, x, n_bound)


def transverse_basis(waveguide, channel, chi, basis, n_max):
    """(n_states, len(chi)) array of channel eigenfunctions sampled on ``chi``."""
    fr = waveguide.frames[channel]
    m = waveguide.m_tilde
    if basis == "harmonic":
        return np.array([harmonic_state(n, chi, fr.chi0, fr.K, m) for n in range(n_max + 1)])
    if basis == "morse":
        return morse_bound_states(fr.D, fr.beta, fr.chi0, m, n_max, x=chi).functions
    raise DomainError(f"unknown basis {basis!r} (harmonic or morse)")


# -- vibrational distributions -----------------------------------------------


@dataclass
class VibrationalDistribution:
    channel: str
    populations: list  # [(n, p)]
    residual: float
    channel_population: float
    basis: str = "harmonic"

    def probabilities(self):
        return np.array([p for _, p in self.populations])

    def normalized(self):
        """Populations divided by their sum (state-to-state branching)."""
        p = self.probabilities()
        tot = p.sum()
        return p / tot if tot > 0 else p

    def peak(self):
        return int(np.argmax(self.probabilities()))

    def to_dict(self):
        return {
            "channel": self.channel,
            "basis": self.basis,
            "channel_population": self.channel_population,
            "residual": self.residual,
            "populations": [{"n": int(n), "p": float(p)} for n, p in self.populations],
        }


def _line_samples(waveguide, channel, grid, inner=8.0, outer=14.0):
    """Transverse sample coordinates chi (m) across a channel valley."""
    fr = waveguide.frames[channel]
    L = _osc_length(fr, waveguide.m_tilde)
    h = min(grid.dx1, grid.dx2)
    return np.arange(fr.chi0 - inner * L, fr.chi0 + outer * L, h)


def vibrational_distribution(wf, partition, channel, waveguide, basis="harmonic", n_max=6):
    """Project the part of ``wf`` inside a channel region onto valley states.

    The region is the one assigned by ``partition``; each cut perpendicular
    to the valley axis is projected on the transverse eigenfunctions and the
    squared overlaps are integrated along the valley. ``residual`` is the
    channel probability not captured by n <= n_max.
    """
    grid = wf.grid
    masks = partition.masks(grid, waveguide)
    psi = np.where(masks[channel], wf.amplitudes, 0.0)
    pop = float(np.sum(np.abs(psi) ** 2) * grid.dA)
    fr = waveguide.frames[channel]
    if channel == REACTANT:
        chi = grid.x2
        phi = transverse_basis(waveguide, channel, chi, basis, n_max)
        c = psi @ phi.T * grid.dx2  # (n1, n_states)
        p = np.sum(np.abs(c) ** 2, axis=0) * grid.dx1
    else:
        chi = _line_samples(waveguide, channel, grid)
        h = chi[1] - chi[0]
        phi = transverse_basis(waveguide, channel, chi, basis, n_max)
        Q1, Q2 = grid.mesh()
        along = fr.along(Q1, Q2)
        a_lo = partition.line(channel)
        a_hi = float(np.max(along[masks[channel]])) if np.any(masks[channel]) else a_lo
        s = np.arange(a_lo, a_hi + h, h)
        S, X = np.meshgrid(s, chi, indexing="ij")
        P1, P2 = fr.point(S, X)
        idx = [(P1 - grid.x1_min) / grid.dx1, (P2 - grid.x2_min) / grid.dx2]
        re = map_coordinates(psi.real, idx, order=5, mode="grid-wrap")
        im = map_coordinates(psi.imag, idx, order=5, mode="grid-wrap")
        c = (re + 1j * im) @ phi.T * h
        p = np.sum(np.abs(c) ** 2, axis=0) * h
    pops = [(n, float(v)) for n, v in enumerate(p)]
    return VibrationalDistribution(channel, pops, pop - float(np.sum(p)), pop, basis)


class LineFlux:
    """Flux-resolved projection across an analysis line, as a propagate observer.

    At each observed step the wavefunction and its gradient are evaluated on
    the line by exact Fourier interpolation; the transverse overlaps c_n and
    their longitudinal derivatives give the state-resolved current
    (hbar/m) Im(c_n* dc_n/ds). Integrating over time yields the probability
    that has left through the line in each state.
    """

    def __init__(self, waveguide, channel, position, grid, basis="harmonic", n_max=6, stride=10):
        self.waveguide = waveguide
        self.channel = channel
        self.position = position
        self.basis = basis
        self.stride = stride
        self.grid = grid
        fr = waveguide.frames[channel]
        self.chi = _line_samples(waveguide, channel, grid)
        self.h = self.chi[1] - self.chi[0]
        self.phi = transverse_basis(waveguide, channel, self.chi, basis, n_max)
        P1, P2 = fr.point(position, self.chi)
        x1 = P1 - grid.x1_min
        x2 = P2 - grid.x2_min
        k1, k2 = grid.k1, grid.k2
        n = grid.n1 * grid.n2
        self._e1 = np.exp(1j * np.outer(k1, x1)) / n  # (n1, P)
        self._e2 = np.exp(1j * np.outer(k2, x2))  # (n2, P)
        self._ik1 = 1j * k1[:, None]
        self._ik2 = 1j * k2[:, None]
        self._dir = fr.direction
        self.times = []
        self.state_flux = []  # per sample, array over n
        self.total_flux = []

    def sample(self, wf):
        """(psi, d psi / d along) on the line points."""
        phik = np.fft.fft2(wf.amplitudes)
        A = phik @ self._e2  # (n1, P): sum over k2
        A2 = (phik * self._ik2.T) @ self._e2
        psi = np.sum(self._e1 * A, axis=0)
        d1 = np.sum(self._ik1 * self._e1 * A, axis=0)
        d2 = np.sum(self._e1 * A2, axis=0)
        return psi, self._dir[0] * d1 + self._dir[1] * d2

    def __call__(self, step_index, wf):
        psi, dpsi = self.sample(wf)
        scale = CONSTANTS.hbar / self.waveguide.m_tilde
        c = self.phi @ psi * self.h
        dc = self.phi @ dpsi * self.h
        self.times.append(wf.time)
        self.state_flux.append(scale * np.imag(np.conj(c) * dc))
        self.total_flux.append(scale * float(np.sum(np.imag(np.conj(psi) * dpsi))) * self.h)

    def distribution(self):
        t = np.asarray(self.times)
        if t.size < 2:
            p = np.zeros(self.phi.shape[0])
            total = 0.0
        else:
            p = np.trapezoid(np.asarray(self.state_flux), t, axis=0)
            total = float(np.trapezoid(np.asarray(self.total_flux), t))
        pops = [(n, float(v)) for n, v in enumerate(p)]
        return VibrationalDistribution(self.channel, pops, total - float(np.sum(p)), total, self.basis)


# -- contour rasters -----------------------------------------------------------


@dataclass
class ContourRaster:
    frame: str  # "chem" or "sim"
    x1: np.ndarray  # m
    x2: np.ndarray  # m
    energies: np.ndarray  # J, unclipped
    e_zp: float  # J
    clip: float  # in units of e_zp; None leaves the values unclipped
    values: np.ndarray = field(init=False)

    def __post_init__(self):
        v = self.energies / self.e_zp
        self.values = v if self.clip is None else np.minimum(v, self.clip)

    @property
    def header(self):
        return ["q1", "q2", "v_over_ezp"] if self.frame == "chem" else ["Q1", "Q2", "v_over_ezp"]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for i, a in enumerate(self.x1):
                for j, b in enumerate(self.x2):
                    w.writerow([repr(float(a)), repr(float(b)), repr(float(self.values[i, j]))])

    def minimax(self):
        """Grid saddle: interior maximum of the row-wise minimum over x2."""
        f = np.min(self.values, axis=1)
        inner = np.flatnonzero((f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:])) + 1
        return [(float(self.x1[i]), float(self.x2[np.argmin(self.values[i])]), float(f[i])) for i in inner]


def read_contour_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    x1 = np.unique(data[:, 0])
    x2 = np.unique(data[:, 1])
    values = data[:, 2].reshape(x1.size, x2.size)
    return header, x1, x2, values


def contour_raster(surface, window, shape=(201, 201), frame="chem", waveguide=None, clip=None):
    """Potential on a window, in units of the reactant zero-point energy.

    ``window`` is (x1_min, x1_max, x2_min, x2_max) in metres of the chosen
    frame; ``clip`` caps the emitted values (units of the zero-point energy).
    """
    x1_min, x1_max, x2_min, x2_max = window
    if not (x1_max > x1_min and x2_max > x2_min) or min(shape) < 2:
        raise DomainError("empty contour window")
    x1 = np.linspace(x1_min, x1_max, shape[0])
    x2 = np.linspace(x2_min, x2_max, shape[1])
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    if frame == "chem":
        E = leps_energy(surface, X1, X2)
        e_zp = 0.5 * CONSTANTS.h * harmonic_params(surface.bc)["nu"]
    elif frame == "sim":
        if waveguide is None:
            raise DomainError("the simulation frame needs a waveguide (masses and scaling)")
        E = waveguide.potential(X1, X2, clip=False)
        e_zp = 0.5 * CONSTANTS.h * waveguide.channels.nu_tilde_2
    else:
        raise DomainError(f"frame must be 'chem' or 'sim', got {frame!r}")
    return ContourRaster(frame, x1, x2, E, e_zp, clip)


def sim_window(chem_window, waveguide):
    """Bounding box in the simulation frame of a chemical-frame window."""
    q1 = np.array([chem_window[0], chem_window[1]])
    q2 = np.array([chem_window[2], chem_window[3]])
    Q = to_sim_corners(q1, q2, waveguide)
    return (Q[0].min(), Q[0].max(), Q[1].min(), Q[1].max())


def to_sim_corners(q1, q2, waveguide):
    A, B = np.meshgrid(q1, q2, indexing="ij")
    s = to_sim(ChemCoords(A, B), waveguide.factors, waveguide.scaling)
    return np.asarray(s.Q1), np.asarray(s.Q2)


def chem_of_sim(Q1, Q2, waveguide):
    c = to_chem(SimCoords(Q1, Q2), waveguide.factors, waveguide.scaling)
    return c.q1, c.q2


def write_json(data, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
