"""Split-operator propagation of the scaled 2D Schrodinger equation.

Wavefunction amplitudes are stored in SI normalization (sum |psi|^2 dA = 1
with dA in m^2), but every phase factor is assembled in reduced units:
hbar = m_tilde = 1, lengths in oscillator lengths of the reactant valley,
energies in h * nu_tilde_2 and times in 1 / (2 pi nu_tilde_2). Because the
step is linear in psi, the stored normalization never enters the arithmetic,
which keeps snapshots exactly restartable.
"""

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from coldreact.constants import CONSTANTS
from coldreact.errors import ConfigurationError, DomainError, ResolutionError
from coldreact.frames import ScalingParams, channel_params, mass_factors, scale_potential

REACTANT = "reactant"
PRODUCT = "product"
CHANNELS = (REACTANT, PRODUCT)


@dataclass(frozen=True)
class ReducedUnits:
    m_tilde: float  # kg
    nu_ref: float  # Hz

    @property
    def omega(self):
        return 2.0 * math.pi * self.nu_ref

    @property
    def length(self):
        return math.sqrt(CONSTANTS.hbar / (self.m_tilde * self.omega))

    @property
    def energy(self):
        return CONSTANTS.hbar * self.omega

    @property
    def time(self):
        return 1.0 / self.omega


@dataclass(frozen=True)
class ChannelFrame:
    """Asymptotic valley of one channel in the simulation frame.

    ``along(Q1, Q2)`` grows away from the interaction region;
    ``across(Q1, Q2)`` is the transverse coordinate whose equilibrium is
    ``chi0``.
    """

    name: str
    direction: tuple  # unit vector of the outgoing longitudinal axis
    normal: tuple  # unit vector of the transverse axis
    chi0: float  # m
    K: float  # N/m
    D: float  # J, valley depth
    beta: float  # 1/m, Morse range along the transverse coordinate
    floor: float  # J, valley bottom energy

    def along(self, Q1, Q2):
        return self.direction[0] * Q1 + self.direction[1] * Q2

    def across(self, Q1, Q2):
        return self.normal[0] * Q1 + self.normal[1] * Q2

    def point(self, along, across):
        """(Q1, Q2) for the given channel coordinates."""
        Q1 = along * self.direction[0] + across * self.normal[0]
        Q2 = along * self.direction[1] + across * self.normal[1]
        return Q1, Q2

    def omega(self, m_tilde):
        return math.sqrt(self.K / m_tilde)


class Waveguide:
    """The reaction surface mapped onto the simulating atom's plane."""

    def __init__(self, surface, masses, scaling):
        self.surface = surface
        self.masses = masses
        self.scaling = scaling
        self.factors = mass_factors(masses)
        self.channels = channel_params(surface, masses, self.factors, scaling)
        self.units = ReducedUnits(scaling.m_tilde, self.channels.nu_tilde_2)
        self._V = scale_potential(surface, self.factors, scaling)
        f = self.factors
        l2 = scaling.l**2
        s = scaling.s
        self.frames = {
            REACTANT: ChannelFrame(
                REACTANT,
                (1.0, 0.0),
                (0.0, 1.0),
                self.channels.chi_20,
                self.channels.K_tilde_2,
                surface.bc.D * l2,
                surface.bc.beta_morse * s / (f.b * f.sin),
                surface.channel_floor(2) * l2,
            ),
            PRODUCT: ChannelFrame(
                PRODUCT,
                (f.cos, f.sin),
                (f.sin, -f.cos),
                self.channels.chi_10,
                self.channels.K_tilde_1,
                surface.ab.D * l2,
                surface.ab.beta_morse * s / (f.a * f.sin),
                surface.channel_floor(1) * l2,
            ),
        }

    @classmethod
    def from_values(cls, surface, masses, m_tilde, l):
        return cls(surface, masses, ScalingParams(m_tilde, l))

    @property
    def m_tilde(self):
        return self.scaling.m_tilde

    @property
    def v_clip(self):
        """Ceiling applied to the potential raster (J)."""
        return 2.0 * max(self.surface.ab.D, self.surface.bc.D) * self.scaling.l**2

    def potential(self, Q1, Q2, clip=True):
        v = self._V(Q1, Q2)
        return np.minimum(v, self.v_clip) if clip else v

    def raster(self, grid):
        Q1, Q2 = grid.mesh()
        return self.potential(Q1, Q2)


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid over the simulation plane (metres)."""

    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float
    n1: int
    n2: int

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if n < 64 or n & (n - 1):
                raise ConfigurationError(f"grid sizes must be powers of two >= 64, got {n}")
        if not (self.x1_max > self.x1_min and self.x2_max > self.x2_min):
            raise ConfigurationError("grid extents must be increasing")

    @property
    def dx1(self):
        return (self.x1_max - self.x1_min) / self.n1

    @property
    def dx2(self):
        return (self.x2_max - self.x2_min) / self.n2

    @property
    def dA(self):
        return self.dx1 * self.dx2

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def x1(self):
        return self.x1_min + self.dx1 * np.arange(self.n1)

    @property
    def x2(self):
        return self.x2_min + self.dx2 * np.arange(self.n2)

    def mesh(self):
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    @property
    def k1(self):
        return 2.0 * math.pi * np.fft.fftfreq(self.n1, d=self.dx1)

    @property
    def k2(self):
        return 2.0 * math.pi * np.fft.fftfreq(self.n2, d=self.dx2)

    def contains(self, Q1, Q2):
        return self.x1_min <= Q1 < self.x1_max and self.x2_min <= Q2 < self.x2_max


@dataclass
class Wavefunction:
    amplitudes: np.ndarray
    grid: Grid2D
    time: float = 0.0

    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dA)

    def density(self):
        return np.abs(self.amplitudes) ** 2

    def copy(self):
        return Wavefunction(self.amplitudes.copy(), self.grid, self.time)


@dataclass(frozen=True)
class WavePacketSpec:
    """Gaussian along a valley times a transverse oscillator eigenstate.

    ``center`` is the longitudinal channel coordinate (m), ``width`` the rms
    width of |psi|^2 along the valley (m) and ``velocity`` the mean speed
    towards the interaction region (m/s).
    """

    channel: str
    center: float
    width: float
    velocity: float
    vib_index: int = 0

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ConfigurationError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if not self.width > 0:
            raise ConfigurationError("packet width must be positive")
        if self.vib_index < 0 or int(self.vib_index) != self.vib_index:
            raise ConfigurationError("vibrational index must be a non-negative integer")


@dataclass(frozen=True)
class CAPSpec:
    """Cubic absorber along the far ends of both valleys.

    The reactant absorber occupies the high-Q1 edge of the grid and the
    product absorber the high-Q2 edge.
    """

    width: float  # m
    strength: float  # J
    power: int = 3

    def __post_init__(self):
        if not (self.width > 0 and self.strength > 0):
            raise ConfigurationError("CAP width and strength must be positive")


@dataclass
class CapRaster:
    """Absorbing potential Gamma(Q) (J) split into per-zone weights."""

    gamma: np.ndarray
    zones: dict  # name -> (slice tuple, weight array on that slice)

    @classmethod
    def none(cls, grid):
        return cls(np.zeros(grid.shape), {})

    @classmethod
    def build(cls, spec, grid, product=None):
        """Absorber raster; ``product`` optionally overrides ``spec`` for the
        product-side zone (the two valleys carry very different speeds)."""
        specs = {REACTANT: spec, PRODUCT: product or spec}
        Q1, Q2 = grid.mesh()
        edges, profiles = {}, {}
        for name, coord, hi, dx in (
            (REACTANT, Q1, grid.x1_max, grid.dx1),
            (PRODUCT, Q2, grid.x2_max, grid.dx2),
        ):
            sp = specs[name]
            if sp.width / dx < 10:
                raise ConfigurationError(f"{name} CAP width must span at least 10 grid cells")
            edges[name] = hi - sp.width
            profiles[name] = sp.strength * (np.clip(coord - edges[name], 0.0, None) / sp.width) ** sp.power
        gamma = profiles[REACTANT] + profiles[PRODUCT]
        with np.errstate(invalid="ignore", divide="ignore"):
            w = {name: np.where(gamma > 0, p / gamma, 0.0) for name, p in profiles.items()}
        i0 = int(np.searchsorted(grid.x1, edges[REACTANT]))
        j0 = int(np.searchsorted(grid.x2, edges[PRODUCT]))
        zones = {
            REACTANT: ((slice(i0, None), slice(None)), w[REACTANT][i0:, :]),
            PRODUCT: ((slice(None), slice(j0, None)), w[PRODUCT][:, j0:]),
        }
        return cls(gamma, zones)

    def region(self, grid):
        """Boolean mask of the grid points where the absorber is active."""
        return self.gamma > 0


def _harmonic_state(n, x):
    """Normalized oscillator eigenfunction n in dimensionless x (unit length)."""
    # upward recurrence on normalized Hermite functions, stable for large n
    p0 = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if n == 0:
        return p0
    p1 = math.sqrt(2.0) * x * p0
    for k in range(2, n + 1):
        p0, p1 = p1, math.sqrt(2.0 / k) * x * p1 - math.sqrt((k - 1) / k) * p0
    return p1


def harmonic_state(n, chi, chi0, K, m_tilde):
    """Oscillator eigenstate of stiffness K (N/m) for mass m_tilde, in 1/sqrt(m)."""
    L = math.sqrt(CONSTANTS.hbar / math.sqrt(K * m_tilde))
    return _harmonic_state(n, (np.asarray(chi) - chi0) / L) / math.sqrt(L)


def init_wavepacket(spec, grid, waveguide, cap=None):
    """Product of a longitudinal Gaussian and a transverse eigenstate, norm 1."""
    fr = waveguide.frames[spec.channel]
    m = waveguide.m_tilde
    L = math.sqrt(CONSTANTS.hbar / (m * fr.omega(m)))
    node = math.pi * L / math.sqrt(2 * spec.vib_index + 1)
    # grid spacing seen along the transverse direction of the valley
    across = math.hypot(fr.normal[0] * grid.dx1, fr.normal[1] * grid.dx2)
    if node < 8 * across:
        raise ResolutionError(
            f"transverse state n={spec.vib_index} needs spacing <= {node / 8:.3g} m"
        )
    Qc = fr.point(spec.center, fr.chi0)
    if not grid.contains(*Qc):
        raise ConfigurationError("packet center lies outside the grid")
    if cap is not None:
        i = int((Qc[0] - grid.x1_min) / grid.dx1)
        j = int((Qc[1] - grid.x2_min) / grid.dx2)
        if cap.gamma[i, j] > 0:
            raise ConfigurationError("packet center lies inside an absorbing zone")
    Q1, Q2 = grid.mesh()
    u = fr.along(Q1, Q2) - spec.center
    k0 = -m * spec.velocity / CONSTANTS.hbar  # inbound = towards decreasing `along`
    psi = np.exp(-(u**2) / (4.0 * spec.width**2) + 1j * k0 * u)
    psi = psi * harmonic_state(spec.vib_index, fr.across(Q1, Q2), fr.chi0, fr.K, m)
    psi = psi.astype(np.complex128)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dA)
    return Wavefunction(psi, grid, 0.0)


class SplitOperator:
    """Strang-split propagator exp(-iV/2) exp(-iT) exp(-iV/2) with an absorber.

    ``V`` and ``cap.gamma`` are rasters in joules, ``dt`` is in seconds.
    """

    def __init__(self, grid, V, m_tilde, dt, cap=None, units=None, workers=None):
        if not dt > 0:
            raise ConfigurationError("time step must be positive")
        self.grid = grid
        self.dt = dt
        self.m_tilde = m_tilde
        self.cap = cap if cap is not None else CapRaster.none(grid)
        # without explicit units, one time unit is one step
        self.units = units or ReducedUnits(m_tilde, 1.0 / (2.0 * math.pi * dt))
        self.workers = workers
        u = self.units
        V = np.asarray(V, dtype=float)
        if V.shape != grid.shape:
            raise ConfigurationError(f"potential raster shape {V.shape} != grid {grid.shape}")
        phase = dt * np.max(np.abs(V)) / CONSTANTS.hbar
        if phase >= 0.5:
            raise ConfigurationError(
                f"time step too large: dt*max|V|/hbar = {phase:.3g} rad (limit 0.5)"
            )
        tau = dt / u.time
        v_red = V / u.energy
        g_red = self.cap.gamma / u.energy
        self.half = np.exp(-(1j * v_red + g_red) * (0.5 * tau))
        k1 = grid.k1 * u.length
        k2 = grid.k2 * u.length
        ksq = k1[:, None] ** 2 + k2[None, :] ** 2
        self.kinetic = np.exp(-0.5j * ksq * tau)
        # probability removed by one half step, per zone, as a density weight
        keep = np.exp(-g_red * tau)
        self._loss = {
            name: (sl, (1.0 - keep[sl]) * w * grid.dA) for name, (sl, w) in self.cap.zones.items()
        }
        self.absorbed = {name: 0.0 for name in CHANNELS}

    def _absorb(self, psi):
        for name, (sl, lw) in self._loss.items():
            p = psi[sl]
            self.absorbed[name] += float(np.sum((p.real**2 + p.imag**2) * lw))

    def advance(self, psi):
        """One step on a raw amplitude array (modified in place and returned)."""
        self._absorb(psi)
        psi *= self.half
        phi = scipy.fft.fft2(psi, workers=self.workers, overwrite_x=True)
        phi *= self.kinetic
        psi = scipy.fft.ifft2(phi, workers=self.workers, overwrite_x=True)
        self._absorb(psi)
        psi *= self.half
        return psi

    def step(self, wf):
        out = self.advance(wf.amplitudes.copy())
        return Wavefunction(out, wf.grid, wf.time + self.dt)


def step(psi, dt, V, cap, m_tilde, units=None):
    """Single split-operator step (convenience wrapper around SplitOperator)."""
    cap = cap if isinstance(cap, CapRaster) or cap is None else CapRaster(np.asarray(cap), {})
    op = SplitOperator(psi.grid, V, m_tilde, dt, cap=cap, units=units)
    return op.step(psi)


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)  # Wavefunction copies
    steps: list = field(default_factory=list)
    times: list = field(default_factory=list)  # s, at every stride
    norms: list = field(default_factory=list)
    absorbed: list = field(default_factory=list)  # dicts, cumulative
    final: Wavefunction = None

    def bookkeeping_error(self):
        """|norm + total absorbed - initial norm| at the last record."""
        return abs(self.norms[-1] + sum(self.absorbed[-1].values()) - self.norms[0])

    def summary(self):
        return {
            "steps": list(self.steps),
            "times_s": list(self.times),
            "norms": list(self.norms),
            "absorbed": {name: [a[name] for a in self.absorbed] for name in CHANNELS},
            "bookkeeping_error": self.bookkeeping_error(),
        }


def propagate(psi0, propagator, n_steps, stride=100, observers=(), keep_snapshots=True, start_step=0):
    """Run ``n_steps`` steps, recording every ``stride`` steps.

    Observers are callables ``obs(step, wavefunction)`` with a ``stride``
    attribute; they see the state at step 0 and every ``obs.stride`` steps.
    The absorbed-probability ledger lives on the propagator and is cumulative
    across calls.
    """
    if n_steps < 0:
        raise DomainError("n_steps must be >= 0")
    stride = max(1, int(stride))
    traj = Trajectory()
    psi = psi0.amplitudes.copy()
    t0 = psi0.time
    grid = psi0.grid
    dt = propagator.dt

    def t_of(k):
        # written so that a restart with t0 = start * dt reproduces k * dt exactly
        return (t0 - start_step * dt) + k * dt

    def record(k, arr):
        wf = Wavefunction(arr, grid, t_of(k))
        traj.steps.append(k)
        traj.times.append(wf.time)
        traj.norms.append(wf.norm())
        traj.absorbed.append(dict(propagator.absorbed))
        if keep_snapshots:
            traj.snapshots.append(wf.copy())

    def observe(k, arr):
        wf = None
        for obs in observers:
            if (k - start_step) % obs.stride == 0:
                wf = wf or Wavefunction(arr, grid, t_of(k))
                obs(k, wf)

    record(start_step, psi)
    observe(start_step, psi)
    for n in range(1, n_steps + 1):
        psi = propagator.advance(psi)
        k = start_step + n
        if n % stride == 0 or n == n_steps:
            record(k, psi)
        if observers:
            observe(k, psi)
    traj.final = Wavefunction(psi, grid, t_of(start_step + n_steps))
    return traj


def energy_expectation(wf, V, m_tilde):
    """<H> = <T> + <V> in joules, kinetic part evaluated spectrally."""
    grid = wf.grid
    psi = wf.amplitudes
    phi = np.fft.fft2(psi)
    ksq = grid.k1[:, None] ** 2 + grid.k2[None, :] ** 2
    w_k = np.abs(phi) ** 2
    kin = CONSTANTS.hbar**2 / (2.0 * m_tilde) * np.sum(ksq * w_k) / np.sum(w_k)
    rho = np.abs(psi) ** 2
    pot = np.sum(V * rho) / np.sum(rho)
    return float(kin + pot)


def mean_momentum(wf):
    """(<P1>, <P2>) in kg m/s."""
    grid = wf.grid
    phi = np.fft.fft2(wf.amplitudes)
    w = np.abs(phi) ** 2
    tot = np.sum(w)
    p1 = CONSTANTS.hbar * np.sum(grid.k1[:, None] * w) / tot
    p2 = CONSTANTS.hbar * np.sum(grid.k2[None, :] * w) / tot
    return float(p1), float(p2)


def mean_position(wf):
    Q1, Q2 = wf.grid.mesh()
    rho = wf.density()
    tot = np.sum(rho)
    return float(np.sum(Q1 * rho) / tot), float(np.sum(Q2 * rho) / tot)


# -- snapshot files ----------------------------------------------------------

SNAPSHOT_HEADER = ["Q1_m", "Q2_m", "re_psi", "im_psi", "abs_psi_sq"]


def snapshot_name(step_index):
    return f"snap_{step_index:08d}.csv"


def write_snapshot(wf, path):
    """CSV raster, one grid point per row, values written with repr()."""
    Q1, Q2 = wf.grid.mesh()
    psi = wf.amplitudes
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(SNAPSHOT_HEADER) + "\n")
        for q1, q2, z in zip(Q1.ravel().tolist(), Q2.ravel().tolist(), psi.ravel().tolist()):
            fh.write(f"{q1!r},{q2!r},{z.real!r},{z.imag!r},{abs(z) ** 2!r}\n")


def read_snapshot(path, grid, time=0.0):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SNAPSHOT_HEADER:
            raise ConfigurationError(f"{path}: unexpected header {header}")
        try:
            data = np.array([[float(v) for v in row[:4]] for row in reader])
        except ValueError as exc:
            raise ConfigurationError(f"{path}: malformed snapshot row ({exc})") from None
    if data.shape[0] != grid.n1 * grid.n2:
        raise ConfigurationError(f"{path}: {data.shape[0]} rows, grid has {grid.n1 * grid.n2}")
    Q1, Q2 = grid.mesh()
    if not (np.allclose(data[:, 0], Q1.ravel()) and np.allclose(data[:, 1], Q2.ravel())):
        raise ConfigurationError(f"{path}: coordinates do not match the configured grid")
    psi = (data[:, 2] + 1j * data[:, 3]).reshape(grid.shape)
    return Wavefunction(psi, grid, time)


def step_from_name(path):
    base = os.path.basename(path)
    if not (base.startswith("snap_") and base.endswith(".csv")):
        raise ConfigurationError(f"not a snapshot file name: {base}")
    return int(base[5:-4])


def write_summary(traj, path, extra=None):
    data = traj.summary()
    if extra:
        data.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def channel_coordinates(waveguide, channel, Q1, Q2):
    """(along, across) of grid points in the frame of ``channel``."""
    fr = waveguide.frames[channel]
    return fr.along(Q1, Q2), fr.across(Q1, Q2)


__all__ = [
    "ReducedUnits",
    "ChannelFrame",
    "Waveguide",
    "Grid2D",
    "Wavefunction",
    "WavePacketSpec",
    "CAPSpec",
    "CapRaster",
    "SplitOperator",
    "Trajectory",
    "harmonic_state",
    "init_wavepacket",
    "step",
    "propagate",
    "energy_expectation",
    "mean_momentum",
    "mean_position",
    "write_snapshot",
    "read_snapshot",
    "snapshot_name",
    "step_from_name",
    "write_summary",
]
