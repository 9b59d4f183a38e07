"""Chemical frame <-> simulation frame.

The chemical frame uses the bond coordinates q1 = x_B - x_A and
q2 = x_C - x_B. The simulation frame uses skewed, mass-weighted coordinates
(Q1, Q2) in which the three-body kinetic energy becomes that of a single
particle of mass ``m_tilde``; the potential there is ``l**2`` times the
chemical one and time runs as tau = t / l**2.

Channel convention: j = 1 is the product valley (AB bound, q2 large),
j = 2 the reactant valley (BC bound, q1 large).
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from coldreact.constants import CONSTANTS, UNITS
from coldreact.errors import DomainError, NumericalError
from coldreact.potentials import harmonic_params, leps_energy


@dataclass(frozen=True)
class MassTriple:
    m_A: float
    m_B: float
    m_C: float

    def __post_init__(self):
        for name in ("m_A", "m_B", "m_C"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v!r}")

    @classmethod
    def from_amu(cls, m_A, m_B, m_C):
        return cls(m_A * CONSTANTS.amu, m_B * CONSTANTS.amu, m_C * CONSTANTS.amu)

    @property
    def M(self):
        return self.m_A + self.m_B + self.m_C

    @property
    def mu_AB(self):
        return self.m_A * self.m_B / (self.m_A + self.m_B)

    @property
    def mu_BC(self):
        return self.m_B * self.m_C / (self.m_B + self.m_C)

    @property
    def mu_AC(self):
        return self.m_A * self.m_C / (self.m_A + self.m_C)


@dataclass(frozen=True)
class MassFactors:
    a: float  # kg^(1/2)
    b: float  # kg^(1/2)
    beta_angle: float  # rad, skew angle between the two valleys

    @property
    def sin(self):
        return math.sin(self.beta_angle)

    @property
    def cos(self):
        return math.cos(self.beta_angle)


@dataclass(frozen=True)
class ScalingParams:
    m_tilde: float  # kg, mass of the simulating atom
    l: float  # dimensionless

    def __post_init__(self):
        if not (self.m_tilde > 0 and math.isfinite(self.m_tilde)):
            raise DomainError("m_tilde must be positive")
        if not (self.l > 0 and math.isfinite(self.l)):
            raise DomainError("l must be positive")

    @property
    def s(self):
        """sqrt(m_tilde) * l, the factor that recurs in every transform."""
        return math.sqrt(self.m_tilde) * self.l

    @property
    def tau_scale(self):
        return 1.0 / self.l**2


@dataclass(frozen=True)
class ChemCoords:
    q1: object
    q2: object
    R_CM: object = 0.0


@dataclass(frozen=True)
class SimCoords:
    Q1: object
    Q2: object


def mass_factors(masses):
    m_A, m_B, m_C, M = masses.m_A, masses.m_B, masses.m_C, masses.M
    a = math.sqrt(m_A * (m_B + m_C) / M)
    b = math.sqrt(m_C * (m_B + m_A) / M)
    beta = math.atan(math.sqrt(m_B * M / (m_A * m_C)))
    return MassFactors(a, b, beta)


def to_sim(coords, factors, scaling):
    q1 = np.asarray(coords.q1, dtype=float)
    q2 = np.asarray(coords.q2, dtype=float)
    s = scaling.s
    Q1 = (factors.a * q1 + factors.b * q2 * factors.cos) / s
    Q2 = factors.b * q2 * factors.sin / s
    return SimCoords(_unwrap(Q1), _unwrap(Q2))


def to_chem(coords, factors, scaling):
    """Inverse of :func:`to_sim` (R_CM is not represented and set to 0)."""
    Q1 = np.asarray(coords.Q1, dtype=float)
    Q2 = np.asarray(coords.Q2, dtype=float)
    s = scaling.s
    q2 = s * Q2 / (factors.b * factors.sin)
    q1 = (s * Q1 - factors.b * q2 * factors.cos) / factors.a
    return ChemCoords(_unwrap(q1), _unwrap(q2))


def from_sim(coords, masses, factors, scaling, R_CM=0.0):
    """Lab-frame positions (x_A, x_B, x_C) of the three nuclei."""
    Q1 = np.asarray(coords.Q1, dtype=float)
    Q2 = np.asarray(coords.Q2, dtype=float)
    s = scaling.s
    a, b, cb, sb = factors.a, factors.b, factors.cos, factors.sin
    x_A = R_CM - a * s / masses.m_A * Q1
    x_B = R_CM + b * s * (cb / masses.m_C * Q1 - sb / masses.m_B * Q2)
    x_C = R_CM + b * s / masses.m_C * (cb * Q1 + sb * Q2)
    return _unwrap(x_A), _unwrap(x_B), _unwrap(x_C)


def momentum_to_sim(p_A, p_B, p_C, masses, factors, scaling):
    """Lab momenta -> (P_CM, P_Q1, P_Q2)."""
    m_A, m_B, m_C = masses.m_A, masses.m_B, masses.m_C
    s = scaling.s
    P_CM = p_A + p_B + p_C
    P_Q1 = s * factors.a / (m_B + m_C) * (-(m_B + m_C) / m_A * p_A + p_B + p_C)
    P_Q2 = s * factors.b * factors.sin * (p_C / m_C - p_B / m_B)
    return P_CM, P_Q1, P_Q2


def scale_potential(surface, factors, scaling):
    """Return V_Q(Q1, Q2) = l^2 V(q1, q2) as a vectorized callable (J)."""
    l2 = scaling.l**2

    def V_Q(Q1, Q2):
        c = to_chem(SimCoords(Q1, Q2), factors, scaling)
        return l2 * leps_energy(surface, c.q1, c.q2)

    return V_Q


@dataclass(frozen=True)
class ChannelParams:
    """Asymptotic harmonic valleys in the simulation frame."""

    chi_10: float
    chi_20: float
    K_tilde_1: float
    K_tilde_2: float
    nu_tilde_1: float
    nu_tilde_2: float


def chi_1(Q1, Q2, factors):
    """Transverse coordinate of the product valley (a rotation of Q)."""
    return factors.sin * Q1 - factors.cos * Q2


def s_1(Q1, Q2, factors):
    """Longitudinal coordinate along the product valley."""
    return factors.cos * Q1 + factors.sin * Q2


def _channel_mass_factor(channel, factors):
    if channel == 1:
        return factors.a * factors.sin
    if channel == 2:
        return factors.b * factors.sin
    raise DomainError(f"channel must be 1 (products) or 2 (reactants), got {channel!r}")


def channel_params(surface, masses, factors, scaling):
    s = scaling.s
    out = {}
    for j in (1, 2):
        spec = surface.diatoms[j - 1]
        c = _channel_mass_factor(j, factors)
        hp = harmonic_params(spec)
        chi0 = spec.q0 * c / s
        K_t = hp["K"] * scaling.m_tilde * scaling.l**4 / c**2
        nu_t = scaling.l**2 * math.sqrt(spec.mu) / c * hp["nu"]
        # second route: oscillator frequency of K_tilde carrying mass m_tilde
        nu_direct = math.sqrt(K_t / scaling.m_tilde) / (2.0 * math.pi)
        if abs(nu_direct - nu_t) > 1e-10 * nu_t:
            raise NumericalError(f"channel {j}: frequency routes disagree ({nu_t} vs {nu_direct})")
        out[j] = (chi0, K_t, nu_t)
    return ChannelParams(
        chi_10=out[1][0],
        chi_20=out[2][0],
        K_tilde_1=out[1][1],
        K_tilde_2=out[2][1],
        nu_tilde_1=out[1][2],
        nu_tilde_2=out[2][2],
    )


def solve_l(target_nu_tilde, channel, surface, masses, m_tilde=None):
    """Scaling factor ``l`` that puts channel ``channel`` at ``target_nu_tilde`` Hz.

    ``m_tilde`` cancels out of the valley frequency; it is accepted for
    symmetry with the other design calls.
    """
    if not (target_nu_tilde > 0 and math.isfinite(target_nu_tilde)):
        raise DomainError(f"target frequency must be positive, got {target_nu_tilde!r}")
    factors = mass_factors(masses)
    c = _channel_mass_factor(channel, factors)
    nu = harmonic_params(surface.diatoms[channel - 1])["nu"]
    spec = surface.diatoms[channel - 1]
    return math.sqrt(target_nu_tilde * c / (math.sqrt(spec.mu) * nu))


def initial_velocity(T, masses, factors, scaling):
    """Thermal launch speed of the simulating atom along the reactant valley.

    The returned ``v_Q1`` is the speed towards the interaction region; the
    transverse component is taken as exactly zero.
    """
    if not (math.isfinite(T) and T >= 0):
        raise DomainError(f"temperature must be >= 0, got {T!r}")
    m_A, m_BC = masses.m_A, masses.m_B + masses.m_C
    v = (
        factors.a
        * scaling.l
        * math.sqrt(CONSTANTS.k_B * T / (scaling.m_tilde * m_A))
        * (1.0 + math.sqrt(m_A / m_BC))
    )
    return {"v_Q1": v, "v_Q2": 0.0}


@dataclass(frozen=True)
class DesignReport:
    nu_tilde_1: float  # Hz
    nu_tilde_2: float  # Hz
    V_tilde_1: float  # J
    V_tilde_2: float  # J
    v_Q1: float  # m/s
    length_scale_1: float  # m of Q per m of q2 along the product valley
    length_scale_2: float  # m of Q per m of q1 along the reactant valley
    chi_10: float  # m
    chi_20: float  # m
    K_tilde_1: float  # N/m
    K_tilde_2: float  # N/m
    tau_scale: float  # simulation seconds per chemical second
    l: float
    m_tilde: float  # kg
    temperature: float  # K

    @property
    def V_tilde_1_uK(self):
        return self.V_tilde_1 * UNITS.joule_to_microkelvin

    @property
    def V_tilde_2_uK(self):
        return self.V_tilde_2 * UNITS.joule_to_microkelvin

    def to_dict(self):
        return {
            "nu_tilde_1_hz": self.nu_tilde_1,
            "nu_tilde_2_hz": self.nu_tilde_2,
            "v_tilde_1_uK": self.V_tilde_1_uK,
            "v_tilde_2_uK": self.V_tilde_2_uK,
            "v_q1_mm_s": self.v_Q1 * UNITS.m_per_s_to_mm_per_s,
            "l": self.l,
            "m_tilde_kg": self.m_tilde,
            "tau_scale": self.tau_scale,
            "chi_10_m": self.chi_10,
            "chi_20_m": self.chi_20,
            "k_tilde_1_n_per_m": self.K_tilde_1,
            "k_tilde_2_n_per_m": self.K_tilde_2,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def table(self):
        rows = [
            ("scaling factor l", f"{self.l:.6g}", ""),
            ("simulator mass", f"{self.m_tilde:.6g}", "kg"),
            ("reactant valley frequency", f"{self.nu_tilde_2 * UNITS.hz_to_khz:.4g}", "kHz"),
            ("product valley frequency", f"{self.nu_tilde_1 * UNITS.hz_to_khz:.4g}", "kHz"),
            ("reactant valley depth", f"{self.V_tilde_2_uK:.4g}", "uK"),
            ("product valley depth", f"{self.V_tilde_1_uK:.4g}", "uK"),
            ("launch velocity", f"{self.v_Q1 * UNITS.m_per_s_to_mm_per_s:.4g}", "mm/s"),
            ("length map, reactant valley", f"{self.length_scale_2 * 1e-4:.4g}", "um/angstrom"),
            ("length map, product valley", f"{self.length_scale_1 * 1e-4:.4g}", "um/angstrom"),
            ("time scale tau/t", f"{self.tau_scale:.4g}", ""),
        ]
        w = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{w}}  {val:>12} {unit}".rstrip() for name, val, unit in rows) + "\n"


def design_report(surface, masses, m_tilde, l=None, target_frequency=None, T=0.0, target_channel=2):
    """Collect every waveguide design number for one simulator atom.

    Exactly one of ``l`` and ``target_frequency`` (Hz, for ``target_channel``)
    must be given.
    """
    if (l is None) == (target_frequency is None):
        raise DomainError("give exactly one of l or target_frequency")
    if l is None:
        l = solve_l(target_frequency, target_channel, surface, masses, m_tilde)
    factors = mass_factors(masses)
    scaling = ScalingParams(m_tilde, l)
    ch = channel_params(surface, masses, factors, scaling)
    vel = initial_velocity(T, masses, factors, scaling)
    return DesignReport(
        nu_tilde_1=ch.nu_tilde_1,
        nu_tilde_2=ch.nu_tilde_2,
        V_tilde_1=surface.ab.D * l**2,
        V_tilde_2=surface.bc.D * l**2,
        v_Q1=vel["v_Q1"],
        length_scale_1=factors.b / scaling.s,
        length_scale_2=factors.a / scaling.s,
        chi_10=ch.chi_10,
        chi_20=ch.chi_20,
        K_tilde_1=ch.K_tilde_1,
        K_tilde_2=ch.K_tilde_2,
        tau_scale=scaling.tau_scale,
        l=l,
        m_tilde=m_tilde,
        temperature=T,
    )


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


__all__ = [
    "MassTriple",
    "MassFactors",
    "ScalingParams",
    "ChemCoords",
    "SimCoords",
    "ChannelParams",
    "DesignReport",
    "mass_factors",
    "to_sim",
    "to_chem",
    "from_sim",
    "momentum_to_sim",
    "scale_potential",
    "channel_params",
    "chi_1",
    "s_1",
    "solve_l",
    "initial_velocity",
    "design_report",
]
