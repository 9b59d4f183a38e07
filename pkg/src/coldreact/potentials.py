"""Morse diatomics and the three-body LEPS surface for collinear A-B-C.

Pair indexing is fixed throughout the package:

    pair 1 = AB (product molecule),  coordinate q1 = x_B - x_A
    pair 2 = BC (reactant molecule), coordinate q2 = x_C - x_B
    pair 3 = AC,                     coordinate q3 = q1 + q2

All energies are in joules and all distances in metres.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from coldreact.errors import CuspError, DomainError, NumericalError

# Exponent arguments beta*(q0 - q) are capped here so that the surface stays
# finite (and hugely repulsive) for arbitrarily compressed geometries.
_EXP_CAP = 100.0


@dataclass(frozen=True)
class DiatomSpec:
    """Morse parameters of one atom pair.

    D is the dissociation energy (J), beta_morse the range parameter (1/m),
    q0 the equilibrium distance (m) and mu the reduced mass (kg).
    """

    D: float
    beta_morse: float
    q0: float
    mu: float

    def __post_init__(self):
        for name in ("D", "beta_morse", "q0", "mu"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"DiatomSpec.{name} must be finite and >= 0, got {v!r}")
        for name in ("beta_morse", "q0", "mu"):
            if getattr(self, name) <= 0:
                raise DomainError(f"DiatomSpec.{name} must be positive")

    @property
    def K(self):
        return 2.0 * self.D * self.beta_morse**2


@dataclass(frozen=True)
class LepsSurface:
    """Three pair potentials (AB, BC, AC) and the Sato parameter ``delta``."""

    diatoms: tuple
    delta: float

    def __post_init__(self):
        if len(self.diatoms) != 3 or not all(isinstance(d, DiatomSpec) for d in self.diatoms):
            raise DomainError("LepsSurface needs exactly three DiatomSpec (AB, BC, AC)")
        object.__setattr__(self, "diatoms", tuple(self.diatoms))
        if not (math.isfinite(self.delta) and self.delta > -1.0):
            raise DomainError(f"Sato parameter must satisfy delta > -1, got {self.delta!r}")

    @property
    def ab(self):
        return self.diatoms[0]

    @property
    def bc(self):
        return self.diatoms[1]

    @property
    def ac(self):
        return self.diatoms[2]

    @property
    def eps_rad(self):
        return 1e-12 * max(d.D for d in self.diatoms) ** 2

    def with_params(self, delta=None, **pair_params):
        """Copy with a new ``delta`` and/or pair parameters such as ``D3=...``."""
        diatoms = list(self.diatoms)
        for key, value in pair_params.items():
            name, idx = key[:-1], int(key[-1]) - 1
            field = {"D": "D", "beta": "beta_morse", "q0": "q0", "q": "q0"}[name]
            diatoms[idx] = replace(diatoms[idx], **{field: value})
        return LepsSurface(tuple(diatoms), self.delta if delta is None else delta)

    def asymptote(self):
        """Energy with all three atoms far apart (zero for this form)."""
        return 0.0

    def channel_floor(self, channel):
        """Energy at the bottom of the asymptotic valley of a channel (1 or 2)."""
        return -self.diatoms[channel - 1].D


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("coordinates must be finite")


def morse_energy(spec, q):
    """Morse energy D[1 - exp(-beta (q - q0))]^2, zero at the equilibrium."""
    q = np.asarray(q, dtype=float)
    _check_finite(q)
    arg = np.minimum(-spec.beta_morse * (q - spec.q0), _EXP_CAP)
    v = spec.D * (1.0 - np.exp(arg)) ** 2
    return float(v) if v.ndim == 0 else v


def harmonic_params(spec):
    """Force constant K = 2 D beta^2 (N/m) and frequency nu = sqrt(K/mu)/2pi (Hz)."""
    K = 2.0 * spec.D * spec.beta_morse**2
    nu = math.sqrt(K / spec.mu) / (2.0 * math.pi)
    return {"K": K, "nu": nu}


# chain-rule map from (q1, q2) to the pair distances (q1, q2, q1 + q2)
_JAC = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def _pair_terms(surface, q1, q2, order):
    """Coulomb-like U_i and exchange-like alpha_i with derivatives up to ``order``."""
    d = surface.delta
    qs = (q1, q2, q1 + q2)
    out = []
    for spec, q in zip(surface.diatoms, qs):
        arg = np.minimum(-spec.beta_morse * (q - spec.q0), _EXP_CAP)
        x = np.exp(arg)
        c = 0.25 * spec.D
        b = spec.beta_morse
        terms = {
            "U": c * ((3 + d) * x * x - (2 + 6 * d) * x),
            "a": c * ((1 + 3 * d) * x * x - (6 + 2 * d) * x),
        }
        if order >= 1:
            terms["dU"] = -b * c * (2 * (3 + d) * x * x - (2 + 6 * d) * x)
            terms["da"] = -b * c * (2 * (1 + 3 * d) * x * x - (6 + 2 * d) * x)
        if order >= 2:
            terms["d2U"] = b * b * c * (4 * (3 + d) * x * x - (2 + 6 * d) * x)
            terms["d2a"] = b * b * c * (4 * (1 + 3 * d) * x * x - (6 + 2 * d) * x)
        out.append(terms)
    return out


def _radicand(a1, a2, a3):
    # Sum-of-squares form of a1^2 + a2^2 + a3^2 - a1 a2 - a2 a3 - a1 a3;
    # free of the cancellation that the expanded form suffers near the walls.
    # grouped so that swapping pairs 1 and 2 leaves the rounding unchanged
    return 0.5 * ((a1 - a2) ** 2 + ((a2 - a3) ** 2 + (a3 - a1) ** 2))


def leps_energy(surface, q1, q2):
    """LEPS energy (J) at bond distances q1 = r_AB and q2 = r_BC (m).

    Accepts scalars or broadcastable arrays.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    _check_finite(q1, q2)
    t = _pair_terms(surface, q1, q2, 0)
    rad = _radicand(t[0]["a"], t[1]["a"], t[2]["a"])
    if np.any(rad < -surface.eps_rad):
        raise NumericalError("negative LEPS radicand")
    v = (t[0]["U"] + t[1]["U"] + t[2]["U"] - np.sqrt(np.maximum(rad, 0.0))) / (1.0 + surface.delta)
    return float(v) if v.ndim == 0 else v


def _sqrt_term_derivs(surface, q1, q2, order):
    t = _pair_terms(surface, q1, q2, order)
    a = np.stack([ti["a"] for ti in t])
    rad = _radicand(*a)
    if np.any(rad <= surface.eps_rad):
        raise CuspError("LEPS derivative undefined where the exchange radicand vanishes")
    s = np.sqrt(rad)
    # dR/da_i = 2 a_i - a_j - a_k = 3 a_i - sum(a)
    dR = 3.0 * a - a.sum(axis=0)
    return t, a, s, dR


def leps_gradient(surface, q1, q2):
    """Analytic (dV/dq1, dV/dq2) in J/m."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    _check_finite(q1, q2)
    t, a, s, dR = _sqrt_term_derivs(surface, q1, q2, 1)
    grad = []
    for col in range(2):
        gU = sum(_JAC[i, col] * t[i]["dU"] for i in range(3))
        gR = sum(_JAC[i, col] * dR[i] * t[i]["da"] for i in range(3))
        grad.append((gU - gR / (2.0 * s)) / (1.0 + surface.delta))
    g1, g2 = grad
    if np.ndim(g1) == 0:
        return float(g1), float(g2)
    return g1, g2


def leps_hessian(surface, q1, q2):
    """Analytic 2x2 Hessian (J/m^2); array input gives shape (..., 2, 2)."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    _check_finite(q1, q2)
    t, a, s, dR = _sqrt_term_derivs(surface, q1, q2, 2)
    da = [ti["da"] for ti in t]
    shape = np.broadcast(q1, q2).shape
    H = np.empty(shape + (2, 2))
    gR = [sum(_JAC[i, c] * dR[i] * da[i] for i in range(3)) for c in range(2)]
    for p in range(2):
        for r in range(p, 2):
            hU = sum(_JAC[i, p] * _JAC[i, r] * t[i]["d2U"] for i in range(3))
            hR = 0.0
            for i in range(3):
                if _JAC[i, p] == 0:
                    continue
                for j in range(3):
                    if _JAC[j, r] == 0:
                        continue
                    Rij = 2.0 if i == j else -1.0
                    hR = hR + Rij * da[i] * da[j]
                hR = hR + dR[i] * t[i]["d2a"] * _JAC[i, r]
            hS = hR / (2.0 * s) - gR[p] * gR[r] / (4.0 * s**3)
            H[..., p, r] = (hU - hS) / (1.0 + surface.delta)
    H[..., 1, 0] = H[..., 0, 1]
    return H
