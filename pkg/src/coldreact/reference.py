"""Reference reactions.

``fh2_li7`` reproduces the worked example F + H2 -> FH + H simulated with
lithium, using the numbers exactly as printed there (masses in kg rounded to
three digits, natural-lithium simulator mass). ``ISOTOPE_MASSES_AMU`` holds
precise isotopic masses for users who want them; nothing in the test suite
depends on it.
"""

from dataclasses import dataclass

from coldreact.frames import MassTriple
from coldreact.potentials import DiatomSpec, LepsSurface

ANGSTROM = 1e-10

ISOTOPE_MASSES_AMU = {
    "H": 1.00782503207,
    "D": 2.0141017778,
    "F": 18.99840322,
    "Cl": 34.96885268,
    "Li6": 6.015122795,
    "Li7": 7.01600455,
    "Na23": 22.9897692809,
    "Rb87": 86.909180527,
}


@dataclass(frozen=True)
class ReferenceSystem:
    masses: MassTriple
    surface: LepsSurface
    m_tilde: float
    l: float
    temperature: float


def fh2_surface(delta=0.164, masses=None):
    """LEPS surface for F-H-H with the printed HF and H2 Morse parameters.

    The AC pair (F with the far H) is again HF.
    """
    m = masses or fh2_masses()
    hf = dict(D=9.609e-19, beta_morse=2.242 / ANGSTROM, q0=0.917 * ANGSTROM)
    hh = dict(D=7.608e-19, beta_morse=1.942 / ANGSTROM, q0=0.742 * ANGSTROM)
    return LepsSurface(
        (
            DiatomSpec(mu=m.mu_AB, **hf),
            DiatomSpec(mu=m.mu_BC, **hh),
            DiatomSpec(mu=m.mu_AC, **hf),
        ),
        delta,
    )


def fh2_masses():
    return MassTriple(3.15e-26, 1.66e-27, 1.66e-27)


def fh2_li7():
    masses = fh2_masses()
    return ReferenceSystem(
        masses=masses,
        surface=fh2_surface(masses=masses),
        m_tilde=1.1526e-26,
        l=6.55e-6,
        temperature=298.0,
    )
