"""Cold-atom waveguide simulation of collinear A + BC -> AB + C reactions.

The package maps a collinear triatomic reaction onto the motion of a single
ultracold atom on a 2D potential surface (mass-weighted, scaled coordinates),
propagates wavepackets on that surface and reports the waveguide parameters
needed to realize it.
"""

from coldreact.constants import CONSTANTS, UNITS, energy_to_temperature
from coldreact.potentials import (
    DiatomSpec,
    LepsSurface,
    harmonic_params,
    leps_energy,
    leps_gradient,
    leps_hessian,
    morse_energy,
)
from coldreact.frames import (
    ChemCoords,
    DesignReport,
    MassFactors,
    MassTriple,
    ScalingParams,
    SimCoords,
    channel_params,
    design_report,
    from_sim,
    initial_velocity,
    mass_factors,
    momentum_to_sim,
    scale_potential,
    solve_l,
    to_chem,
    to_sim,
)
from coldreact.reference import fh2_li7

__version__ = "0.1.0"

__all__ = [
    "CONSTANTS",
    "UNITS",
    "energy_to_temperature",
    "DiatomSpec",
    "LepsSurface",
    "harmonic_params",
    "leps_energy",
    "leps_gradient",
    "leps_hessian",
    "morse_energy",
    "ChemCoords",
    "DesignReport",
    "MassFactors",
    "MassTriple",
    "ScalingParams",
    "SimCoords",
    "channel_params",
    "design_report",
    "from_sim",
    "initial_velocity",
    "mass_factors",
    "momentum_to_sim",
    "scale_potential",
    "solve_l",
    "to_chem",
    "to_sim",
    "fh2_li7",
]
