"""Design a waveguide that lets one 7Li atom act out F + H2 -> HF + H.

The three collinear nuclei are replaced by a single point in skewed,
mass-weighted coordinates. Stretching those coordinates by l and giving the
point the mass of a lithium atom turns a femtosecond collision into a
millisecond trajectory through a microkelvin-deep optical potential.
"""

import math

from coldreact.frames import design_report, mass_factors, solve_l
from coldreact.reference import fh2_li7

ref = fh2_li7()
f = mass_factors(ref.masses)
print(f"skew angle between the reactant and product valleys: {math.degrees(f.beta_angle):.3f} deg")

rep = design_report(ref.surface, ref.masses, ref.m_tilde, l=ref.l, T=298.0)
print(rep.table())

# the other way round: pick the trap frequency, get the scaling factor
for khz in (2.0, 5.657, 20.0):
    l = solve_l(khz * 1e3, 2, ref.surface, ref.masses, ref.m_tilde)
    print(f"reactant valley at {khz:6.3f} kHz needs l = {l:.4e}")
