"""Physical constants, unit factors and the quantity parser used by configs."""

import math
import re
from dataclasses import dataclass

import numpy as np

from coldreact.errors import DomainError, UnitError


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34  # J s
    k_B: float = 1.380649e-23  # J / K
    amu: float = 1.66053907e-27  # kg

    @property
    def h(self):
        return 2.0 * math.pi * self.hbar


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class UnitConversions:
    """Multiplicative factors; divide to convert back."""

    angstrom_to_m: float = 1e-10
    joule_to_microkelvin: float = 1e6 / CONSTANTS.k_B
    hz_to_khz: float = 1e-3
    m_per_s_to_mm_per_s: float = 1e3
    amu_to_kg: float = CONSTANTS.amu


UNITS = UnitConversions()


def energy_to_temperature(energy):
    """Return ``energy / k_B`` in kelvin. Negative energies are rejected."""
    e = np.asarray(energy, dtype=float)
    if np.any(~np.isfinite(e)) or np.any(e < 0):
        raise DomainError(f"energy must be finite and non-negative, got {energy!r}")
    t = e / CONSTANTS.k_B
    return float(t) if t.ndim == 0 else t


# -- quantity parsing ------------------------------------------------------
# Each unit maps to (dimension, factor to SI).
_UNIT_TABLE = {
    "m": ("length", 1.0),
    "cm": ("length", 1e-2),
    "mm": ("length", 1e-3),
    "um": ("length", 1e-6),
    "micron": ("length", 1e-6),
    "nm": ("length", 1e-9),
    "angstrom": ("length", 1e-10),
    "A": ("length", 1e-10),
    "1/m": ("inverse_length", 1.0),
    "1/angstrom": ("inverse_length", 1e10),
    "1/A": ("inverse_length", 1e10),
    "kg": ("mass", 1.0),
    "amu": ("mass", CONSTANTS.amu),
    "u": ("mass", CONSTANTS.amu),
    "J": ("energy", 1.0),
    "eV": ("energy", 1.602176634e-19),
    "K": ("temperature", 1.0),
    "mK": ("temperature", 1e-3),
    "uK": ("temperature", 1e-6),
    "nK": ("temperature", 1e-9),
    "Hz": ("frequency", 1.0),
    "kHz": ("frequency", 1e3),
    "MHz": ("frequency", 1e6),
    "m/s": ("velocity", 1.0),
    "mm/s": ("velocity", 1e-3),
    "um/s": ("velocity", 1e-6),
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "us": ("time", 1e-6),
}

# Energies may also be written as temperatures (E = k_B T), as the
# experimental literature quotes trap depths in microkelvin.
_ENERGY_FROM_TEMPERATURE = CONSTANTS.k_B

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def parse_quantity(text, dimension):
    """Parse ``"<number> <unit>"`` into an SI float of the given dimension.

    ``dimension=None`` means dimensionless; a unit is then forbidden. For a
    dimensioned quantity the unit is mandatory.
    """
    m = _QUANTITY.match(str(text))
    if m is None:
        raise UnitError(f"cannot parse quantity {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if dimension is None:
        if unit:
            raise UnitError(f"{text!r}: expected a dimensionless number")
        return value
    if not unit:
        raise UnitError(f"{text!r}: missing unit (expected {dimension})")
    if unit not in _UNIT_TABLE:
        raise UnitError(f"{text!r}: unknown unit {unit!r}")
    dim, factor = _UNIT_TABLE[unit]
    if dim == dimension:
        return value * factor
    if dimension == "energy" and dim == "temperature":
        return value * factor * _ENERGY_FROM_TEMPERATURE
    raise UnitError(f"{text!r}: unit {unit!r} is {dim}, expected {dimension}")


_SI_UNIT = {
    "length": "m",
    "inverse_length": "1/m",
    "mass": "kg",
    "energy": "J",
    "temperature": "K",
    "frequency": "Hz",
    "velocity": "m/s",
    "time": "s",
}


def format_quantity(value, dimension):
    """Inverse of :func:`parse_quantity`; always written in SI so that
    parse(format(x)) == x bit for bit."""
    if dimension is None:
        return repr(float(value))
    return f"{float(value)!r} {_SI_UNIT[dimension]}"
