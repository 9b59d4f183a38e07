"""Run configuration: flat ``block.key = value`` files with mandatory units.

Example::

    # reaction
    reaction.m_A = 3.15e-26 kg
    reaction.D1 = 9.609e-19 J
    reaction.delta = 0.164

Blank lines and ``#`` comments are ignored. Every dimensioned value carries a
unit; unknown keys, duplicate keys and malformed lines are errors reported
with their line and column.
"""

import os
from dataclasses import dataclass

from coldreact.constants import format_quantity, parse_quantity
from coldreact.errors import ConfigurationError, DomainError, UnitError

# key -> dimension; None is a plain number, "int" an integer, "str" a word
SCHEMA = {
    "reaction": {
        "m_A": "mass",
        "m_B": "mass",
        "m_C": "mass",
        "delta": None,
        "D1": "energy",
        "D2": "energy",
        "D3": "energy",
        "beta1": "inverse_length",
        "beta2": "inverse_length",
        "beta3": "inverse_length",
        "q01": "length",
        "q02": "length",
        "q03": "length",
    },
    "simulator": {
        "m_tilde": "mass",
        "l": None,
        "target_frequency": "frequency",
        "target_channel": "int",
        "temperature": "temperature",
    },
    "grid": {
        "Q1_min": "length",
        "Q1_max": "length",
        "Q2_min": "length",
        "Q2_max": "length",
        "n1": "int",
        "n2": "int",
    },
    "packet": {
        "channel": "str",
        "center": "length",
        "width": "length",
        "velocity": "velocity",
        "vib_index": "int",
    },
    "cap": {
        "reactant_width": "length",
        "reactant_strength": "energy",
        "product_width": "length",
        "product_strength": "energy",
    },
    "schedule": {"dt": "time", "n_steps": "int", "stride": "int"},
    "analysis": {
        "reactant_line": "length",
        "product_line": "length",
        "reactant_offset": "length",
        "product_offset": "length",
        "basis": "str",
        "n_max": "int",
        "flux_stride": "int",
    },
    "surface": {
        "frame": "str",
        "x1_min": "length",
        "x1_max": "length",
        "x2_min": "length",
        "x2_max": "length",
        "n1": "int",
        "n2": "int",
        "clip": None,
    },
}

REQUIRED = {
    "reaction": [k for k in SCHEMA["reaction"]],
    "simulator": ["m_tilde"],
    "grid": list(SCHEMA["grid"]),
    "packet": ["channel", "center", "width"],
    "cap": list(SCHEMA["cap"]),
    "schedule": ["n_steps"],
}


def _convert(value, kind):
    if kind == "str":
        if not value.replace("_", "").isalnum():
            raise UnitError(f"{value!r}: expected a single word")
        return value
    if kind == "int":
        try:
            return int(value)
        except ValueError:
            raise UnitError(f"{value!r}: expected an integer") from None
    return parse_quantity(value, kind)


def _format(value, kind):
    if kind == "str":
        return value
    if kind == "int":
        return str(int(value))
    return format_quantity(value, kind)


@dataclass
class RunConfig:
    """Parsed configuration: ``blocks[block][key]`` holds SI values."""

    blocks: dict
    source: str = "<string>"

    def has(self, block):
        return bool(self.blocks.get(block))

    def get(self, block, key, default=None):
        return self.blocks.get(block, {}).get(key, default)

    def require(self, block, keys=None):
        """Raise ConfigurationError naming the block if it or a key is missing."""
        if not self.has(block):
            raise ConfigurationError(f"{self.source}: missing [{block}] block")
        missing = [k for k in (keys if keys is not None else REQUIRED.get(block, [])) if k not in self.blocks[block]]
        if missing:
            raise ConfigurationError(f"{self.source}: block {block} is missing {', '.join(missing)}")
        return self.blocks[block]

    def serialize(self):
        lines = []
        for block in SCHEMA:
            if block not in self.blocks:
                continue
            for key, kind in SCHEMA[block].items():
                if key in self.blocks[block]:
                    lines.append(f"{block}.{key} = {_format(self.blocks[block][key], kind)}")
        return "\n".join(lines) + "\n"

    def with_values(self, block, **values):
        blocks = {b: dict(v) for b, v in self.blocks.items()}
        blocks.setdefault(block, {}).update(values)
        return RunConfig(blocks, self.source)

    def without(self, block, *keys):
        blocks = {b: dict(v) for b, v in self.blocks.items()}
        for k in keys:
            blocks.get(block, {}).pop(k, None)
        return RunConfig(blocks, self.source)


def parse_config(text, source="<string>"):
    blocks = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}:{col}: expected 'block.key = value'")
        lhs, rhs = line.split("=", 1)
        key = lhs.strip()
        value = rhs.strip()
        vcol = len(lhs) + 1 + (len(rhs) - len(rhs.lstrip())) + 1
        if "." not in key:
            raise ConfigurationError(f"{source}:{lineno}:{col}: key {key!r} lacks a block prefix")
        block, name = key.split(".", 1)
        if block not in SCHEMA or name not in SCHEMA[block]:
            raise ConfigurationError(f"{source}:{lineno}:{col}: unknown key {key!r}")
        if name in blocks.get(block, {}):
            raise ConfigurationError(f"{source}:{lineno}:{col}: duplicate key {key!r}")
        if not value:
            raise ConfigurationError(f"{source}:{lineno}:{vcol}: empty value for {key!r}")
        try:
            blocks.setdefault(block, {})[name] = _convert(value, SCHEMA[block][name])
        except UnitError as exc:
            raise ConfigurationError(f"{source}:{lineno}:{vcol}: {key}: {exc}") from None
    return RunConfig(blocks, source)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, os.fspath(path))


def bundled_config(name):
    """Path of a configuration shipped with the package (e.g. ``fh2_li7.cfg``)."""
    from importlib.resources import files

    return str(files("coldreact") / "data" / name)


# -- building domain objects -----------------------------------------------------


def build_reaction(cfg):
    from coldreact.frames import MassTriple
    from coldreact.potentials import DiatomSpec, LepsSurface

    r = cfg.require("reaction")
    try:
        masses = MassTriple(r["m_A"], r["m_B"], r["m_C"])
        mus = (masses.mu_AB, masses.mu_BC, masses.mu_AC)
        diatoms = tuple(DiatomSpec(r[f"D{i}"], r[f"beta{i}"], r[f"q0{i}"], mus[i - 1]) for i in (1, 2, 3))
        surface = LepsSurface(diatoms, r["delta"])
    except DomainError as exc:
        raise ConfigurationError(f"{cfg.source}: reaction: {exc}") from None
    return masses, surface


def build_design(cfg, target_frequency=None):
    """(masses, surface, DesignReport) honouring l or a target frequency."""
    from coldreact.frames import design_report

    masses, surface = build_reaction(cfg)
    s = cfg.require("simulator")
    freq = target_frequency if target_frequency is not None else s.get("target_frequency")
    l = None if target_frequency is not None else s.get("l")
    if (l is None) == (freq is None):
        raise ConfigurationError(f"{cfg.source}: simulator block needs exactly one of l or target_frequency")
    try:
        rep = design_report(
            surface,
            masses,
            s["m_tilde"],
            l=l,
            target_frequency=freq,
            T=s.get("temperature", 0.0),
            target_channel=s.get("target_channel", 2),
        )
    except DomainError as exc:
        raise ConfigurationError(f"{cfg.source}: simulator: {exc}") from None
    return masses, surface, rep


@dataclass
class Simulation:
    waveguide: object
    grid: object
    cap: object
    packet: object
    dt: float
    n_steps: int
    stride: int
    report: object


def build_simulation(cfg):
    from coldreact.propagator import CAPSpec, CapRaster, Grid2D, WavePacketSpec, Waveguide

    masses, surface, rep = build_design(cfg)
    g = cfg.require("grid")
    p = cfg.require("packet")
    c = cfg.require("cap")
    sch = cfg.require("schedule")
    try:
        wg = Waveguide.from_values(surface, masses, rep.m_tilde, rep.l)
        grid = Grid2D(g["Q1_min"], g["Q1_max"], g["Q2_min"], g["Q2_max"], g["n1"], g["n2"])
        cap = CapRaster.build(
            CAPSpec(c["reactant_width"], c["reactant_strength"]),
            grid,
            CAPSpec(c["product_width"], c["product_strength"]),
        )
        velocity = p.get("velocity", rep.v_Q1)
        packet = WavePacketSpec(p["channel"], p["center"], p["width"], velocity, p.get("vib_index", 0))
    except (DomainError, ValueError) as exc:
        raise ConfigurationError(f"{cfg.source}: {exc}") from None
    if sch["n_steps"] < 0 or sch.get("stride", 1) < 1:
        raise ConfigurationError(f"{cfg.source}: schedule needs n_steps >= 0 and stride >= 1")
    # default step: a thousandth of the fastest transverse period
    dt = sch.get("dt", 1e-3 / max(rep.nu_tilde_1, rep.nu_tilde_2))
    if dt <= 0:
        raise ConfigurationError(f"{cfg.source}: schedule.dt must be positive")
    return Simulation(wg, grid, cap, packet, dt, sch["n_steps"], sch.get("stride", 100), rep)


def build_partition(cfg):
    """Dividing lines from the analysis block; offsets default to zero."""
    from coldreact.analysis import ChannelPartition

    a = cfg.require("analysis", ["reactant_line", "product_line"])
    return ChannelPartition(
        a["reactant_line"], a["product_line"], a.get("reactant_offset", 0.0), a.get("product_offset", 0.0)
    )
