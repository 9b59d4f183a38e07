"""Inverse problem: tune the LEPS parameters so surface observables hit targets."""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from coldreact.analysis import ChannelPartition, channel_populations, exoergicity, find_saddle
from coldreact.errors import ConfigurationError, DomainError, NumericalError
from coldreact.propagator import (
    PRODUCT,
    CAPSpec,
    CapRaster,
    Grid2D,
    SplitOperator,
    WavePacketSpec,
    Waveguide,
    init_wavepacket,
    propagate,
)

PARAMETERS = ("delta", "D1", "D2", "D3", "beta1", "beta2", "beta3")
OBSERVABLES = ("barrier_height", "exoergicity", "saddle_q1", "saddle_q2", "product_branching")
SADDLE_OBSERVABLES = ("barrier_height", "saddle_q1", "saddle_q2")

# Objective value returned when an observable cannot be computed (no saddle
# found, unstable propagation). Far above any residual sum of interest.
PENALTY = 1.0e6

OBJECTIVE_TOL = 1e-12
SIMPLEX_TOL = 1e-8


def get_param(surface, name):
    if name == "delta":
        return surface.delta
    idx = int(name[-1]) - 1
    spec = surface.diatoms[idx]
    return spec.D if name[0] == "D" else spec.beta_morse


def apply_params(surface, params):
    """Surface with the named parameters replaced."""
    params = dict(params)
    delta = params.pop("delta", None)
    return surface.with_params(delta=delta, **params)


@dataclass(frozen=True)
class Objective:
    observable: str
    target: float
    weight: float = 1.0

    def __post_init__(self):
        if self.observable not in OBSERVABLES:
            raise ConfigurationError(f"unknown observable {self.observable!r}; choose from {OBSERVABLES}")
        if not (math.isfinite(self.target) and math.isfinite(self.weight) and self.weight >= 0):
            raise ConfigurationError("objective target and weight must be finite, weight >= 0")


@dataclass(frozen=True)
class BranchingPreset:
    """Coarse propagation used for the ``product_branching`` observable.

    Lengths in metres, times in seconds; ``velocity`` is the inbound launch
    speed along the reactant valley.
    """

    masses: object
    m_tilde: float
    l: float
    velocity: float
    grid: tuple = (2e-6, 52e-6, 0.0, 24e-6, 256, 128)
    center: float = 32e-6
    width: float = 4e-6
    reactant_cap: tuple = (12e-6, 2.0)  # width (m), strength in units of h nu_2 / 2 pi
    product_cap: tuple = (6e-6, 5.0)
    dt: float = 0.6e-6
    n_steps: int = 16000
    product_line: float = 22e-6

    def run(self, surface):
        """Reactive probability: product absorption plus product-region remainder."""
        wg = Waveguide.from_values(surface, self.masses, self.m_tilde, self.l)
        E0 = wg.units.energy
        grid = Grid2D(*self.grid)
        cap = CapRaster.build(
            CAPSpec(self.reactant_cap[0], self.reactant_cap[1] * E0),
            grid,
            CAPSpec(self.product_cap[0], self.product_cap[1] * E0),
        )
        wf = init_wavepacket(WavePacketSpec("reactant", self.center, self.width, self.velocity, 0), grid, wg, cap)
        op = SplitOperator(grid, wg.raster(grid), self.m_tilde, self.dt, cap=cap, units=wg.units)
        traj = propagate(wf, op, self.n_steps, stride=self.n_steps, keep_snapshots=False)
        part = ChannelPartition(grid.x1_max - self.reactant_cap[0] - 2e-6, self.product_line)
        pops = channel_populations(traj.final, part, wg)
        return op.absorbed[PRODUCT] + pops[PRODUCT]

    def to_dict(self):
        d = asdict(self)
        d["masses"] = [self.masses.m_A, self.masses.m_B, self.masses.m_C]
        return d


@dataclass(frozen=True)
class FitProblem:
    surface: object  # LepsSurface supplying the fixed parameters
    free: tuple  # names from PARAMETERS
    bounds: dict  # name -> (lo, hi)
    objectives: tuple
    branching: BranchingPreset = None
    max_evals: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "free", tuple(self.free))
        object.__setattr__(self, "objectives", tuple(self.objectives))
        if not self.objectives:
            raise ConfigurationError("a fit needs at least one objective term")
        for name in self.free:
            if name not in PARAMETERS:
                raise ConfigurationError(f"unknown parameter {name!r}; choose from {PARAMETERS}")
            if name not in self.bounds:
                raise ConfigurationError(f"no bounds given for {name}")
            lo, hi = self.bounds[name]
            if not lo < hi:
                raise ConfigurationError(f"empty bounds for {name}: {lo} .. {hi}")
            floor = -1.0 if name == "delta" else 0.0
            if lo <= floor:
                raise ConfigurationError(f"lower bound of {name} must exceed {floor}")
        if any(o.observable == "product_branching" for o in self.objectives) and self.branching is None:
            raise ConfigurationError("product_branching needs a propagation preset")

    def clip(self, params):
        return {n: float(np.clip(params[n], *self.bounds[n])) for n in self.free}

    def initial(self):
        return {n: get_param(self.surface, n) for n in self.free}


@dataclass
class Evaluation:
    value: float
    observables: dict
    failed: bool = False
    message: str = ""


def compute_observables(surface, names, branching=None):
    out = {}
    if any(n in SADDLE_OBSERVABLES for n in names):
        s = find_saddle(surface)
        out.update(barrier_height=s.barrier, saddle_q1=s.q1, saddle_q2=s.q2)
    if "exoergicity" in names:
        out["exoergicity"] = exoergicity(surface)
    if "product_branching" in names:
        out["product_branching"] = branching.run(surface)
    return {n: out[n] for n in names}


def evaluate(problem, params):
    """Objective with its observables; failures give PENALTY and ``failed``."""
    p = problem.clip(params)
    try:
        surface = apply_params(problem.surface, p)
        obs = compute_observables(surface, [o.observable for o in problem.objectives], problem.branching)
    except (NumericalError, DomainError, ConfigurationError) as exc:
        return Evaluation(PENALTY, {}, True, str(exc))
    total = 0.0
    for o in problem.objectives:
        r = obs[o.observable] - o.target
        if o.target != 0:
            r /= o.target
        total += o.weight * r * r
    return Evaluation(total, obs)


def evaluate_objective(problem, params):
    """Weighted sum of squared relative residuals (PENALTY on failure)."""
    return evaluate(problem, params).value


@dataclass
class FitResult:
    params: dict
    objective: float
    n_evals: int
    converged: bool
    observables: dict = field(default_factory=dict)
    failed_evals: int = 0
    preset: dict = None

    def to_dict(self):
        return {
            "params": dict(sorted(self.params.items())),
            "objective": self.objective,
            "n_evals": self.n_evals,
            "converged": self.converged,
            "observables": dict(sorted(self.observables.items())),
            "failed_evals": self.failed_evals,
            "preset": self.preset,
        }


def fit(problem, initial=None):
    """Bounded Nelder-Mead search.

    Parameters are rescaled to the unit box of their bounds. The starting
    simplex steps a quarter of each box width from the initial point toward
    the box centre, so a start on a flat penalty region still sees feasible
    vertices. Stops when the simplex shrinks below 1e-8 of the box or the
    objective drops below 1e-12.
    """
    x0 = problem.clip(initial if initial is not None else problem.initial())
    preset = problem.branching.to_dict() if problem.branching is not None else None
    names = problem.free
    if not names:
        ev = evaluate(problem, {})
        return FitResult({}, ev.value, 1, not ev.failed, ev.observables, int(ev.failed), preset)
    lo = np.array([problem.bounds[n][0] for n in names])
    hi = np.array([problem.bounds[n][1] for n in names])
    span = hi - lo

    def unpack(z):
        return dict(zip(names, (lo + np.clip(z, 0.0, 1.0) * span).tolist()))

    state = {"n": 0, "failed": 0, "best": (math.inf, None)}

    def f(z):
        if state["n"] >= problem.max_evals:
            raise _Budget
        ev = evaluate(problem, unpack(z))
        state["n"] += 1
        state["failed"] += int(ev.failed)
        if ev.value < state["best"][0]:
            state["best"] = (ev.value, np.array(z, dtype=float))
        return ev.value

    def stop(intermediate_result):
        if intermediate_result.fun < OBJECTIVE_TOL:
            raise StopIteration

    z0 = (np.array([x0[n] for n in names]) - lo) / span
    simplex = [z0]
    for i in range(len(names)):
        v = z0.copy()
        v[i] += 0.25 if z0[i] <= 0.5 else -0.25
        simplex.append(v)
    res = None
    try:
        res = minimize(
            f,
            z0,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0)] * len(names),
            callback=stop,
            options={
                "initial_simplex": np.array(simplex),
                "xatol": SIMPLEX_TOL,
                "fatol": math.inf,
                "maxfev": problem.max_evals,
                "maxiter": 100 * problem.max_evals,
            },
        )
    except _Budget:
        pass
    best_f, best_z = state["best"]
    converged = best_f < OBJECTIVE_TOL or (res is not None and res.status == 0)
    params = unpack(best_z)
    ev = evaluate(problem, params)
    # a simplex that collapsed on a penalty plateau has not found anything
    converged = converged and not ev.failed
    return FitResult(params, ev.value, state["n"], bool(converged), ev.observables, state["failed"], preset)


class _Budget(Exception):
    pass


# -- JSON interface ------------------------------------------------------------


def problem_from_dict(data, surface, branching=None):
    """Build a FitProblem from the fit_problem.json layout.

    {"parameters": {"delta": {"initial": 0.3, "bounds": [-0.2, 0.5]}},
     "objectives": [{"observable": "barrier_height", "target": 6.2e-21, "weight": 1}],
     "max_evals": 2000}
    """
    try:
        params = data["parameters"]
        objectives = [Objective(o["observable"], float(o["target"]), float(o.get("weight", 1.0))) for o in data["objectives"]]
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed fit problem: missing {exc}") from None
    unknown = set(data) - {"parameters", "objectives", "max_evals"}
    if unknown:
        raise ConfigurationError(f"unknown fit problem keys: {sorted(unknown)}")
    free = tuple(sorted(params))
    bounds = {n: tuple(float(b) for b in params[n]["bounds"]) for n in free}
    initial = {n: float(params[n]["initial"]) for n in free if "initial" in params[n]}
    base = apply_params(surface, initial) if initial else surface
    return FitProblem(base, free, bounds, objectives, branching, int(data.get("max_evals", 2000)))


def write_result(result, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
