"""Command-line front end: ``coldreact <subcommand> --config run.cfg --out dir``.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical
error (non-convergence, bookkeeping violation), 4 I/O error.
"""

import argparse
import csv
import json
import os
import sys
from contextlib import contextmanager

import numpy as np

from coldreact import analysis, config, fit, propagator
from coldreact.constants import parse_quantity
from coldreact.errors import ConfigurationError, DomainError, NumericalError, UnitError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
BOOKKEEPING_TOL = 1e-6
LOCK_NAME = ".coldreact.lock"


class _Usage(Exception):
    pass


def _log(args, *msg):
    if not args.quiet:
        print(*msg)


def _write_json(data, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


@contextmanager
def output_lock(out):
    """Exclusive lock file in the output directory."""
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, LOCK_NAME)
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OSError(f"output directory {out} is locked by another run ({path})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        os.remove(path)


def _config(args):
    if args.config is None:
        raise ConfigurationError("this command needs --config")
    return config.load_config(args.config)


# -- subcommands -----------------------------------------------------------------


def cmd_surface(args):
    cfg = _config(args)
    s = cfg.blocks.get("surface", {})
    frame = args.frame or s.get("frame", "chem")
    if args.window:
        parts = [p for p in args.window.split(",")]
        if len(parts) != 4:
            raise _Usage("--window needs four comma-separated lengths: x1_min,x1_max,x2_min,x2_max")
        window = tuple(parse_quantity(p, "length") for p in parts)
    else:
        keys = ("x1_min", "x1_max", "x2_min", "x2_max")
        if not all(k in s for k in keys):
            raise ConfigurationError(f"{cfg.source}: surface block needs {', '.join(keys)} or pass --window")
        window = tuple(s[k] for k in keys)
    if not (window[1] > window[0] and window[3] > window[2]):
        raise _Usage(f"empty window {window}")
    if args.resolution:
        try:
            shape = tuple(int(v) for v in args.resolution.split(","))
        except ValueError:
            raise _Usage("--resolution needs n1,n2") from None
    else:
        shape = (s.get("n1", 201), s.get("n2", 201))
    if len(shape) != 2 or min(shape) < 2:
        raise _Usage("--resolution needs two integers >= 2")
    clip = args.clip if args.clip is not None else s.get("clip", 40.0)
    masses, surface = config.build_reaction(cfg)
    wg = None
    if frame == "sim":
        _, _, rep = config.build_design(cfg)
        wg = propagator.Waveguide.from_values(surface, masses, rep.m_tilde, rep.l)
    raster = analysis.contour_raster(surface, window, shape, frame, wg, clip)
    path = os.path.join(args.out, f"surface_{frame}.csv")
    raster.write_csv(path)
    _log(args, f"wrote {path} ({shape[0]}x{shape[1]})")
    return EXIT_OK


def cmd_design(args):
    cfg = _config(args)
    freq = parse_quantity(args.target_frequency, "frequency") if args.target_frequency else None
    _, _, rep = config.build_design(cfg, target_frequency=freq)
    path = os.path.join(args.out, "design.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(rep.to_json())
        fh.write("\n")
    _log(args, rep.table())
    _log(args, f"wrote {path}")
    return EXIT_OK


def _flux_observers(cfg, sim):
    if not cfg.has("analysis"):
        return []
    part = config.build_partition(cfg)
    part.check(sim.grid, sim.waveguide, sim.cap)
    a = cfg.blocks["analysis"]
    return [
        analysis.LineFlux(
            sim.waveguide,
            ch,
            part.analysis_line(ch),
            sim.grid,
            a.get("basis", "harmonic"),
            a.get("n_max", 6),
            a.get("flux_stride", 10),
        )
        for ch in propagator.CHANNELS
    ]


def _flux_path(out, channel):
    return os.path.join(out, f"flux_{channel}.csv")


def _load_flux(obs, path, t_max):
    """Restore an observer's time series up to (and including) ``t_max``."""
    if not os.path.exists(path):
        return
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    for row in rows:
        t = float(row[0])
        if t <= t_max * (1 + 1e-12):
            obs.times.append(t)
            obs.total_flux.append(float(row[1]))
            obs.state_flux.append(np.array([float(v) for v in row[2:]]))
    # the restart state is observed again at the resume time
    if obs.times and obs.times[-1] >= t_max * (1 - 1e-12):
        obs.times.pop()
        obs.total_flux.pop()
        obs.state_flux.pop()


def _save_flux(obs, path):
    n = obs.phi.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "total"] + [f"j{k}" for k in range(n)])
        for t, tot, js in zip(obs.times, obs.total_flux, obs.state_flux):
            w.writerow([repr(float(t)), repr(float(tot))] + [repr(float(j)) for j in js])


def cmd_propagate(args):
    cfg = _config(args)
    sim = config.build_simulation(cfg)
    wg, grid = sim.waveguide, sim.grid
    start, absorbed0, norm0, prev = 0, None, 1.0, None
    if args.resume:
        start = propagator.step_from_name(args.resume)
        psi0 = propagator.read_snapshot(args.resume, grid, start * sim.dt)
        summary_path = os.path.join(os.path.dirname(args.resume) or ".", "summary.json")
        if os.path.exists(summary_path):
            with open(summary_path, encoding="utf-8") as fh:
                prev = json.load(fh)
            if start not in prev["steps"]:
                prev = None
            else:
                k = prev["steps"].index(start)
                absorbed0 = {ch: prev["absorbed"][ch][k] for ch in propagator.CHANNELS}
                norm0 = prev.get("initial_norm", 1.0)
        if start > sim.n_steps:
            raise ConfigurationError(f"snapshot step {start} is past schedule.n_steps = {sim.n_steps}")
    else:
        psi0 = propagator.init_wavepacket(sim.packet, grid, wg, sim.cap)
    op = propagator.SplitOperator(grid, wg.raster(grid), wg.m_tilde, sim.dt, sim.cap, wg.units, args.threads)
    if absorbed0:
        op.absorbed.update(absorbed0)
    observers = _flux_observers(cfg, sim)
    for obs in observers:
        if args.resume:
            _load_flux(obs, _flux_path(args.out, obs.channel), psi0.time)
    traj = propagator.propagate(psi0, op, sim.n_steps - start, sim.stride, observers, True, start)
    for k, wf in zip(traj.steps, traj.snapshots):
        propagator.write_snapshot(wf, os.path.join(args.out, propagator.snapshot_name(k)))
    for obs in observers:
        _save_flux(obs, _flux_path(args.out, obs.channel))
    error = abs(traj.norms[-1] + sum(traj.absorbed[-1].values()) - norm0)
    extra = {
        "initial_norm": norm0,
        "bookkeeping_error": error,
        "dt_s": sim.dt,
        "grid_shape": list(grid.shape),
    }
    if prev is not None:
        # keep the records written before the restart point
        k = prev["steps"].index(start)
        cur = traj.summary()
        extra["steps"] = prev["steps"][:k] + cur["steps"]
        extra["times_s"] = prev["times_s"][:k] + cur["times_s"]
        extra["norms"] = prev["norms"][:k] + cur["norms"]
        extra["absorbed"] = {ch: prev["absorbed"][ch][:k] + cur["absorbed"][ch] for ch in propagator.CHANNELS}
    if observers:
        extra["flux"] = {obs.channel: obs.distribution().to_dict() for obs in observers}
    propagator.write_summary(traj, os.path.join(args.out, "summary.json"), extra)
    _log(args, f"steps {start}..{sim.n_steps}: norm {traj.norms[-1]:.9f}, absorbed {traj.absorbed[-1]}")
    if error > BOOKKEEPING_TOL:
        print(f"probability bookkeeping violated: |norm + absorbed - 1| = {error:.3g}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _latest_snapshot(run_dir):
    names = sorted(n for n in os.listdir(run_dir) if n.startswith("snap_") and n.endswith(".csv"))
    if not names:
        raise OSError(f"no snapshots in {run_dir}")
    return os.path.join(run_dir, names[-1])


def cmd_analyze(args):
    cfg = _config(args)
    sim = config.build_simulation(cfg)
    part = config.build_partition(cfg)
    a = cfg.blocks.get("analysis", {})
    basis, n_max = a.get("basis", "harmonic"), a.get("n_max", 6)
    target = args.target or args.out
    snap = _latest_snapshot(target) if os.path.isdir(target) else target
    run_dir = os.path.dirname(snap) or "."
    step = propagator.step_from_name(snap)
    wf = propagator.read_snapshot(snap, sim.grid, step * sim.dt)
    region = analysis.channel_populations(wf, part, sim.waveguide, sim.cap)
    result = {"snapshot": os.path.basename(snap), "time_s": wf.time, "region": region}
    summary_path = os.path.join(run_dir, "summary.json")
    summary = None
    if os.path.exists(summary_path):
        with open(summary_path, encoding="utf-8") as fh:
            summary = json.load(fh)
        if step in summary["steps"]:
            k = summary["steps"].index(step)
            ledger = {ch: summary["absorbed"][ch][k] for ch in propagator.CHANNELS}
            ledger["remaining"] = summary["norms"][k]
            result["ledger"] = analysis.channel_populations(ledger)
    _write_json(result, os.path.join(args.out, "branching_ratios.json"))
    if summary is not None and "flux" in summary and step == summary["steps"][-1]:
        vib = {"method": "flux", "channels": summary["flux"]}
    else:
        vib = {
            "method": "region",
            "channels": {
                ch: analysis.vibrational_distribution(wf, part, ch, sim.waveguide, basis, n_max).to_dict()
                for ch in propagator.CHANNELS
            },
        }
    _write_json(vib, os.path.join(args.out, "vib_distribution.json"))
    saddle = analysis.find_saddle(sim.waveguide.surface, scaling=sim.waveguide.scaling, factors=sim.waveguide.factors)
    info = saddle.to_dict()
    info["advanced"] = analysis.is_advanced(saddle, sim.waveguide.surface)
    _write_json(info, os.path.join(args.out, "saddle.json"))
    _log(args, f"region populations {region}")
    return EXIT_OK


def cmd_fit(args):
    cfg = _config(args)
    _, surface = config.build_reaction(cfg)
    try:
        with open(args.problem, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{args.problem}: invalid JSON: {exc}") from None
    preset = None
    if any(o.get("observable") == "product_branching" for o in data.get("objectives", [])):
        masses, _, rep = config.build_design(cfg)
        preset = fit.BranchingPreset(masses, rep.m_tilde, rep.l, rep.v_Q1)
    problem = fit.problem_from_dict(data, surface, preset)
    result = fit.fit(problem)
    path = os.path.join(args.out, "fit_result.json")
    fit.write_result(result, path)
    _log(args, f"objective {result.objective:.3e} after {result.n_evals} evaluations: {result.params}")
    if not result.converged:
        print("fit did not converge within the evaluation budget", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def _common_flags(suppress):
    """Global flags; the subcommand copy carries no defaults so that a flag
    given before the subcommand is not overwritten."""
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--config", help="run configuration file", **kw)
    c.add_argument("--out", help="output directory (default: current)", **(kw or {"default": "."}))
    c.add_argument("--threads", type=int, help="FFT worker threads", **kw)
    c.add_argument("--seed", type=int, help="reserved; nothing is stochastic", **kw)
    c.add_argument("--quiet", action="store_true", help="suppress progress output", **kw)
    return c


def build_parser():
    common = _common_flags(suppress=True)
    p = argparse.ArgumentParser(prog="coldreact", description=__doc__.splitlines()[0], parents=[_common_flags(False)])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("surface", parents=[common], help="contour raster of the potential")
    s.add_argument("--frame", choices=("chem", "sim"))
    s.add_argument("--window", help="x1_min,x1_max,x2_min,x2_max with units, e.g. '0.5 A,4 A,0.5 A,4 A'")
    s.add_argument("--resolution", help="n1,n2")
    s.add_argument("--clip", type=float, help="ceiling in units of the zero-point energy")
    d = sub.add_parser("design", parents=[common], help="waveguide parameters for the simulator atom")
    d.add_argument("--target-frequency", help="solve l for this reactant-valley frequency, e.g. 5.657kHz")
    r = sub.add_parser("propagate", parents=[common], help="run the wavepacket")
    r.add_argument("--resume", help="continue from a snap_*.csv file")
    a = sub.add_parser("analyze", parents=[common], help="branching, vibrational and saddle summaries")
    a.add_argument("target", nargs="?", help="run directory or snapshot (default: --out)")
    f = sub.add_parser("fit", parents=[common], help="fit surface parameters to targets")
    f.add_argument("problem", help="fit_problem.json")
    return p


COMMANDS = {
    "surface": cmd_surface,
    "design": cmd_design,
    "propagate": cmd_propagate,
    "analyze": cmd_analyze,
    "fit": cmd_fit,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise _Usage("--threads must be >= 1")
        with output_lock(args.out):
            return COMMANDS[args.command](args)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"coldreact: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigurationError, UnitError, DomainError) as exc:
        print(f"coldreact: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"coldreact: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"coldreact: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
