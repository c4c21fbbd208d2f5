"""Command-line entry point: ``gatescape <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import Config, ConfigError, config_from_dict, load_config
from .gradients import GradOptions, fd_gradient, grad_objective, relative_error
from .landscape import epsilon_sweep, run_landscape, sample_initial
from .objectives import ObjectiveKind
from .optimize import anneal_run, ingrape_run
from .propagator import (
    ParamVector,
    ode_oracle,
    reference_guess,
    propagate_channel,
    propagate_state,
    read_controls_csv,
    write_controls_csv,
    write_trajectory_csv,
)
from .qmodel import SPECIAL, build_generators

EXIT_FAILURES = 3
STATES = {"rho1": 0, "rho2": 1, "rho3": 2}


def _add_shared(p):
    p.add_argument("--config", help="JSON config file (or a saved run record)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--system", type=int, choices=(1, 2, 3))
    p.add_argument("--gate", choices=("cnot", "cphase", "cz"))
    p.add_argument("--lambda-over-pi", type=float, dest="lambda_over_pi")
    p.add_argument("--objective", choices=[k.value for k in ObjectiveKind])
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--K", type=int, dest="K")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--eacc", type=float, help="gradient-norm stopping accuracy")
    p.add_argument("--max-iter", type=int, dest="max_iter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gatescape", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", help="propagate a state under controls from CSV")
    _add_shared(p)
    p.add_argument("--controls", required=True, help="CSV with header t,u,n1,n2")
    p.add_argument("--state", choices=sorted(STATES), default="rho1")
    p.add_argument("--channel", action="store_true", help="also write the channel trajectory")
    p.add_argument("--oracle", action="store_true", help="compare with the ODE oracle")

    for name in ("grape", "anneal"):
        p = sub.add_parser(name, help=f"single {name} optimization run")
        _add_shared(p)
        p.add_argument("--init", choices=("guess", "random", "file"))
        p.add_argument("--init-file", dest="init_file")
        if name == "anneal":
            p.add_argument("--maxfun", type=int)

    p = sub.add_parser("landscape", help="multistart inGRAPE landscape")
    _add_shared(p)
    p.add_argument("--runs", type=int)

    p = sub.add_parser("sweep-eps", help="best optimized value versus coupling strength")
    _add_shared(p)
    p.add_argument("--epsilons", type=float, nargs="+")
    p.add_argument("--restarts", type=int)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    _add_shared(p)
    p.add_argument("--threshold", type=float)
    return parser


def resolve_config(args) -> Config:
    data = load_config(args.config).to_dict() if args.config else Config().to_dict()
    if args.seed is not None:
        data["seed"] = args.seed
        data["landscape"]["master_seed"] = args.seed
        data["anneal"]["seed"] = args.seed
        data["gradcheck"]["seed"] = args.seed
    if args.out:
        data["out"] = args.out
    if args.system is not None:
        data["system"]["kind"] = args.system
    if args.epsilon is not None:
        data["system"]["epsilon"] = args.epsilon
    if args.gate is not None:
        data["gate"]["kind"] = "cphase" if args.gate == "cz" else args.gate
        if args.gate == "cz":
            data["gate"]["lambda_over_pi"] = 1.0
    if args.lambda_over_pi is not None:
        data["gate"]["lambda_over_pi"] = args.lambda_over_pi
    if args.objective:
        data["objective"] = args.objective
    if args.T is not None:
        data["grid"]["T"] = args.T
    if args.K is not None:
        data["grid"]["K"] = args.K
    if args.eacc is not None:
        data["grape"]["eps_acc"] = args.eacc
    if args.max_iter is not None:
        data["grape"]["max_iter"] = args.max_iter
    if getattr(args, "init", None):
        data["init"] = args.init
        if args.init == "file":
            data["landscape"]["init_file"] = args.init_file
    if getattr(args, "init_file", None):
        data["landscape"]["init_file"] = args.init_file
    if getattr(args, "maxfun", None) is not None:
        data["anneal"]["maxfun"] = args.maxfun
    if getattr(args, "runs", None) is not None:
        data["landscape"]["runs"] = args.runs
    if getattr(args, "epsilons", None):
        data["sweep"]["epsilons"] = args.epsilons
    if getattr(args, "restarts", None) is not None:
        data["sweep"]["restarts"] = args.restarts
    if getattr(args, "threshold", None) is not None:
        data["gradcheck"]["threshold"] = args.threshold
    return config_from_dict(data)


def initial_params(cfg: Config) -> ParamVector:
    grid = cfg.control_grid()
    if cfg.init == "guess":
        return reference_guess(grid)
    if cfg.init == "random":
        return sample_initial(cfg.seed, 0, grid.K)
    if not cfg.landscape.init_file:
        raise ConfigError("init 'file' needs --init-file")
    f = read_controls_csv(cfg.landscape.init_file)
    return ParamVector(f.u, np.sqrt(f.n1), np.sqrt(f.n2))


def _out_dir(cfg: Config) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_propagate(cfg: Config, args) -> int:
    grid = cfg.control_grid()
    f = read_controls_csv(args.controls)
    if f.K != grid.K:
        # the controls file defines the grid resolution
        cfg.grid.K = f.K
        grid = cfg.control_grid()
    gen = build_generators(cfg.system_spec())
    x0 = SPECIAL.xs[STATES[args.state]]
    traj = propagate_state(gen, grid, f, x0)
    out = _out_dir(cfg)
    states = traj.states[:, :, 0]
    write_trajectory_csv(out / "trajectory.csv", grid, states)
    report = {"final_trace": float(np.sum(states[-1][[0, 7, 12, 15]]))}
    if args.channel:
        chan = propagate_channel(gen, grid, f).channels.reshape(grid.K + 1, -1)
        header = "t," + ",".join(f"psi{i + 1}_{j + 1}" for i in range(16) for j in range(16))
        np.savetxt(out / "channel.csv", np.column_stack([grid.nodes(), chan]), delimiter=",",
                   header=header, comments="", fmt="%.17g")
    if args.oracle:
        ref = ode_oracle(gen, grid, f, x0, tol=1e-10)
        report["oracle_max_deviation"] = float(np.max(np.abs(ref - states[-1])))
        print(f"max deviation from ODE oracle: {report['oracle_max_deviation']:.3e}")
    with open(out / "propagate.json", "w") as fh:
        json.dump(report, fh, indent=1)
    return 0


def cmd_grape(cfg: Config, args) -> int:
    rec = ingrape_run(
        cfg.objective, build_generators(cfg.system_spec()), cfg.control_grid(),
        initial_params(cfg), cfg.gate_target(), cfg.grape_params(),
        config=cfg.to_dict(), seed=cfg.seed,
    )
    out = _out_dir(cfg)
    rec.save(out / "grape.json", deterministic=True)
    write_controls_csv(out / "grape_controls.csv", cfg.control_grid(), rec.control_vector())
    print(f"inGRAPE: {rec.iterations} iterations, final {cfg.objective} = "
          f"{rec.final_value:.6g} ({rec.termination})")
    return 0


def cmd_anneal(cfg: Config, args) -> int:
    g0 = initial_params(cfg)
    f0 = g0.controls() if cfg.init != "random" else None
    params = cfg.anneal_params()
    rec = anneal_run(
        cfg.objective, build_generators(cfg.system_spec()), cfg.control_grid(),
        f0, cfg.gate_target(), params, config=cfg.to_dict(),
    )
    out = _out_dir(cfg)
    rec.save(out / "anneal.json", deterministic=True)
    write_controls_csv(out / "anneal_controls.csv", cfg.control_grid(), rec.control_vector())
    print(f"anneal: best {cfg.objective} = {rec.final_value:.6g} after {rec.extra['nfev']} evaluations")
    return 0


def cmd_landscape(cfg: Config, args) -> int:
    summary, _ = run_landscape(
        cfg.landscape_config(), jobs=args.jobs, out_dir=_out_dir(cfg),
        bins=cfg.landscape.bins, gap_threshold=cfg.landscape.gap_threshold,
        min_fraction=cfg.landscape.min_fraction,
    )
    print(f"landscape: min {summary.min:.6g}, mean {summary.mean:.6g}, "
          f"{summary.peak_count} cluster(s), {summary.failures} failure(s)")
    return EXIT_FAILURES if summary.failures else 0


def cmd_sweep(cfg: Config, args) -> int:
    rows = epsilon_sweep(cfg.landscape_config(), cfg.sweep.epsilons, cfg.sweep.restarts,
                         jobs=args.jobs, out_dir=_out_dir(cfg))
    for r in rows:
        print(f"eps={r['epsilon']:.3f}  best={r['best_value']:.6g}  iterations={r['iterations']}")
    failures = sum(int(np.isnan(v)) for r in rows for v in r["values"])
    return EXIT_FAILURES if failures else 0


def gradcheck_report(cfg: Config) -> dict:
    gc = cfg.gradcheck
    from .propagator import ControlGrid
    from .qmodel import SystemSpec, cnot, cz

    grid = ControlGrid(gc.T, gc.K)
    rng = np.random.default_rng(gc.seed)
    gates = {"cnot": cnot, "cz": cz}
    base = dict(cfg.system)
    entries = []
    for system in gc.systems:
        gen = build_generators(SystemSpec(**{**base, "kind": system}))
        for gname in gc.gates:
            gate = gates[gname]()
            for kind in gc.objectives:
                g = ParamVector.from_flat(rng.uniform(0.0, 1.0, 3 * gc.K))
                fd = fd_gradient(kind, gen, grid, g, gate, gc.fd_step)
                errs = {
                    str(s): relative_error(grad_objective(kind, gen, grid, g, gate, GradOptions(s)), fd)
                    for s in gc.segments
                }
                entries.append({"system": system, "gate": gname, "objective": kind,
                                "relative_error": errs})
    primary = str(gc.segments[0])
    worst = max(e["relative_error"][primary] for e in entries)
    return {"threshold": gc.threshold, "segments": gc.segments, "entries": entries,
            "worst_at_default_segments": worst, "passed": worst < gc.threshold}


def cmd_gradcheck(cfg: Config, args) -> int:
    report = gradcheck_report(cfg)
    with open(_out_dir(cfg) / "gradcheck.json", "w") as fh:
        json.dump(report, fh, indent=1)
    for e in report["entries"]:
        errs = "  ".join(f"S={s}:{v:.2e}" for s, v in e["relative_error"].items())
        print(f"system {e['system']} {e['gate']:5s} {e['objective']:7s} {errs}")
    return 0 if report["passed"] else 1


COMMANDS = {
    "propagate": cmd_propagate,
    "grape": cmd_grape,
    "anneal": cmd_anneal,
    "landscape": cmd_landscape,
    "sweep-eps": cmd_sweep,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
