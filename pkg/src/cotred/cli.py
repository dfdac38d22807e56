"""Command-line front end: ``cotred {equilibrium,normalform,sweep,integrate}``.

Exit status is 0 on success, 1 on a numerical failure and 2 on a usage error.
Options may also come from a JSON file given by ``--config``; flags given on
the command line win.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .equilibria import EquilibriumError, solve_effective_potential, sweep_csv, sweep_equilibria
from .lie import ChartSingularityError
from .mechanics import InadmissibleShapeError, ReducedChart, SingularShapeError, hamiltonian_jet_function
from .models import system_from_config
from .series import DomainError
from .normalform import NotAnEquilibriumError, NotEllipticError, ResonanceError, format_table, normal_form

DEFAULTS = {
    "system": "three-body",
    "masses": None,
    "d0": 6.0,
    "lengths": None,
    "gravity": 1.0,
    "b": 6.5,
    "r": 1.0,
    "guess": None,
    "order": 4,
    "tol_res": 1e-10,
    "resonances": "keep",
    "jobs": 1,
    "dt": 0.01,
    "T": 100.0,
    "stride": 1,
    "mode": None,
    "amplitude": 0.0,
    "reconstruct": False,
    "output": None,
}

NUMERICAL_ERRORS = (EquilibriumError, ResonanceError, NotEllipticError, NotAnEquilibriumError,
                    ChartSingularityError, SingularShapeError, InadmissibleShapeError, DomainError,
                    ArithmeticError)


class UsageError(Exception):
    pass


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` inclusive of ``stop``; a single number is a one-point range."""
    parts = [float(x) for x in str(text).split(":")]
    if len(parts) == 1:
        return parts
    if len(parts) != 3 or parts[2] <= 0:
        raise UsageError(f"range must be start:stop:step with step > 0, got {text!r}")
    start, stop, step = parts
    if stop < start:
        return []
    n = int(np.floor((stop - start) / step + 1e-9))
    return [float(x) for x in np.round(start + step * np.arange(n + 1), 12)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cotred", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with option values")
        p.add_argument("--system", choices=["three-body", "pendulum"])
        p.add_argument("--masses", type=_floats)
        p.add_argument("--d0", type=float, help="Morse equilibrium distance")
        p.add_argument("--lengths", type=_floats, help="pendulum rod lengths")
        p.add_argument("--gravity", type=float)
        p.add_argument("--output", help="write full-precision results here")

    def point(p):
        p.add_argument("--b", type=float, help="triangle size (three-body)")
        p.add_argument("--r", type=float, help="momentum magnitude (pendulum)")
        p.add_argument("--guess", type=_floats, help="pendulum starting shape r1,r2")

    p = sub.add_parser("equilibrium", help="locate a relative equilibrium")
    common(p)
    point(p)
    p = sub.add_parser("normalform", help="Birkhoff normal form at a relative equilibrium")
    common(p)
    point(p)
    p.add_argument("--order", type=int)
    p.add_argument("--tol-res", dest="tol_res", type=float)
    p.add_argument("--resonances", choices=["keep", "error"],
                   help="keep exactly resonant terms in the normal form, or stop with an error")
    p = sub.add_parser("sweep", help="relative equilibria over a parameter range")
    common(p)
    p.add_argument("--b", help="start:stop:step of triangle sizes")
    p.add_argument("--r", help="start:stop:step of momenta")
    p.add_argument("--guess", type=_floats)
    p.add_argument("--jobs", type=int)
    p = sub.add_parser("integrate", help="integrate the reduced equations near an equilibrium")
    common(p)
    point(p)
    p.add_argument("--dt", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--stride", type=int, help="keep every n-th step")
    p.add_argument("--mode", type=int, help="perturb along normal mode k (1-based)")
    p.add_argument("--amplitude", type=float, help="perturbation size")
    p.add_argument("--reconstruct", action="store_true", default=None, help="also integrate the attitude")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(cfg) - set(DEFAULTS) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        opts.update({k: v for k, v in cfg.items() if k != "command"})
    opts.update({k: v for k, v in vars(args).items() if v is not None and k in DEFAULTS})
    if args.command == "sweep":
        # sweep ranges come as text
        for key in ("b", "r"):
            if getattr(args, key) is None and not (args.config and key in opts):
                opts[key] = None
    return opts


def make_system(opts):
    cfg = {"system": opts["system"], "masses": opts["masses"], "d0": opts["d0"],
           "lengths": opts["lengths"], "gravity": opts["gravity"]}
    try:
        return system_from_config(cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _point_value(opts) -> float:
    if opts["system"] == "three-body":
        if float(opts["b"]) <= 0:
            raise UsageError("b must be positive")
        return float(opts["b"])
    if float(opts["r"]) < 0:
        raise UsageError("r must be non-negative")
    return float(opts["r"])


def _g(x) -> str:
    return f"{x:.10g}"


def _write(path, text):
    Path(path).write_text(text)


def cmd_equilibrium(opts, out) -> int:
    system = make_system(opts)
    eq = solve_effective_potential(system, _point_value(opts), opts["guess"])
    print(f"system = {system.name}", file=out)
    print(f"r = {_g(eq.r)}", file=out)
    print(f"E0 = {_g(eq.energy)}", file=out)
    for name, x in zip(eq.names, eq.point):
        print(f"{name} = {_g(x)}", file=out)
    for k, w in enumerate(eq.frequencies):
        print(f"omega_{k + 1} = {_g(w)}", file=out)
    print(f"elliptic = {str(eq.elliptic).lower()}", file=out)
    if opts["output"]:
        _write(opts["output"], json.dumps(eq.as_dict(), indent=2) + "\n")
    return 0


def _equilibrium_and_chart(opts):
    system = make_system(opts)
    eq = solve_effective_potential(system, _point_value(opts), opts["guess"])
    return system, eq, ReducedChart.for_system(system, eq.r)


def cmd_normalform(opts, out) -> int:
    n0 = int(opts["order"])
    if n0 < 2 or n0 % 2:
        raise UsageError("order must be even and at least 2")
    if float(opts["tol_res"]) <= 0:
        raise UsageError("tol-res must be positive")
    system, eq, chart = _equilibrium_and_chart(opts)
    nf = normal_form(hamiltonian_jet_function(system, chart), eq.point, n0, float(opts["tol_res"]),
                     keep_resonant=opts["resonances"] == "keep")
    print(format_table(nf), file=out)
    print(f"resonance margin = {nf.resonance_margin:.3g} at m = {nf.resonance_vector}", file=out)
    vectors = set()
    for e, c in nf.resonant_terms.items():
        m = [int(b - a) for a, b in zip(e[:nf.dof], e[nf.dof:])]
        if abs(c) > 1e-12:
            # m and -m label the same conjugate pair
            lead = next(x for x in m if x)
            vectors.add(tuple(m) if lead > 0 else tuple(-x for x in m))
    vectors = sorted(vectors)
    for m in vectors:
        print(f"warning: resonant terms kept for m = {m}", file=sys.stderr)
    if opts["output"]:
        _write(opts["output"], json.dumps(nf.to_record(), indent=2) + "\n")
    return 0


def cmd_sweep(opts, out) -> int:
    system = make_system(opts)
    key = "b" if system.name == "three-body" else "r"
    spec = opts.get(key)
    if spec is None:
        raise UsageError(f"sweep over {key} needs --{key} start:stop:step")
    values = parse_range(spec)
    if int(opts["jobs"]) < 1:
        raise UsageError("jobs must be positive")
    rows = sweep_equilibria(system, values, int(opts["jobs"]), opts["guess"])
    if not rows:
        f = 4 if system.name == "three-body" else 3
        text = ",".join(["param", "r", "energy"] + [f"omega_{k + 1}" for k in range(f)] + ["converged"]) + "\n"
    else:
        text = sweep_csv(rows)
    if opts["output"]:
        _write(opts["output"], text)
    else:
        out.write(text)
    return 0


def cmd_integrate(opts, out) -> int:
    from .dynamics import integrate_reduced
    from .normalform import linearize_and_normalize, taylor_shift

    dt, T, stride = float(opts["dt"]), float(opts["T"]), int(opts["stride"])
    if dt <= 0 or T < 0 or stride < 1:
        raise UsageError("need dt > 0, T >= 0 and stride >= 1")
    system, eq, chart = _equilibrium_and_chart(opts)
    z0 = np.array(eq.point)
    if opts["mode"] is not None:
        k = int(opts["mode"])
        if not 1 <= k <= chart.dof:
            raise UsageError(f"mode must be between 1 and {chart.dof}")
        H = taylor_shift(hamiltonian_jet_function(system, chart), eq.point, 2)
        lin = linearize_and_normalize(H)
        z0 = z0 + float(opts["amplitude"]) * lin.M[:, k - 1]
    reconstruct = True if opts["reconstruct"] else None
    if reconstruct and chart.group != "SO3":
        raise UsageError("reconstruction is defined for SO(3) systems")
    traj = integrate_reduced(system, chart, z0, dt, T, stride, reconstruct_from=reconstruct)
    text = traj.to_csv()
    if opts["output"]:
        _write(opts["output"], text)
    else:
        out.write(text)
    print(f"energy drift = {traj.energy_drift:.3g}", file=sys.stderr)
    if traj.singular:
        print(f"trajectory stopped at t = {traj.t[-1]:.10g} (chart singularity)", file=sys.stderr)
        return 1
    return 0


COMMANDS = {"equilibrium": cmd_equilibrium, "normalform": cmd_normalform, "sweep": cmd_sweep,
            "integrate": cmd_integrate}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cotred: error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"cotred: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
