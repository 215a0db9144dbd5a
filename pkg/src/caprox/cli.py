"""Command-line front end.

Subcommands: ``gen`` (write an instance file), ``solve`` (run the solver on
an instance), ``certify`` (separation certificate for a solve result),
``grid`` (phase-grid experiment), ``nrsfm`` (fit-versus-rank study).

Exit codes partition cleanly:

    0  success (certificate passed, solver converged, files written)
    1  certificate evaluated and failed
    2  usage or validation error
    3  solver finished without converging (stalled or max iterations)
    4  certificate refused: the input is not a stationary point
    5  I/O error (missing, unreadable or unwritable file)
    6  certificate unavailable: no isometry constant delta

Options are resolved as CLI flag > config file (``--config``, JSON object
with option names as keys) > built-in default. Unknown config keys are
rejected. Every output file embeds the fully resolved configuration and
seed. The only environment override is ``CAPROX_THREADS`` (grid worker
count).
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .certificate import MissingDeltaError, NotStationaryError, check_certificate
from .experiments import GridSpec, emit_results, run_nrsfm_study, run_phase_grid
from .instances import (
    Instance,
    gen_gaussian_dense,
    gen_rip_dense,
    load_instance,
    make_lowrank_instance,
    make_sparse_instance,
    save_instance,
)
from .penalties import RegKind, Regularizer
from .solver import SolverConfig, solve, write_trace

EXIT_OK = 0
EXIT_CERT_FAIL = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_NOT_STATIONARY = 4
EXIT_IO = 5
EXIT_MISSING_DELTA = 6

SOLVE_SCHEMA = "caprox-solve-v1"


class UsageError(Exception):
    pass


def _parse_axis(text: str) -> tuple[float, ...]:
    """Either a comma list '0,0.1,0.3' or 'start:stop:count' (inclusive linspace)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"axis range must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        return tuple(np.linspace(start, stop, count).tolist())
    return tuple(float(v) for v in text.split(","))


def _parse_mu_list(text: str) -> list[float]:
    """'1..50' (inclusive integer range), a comma list, or a single value."""
    if ".." in text:
        lo, hi = text.split("..")
        return [float(v) for v in range(int(lo), int(hi) + 1)]
    return [float(v) for v in text.split(",")]


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise OSError(f"cannot parse {path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _load_instance(path) -> Instance:
    try:
        return load_instance(path)
    except json.JSONDecodeError as exc:
        raise OSError(f"cannot parse {path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """flags > config file > defaults; unknown config keys are rejected."""
    resolved = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        doc = _load_json(config_path)
        if not isinstance(doc, dict):
            raise UsageError(f"config file {config_path} must hold a JSON object")
        unknown = set(doc) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        resolved.update(doc)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _solver_config(resolved: dict) -> SolverConfig:
    return SolverConfig(tau0=resolved["tau0"], max_iters=resolved["max_iters"],
                        tol_obj=resolved["tol_obj"], tol_step=resolved["tol_step"])


_SOLVER_DEFAULTS = {"tau0": 5.0, "max_iters": 5000, "tol_obj": 1e-10, "tol_step": 1e-9}


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tau0", type=float, help="initial trust weight (default 5)")
    parser.add_argument("--max-iters", dest="max_iters", type=int)
    parser.add_argument("--tol-obj", dest="tol_obj", type=float)
    parser.add_argument("--tol-step", dest="tol_step", type=float)
    parser.add_argument("--config", help="JSON config file (flags override it)")


def _cmd_gen(args) -> int:
    seed = args.seed
    if args.op == "gaussian" and args.delta is not None:
        raise UsageError("--delta asserts an exact isometry constant, which a gaussian "
                         "operator does not have; drop --delta or use --op rip")
    if args.op == "rip" and args.delta is None:
        raise UsageError("--op rip requires --delta")
    op_entropy, inst_entropy = [seed, 0], [seed, 1]
    if args.problem == "sparse":
        cols, shape_in = args.n, None
    else:
        cols, shape_in = args.m * args.n, [args.m, args.n]
    if args.op == "rip":
        op = gen_rip_dense(cols, cols, args.delta, op_entropy, shape_in=shape_in)
        op_params = {"rows": cols, "cols": cols, "delta": args.delta,
                     "seed": op_entropy, "shape_in": shape_in}
        generator, delta = "rip_dense", args.delta
    else:
        rows = args.rows if args.rows is not None else (150 if args.problem == "sparse" else 300)
        op = gen_gaussian_dense(rows, cols, 1.0 / rows, op_entropy, shape_in=shape_in)
        op_params = {"rows": rows, "cols": cols, "variance": 1.0 / rows,
                     "seed": op_entropy, "shape_in": shape_in}
        generator, delta = "gaussian_dense", None
    if args.problem == "sparse":
        inst = make_sparse_instance(args.n, args.card, args.sigma, op, inst_entropy, delta=delta)
        setup = {"problem": "sparse", "n": args.n, "card": args.card, "sigma": args.sigma}
    else:
        inst = make_lowrank_instance(args.m, args.n, args.rank, args.sigma, op, inst_entropy,
                                     delta=delta)
        setup = {"problem": "lowrank", "m": args.m, "n": args.n, "rank": args.rank,
                 "sigma": args.sigma}
    inst.provenance = {"generator": generator, "params": op_params, "seed": seed,
                       "setup": setup}
    save_instance(inst, args.output)
    return EXIT_OK


def _cmd_solve(args) -> int:
    resolved = _resolve(args, {**_SOLVER_DEFAULTS, "reg": "capped", "mu": None})
    inst = _load_instance(args.instance)
    kind = RegKind(resolved["reg"])
    if kind is RegKind.NONE:
        reg = Regularizer(RegKind.NONE)
    else:
        if resolved["mu"] is None:
            raise UsageError(f"--mu is required for --reg {kind.value}")
        reg = Regularizer(kind, float(resolved["mu"]))
    config = _solver_config(resolved)
    result = solve(inst, reg, config)
    doc = {
        "schema": SOLVE_SCHEMA,
        "instance": args.instance,
        "config": {"tau0": config.tau0, "max_iters": config.max_iters,
                   "tol_obj": config.tol_obj, "tol_step": config.tol_step},
        "regularizer": {"kind": reg.kind.value, "mu": reg.mu, "threshold": reg.threshold,
                        "convex_weight": reg.convex_weight
                        if reg.kind in (RegKind.L1, RegKind.NUCLEAR) else None},
        "solution": result.solution.tolist(),
        "objective": result.objective,
        "residual_norm": result.residual_norm,
        "reg_value": result.reg_value,
        "card_or_rank": result.card_or_rank,
        "iterations": result.iterations,
        "status": result.status.value,
    }
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
    else:
        json.dump({k: v for k, v in doc.items() if k != "solution"}, sys.stdout, indent=2)
        sys.stdout.write("\n")
    if args.trace:
        write_trace(result.history, args.trace)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _cmd_certify(args) -> int:
    inst = _load_instance(args.instance)
    result_doc = _load_json(args.result)
    solution = np.array(result_doc["solution"], dtype=np.float64)
    mu = args.mu
    if mu is None:
        reg = result_doc.get("regularizer", {})
        if reg.get("kind") == "capped":
            mu = reg.get("mu")
    if mu is None:
        raise UsageError("--mu is required (the result file does not carry a capped-penalty mu)")
    try:
        report = check_certificate(solution, inst, float(mu), delta=args.delta,
                                   target=args.target, margin=args.margin)
    except MissingDeltaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_DELTA
    except NotStationaryError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_NOT_STATIONARY
    if args.output:
        report.to_json(args.output)
    else:
        json.dump(report.to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK if report.passed else EXIT_CERT_FAIL


_GRID_DEFAULTS = {
    "sigma_axis": None, "mu_axis": None, "trials": None, "seed": 0,
    "op": "rip", "delta": 0.2, "gaussian_rows": None,
    "n": None, "card": 10, "m": 20, "rank": 5, **_SOLVER_DEFAULTS,
}


def _cmd_grid(args) -> int:
    defaults = dict(_GRID_DEFAULTS)
    resolved = _resolve(args, defaults)
    fast = bool(args.fast)
    sigma_axis = _parse_axis(resolved["sigma_axis"]) if resolved["sigma_axis"] \
        else ((0.0, 0.25, 0.5) if fast else tuple(np.linspace(0.0, 0.5, 6).tolist()))
    if resolved["mu_axis"]:
        mu_axis = _parse_axis(resolved["mu_axis"])
    elif args.problem == "sparse":
        mu_axis = (0.0, 0.1, 0.5, 1.0, 3.0) if fast else tuple(np.linspace(0.0, 3.0, 13).tolist())
    else:
        mu_axis = (0.0, 1.0, 4.0, 8.0, 12.0) if fast else tuple(np.linspace(0.0, 12.0, 13).tolist())
    trials = resolved["trials"] if resolved["trials"] is not None else (10 if fast else 50)
    if resolved["op"] == "gaussian" and args.delta is not None:
        raise UsageError("--delta asserts an exact isometry constant, which a gaussian "
                         "operator does not have; drop --delta or use --op rip")
    n = resolved["n"] if resolved["n"] is not None else (200 if args.problem == "sparse" else 20)
    spec = GridSpec(
        problem=args.problem, sigma_axis=sigma_axis, mu_axis=mu_axis,
        trials_per_cell=trials, base_seed=resolved["seed"],
        n=n if args.problem == "sparse" else 200, cardinality=resolved["card"],
        rows=resolved["m"], cols=n if args.problem == "lowrank" else 20,
        rank=resolved["rank"],
        operator=resolved["op"], delta=resolved["delta"],
        gaussian_rows=resolved["gaussian_rows"],
        solver=_solver_config(resolved),
    )
    grid = run_phase_grid(spec)
    fmt = args.format
    if fmt in ("csv", "both"):
        emit_results(grid, f"{args.output}.csv", "csv")
    if fmt in ("json", "both"):
        emit_results(grid, f"{args.output}.json", "json")
    return EXIT_OK


def _cmd_nrsfm(args) -> int:
    defaults = {"F": 50, "n": 30, "K": 4, "sigma": 0.0, "mu": "1..50", "seed": 0,
                **_SOLVER_DEFAULTS}
    resolved = _resolve(args, defaults)
    mu_list = _parse_mu_list(str(resolved["mu"]))
    curves = run_nrsfm_study(resolved["F"], resolved["n"], resolved["K"], resolved["sigma"],
                             mu_list, bool(args.derivative), resolved["seed"],
                             solver_config=_solver_config(resolved))
    meta = {**resolved, "derivative": bool(args.derivative)}
    fmt = args.format
    if fmt in ("csv", "both"):
        emit_results(curves, f"{args.output}.csv", "csv", meta=meta)
    if fmt in ("json", "both"):
        emit_results(curves, f"{args.output}.json", "json", meta=meta)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="caprox",
                                     description="Sparse / low-rank recovery with a capped "
                                                 "quadratic penalty.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance file")
    gen_sub = gen.add_subparsers(dest="problem", required=True)
    gs = gen_sub.add_parser("sparse")
    gs.add_argument("--n", type=int, default=200)
    gs.add_argument("--card", type=int, default=10)
    gs.add_argument("--sigma", type=float, default=0.0)
    gl = gen_sub.add_parser("lowrank")
    gl.add_argument("--m", type=int, default=20)
    gl.add_argument("--n", type=int, default=20)
    gl.add_argument("--rank", type=int, default=5)
    gl.add_argument("--sigma", type=float, default=0.0)
    for p in (gs, gl):
        p.add_argument("--op", choices=["rip", "gaussian"], default="rip")
        p.add_argument("--delta", type=float, help="exact isometry constant (rip operators)")
        p.add_argument("--rows", type=int, help="rows of a gaussian operator")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-o", "--output", required=True)
        p.set_defaults(func=_cmd_gen)

    sl = sub.add_parser("solve", help="solve an instance")
    sl.add_argument("instance")
    sl.add_argument("--reg", choices=[k.value for k in RegKind])
    sl.add_argument("--mu", type=float)
    _add_solver_flags(sl)
    sl.add_argument("-o", "--output")
    sl.add_argument("--trace", help="write accepted-iteration trace as JSON lines")
    sl.set_defaults(func=_cmd_solve)

    ce = sub.add_parser("certify", help="separation certificate for a solve result")
    ce.add_argument("instance")
    ce.add_argument("result")
    ce.add_argument("--mu", type=float)
    ce.add_argument("--delta", type=float)
    ce.add_argument("--target", type=int)
    ce.add_argument("--margin", type=float, default=0.0)
    ce.add_argument("-o", "--output")
    ce.set_defaults(func=_cmd_certify)

    gr = sub.add_parser("grid", help="phase-grid experiment")
    gr.add_argument("problem", choices=["sparse", "lowrank"])
    gr.add_argument("--fast", action="store_true", help="small CI profile (10 trials)")
    gr.add_argument("--sigma-axis", dest="sigma_axis")
    gr.add_argument("--mu-axis", dest="mu_axis")
    gr.add_argument("--trials", type=int)
    gr.add_argument("--seed", type=int)
    gr.add_argument("--op", choices=["rip", "gaussian"])
    gr.add_argument("--delta", type=float)
    gr.add_argument("--gaussian-rows", dest="gaussian_rows", type=int)
    gr.add_argument("--n", type=int)
    gr.add_argument("--card", type=int)
    gr.add_argument("--m", type=int)
    gr.add_argument("--rank", type=int)
    _add_solver_flags(gr)
    gr.add_argument("-o", "--output", required=True, help="output path prefix")
    gr.add_argument("--format", choices=["csv", "json", "both"], default="both")
    gr.set_defaults(func=_cmd_grid)

    nr = sub.add_parser("nrsfm", help="fit-versus-rank study on synthetic sequences")
    nr.add_argument("--F", type=int, help="frames")
    nr.add_argument("--n", type=int, help="points")
    nr.add_argument("--K", type=int, help="basis size")
    nr.add_argument("--sigma", type=float)
    nr.add_argument("--mu", help="sweep: '1..50', comma list, or single value")
    nr.add_argument("--derivative", action="store_true",
                    help="add the squared row-difference penalty")
    nr.add_argument("--seed", type=int)
    _add_solver_flags(nr)
    nr.add_argument("-o", "--output", required=True, help="output path prefix")
    nr.add_argument("--format", choices=["csv", "json", "both"], default="both")
    nr.set_defaults(func=_cmd_nrsfm)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
