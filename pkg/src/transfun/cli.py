"""Batch front-end: load measure/plan files, run the pipelines, emit reports.

Subcommands
-----------
discretize    identity approximations of an input measure + weak-gap tables
transport     warehouse-strategy cost report between two measures
approx-plan   cell-resolution projection of a seeded Markov transfunction
markov-check  Markov axioms for the transfunction encoded by a plan file
adjoint-check pairing residuals and norm certificates for a plan file

Exit codes: 0 success, 2 parse/validation failure, 3 numerical check failure.
Reports are deterministic given the command line (the seed is recorded), and
failures print machine-readable diagnostics to stderr.
"""

import argparse
import json
import sys

import numpy as np

from . import __version__
from .batteries import (lipschitz_fields, random_density, random_measure,
                        rng_from_seed)
from .covering import build_covering
from .errors import TransfunError
from .identity import (identity_continuous, identity_measurable,
                       identity_pointmass, weak_gap)
from .measure import read_measure, to_measure
from .ot import PowerDistance, simple_markov_approx, warehouse_strategy
from .adjoint import adjoint_of_simple, measurable_adjoint, pairing_residual
from .transfunction import (DiscretePlan, apply, markov_check,
                            plan_to_transfunction, read_plan,
                            transfunction_to_point_coupling)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3


def _fail(kind, exc_or_msg, code):
    diag = {"error": kind, "detail": str(exc_or_msg)}
    print(json.dumps(diag, sort_keys=True), file=sys.stderr)
    return code


def _parse_box(text):
    """'lo,hi' per axis, axes joined by ';' (e.g. '0,1;0,2')."""
    axes = []
    for part in text.split(";"):
        lo, hi = (float(v) for v in part.split(","))
        axes.append([lo, hi])
    return np.array(axes)


def _parse_levels(text):
    levels = sorted({int(v) for v in text.split(",")})
    if not levels or levels[0] < 1:
        raise ValueError("levels must be positive integers")
    return levels


def _emit(report, out_path):
    payload = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _common(parser):
    parser.add_argument("--input", required=True, help="input file (measure or plan JSON)")
    parser.add_argument("--box", default="0,1", help="workspace box, 'lo,hi' per axis joined by ';'")
    parser.add_argument("--levels", default="2,4,8", help="comma-separated covering levels")
    parser.add_argument("--tol", type=float, default=1e-9, help="pass/fail tolerance")
    parser.add_argument("--seed", type=int, default=0, help="seed for the battery generator")
    parser.add_argument("--out", default=None, help="report path (stdout when omitted)")


def make_parser():
    parser = argparse.ArgumentParser(prog="transfun",
                                     description="transfunction pipelines on point-cloud measures")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", help="identity approximations and weak-gap tables")
    _common(p)
    p.add_argument("--fields", type=int, default=12, help="Lipschitz battery size")

    p = sub.add_parser("transport", help="warehouse-strategy transport report")
    _common(p)
    p.add_argument("--target", required=True, help="target measure JSON")
    p.add_argument("--alpha", type=float, default=1.0, help="cost scale")
    p.add_argument("--power", type=float, default=1.0, help="cost exponent")

    p = sub.add_parser("approx-plan", help="cell projection of a seeded Markov transfunction")
    _common(p)
    p.add_argument("--target", required=True, help="target measure JSON")
    p.add_argument("--fields", type=int, default=6, help="product-cost battery size")

    p = sub.add_parser("markov-check", help="Markov axioms for a plan-encoded transfunction")
    _common(p)
    p.add_argument("--scale", type=float, default=1.0,
                   help="scale the plan's instructions before checking (fault injection)")

    p = sub.add_parser("adjoint-check", help="adjoint pairing residuals for a plan file")
    _common(p)
    p.add_argument("--fields", type=int, default=12, help="field battery size")
    p.add_argument("--measures", type=int, default=12, help="measure battery size")
    return parser


def _config_echo(args):
    # the output path is not part of the semantic configuration
    skip = {"command", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _plan_setup(args, validate_plan=True):
    """Load a plan file against the covering implied by the command line."""
    box = _parse_box(args.box)
    levels = _parse_levels(args.levels)
    cov = build_covering(box, levels)
    grid = cov.grid(levels[-1])
    plan = read_plan(args.input, grid_x=grid, grid_y=grid, validate=validate_plan)
    if plan.matrix.shape != (grid.p, grid.p):
        raise TransfunError(
            f"plan is {plan.matrix.shape[0]}x{plan.matrix.shape[1]} but level "
            f"{grid.level} has {grid.p} cells")
    return cov, grid, plan


def cmd_discretize(args):
    box = _parse_box(args.box)
    levels = _parse_levels(args.levels)
    lam = read_measure(args.input)
    cov = build_covering(box, levels)
    rng = rng_from_seed(args.seed)
    battery = lipschitz_fields(rng, args.fields, box, lipschitz=1.0)

    tables = {}
    failures = []
    for setting in ("pointmass", "continuous", "measurable"):
        if setting == "measurable":
            if not lam.is_positive():
                continue
            # probe the averaging projection with a seeded density over the input
            dens = random_density(rng_from_seed(args.seed + 1), lam)
            target = to_measure(dens, lam)
        else:
            target = lam
        rate = 2.0 if setting == "continuous" else 1.0
        tv = target.total_variation
        seq = []
        for n in levels:
            grid = cov.grid(n)
            if setting == "pointmass":
                phi = identity_pointmass(grid)
            elif setting == "continuous":
                phi = identity_continuous(grid)
            else:
                phi = identity_measurable(grid, lam)
            seq.append(apply(phi, target))
        table = weak_gap(seq, target, battery, steps=levels,
                         bounds=lambda step, f, r=rate, t=tv: r * (f.lipschitz or 1.0) * t / step)
        tables[setting] = table
        for row in table.rows:
            if row["bound"] is not None and row["gap"] > row["bound"] + args.tol:
                failures.append({"setting": setting, **row})

    report = {
        "command": "discretize",
        "config": _config_echo(args),
        "seed": args.seed,
        "covering": {str(n): int(cov.p(n)) for n in levels},
        "tables": {k: t.to_dict() for k, t in tables.items()},
        "failures": failures,
    }
    _emit(report, args.out)
    if args.out:
        for k, t in tables.items():
            t.write_csv(f"{args.out}.{k}.weak_gap.csv")
    return EXIT_NUMERIC if failures else EXIT_OK


def cmd_transport(args):
    box = _parse_box(args.box)
    levels = _parse_levels(args.levels)
    lam = read_measure(args.input)
    rho = read_measure(args.target)
    cov = build_covering(box, levels)
    cost = PowerDistance(args.alpha, args.power)
    reports = []
    failures = []
    for n in levels:
        rep = warehouse_strategy(lam, rho, cost, cov.grid(n))
        reports.append(rep.to_dict())
        budget = rep.end_step_budget
        if rep.cost_first > budget + args.tol or rep.cost_last > budget + args.tol:
            failures.append({"level": n, "reason": "end-step budget exceeded"})
    report = {
        "command": "transport",
        "config": _config_echo(args),
        "seed": args.seed,
        "levels": reports,
        "failures": failures,
    }
    _emit(report, args.out)
    return EXIT_NUMERIC if failures else EXIT_OK


def cmd_approx_plan(args):
    box = _parse_box(args.box)
    levels = _parse_levels(args.levels)
    mu = read_measure(args.input)
    nu = read_measure(args.target)
    if not (mu.is_positive() and nu.is_positive()):
        raise TransfunError("marginals must be positive measures")
    scale = max(1.0, mu.total_variation)
    if abs(mu.total_variation - nu.total_variation) > 1e-9 * scale:
        raise TransfunError("marginals must carry equal mass")
    cov = build_covering(box, levels)
    rng = rng_from_seed(args.seed)
    from .batteries import random_markov_transfunction
    phi = random_markov_transfunction(rng, mu, nu)

    fields = lipschitz_fields(rng, 2 * args.fields, box, include_constant=False)
    from .ot import ProductCost
    battery = [ProductCost(a, b) for a, b in zip(fields[:args.fields], fields[args.fields:])]

    rows = []
    failures = []
    prev_beta = None
    osc_csv = []
    for n in levels:
        grid = cov.grid(n)
        phi_n, m_n, osc = simple_markov_approx(phi, mu, nu, grid, cost_battery=battery)
        for r in osc.rows:
            osc_csv.append({"level": n, **r})
            if r["measured_gap"] > r["bound"] + args.tol:
                failures.append({"level": n, "cost": r["cost"], "reason": "oscillation bound violated"})
        rows.append({
            "level": n,
            "cells": int(grid.p),
            "max_beta": osc.max_beta,
            "max_gap": osc.max_gap,
            "projection_residual": osc.projection_residual,
        })
        if prev_beta is not None and osc.max_beta > prev_beta + args.tol:
            failures.append({"level": n, "reason": "beta did not decrease"})
        prev_beta = osc.max_beta

    report = {
        "command": "approx-plan",
        "config": _config_echo(args),
        "seed": args.seed,
        "levels": rows,
        "failures": failures,
    }
    _emit(report, args.out)
    if args.out:
        import csv
        with open(f"{args.out}.oscillation.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["level", "cost", "beta_n", "bound", "measured_gap"])
            for r in osc_csv:
                writer.writerow([r["level"], r["cost"], repr(r["beta_n"]),
                                 repr(r["bound"]), repr(r["measured_gap"])])
    return EXIT_NUMERIC if failures else EXIT_OK


def cmd_markov_check(args):
    # lenient load: the point of the check is to diagnose bad instructions,
    # so marginal inconsistencies surface as residuals rather than I/O errors
    cov, grid, plan = _plan_setup(args, validate_plan=False)
    from .batteries import measures_on_cells
    matrix = plan.matrix * args.scale
    mu = measures_on_cells(grid, plan.mu_cells)
    nu = measures_on_cells(grid, matrix.sum(axis=0))
    work = DiscretePlan(matrix, plan.mu_cells, matrix.sum(axis=0),
                        grid_x=grid, grid_y=grid, validate=False)
    phi = plan_to_transfunction(work, mu, nu)
    basis = [grid.restrict(mu, i) for i in range(grid.p) if plan.mu_cells[i] > 0]
    rep = markov_check(phi, basis, tol=args.tol, seed=args.seed)
    report = {
        "command": "markov-check",
        "config": _config_echo(args),
        "seed": args.seed,
        "report": rep.to_dict(),
    }
    _emit(report, args.out)
    return EXIT_OK if rep.passed else EXIT_NUMERIC


def cmd_adjoint_check(args):
    cov, grid, plan = _plan_setup(args)
    from .batteries import measures_on_cells
    mu = measures_on_cells(grid, plan.mu_cells)
    nu = measures_on_cells(grid, plan.nu_cells)
    phi = plan_to_transfunction(plan, mu, nu)
    rng = rng_from_seed(args.seed)
    box = _parse_box(args.box)
    fields = lipschitz_fields(rng, args.fields, box)
    lams = [random_measure(rng, box, 6, positive=False) for _ in range(args.measures)]
    simple_rep = pairing_residual(phi, adjoint_of_simple(phi), fields, lams, tol=args.tol)

    meas_op = measurable_adjoint(phi, mu, nu, grid, grid)
    dens_lams = [to_measure(random_density(rng, mu), mu) for _ in range(args.measures)]
    meas_rep = pairing_residual(phi, meas_op, fields, dens_lams, tol=args.tol)

    report = {
        "command": "adjoint-check",
        "config": _config_echo(args),
        "seed": args.seed,
        "simple": simple_rep.to_dict(),
        "measurable": meas_rep.to_dict(),
    }
    _emit(report, args.out)
    ok = simple_rep.passed and meas_rep.passed
    return EXIT_OK if ok else EXIT_NUMERIC


_COMMANDS = {
    "discretize": cmd_discretize,
    "transport": cmd_transport,
    "approx-plan": cmd_approx_plan,
    "markov-check": cmd_markov_check,
    "adjoint-check": cmd_adjoint_check,
}


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on usage errors and 0 on --help
        return int(err.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (TransfunError, ValueError, OSError, json.JSONDecodeError) as err:
        return _fail(type(err).__name__, err, EXIT_INVALID)


if __name__ == "__main__":
    sys.exit(main())
