"""Batch command line front end.

Subcommands: spectrum, capacities, besse, gradcheck, oracle, converge.
Reports echo the full run configuration for reproducibility; identical
configuration and seed give byte-identical output (timestamps are excluded
with --no-timestamp, which the test suite always passes).

Exit codes: 0 success, 2 validation error, 3 solver non-convergence.
Errors are written to stderr as single-line JSON objects.
"""

import argparse
import datetime
import io
import json
import sys

import numpy as np

from . import __version__, dual, pipeline, solver
from .bodies import parse_body
from .capacities import ellipsoid_oracle
from .errors import (
    BracketFailure,
    ClarkecapError,
    CollapsedToZero,
    DegenerateCircle,
    DimensionMismatch,
    EtaInSpectrum,
    GridTooCoarse,
    InfeasibleConditions,
    InsufficientCapacities,
    MissingIndexData,
    NewtonDivergence,
    NoConvergence,
    NonpositiveAction,
    OriginNotInterior,
    SeedNonpositiveAction,
    SingularMatrix,
    ThresholdViolated,
    ValueOutOfBand,
)

VALIDATION_ERRORS = (
    DimensionMismatch,
    SingularMatrix,
    OriginNotInterior,
    GridTooCoarse,
    EtaInSpectrum,
    InfeasibleConditions,
    InsufficientCapacities,
    MissingIndexData,
    ValueError,
)
SOLVER_ERRORS = (
    NewtonDivergence,
    NoConvergence,
    NonpositiveAction,
    SeedNonpositiveAction,
    CollapsedToZero,
    ValueOutOfBand,
    ThresholdViolated,
    BracketFailure,
    DegenerateCircle,
)


def _error_object(exc, position=None):
    obj = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    if position is not None:
        obj["error"]["position"] = position
    return json.dumps(obj, sort_keys=True)


def _load_body(arg):
    text = arg
    if not arg.lstrip().startswith("{"):
        with open(arg, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BodyParseError(exc) from exc
    return parse_body(spec)


class BodyParseError(Exception):
    def __init__(self, cause):
        super().__init__(f"malformed body JSON at line {cause.lineno} column {cause.colno}: {cause.msg}")
        self.position = {"line": cause.lineno, "column": cause.colno, "char": cause.pos}


def _config_echo(args):
    keys = ("command", "body", "k", "lmax", "grid", "eta", "seed", "tol_grad", "out", "a")
    echo = {}
    for key in keys:
        if hasattr(args, key):
            val = getattr(args, key)
            echo[key] = val
    return echo


def _emit(args, payload):
    report = {
        "version": __version__,
        "config": _config_echo(args),
        "result": payload,
    }
    if not args.no_timestamp:
        report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    print(json.dumps(report, sort_keys=True))


SPECTRUM_COLUMNS = (
    "action",
    "transverse_index",
    "nullity",
    "boundary_residual",
    "ode_residual",
    "multiplicity",
    "provenance",
)


def _spectrum_csv(circles):
    buf = io.StringIO()
    buf.write(",".join(SPECTRUM_COLUMNS) + "\n")
    for c in circles:
        rec = c.as_record()
        row = []
        for col in SPECTRUM_COLUMNS:
            v = rec.get(col)
            row.append("" if v is None else str(v))
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _caps_csv(report):
    buf = io.StringIO()
    buf.write("k,value,source,method\n")
    for e in report.caps:
        v = "" if e.value is None else repr(e.value)
        buf.write(f"{e.k},{v},{e.source},{e.method}\n")
    return buf.getvalue()


def _make_trace(args):
    if not args.trace:
        return None

    def trace(kind, payload):
        sys.stderr.write(json.dumps({"trace": kind, "data": payload}, sort_keys=True, default=str) + "\n")

    return trace


def _opts(args):
    return solver.SolverOptions(seed=args.seed, grad_tol=args.tol_grad)


# -- subcommands ------------------------------------------------------------


def cmd_spectrum(args):
    body = _load_body(args.body)
    _, circles = pipeline.detect_circles(
        body, args.k, args.lmax, args.grid, _opts(args), _make_trace(args)
    )
    if args.out == "csv":
        sys.stdout.write(_spectrum_csv(circles))
    else:
        _emit(args, {"circles": [c.as_record() for c in circles]})
    return 0


def cmd_capacities(args):
    body = _load_body(args.body)
    result = pipeline.run_capacities(
        body, args.k, args.lmax, args.grid, eta=args.eta,
        opts=_opts(args), trace=_make_trace(args),
    )
    if result.report is None:
        raise NoConvergence("; ".join(result.warnings) or "no capacities computed")
    if args.out == "csv":
        sys.stdout.write(_caps_csv(result.report))
        return 0
    payload = result.report.to_dict()
    payload["eta"] = result.eta
    payload["circles"] = [c.as_record() for c in result.circles]
    if result.oracle_values is not None:
        payload["oracle"] = result.oracle_values
        payload["oracle_match"] = result.oracle_match
    _emit(args, payload)
    return 0


def cmd_besse(args):
    body = _load_body(args.body)
    result = pipeline.run_capacities(
        body, args.k, args.lmax, args.grid, eta=args.eta,
        opts=_opts(args), trace=_make_trace(args),
    )
    if result.report is None:
        raise NoConvergence("; ".join(result.warnings) or "no capacities computed")
    _emit(args, {
        "besse": result.report.besse,
        "zoll": result.report.zoll,
        "caps": [e.value for e in result.report.caps],
    })
    return 0


def cmd_oracle(args):
    a = [float(v) for v in args.a.split(",")]
    values = ellipsoid_oracle(sorted(a), args.k)
    if args.out == "csv":
        sys.stdout.write("k,value\n")
        for i, v in enumerate(values, start=1):
            sys.stdout.write(f"{i},{v!r}\n")
    else:
        _emit(args, {"values": values})
    return 0


def cmd_gradcheck(args):
    from .gradcheck import gradient_check_table

    body = _load_body(args.body)
    rows = gradient_check_table(body, seed=args.seed, lmax=args.lmax, grid=args.grid)
    if args.out == "csv":
        sys.stdout.write("check,max_error,tolerance,passed\n")
        for r in rows:
            sys.stdout.write(f"{r['check']},{r['max_error']!r},{r['tolerance']!r},{r['passed']}\n")
    else:
        _emit(args, {"checks": rows})
    return int(not all(r["passed"] for r in rows)) * 3


def cmd_converge(args):
    body = _load_body(args.body)
    lmaxes = [int(v) for v in str(args.lmax).split(",")] if args.lmax else [8, 16, 32, 64]
    grids = [int(v) for v in str(args.grid).split(",")] if args.grid else [256, 512, 1024]
    rows = []
    for L in lmaxes:
        for G in grids:
            if G < 4 * L:
                continue
            result = pipeline.run_capacities(
                body, args.k, L, G, eta=args.eta, opts=_opts(args), force_oracle=True,
            )
            vals = result.report.values() if result.report else []
            rows.append({"l_max": L, "grid": G, "caps": vals})
    if args.out == "csv":
        sys.stdout.write("l_max,grid," + ",".join(f"c{i}" for i in range(1, args.k + 1)) + "\n")
        for r in rows:
            caps = ",".join("" if v is None else repr(v) for v in r["caps"])
            sys.stdout.write(f"{r['l_max']},{r['grid']},{caps}\n")
    else:
        _emit(args, {"table": rows})
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="clarkecap",
        description="Action spectra and symplectic capacities of convex domains.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, body=True):
        if body:
            p.add_argument("--body", required=True, help="body spec JSON (inline or path)")
        p.add_argument("--k", type=int, default=4, help="number of capacities")
        p.add_argument("--lmax", default=None, help="Fourier truncation (default 32)")
        p.add_argument("--grid", default=None, help="quadrature grid (default 512)")
        p.add_argument("--eta", type=float, default=None, help="smoothing slope at infinity")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol-grad", dest="tol_grad", type=float, default=1e-9)
        p.add_argument("--out", choices=("json", "csv"), default="json")
        p.add_argument("--trace", action="store_true")
        p.add_argument("--no-timestamp", dest="no_timestamp", action="store_true")

    p = sub.add_parser("spectrum", help="detect the action spectrum")
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("capacities", help="full capacity pipeline")
    common(p)
    p.set_defaults(func=cmd_capacities)

    p = sub.add_parser("besse", help="Besse/Zoll verdicts")
    common(p)
    p.set_defaults(func=cmd_besse)

    p = sub.add_parser("gradcheck", help="finite-difference verification table")
    common(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("oracle", help="closed-form ellipsoid capacities")
    p.add_argument("--a", required=True, help="comma separated semiaxes")
    common(p, body=False)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("converge", help="capacity table over l_max and grid")
    common(p)
    p.set_defaults(func=cmd_converge)

    return ap


def _normalize_sizes(args):
    if getattr(args, "command", "") != "converge":
        args.lmax = int(args.lmax) if args.lmax is not None else 32
        args.grid = int(args.grid) if args.grid is not None else 512
    return args


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    args = _normalize_sizes(args)
    try:
        return args.func(args)
    except BodyParseError as exc:
        sys.stderr.write(_error_object(exc, exc.position) + "\n")
        return 2
    except VALIDATION_ERRORS as exc:
        sys.stderr.write(_error_object(exc) + "\n")
        return 2
    except SOLVER_ERRORS as exc:
        sys.stderr.write(_error_object(exc) + "\n")
        return 3
    except ClarkecapError as exc:
        sys.stderr.write(_error_object(exc) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
