"""Command-line front end.

Each subcommand writes one JSON document (or a CSV table) to stdout, echoing
its fully resolved configuration.  Exit codes: 0 success, 2 usage or input
error, 3 numerical-consistency failure, 4 resource cap hit (partial output
is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .equilibrium import omega_mass
from .errors import (
    CapacityError,
    ConsistencyError,
    DegenerateError,
    DomainError,
    ParseError,
    ResourceError,
    UnsupportedError,
)
from .ensemble import parse_ensemble
from .intensity import rho1_many, scaled_defect_many
from .kacrice import VarianceQuadratureConfig, asymptotic_variance, expected_zeros, variance
from .montecarlo import THREADS_ENV, GridConfig, default_threads, simulate
from .universal import universal_constant, xi

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4
KACRICE_MAX_N = 200


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _interval(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected a:b, got {text!r}")
    try:
        a, b = float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b, got {text!r}") from None
    return a, b


def _clean(value):
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, (np.floating, np.integer)):
        return _clean(value.item())
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _emit(doc: dict, fmt: str, out) -> None:
    doc = _clean(doc)
    if fmt == "json":
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return
    rows = doc.get("rows")
    if rows is None:
        rows = [{k: v for k, v in doc.items() if k != "config"}]
    out.write("# config: " + json.dumps(doc["config"], sort_keys=True) + "\n")
    buf = io.StringIO()
    fields = list(rows[0].keys()) if rows else []
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else json.dumps(v) if isinstance(v, (dict, list)) else v)
                         for k, v in row.items()})
    out.write(buf.getvalue())


def _add_common(p, ensemble=True, n=True, interval=False):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    if ensemble:
        p.add_argument("--ensemble", default="legendre",
                       help="legendre, chebyshev, jacobi:<alpha>:<beta> or file:<path>")
    if n:
        p.add_argument("--n", type=int, required=True, help="degree")
    if interval:
        p.add_argument("--interval", type=_interval, default=(-0.5, 0.5), help="a:b")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zerovar", description="Zero-count statistics for Gaussian orthogonal-polynomial ensembles.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("constant", help="universal variance constant c")
    _add_common(p, ensemble=False, n=False)
    p.add_argument("--window", type=float, default=1000.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--series-threshold", type=float, default=0.25)
    p.add_argument("--xi-grid", type=_floats, default=None,
                   help="also tabulate Xi(u) at these u (comma-separated)")

    p = sub.add_parser("intensity", help="one-point intensity rho1")
    _add_common(p)
    p.add_argument("--x", type=_floats, required=True, help="comma-separated points")

    p = sub.add_parser("correlation", help="scaled correlation defect against Xi")
    _add_common(p)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--u", type=_floats, required=True, help="comma-separated scaled separations")

    p = sub.add_parser("expect", help="expected number of zeros in [a, b]")
    _add_common(p, interval=True)
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("variance", help="Kac-Rice variance of the zero count")
    _add_common(p, interval=True)
    _add_variance_flags(p)
    p.add_argument("--c", type=float, default=None, help="constant for the asymptote (default: computed)")

    p = sub.add_parser("simulate", help="Monte Carlo zero counts")
    _add_common(p, interval=True)
    _add_mc_flags(p)

    p = sub.add_parser("verify", help="Monte Carlo vs Kac-Rice vs the large-n limit")
    _add_common(p, n=False, interval=True)
    p.add_argument("--n", type=_ints, required=True, help="comma-separated degrees")
    _add_mc_flags(p)
    _add_variance_flags(p)
    p.add_argument("--c", type=float, default=None)
    return parser


def _add_variance_flags(p):
    d = VarianceQuadratureConfig()
    p.add_argument("--lambda", dest="lam", type=float, default=d.lam)
    p.add_argument("--eta", type=float, default=d.eta)
    p.add_argument("--panel-target", type=float, default=d.panel_target)
    p.add_argument("--max-evals", type=int, default=d.max_evals)


def _add_mc_flags(p):
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-per-wavelength", type=int, default=8)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default ${THREADS_ENV} or CPU count); never changes results")
    p.add_argument("--max-seconds", type=float, default=None)


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "format"}
    if "threads" in cfg and cfg["threads"] is None:
        cfg["threads"] = default_threads()
    return cfg


def _table(args, n):
    return parse_ensemble(args.ensemble, n + 1)


def _cmd_constant(args):
    res = universal_constant(window=args.window, series_threshold=args.series_threshold, tol=args.tol)
    doc = res.as_dict()
    if args.xi_grid:
        u = np.asarray(args.xi_grid, dtype=float)
        doc["rows"] = [{"u": float(a), "xi": float(v)} for a, v in zip(u, xi(u))]
    return doc, EXIT_OK if res.converged else EXIT_RESOURCE


def _cmd_intensity(args):
    table = _table(args, args.n)
    x = np.asarray(args.x, dtype=float)
    r = rho1_many(table, args.n, x)
    return {"rows": [{"x": float(a), "rho1": float(v)} for a, v in zip(x, r)]}, EXIT_OK


def _cmd_correlation(args):
    table = _table(args, args.n)
    u = np.asarray(args.u, dtype=float)
    d = scaled_defect_many(table, args.n, args.x, u)
    ref = xi(u)
    return {"rows": [{"u": float(a), "scaled_defect": float(v), "xi": float(w)}
                     for a, v, w in zip(u, d, ref)]}, EXIT_OK


def _cmd_expect(args):
    a, b = args.interval
    table = _table(args, args.n)
    e = expected_zeros(table, args.n, a, b, tol=args.tol)
    return {"expectation": e, "per_n": e / args.n if args.n else None,
            "limit_per_n": omega_mass(a, b) / math.sqrt(3)}, EXIT_OK


def _vcfg(args):
    return VarianceQuadratureConfig(lam=args.lam, eta=args.eta, panel_target=args.panel_target,
                                    max_evals=args.max_evals)


def _constant(args):
    if args.c is None:
        args.c = universal_constant().c
    return args.c


def _cmd_variance(args):
    a, b = args.interval
    table = _table(args, args.n)
    res = variance(table, args.n, a, b, _vcfg(args))
    doc = res.as_dict()
    c = _constant(args)
    doc["asymptote_per_n"] = asymptotic_variance(a, b, c)
    doc["variance_per_n"] = res.variance / args.n
    return doc, EXIT_OK if res.complete else EXIT_RESOURCE


def _grid(args):
    return GridConfig(grid_per_wavelength=args.grid_per_wavelength, batch=args.batch,
                      threads=args.threads, max_seconds=args.max_seconds)


def _cmd_simulate(args):
    a, b = args.interval
    table = _table(args, args.n)
    rep = simulate(table, args.n, a, b, args.samples, args.seed, _grid(args))
    doc = rep.as_dict()
    doc.pop("config")
    doc["grid"] = rep.config
    return doc, EXIT_OK if rep.complete else EXIT_RESOURCE


def _cmd_verify(args):
    a, b = args.interval
    c = _constant(args)
    limit = asymptotic_variance(a, b, c)
    rows, code = [], EXIT_OK
    for n in args.n:
        table = _table(args, n)
        rep = simulate(table, n, a, b, args.samples, args.seed, _grid(args))
        kr = None
        if n <= KACRICE_MAX_N:
            res = variance(table, n, a, b, _vcfg(args))
            kr = res.variance
            if not res.complete:
                code = EXIT_RESOURCE
        if not rep.complete:
            code = EXIT_RESOURCE
        rows.append({
            "n": n,
            "mc_variance": rep.variance,
            "mc_stderr": rep.variance_stderr,
            "kacrice_variance": kr,
            "asymptote": limit,
            "ratio": rep.variance / (n * limit),
        })
    return {"rows": rows}, code


_COMMANDS = {
    "constant": _cmd_constant,
    "intensity": _cmd_intensity,
    "correlation": _cmd_correlation,
    "expect": _cmd_expect,
    "variance": _cmd_variance,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
}


def _join_values(argv: list[str]) -> list[str]:
    # "--interval -0.5:0.5" would otherwise read the value as a flag
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in ("--interval", "--x", "--u") and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    argv = _join_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(stderr)
        print(exc, file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise DomainError("--threads must be >= 1")
        doc, code = _COMMANDS[args.command](args)
    except (DomainError, CapacityError, ParseError, UnsupportedError) as exc:
        print(f"zerovar {args.command}: {exc}", file=stderr)
        return EXIT_USAGE
    except (ConsistencyError, DegenerateError) as exc:
        print(f"zerovar {args.command}: numerical consistency failure: {exc}", file=stderr)
        return EXIT_NUMERIC
    except (ResourceError, MemoryError) as exc:
        print(f"zerovar {args.command}: resource cap: {exc}", file=stderr)
        return EXIT_RESOURCE
    doc["config"] = _config(args)
    _emit(doc, args.format, stdout)
    if code == EXIT_RESOURCE:
        print(f"zerovar {args.command}: resource cap reached; output is partial", file=stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
