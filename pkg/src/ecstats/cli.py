"""Command-line entry point: ``ecstats <subcommand> [options]``.

Global options may also come from ECSTATS_Z, ECSTATS_FORMAT, ECSTATS_WORKERS,
ECSTATS_SEED and ECSTATS_BUDGET; an explicit flag wins over the environment.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction

from . import census as census_mod
from . import constants as const_mod
from . import density, experiments, matcount, polyprobe, quadform
from .arith import PrimePower
from .errors import DomainError
from .serialize import dumps, fraction_str, rows_to_csv, to_jsonable

ENV_PREFIX = "ECSTATS_"
FORMATS = ("json", "csv", "text")


@dataclass
class CliConfig:
    z: int = const_mod.DEFAULT_Z
    format: str = "text"
    workers: int = os.cpu_count() or 1
    seed: int = 0
    budget: int = polyprobe.ENUMERATION_BUDGET


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _env_default(name: str, cast, fallback):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"bad value for {ENV_PREFIX}{name.upper()}: {raw!r}") from None


def _format_choice(text: str) -> str:
    if text not in FORMATS:
        raise ValueError(text)
    return text


def _common() -> argparse.ArgumentParser:
    base = CliConfig()
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--z", type=int, default=_env_default("z", int, base.z), help="Euler product cutoff")
    g.add_argument("--format", choices=FORMATS, default=_env_default("format", _format_choice, base.format))
    g.add_argument("--workers", type=int, default=_env_default("workers", int, base.workers))
    g.add_argument("--seed", type=int, default=_env_default("seed", int, base.seed))
    g.add_argument("--budget", type=int, default=_env_default("budget", int, base.budget),
                   help="enumeration cap for polynomial grids")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="ecstats", description="Exact elliptic-curve statistics over prime fields.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classno", parents=[common], help="class numbers and reduced forms")
    p.add_argument("--D", type=int, required=True, help="negative discriminant")
    p.add_argument("--forms", action="store_true", help="list reduced primitive forms")

    p = sub.add_parser("density", parents=[common], help="local, star, group and archimedean densities")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--u", type=int, help="determinant (defaults to --p)")
    p.add_argument("--p", type=int)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--ell", type=int, help="prime; omit for the archimedean density at --p")
    p.add_argument("--star", action="store_true", help="restrict to sigma != 0 mod ell")

    p = sub.add_parser("matcount", parents=[common], help="matrix counts with fixed trace and determinant")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--mode", choices=("closed", "bruteforce"), default="closed")

    p = sub.add_parser("constants", parents=[common], help="singular-series constants")
    p.add_argument("kind", choices=("lt", "twin", "gm", "men", "meg", "cyclic", "aliquot"))
    for name in ("t", "p", "N", "m", "k", "d"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--ell", type=int, help="print only the local factor at this prime")

    p = sub.add_parser("census", parents=[common], help="exhaustive curve census over F_p")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--stat", default="trace", help="trace, group, cyclic, prime_order or trace_mod(N,t)")
    p.add_argument("--records", action="store_true", help="stream one JSON line per curve")

    p = sub.add_parser("experiment", parents=[common], help="prediction versus observation")
    p.add_argument("kind", choices=("lt", "sato-tate", "koblitz", "cyclicity", "trace-mod", "deuring",
                                    "men", "meg", "aliquot", "twin"))
    for name in ("t", "p", "N", "m", "k", "d", "bins"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--x", type=float)
    p.add_argument("--interval", type=float, nargs=2, metavar=("ALPHA", "BETA"))
    p.add_argument("--dyadic", action="store_true", help="aliquot window x < p1 <= 2x")

    p = sub.add_parser("polyprobe", parents=[common], help="polynomial root counts and character sums")
    p.add_argument("action", choices=("roots", "charsum", "square", "suite"))
    p.add_argument("--poly", help="e.g. 'd=2; 3*x1^2*x2 - 4*x2 + 1'")
    p.add_argument("--ell", type=int)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--size", type=int, default=polyprobe.CORPUS_SIZE)
    return parser


def _require(parser, args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        parser.error(f"{args.command} {getattr(args, 'kind', '')} requires " + ", ".join(f"--{n}" for n in missing))


# -- output -------------------------------------------------------------------


def _text(value) -> str:
    if isinstance(value, Fraction):
        return fraction_str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(out, fmt: str, payload: dict, headline=None, csv_rows=None):
    """Text prints ``headline`` (or key=value lines); JSON one line; CSV the given table."""
    if fmt == "json":
        out.write(dumps(payload) + "\n")
    elif fmt == "csv":
        header, rows = csv_rows if csv_rows else (list(payload), [list(to_jsonable(payload).values())])
        out.write(rows_to_csv(header, rows))
    elif headline is not None:
        out.write(_text(headline) + "\n")
    else:
        for k, v in to_jsonable(payload).items():
            out.write(f"{k}: {v}\n")


# -- handlers -----------------------------------------------------------------


def _classno(args, parser, out):
    D = args.D
    res = quadform.class_number(D)
    H = quadform.kronecker_class_number(D)
    payload = {"D": D, "h": res.h, "w": res.w, "H": H}
    if args.forms:
        payload["forms"] = [[f.a, f.b, f.c] for f in res.forms]
    _emit(out, args.format, payload, headline=None if args.forms else H)


def _density(args, parser, out):
    if args.ell is None:
        _require(parser, args, "p")
        val = density.archimedean_density(args.t, args.p)
        _emit(out, args.format, {"t": args.t, "p": args.p, "archimedean": val}, headline=val)
        return
    u = args.u if args.u is not None else args.p
    if u is None:
        parser.error("density requires --u or --p")
    if args.star:
        lf = density.local_density_star(args.t, u, args.ell)
    else:
        lf = density.local_density(args.t, u, args.n, args.ell)
    payload = {"t": args.t, "u": u, "n": args.n, "ell": args.ell, "value": lf.value,
               "stabilized_at": lf.stabilized_at}
    _emit(out, args.format, payload, headline=lf.value)


def _matcount(args, parser, out):
    res = matcount.count_fixed_trace_det(args.t, args.u, args.n, PrimePower(args.ell, args.r), args.mode)
    payload = {"t": args.t, "u": args.u, "n": args.n, "level": str(res.level), "method": res.method,
               "count": res.count}
    _emit(out, args.format, payload, headline=res.count)


def _constant_kind(args, parser):
    k = args.kind
    need = {"lt": ("t",), "twin": (), "gm": ("p",), "men": ("N",), "meg": ("m", "k"), "cyclic": ("p",),
            "aliquot": ("d",)}[k]
    _require(parser, args, *need)
    ctor = getattr(const_mod.ConstantKind, k)
    return ctor(*(getattr(args, n) for n in need))


def _constants(args, parser, out):
    kind = _constant_kind(args, parser)
    if args.ell is not None:
        f = const_mod.local_factor(kind, args.ell)
        _emit(out, args.format, {"kind": str(kind), "ell": args.ell, "local_factor": f}, headline=f)
        return
    tp = const_mod.constant(kind, args.z)
    payload = {"kind": str(kind), "z": tp.z, "value": tp.value, "exact_prefix": tp.exact_prefix,
               "tail_estimate": tp.tail_estimate, "partials": tp.partials, "metadata": tp.metadata}
    headline = tp.exact_prefix if kind.tag == "CYCLIC" else tp.value
    rows = (["cutoff", "value"], [[zz, v] for zz, v in tp.partials])
    _emit(out, args.format, payload, headline=headline, csv_rows=rows)


def _census(args, parser, out):
    if args.records:
        for rec in census_mod.census(args.p).records():
            out.write(rec.to_json() + "\n")
        return
    dist = census_mod.empirical_distribution(args.p, args.stat)
    if args.format == "json":
        out.write(dumps(dist.masses) + "\n")
    elif args.format == "csv":
        rows = [[str(k) if not isinstance(k, bool) else str(k).lower(), v.numerator, v.denominator]
                for k, v in dist.masses.items()]
        out.write(rows_to_csv(["key", "numerator", "denominator"], rows))
    else:
        for k, v in dist.masses.items():
            out.write(f"{_text(k)}\t{fraction_str(v)}\n")


def _record_payload(rec: experiments.ComparisonRecord) -> dict:
    return to_jsonable(asdict(rec))


def _experiment(args, parser, out):
    k = args.kind
    if k == "sato-tate":
        _require(parser, args, "p")
        hist, rec = experiments.run_sato_tate(
            args.p, bins=args.bins or 10, interval=tuple(args.interval) if args.interval else None
        )
        if args.format == "csv":
            rows = [[i, m.numerator, m.denominator, s]
                    for i, (m, s) in enumerate(zip(hist.empirical_masses, hist.semicircle_masses))]
            out.write(rows_to_csv(["bin", "numerator", "denominator", "semicircle"], rows))
            return
        if args.format == "json":
            out.write(dumps({"histogram": hist, "record": rec}) + "\n")
            return
        _emit(out, "text", _record_payload(rec))
        return
    if k == "lt":
        _require(parser, args, "t", "x")
        rec = experiments.run_lt_average(args.t, args.x, args.z, workers=args.workers)
    elif k in ("koblitz", "cyclicity", "deuring"):
        _require(parser, args, "p")
        rec = experiments.run_per_prime(args.p, "deuring_full" if k == "deuring" else k, args.z)
    elif k == "trace-mod":
        _require(parser, args, "p", "N", "t")
        rec = experiments.run_per_prime(args.p, census_mod.TraceMod(args.N, args.t), args.z)
    elif k == "men":
        _require(parser, args, "N")
        rec = experiments.run_men(args.N, args.z)
    elif k == "meg":
        _require(parser, args, "m", "k")
        rec = experiments.run_meg(args.m, args.k, args.z)
    elif k == "aliquot":
        _require(parser, args, "d", "x")
        rec = experiments.run_aliquot(args.d, int(args.x), args.z, dyadic=args.dyadic)
    else:
        _require(parser, args, "x")
        rec = experiments.run_twin_average(int(args.x), args.z)
    payload = _record_payload(rec)
    if args.format == "csv":
        flat = {k: v for k, v in payload.items() if k != "metadata"}
        out.write(rows_to_csv(list(flat), [list(flat.values())]))
    else:
        _emit(out, args.format, payload)


def _polyprobe(args, parser, out):
    if args.action == "suite":
        polys = polyprobe.corpus(args.size, seed=args.seed or polyprobe.CORPUS_SEED)
        reports = [polyprobe.weil_check(polys), polyprobe.rho_a_check(polys),
                   polyprobe.rho_b_check(polys, budget=args.budget), polyprobe.square_form_roundtrip(polys)]
        for rep in reports:
            payload = {"name": rep.name, "checked": rep.checked, "violations": len(rep.violations),
                       "notes": rep.notes}
            _emit(out, "json" if args.format == "json" else "text", payload,
                  headline=f"{rep.name}: {rep.checked} checked, {len(rep.violations)} violations")
        return
    _require(parser, args, "poly", "ell")
    f = polyprobe.parse_polynomial(args.poly)
    if args.action == "roots":
        val = polyprobe.root_count(f, args.ell, args.r, budget=args.budget)
        _emit(out, args.format, {"poly": str(f), "ell": args.ell, "r": args.r, "roots": val}, headline=val)
    elif args.action == "charsum":
        val = polyprobe.character_sum(f, args.ell, budget=args.budget)
        _emit(out, args.format, {"poly": str(f), "ell": args.ell, "sum": val}, headline=val)
    else:
        sf = polyprobe.square_form_test(f, args.ell)
        if sf is None:
            payload = {"poly": str(f), "ell": args.ell, "square_form": False}
            headline = "not a square form"
        else:
            payload = {"poly": str(f), "ell": args.ell, "square_form": True, "c": sf.c, "g": str(sf.g)}
            headline = f"{sf.c} * ({str(sf.g).split('; ', 1)[1]})^2"
        _emit(out, args.format, payload, headline=headline)


HANDLERS = {
    "classno": _classno,
    "density": _density,
    "matcount": _matcount,
    "constants": _constants,
    "census": _census,
    "experiment": _experiment,
    "polyprobe": _polyprobe,
}


def run_command(argv, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.workers < 1:
            parser.error("--workers must be positive")
        HANDLERS[args.command](args, parser, out)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (DomainError, ValueError) as exc:
        err.write(f"ecstats: {exc}\n")
        return 1
    return 0


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


__all__ = ["CliConfig", "build_parser", "main", "run_command"]
