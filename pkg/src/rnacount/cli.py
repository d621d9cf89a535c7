"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 numeric failure.  Data goes to
stdout, diagnostics to stderr.  Exact integers are printed as decimal
strings (also inside JSON).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from fractions import Fraction

import mpmath

from . import asymptotics, check, grammars, models, structures, thermo

log = logging.getLogger("rnacount")

PRECISION_ENV = "RNACOUNT_DPS"


class UsageError(ValueError):
    """Invalid command-line input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _exact(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _dps(args) -> int:
    if args.precision_digits is not None:
        return args.precision_digits
    env = os.environ.get(PRECISION_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{PRECISION_ENV} must be an integer") from None
    return asymptotics.DEFAULT_DPS


def _class(args) -> models.StructureClass:
    params = structures.ModelParams(args.theta, args.tau, args.p, args.q)
    return models.StructureClass(args.family, args.dangles, params)


def _emit_json(obj, out):
    json.dump(obj, out, indent=2, sort_keys=False)
    out.write("\n")


def _emit_csv(header, rows, out):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def _class_meta(cls: models.StructureClass) -> dict:
    prm = cls.params
    return {"class": cls.name, "theta": prm.theta, "tau": prm.tau, "p": _exact(prm.p), "q": _exact(prm.q)}


# -- commands ---------------------------------------------------------------

def cmd_count(args, out):
    if args.n is not None and args.n_max is not None:
        raise UsageError("--n and --n-max are mutually exclusive")
    cls = _class(args)
    prm = cls.params
    ns = [args.n] if args.n is not None else list(range(1, (args.n_max or 10) + 1))
    if min(ns) < 1:
        raise UsageError("n must be positive")
    if args.method == "series":
        coeffs = models.gf_series(cls, max(ns))
        values = [coeffs[n] for n in ns]
    elif args.method == "oracle":
        values = [structures.census_total(structures.census(n, prm)[cls.family], prm.p,
                                          prm.q if cls.dangles else 0) for n in ns]
    else:
        if prm.p != 1 or prm.tau != 0:
            raise UsageError("grammar counts are available for p = 1 and tau = 0")
        if cls.family == "general" and not cls.dangles:
            values = [grammars.grammar_count("G1", n, prm.theta) for n in ns]
        elif cls.family == "general" and prm.q.denominator == 1:
            values = [grammars.grammar_count("G5", n, prm.theta, q=int(prm.q)) for n in ns]
        elif cls.family == "saturated" and not cls.dangles:
            values = [grammars.grammar_count("G6", n, prm.theta) for n in ns]
        else:
            raise UsageError(f"no grammar counts for {cls.name}")
    if args.output == "json":
        _emit_json(dict(_class_meta(cls), counts={str(n): _exact(v) for n, v in zip(ns, values)}), out)
    else:
        _emit_csv(["n", "count"], [[n, _exact(v)] for n, v in zip(ns, values)], out)


def cmd_series(args, out):
    cls = _class(args)
    table = models.coefficient_table(cls, args.order)
    if args.output == "json":
        rows = [{"n": n, "links": k, "dangles": d, "coefficient": _exact(c)} for (n, k, d), c in table.items()]
        _emit_json(dict(_class_meta(cls), terms=rows), out)
    else:
        _emit_csv(["n", "links", "dangles", "coefficient"],
                  [[n, k, d, _exact(c)] for (n, k, d), c in table.items()], out)


def _estimate_dict(est, dps: int) -> dict:
    d = est.as_dict()
    digits = max(dps - 5, 6)

    def text(x):
        if x is None:
            return None
        if isinstance(x, list):
            return [text(v) for v in x]
        return mpmath.nstr(x, digits)

    d["digits"] = {"gamma": text(est.gamma), "c": text(est.c), "d": text(est.d), "t0": text(est.t0)}
    return d


def cmd_asym(args, out):
    dps = _dps(args)
    if args.grammar:
        if args.family_set or args.dangles:
            raise UsageError("--grammar cannot be combined with class flags")
        est = asymptotics.grammar_asymptotics(args.grammar, theta=args.theta, q=args.q if args.q_set else 1,
                                              dps=dps, eliminate=args.eliminate)
        meta = {"grammar": args.grammar.upper(), "theta": args.theta}
    else:
        cls = _class(args)
        est = asymptotics.class_asymptotics(cls, dps=dps)
        meta = _class_meta(cls)
    _emit_json(dict(meta, **_estimate_dict(est, dps)), out)


def cmd_limitlaw(args, out):
    cls = _class(args)
    law = asymptotics.class_limit_law(cls, h=args.step, dps=max(_dps(args), 40))
    _emit_json(dict(_class_meta(cls), **law.as_dict()), out)


def _temperatures(args) -> list[float]:
    if args.t_step <= 0 or args.t_max < args.t_min:
        raise UsageError("need t_step > 0 and t_max >= t_min")
    count = int(round((args.t_max - args.t_min) / args.t_step))
    temps = [args.t_min + i * args.t_step for i in range(count + 1)]
    if min(temps) + thermo.KELVIN <= 0:
        raise UsageError("temperatures must lie above absolute zero")
    return temps


def cmd_melt(args, out):
    R = thermo.R_PAPER if args.paper_R else args.R
    temps = _temperatures(args)
    tms = {}
    for kind in ("nussinov", "stacking"):
        model = thermo.EnergyModel(kind, args.epsilon, R)
        try:
            tms[kind] = thermo.melting_temperature(args.n, model, args.theta, reference=args.reference) - thermo.KELVIN
        except thermo.MeltingError as exc:
            log.warning("%s: %s", kind, exc)
            tms[kind] = None
    if args.output == "json":
        text = thermo.figure_csv(args.n, temps, args.theta, args.epsilon, R)
        rows = list(csv.reader(text.splitlines()))
        cols = {h: [float(r[i]) for r in rows[1:]] for i, h in enumerate(rows[0])}
        _emit_json({"n": args.n, "theta": args.theta, "epsilon": args.epsilon, "R": R,
                    "reference": args.reference, "Tm_celsius": tms, "curves": cols}, out)
    else:
        out.write(thermo.figure_csv(args.n, temps, args.theta, args.epsilon, R))
        for kind, tm in tms.items():
            log.info("Tm(%s) = %s C", kind, "undefined" if tm is None else f"{tm:.6f}")


def cmd_check(args, out):
    rows = check.consistency_rows(args.n_max, tuple(args.thetas), tuple(args.taus), tuple(args.qs))
    bad = [r for r in rows if not r.consistent]
    seen = []
    for r in rows:
        key = (r.family, r.dangles, r.theta, r.tau, r.q)
        if key not in seen:
            seen.append(key)
    for key in seen:
        group = [r for r in rows if (r.family, r.dangles, r.theta, r.tau, r.q) == key]
        ok = all(r.consistent for r in group)
        grams = sorted({g for r in group for g in r.grammars})
        name = key[0] + ("+dangles" if key[1] else "")
        out.write(f"{'ok' if ok else 'MISMATCH'} {name} theta={key[2]} tau={key[3]} q={key[4]} "
                  f"n<={args.n_max} sources=oracle,series{''.join(',' + g for g in grams)}\n")
    for r in bad:
        out.write("mismatch: " + r.describe() + "\n")
    if bad:
        out.write(f"{len(bad)} inconsistent counts\n")
        return 2
    out.write("all classes consistent\n")
    return 0


# -- parser -----------------------------------------------------------------

def _add_class_flags(p):
    p.add_argument("--family", choices=structures.FAMILIES, default=None)
    p.add_argument("--dangles", action="store_true")
    p.add_argument("--theta", type=int, default=1)
    p.add_argument("--tau", type=int, default=0)
    p.add_argument("--p", type=rational, default=Fraction(1))
    p.add_argument("--q", type=rational, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rnacount", description="Exact and asymptotic enumeration of RNA secondary structures.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="exact counts [t^n] g")
    _add_class_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--method", choices=("series", "grammar", "oracle"), default="series")
    p.add_argument("--output", choices=("csv", "json"), default="csv")

    p = sub.add_parser("series", help="coefficients by length, links and dangles")
    _add_class_flags(p)
    p.add_argument("--order", type=int, default=10)
    p.add_argument("--output", choices=("csv", "json"), default="csv")

    p = sub.add_parser("asym", help="growth constant and amplitudes (JSON)")
    _add_class_flags(p)
    p.add_argument("--grammar", choices=("G1", "G4", "G5", "G6"), type=str.upper)
    p.add_argument("--eliminate", action="store_true", help="reduce a grammar system to one equation")
    p.add_argument("--precision-digits", type=int)
    p.add_argument("--output", choices=("json",), default="json")

    p = sub.add_parser("limitlaw", help="Gaussian law constants of the link count (JSON)")
    _add_class_flags(p)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--precision-digits", type=int)
    p.add_argument("--output", choices=("json",), default="json")

    p = sub.add_parser("melt", help="melting curves under the two energy models")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--theta", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--R", type=float, default=thermo.R_PHYSICAL)
    p.add_argument("--paper-R", action="store_true")
    p.add_argument("--t-min", type=float, default=-200.0, help="Celsius")
    p.add_argument("--t-max", type=float, default=200.0, help="Celsius")
    p.add_argument("--t-step", type=float, default=5.0)
    p.add_argument("--reference", choices=("ground", "midpoint"), default="ground")
    p.add_argument("--output", choices=("csv", "json"), default="csv")

    p = sub.add_parser("check", help="oracle vs grammar vs series consistency")
    p.add_argument("--n-max", type=int, default=12)
    p.add_argument("--thetas", type=int, nargs="+", default=[0, 1, 3])
    p.add_argument("--taus", type=int, nargs="+", default=[0, 1])
    p.add_argument("--qs", type=int, nargs="+", default=[0, 1, 2])
    return parser


COMMANDS = {"count": cmd_count, "series": cmd_series, "asym": cmd_asym, "limitlaw": cmd_limitlaw,
            "melt": cmd_melt, "check": cmd_check}


def _normalize(args):
    if hasattr(args, "family"):
        args.family_set = args.family is not None
        args.family = args.family or "general"
        args.q_set = args.q is not None
        args.q = args.q if args.q is not None else Fraction(0)
        if args.q_set and not args.dangles and args.q != 0 and not getattr(args, "grammar", None):
            raise UsageError("--q needs --dangles")
    if args.command == "check" and args.n_max > structures.DEFAULT_CAP:
        raise UsageError(f"--n-max is capped at {structures.DEFAULT_CAP} for brute force")
    if args.command == "melt" and args.n < 1:
        raise UsageError("n must be positive")
    if args.command == "series" and args.order < 1:
        raise UsageError("order must be positive")


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose or args.command == "melt" else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        _normalize(args)
        code = COMMANDS[args.command](args, out)
        return code or 0
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
