"""Command-line front end.

Subcommands: ``bound``, ``ladder``, ``lp``, ``certify``, ``asymp``. Every one
accepts ``--format {human,json,csv}`` (default from $COHERENT_FORMAT, else
human), ``--output PATH`` and ``--mode {rational,float}``.

Exit codes: 0 success, 1 usage error, 2 verification or tightness failure,
3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import bounds, certificate, ladder, lp
from ._numbers import as_fraction, format_number, parse_number
from .distribution import ObjectiveFn, dumps
from .simplex import SolverError, SolverOptions, format_lp

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_SOLVER = 0, 1, 2, 3
FORMATS = ("human", "json", "csv")
FORMAT_ENV = "COHERENT_FORMAT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class Report:
    """What a subcommand produced: scalar fields, optional rows, exit code."""

    fields: dict
    rows: list = field(default_factory=list)
    code: int = EXIT_OK
    message: str = ""


# --------------------------------------------------------------------------
# value handling
# --------------------------------------------------------------------------


class _Ctx:
    def __init__(self, mode: str):
        self.exact = mode == "rational"

    def number(self, token: str, name: str):
        try:
            v = parse_number(token, exact=self.exact)
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"--{name}: cannot parse {token!r} as a number")
        if isinstance(v, float) and not math.isfinite(v):
            raise UsageError(f"--{name}: value must be finite")
        return v if self.exact else float(v)

    def prior(self, token: str):
        p = self.number(token, "p")
        if not 0 < p < 1:
            raise UsageError("--p must lie strictly between 0 and 1")
        return p

    def out(self, value):
        """JSON-ready value: Fractions as 'num/den' strings in rational mode."""
        if isinstance(value, bool) or value is None or isinstance(value, str):
            return value
        if isinstance(value, Fraction):
            return format_number(value) if self.exact else float(value)
        if isinstance(value, (int, np.integer)):
            return int(value)
        if isinstance(value, (float, np.floating)):
            return float(value)
        if isinstance(value, (list, tuple)):
            return [self.out(v) for v in value]
        if isinstance(value, dict):
            return {k: self.out(v) for k, v in value.items()}
        return str(value)


def _render_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        if v and all(isinstance(x, list) for x in v):
            return " ".join("(" + ", ".join(_render_scalar(y) for y in x) + ")" for x in v)
        return " ".join(_render_scalar(x) for x in v)
    if isinstance(v, dict):
        return " ".join(f"{k}={_render_scalar(x)}" for k, x in v.items())
    return str(v)


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        doc = dict(report.fields)
        if report.rows:
            doc["rows"] = report.rows
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if report.rows:
            cols = list(report.rows[0].keys())
            w.writerow(cols)
            for row in report.rows:
                w.writerow([_render_scalar(row[c]) for c in cols])
        else:
            w.writerow(["key", "value"])
            for k, v in report.fields.items():
                w.writerow([k, _render_scalar(v)])
        return buf.getvalue()
    lines = [f"{k}: {_render_scalar(v)}" for k, v in report.fields.items()]
    if report.rows:
        cols = list(report.rows[0].keys())
        cells = [[_render_scalar(r[c]) for c in cols] for r in report.rows]
        widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
        lines.append("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip())
        for row in cells:
            lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    if report.message:
        lines.append(report.message)
    return "\n".join(lines) + "\n"


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# bound
# --------------------------------------------------------------------------


def _spec_fields(ctx: _Ctx, spec) -> dict:
    return {
        "step": ctx.out(spec.step),
        "case": spec.case.value,
        "subcase": spec.subcase.value if spec.subcase else None,
        "N": spec.steps,
        "condition": spec.condition,
    }


def cmd_bound(args, ctx: _Ctx) -> Report:
    if args.objective == "quad":
        if args.alpha is None or args.beta is None:
            raise UsageError("bound quad needs --alpha and --beta")
        p = ctx.prior(args.p)
        a, b = ctx.number(args.alpha, "alpha"), ctx.number(args.beta, "beta")
        if not ctx.exact:
            p, a, b = as_fraction(p), as_fraction(a), as_fraction(b)
        res = bounds.quad_bound(p, bounds.QuadraticForm(a, b))
        fields = {"objective": "quad", "p": ctx.out(p), "alpha": ctx.out(a), "beta": ctx.out(b),
                  "value": ctx.out(res.value), "tight": res.tight}
        if res.spec is not None and res.tight:
            fields.update(_spec_fields(ctx, res.spec))
            fields["attained_by"] = "ladder"
        elif res.spec is not None:
            fields["step"] = ctx.out(res.spec.step)
            fields["attained_by"] = None
        else:
            fields["attained_by"] = res.attained_by
        return Report(fields, code=EXIT_OK if res.tight else EXIT_FAILED)
    if args.objective == "cov":
        p = ctx.prior(args.p)
        pe = as_fraction(p)
        value = bounds.cov_bound(pe)
        table = bounds.cov_witness(pe)
        fields = {"objective": "cov", "p": ctx.out(pe), "value": ctx.out(value), "tight": True,
                  "witness_atoms": ctx.out(list(table.atoms))}
        return Report(fields)
    # abspow
    k = args.alpha if args.alpha is not None else args.exponent
    if k is None:
        raise UsageError("bound abspow needs --alpha (the exponent)")
    k = float(ctx.number(k, "alpha"))
    if k <= 0:
        raise UsageError("--alpha must be positive")
    a0 = bounds.alpha0()
    value = bounds.abspow_bound(k)
    fields = {"objective": "abspow", "p": "1/2" if ctx.exact else 0.5, "alpha": k, "value": value,
              "tight": True, "alpha0": a0,
              "branch": "two-point" if k <= a0 else "six-point"}
    if k > a0:
        fields["a_opt"] = bounds.abspow_step(k)
    return Report(fields)


# --------------------------------------------------------------------------
# ladder
# --------------------------------------------------------------------------


def cmd_ladder(args, ctx: _Ctx) -> Report:
    p = ctx.prior(args.p)
    a = ctx.number(args.a, "a")
    if not ctx.exact:
        p, a = Fraction(p), Fraction(a)
    if not 0 < a <= 2:
        raise UsageError("--a must lie in (0, 2]")
    weight = Fraction(args.weight) if args.weight else Fraction(1, 2)
    if not 0 <= weight <= 1:
        raise UsageError("--weight must lie in [0, 1]")
    spec = ladder.classify(p, a)
    if not spec:
        fields = {"p": ctx.out(p), "step": ctx.out(a), "tight": False,
                  "quotients": {k: ctx.out(v) for k, v in spec.quotients.items()}}
        return Report(fields, code=EXIT_FAILED,
                      message="no ladder: none of the integrality conditions holds for this (p, a)")
    built = ladder.build_ladder(spec)
    ladders = built if isinstance(built, tuple) else (built,)
    fields = {"p": ctx.out(p), "tight": True, **_spec_fields(ctx, spec), "ladders": len(ladders),
              "points": [len(ld) for ld in ladders]}
    rows = []
    for idx, ld in enumerate(ladders):
        for pt in ld.points:
            row = {"ladder": idx, "x1": ctx.out(pt.x), "x2": ctx.out(pt.y), "x_value": pt.x_value}
            if not args.coords:
                row["mass"] = ctx.out(pt.mass)
            rows.append(row)
    message = ""
    if len(ladders) == 2:
        fields["weight"] = ctx.out(weight)
        message = ("two ladders: every mixture weight*first + (1-weight)*second is optimal; "
                   "--weight picks the table written by --table-out")
    if args.table_out:
        _write_text(args.table_out, dumps(ladder.witness_table(built, weight)))
    return Report(fields, rows, message=message)


# --------------------------------------------------------------------------
# lp
# --------------------------------------------------------------------------


def _objective(spec: str, p: float) -> ObjectiveFn:
    name, _, arg = spec.partition(":")
    try:
        if name == "cov" and not arg:
            return ObjectiveFn.neg_cov(p)
        if name == "abspow":
            k = float(Fraction(arg)) if "/" in arg else float(arg)
            if k <= 0:
                raise ValueError
            return ObjectiveFn.abspow(k)
        if name == "quad":
            a, b = (float(Fraction(t)) for t in arg.split(","))
            return ObjectiveFn.quadratic(a, b, p)
    except ValueError:
        pass
    raise UsageError(f"--f: expected cov, abspow:K or quad:A,B, got {spec!r}")


def _closed_form(f: ObjectiveFn, p: float):
    if f.kind == "neg_cov":
        return -float(bounds.cov_bound(p))
    if f.kind == "abspow" and p == 0.5:
        return bounds.abspow_bound(f.params[0])
    if f.kind == "quadratic":
        a, b, _ = f.params
        return float(bounds.quad_bound(p, bounds.QuadraticForm(a, b)).value)
    return None


def cmd_lp(args, ctx: _Ctx) -> Report:
    p_exact = ctx.prior(args.p)
    p = float(p_exact)
    f = _objective(args.f, p)
    if args.grid:
        grid = [float(parse_number(t, exact=True)) for t in args.grid.split(",") if t.strip()]
    elif args.n:
        if args.n < 1:
            raise UsageError("--n must be at least 1")
        grid = lp.uniform_grid(args.n)
    else:
        raise UsageError("lp needs --grid or --n")
    if args.extra_atoms == "auto":
        grid = sorted(set(grid) | set(lp.witness_atoms(p_exact, f)))
    elif args.extra_atoms:
        grid = sorted(set(grid) | {float(parse_number(t, exact=True)) for t in args.extra_atoms.split(",")})
    if any(not 0 <= g <= 1 for g in grid):
        raise UsageError("grid atoms must lie in [0, 1]")
    opts = SolverOptions(pivot_tol=args.pivot_tol, feasibility_tol=args.feas_tol)
    if args.dump_lp:
        _write_text(args.dump_lp, format_lp(lp.build_primal(p, f, grid)))
    try:
        res = lp.solve_primal(p, f, grid, opts)
    except SolverError as exc:
        return Report({"status": "failed", "error": str(exc)}, code=EXIT_SOLVER)
    fields = {"p": ctx.out(p_exact), "objective": args.f, "grid_size": len(res.grid),
              "status": res.solution.status, "value": res.value,
              "iterations": res.solution.iterations,
              "primal_residual": res.solution.primal_residual}
    if args.dual:
        dual = lp.solve(lp.build_dual(p, f, grid), opts)
        if not dual.optimal:
            return Report({**fields, "dual_status": dual.status}, code=EXIT_SOLVER)
        fields["dual_value"] = dual.value
        fields["duality_gap"] = abs(res.value - dual.value)
    closed = _closed_form(f, p)
    if closed is not None:
        fields["closed_form"] = closed
        fields["difference"] = res.value - closed
    rows = [{"x1": x, "x2": y, "weight": w, "x_value": xv}
            for x, y, w, xv in res.table.support() if abs(w) > 1e-12]
    if args.table_out:
        _write_text(args.table_out, dumps(res.table))
    return Report(fields, rows)


# --------------------------------------------------------------------------
# certify
# --------------------------------------------------------------------------


def _report_fields(rep: certificate.VerificationReport) -> dict:
    d = rep.to_dict()
    d["pass"] = rep.passed
    return d


def cmd_certify(args, ctx: _Ctx) -> Report:
    search = certificate.SearchConfig(grid=args.grid)
    if args.grid < 11:
        raise UsageError("--grid must be at least 11")
    if args.which == "cov":
        if args.p is None:
            raise UsageError("certify cov needs --p")
        p = float(ctx.prior(args.p))
        if p > 1 / 3 + 1e-15:
            raise UsageError("the covariance certificate covers 0 < p <= 1/3")
        _, prm, rep, closed = certificate.certify_cov(p, search, args.tol)
        params = {"delta": prm.delta, "gamma": prm.gamma, "x0": prm.x0}
        head = {"certificate": "cov", "p": ctx.out(ctx.prior(args.p))}
    else:
        k = args.alpha if args.alpha is not None else args.exponent
        if k is None:
            raise UsageError("certify abspow needs --alpha")
        k = float(ctx.number(k, "alpha"))
        if k <= 0:
            raise UsageError("--alpha must be positive")
        _, prm, rep, closed = certificate.certify_abspow(k, args.perturb, search, args.tol, args.middle)
        params = {"opt": prm.opt, "y0": prm.y0}
        if args.perturb != 1.0:
            params["perturb"] = args.perturb
        head = {"certificate": "abspow", "alpha": k, "middle": args.middle}
    fields = {**head, **params, **_report_fields(rep), "closed_form": closed,
              "difference": rep.dual_value - closed}
    return Report(fields, code=EXIT_OK if rep.passed else EXIT_FAILED)


# --------------------------------------------------------------------------
# asymp
# --------------------------------------------------------------------------


def cmd_asymp(args, ctx: _Ctx) -> Report:
    if not 0 < args.min < args.max:
        raise UsageError("need 0 < --min < --max")
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    limit = 2 / math.e
    a0 = bounds.alpha0()
    rows = [{"alpha": a0, "alpha_times_opt": a0 * bounds.abspow_bound(a0),
             "deviation": a0 * bounds.abspow_bound(a0) - limit, "branch": "crossover"}]
    for k in np.geomspace(args.min, args.max, args.points):
        k = float(k)
        v = k * bounds.abspow_bound(k)
        rows.append({"alpha": k, "alpha_times_opt": v, "deviation": v - limit,
                     "branch": "two-point" if k <= a0 else "six-point"})
    return Report({"limit": limit, "alpha0": a0}, rows)


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default=None,
                        help=f"output format (default ${FORMAT_ENV} or human)")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--mode", choices=("rational", "float"), default="rational",
                        help="arithmetic for p, a, alpha, beta (default rational)")

    parser = _Parser(prog="coherent", description="Bounds for coherent forecasts of two experts.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    b = sub.add_parser("bound", parents=[common], help="closed-form bounds")
    b.add_argument("objective", choices=("quad", "cov", "abspow"))
    b.add_argument("--p", default="1/2")
    b.add_argument("--alpha", help="quad: coefficient of (x1-x2)^2; abspow: the exponent")
    b.add_argument("--beta", help="quad: coefficient of (x1+x2-2p)^2")
    b.add_argument("--exponent", help="alias of --alpha for abspow")
    b.set_defaults(handler=cmd_bound)

    ld = sub.add_parser("ladder", parents=[common], help="extremal ladder support")
    ld.add_argument("--p", required=True)
    ld.add_argument("--a", required=True, help="step a = alpha / (alpha - beta)")
    ld.add_argument("--weight", help="mixture weight when two ladders exist (default 1/2)")
    ld.add_argument("--coords", action="store_true", help="coordinates only (for plotting)")
    ld.add_argument("--table-out", help="write the witness table in the tabular text format")
    ld.set_defaults(handler=cmd_ladder)

    lq = sub.add_parser("lp", parents=[common], help="coherence LP on an atom grid")
    lq.add_argument("--p", required=True)
    lq.add_argument("--f", required=True, help="cov | abspow:K | quad:A,B")
    lq.add_argument("--grid", help="comma-separated atoms, e.g. 0,2/5")
    lq.add_argument("--n", type=int, help="use the grid {k/n}")
    lq.add_argument("--extra-atoms", help="'auto' (known witness atoms) or a comma-separated list")
    lq.add_argument("--dual", action="store_true", help="also solve the dual LP and report the gap")
    lq.add_argument("--dump-lp", help="write the primal LP in text form")
    lq.add_argument("--table-out", help="write the optimal table in the tabular text format")
    lq.add_argument("--pivot-tol", type=float, default=1e-11)
    lq.add_argument("--feas-tol", type=float, default=1e-9)
    lq.set_defaults(handler=cmd_lp)

    c = sub.add_parser("certify", parents=[common], help="verify a dual certificate")
    c.add_argument("which", choices=("cov", "abspow"))
    c.add_argument("--p")
    c.add_argument("--alpha")
    c.add_argument("--exponent")
    c.add_argument("--perturb", type=float, default=1.0, help="scale the certificate (break test)")
    c.add_argument("--middle", choices=("envelope", "zero"), default="envelope",
                   help="abspow: middle-band extension of s")
    c.add_argument("--grid", type=int, default=certificate.SearchConfig.grid)
    c.add_argument("--tol", type=float, default=1e-9)
    c.set_defaults(handler=cmd_certify)

    a = sub.add_parser("asymp", parents=[common], help="alpha * opt(alpha) against 2/e")
    a.add_argument("--min", type=float, default=1e2)
    a.add_argument("--max", type=float, default=1e6)
    a.add_argument("--points", type=int, default=5)
    a.set_defaults(handler=cmd_asymp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        fmt = args.format or os.environ.get(FORMAT_ENV, "human")
        if fmt not in FORMATS:
            raise UsageError(f"${FORMAT_ENV} must be one of {', '.join(FORMATS)}")
        report = args.handler(args, _Ctx(args.mode))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ZeroDivisionError) as exc:
        print(f"coherent: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(report, fmt)
    if args.output:
        _write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return report.code


if __name__ == "__main__":
    raise SystemExit(main())
