"""Command-line entry point.

Scalar answers print as a bare value, single structured results as JSON,
tables and curves as CSV. Exit codes: 0 ok, 2 input error, 3 resource error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import bounds, constructions, covering, lagrangian
from .errors import InputError, NumericError, ResourceError
from .matrix import DEFAULT_BUDGET, AlphabetMatrix, brute_force_f, brute_force_g, count_shattered

EXIT_OK, EXIT_INPUT, EXIT_RESOURCE = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so dispatch owns the exit code."""

    def error(self, message: str) -> None:
        raise InputError(f"{message}\n{self.format_usage().rstrip()}")


def _frac(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _dump(obj: object) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


def _read_matrix(path: str) -> AlphabetMatrix:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    return AlphabetMatrix.from_text(text)


def _write(path: str | None, text: str) -> None:
    if path is None:
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc


def _need(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise InputError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _csv(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _grid(start: str, stop: str, step: str) -> list[Fraction]:
    """Inclusive-exclusive rational grid ``start, start+step, ... < stop``."""
    a, b, h = Fraction(start), Fraction(stop), Fraction(step)
    if h <= 0:
        raise InputError("step must be positive")
    out = []
    while a < b:
        out.append(a)
        a += h
    return out


# -- subcommands --------------------------------------------------------------
def cmd_count(args: argparse.Namespace) -> str:
    rep = count_shattered(_read_matrix(args.matrix), args.d, workers=args.workers)
    return _dump(rep.as_dict())


def _pair_inputs(args: argparse.Namespace) -> tuple[AlphabetMatrix, AlphabetMatrix]:
    if args.inputs:
        return _read_matrix(args.inputs[0]), _read_matrix(args.inputs[1])
    _need(args, "d")
    base = constructions.full_space(args.d)
    return base, base


def cmd_construct(args: argparse.Namespace) -> str:
    name = args.recipe
    if name in ("product", "stack"):
        m1, m2 = _pair_inputs(args)
        build = constructions.product_construction if name == "product" else constructions.stack_construction
        m = build(m1, m2)
        recipe = constructions.ConstructionRecipe(name, {"left": f"{m1.k}x{m1.n}/v{m1.v}", "right": f"{m2.k}x{m2.n}/v{m2.v}"})
    else:
        needed = {
            "full-space": ("d",), "codim": ("d", "r"), "turan": ("n", "k"), "ks": ("k",),
            "iid": ("k", "n", "v", "seed"), "balanced": ("k", "n", "v", "seed"),
        }[name]
        _need(args, *needed)
        m, recipe = constructions.recipe_for(name, {key: getattr(args, key) for key in needed})
    if args.output is None:
        return m.to_text()
    _write(args.output, m.to_text())
    if args.recipe_out:
        _write(args.recipe_out, recipe.to_text())
    return _dump({"recipe": name, "v": m.v, "k": m.k, "n": m.n, "output": args.output})


def cmd_lagrangian(args: argparse.Namespace) -> str:
    _need(args, "k", "d", "seed")
    cfg = lagrangian.LagrangianConfig(
        restarts=args.restarts, iterations=args.iterations, seed=args.seed,
        restriction="balanced" if args.balanced_only else None,
        round_denominator=args.round_denominator, workers=args.workers,
    )
    return _dump(lagrangian.maximize_lagrangian(args.k, args.d, cfg).as_dict())


def _bound_line(b: bounds.BoundValue) -> str:
    return (b.rational_str() or repr(float(b.value))) + "\n"


def cmd_bounds(args: argparse.Namespace) -> str:
    which = args.which
    if which == "cd":
        _need(args, "d")
        return _frac(bounds.c_d_formula(args.d)) + "\n"
    if which == "cinf":
        return repr(bounds.c_infinity(args.precision)) + "\n"
    if which == "d2":
        _need(args, "k")
        if args.n is not None:
            return f"{bounds.f_exact_d2(args.n, args.k)}\n"
        return _frac(bounds.c_exact_d2(args.k)) + "\n"
    if which == "random":
        _need(args, "k", "d")
        return _bound_line(bounds.random_bound(args.k, args.d, args.v or 2))
    if which == "codim":
        _need(args, "d", "r")
        return _bound_line(bounds.codim_bound(args.d, args.r))
    if which == "balanced-beta":
        _need(args, "d")
        b = bounds.balanced_rate_beta(bounds.RateFunctionSpec(args.d, args.v or 2, args.t_max))
        return _dump({"beta": repr(float(b.value)), "kind": b.kind, **{k: v for k, v in b.meta.items()}})
    if which == "gamma-table":
        _need(args, "d", "k")
        rows = bounds.gamma_lower_table(args.d, range(1, args.k + 1), budget=args.budget)
        out = []
        for row in rows:
            named = sorted(row.sources.items()) + [("best:" + row.best.provenance, row.best)]
            for name, b in named:
                out.append([row.k, _frac(row.b), name, b.kind, f"{float(b.value):.12g}", b.rational_str()])
        return _csv(["k", "b", "source", "kind", "value_decimal", "value_rational"], out)
    if which == "gamma-staircase":
        _need(args, "d")
        pts = bounds.gamma_staircase(args.d, _grid(args.start or "1", args.stop or "2", args.step))
        return _csv(["b", "value", "kind"], [[f"{float(b):.6g}", repr(float(v.value)), v.kind] for b, v in pts])
    if which == "conjecture-curve":
        pts = [(b, bounds.conjectured_gamma_infinity(b)) for b in _grid(args.start or "1", args.stop or "2", args.step)]
        return _csv(["b", "value", "kind"], [[f"{float(b):.6g}", repr(float(v.value)), "conjectured+lower"] for b, v in pts])
    if which in ("simplex-max", "lemma25"):
        _need(args, "d", "seed")
        res = bounds.simplex_max(args.d, seed=args.seed)
        return _dump({
            "d": args.d, "closed_form": _frac(res.closed_form), "uniform_value": _frac(res.uniform_value),
            "numeric_max": repr(res.numeric_max),
        })
    raise InputError(f"unknown bound {which!r}")


def cmd_oracle(args: argparse.Namespace) -> str:
    _need(args, "n", "k", "d")
    if args.which == "f":
        return f"{brute_force_f(args.n, args.k, args.d, args.v or 2, budget=args.budget)}\n"
    if (args.v or 2) != 2:
        raise InputError("the g oracle is binary (v=2)")
    return f"{brute_force_g(args.n, args.k, args.d, budget=args.budget)}\n"


def cmd_gmin(args: argparse.Namespace) -> str:
    _need(args, "n", "k", "d")
    fam, count = bounds.g_construction(args.n, args.k, args.d, args.order)
    return _dump({
        "n": args.n, "k": args.k, "d": args.d, "order": args.order,
        "formula": bounds.g_formula(args.n, args.k, args.d), "construction_count": count,
        "family": [sorted(s) for s in fam.to_sets()],
    })


def cmd_ca(args: argparse.Namespace) -> str:
    if args.action == "pipeline":
        _need(args, "d", "strategy")
        ca, rep = covering.ca_pipeline(args.d, args.v or 2, args.target_n, args.strategy, args.seed)
        if args.output and not ca.empty:
            _write(args.output, ca.to_text())
        return _dump(rep.as_dict())
    if args.matrix is None:
        raise InputError(f"ca {args.action} needs a matrix file")
    _need(args, "d")
    m = _read_matrix(args.matrix)
    if args.action == "verify":
        ok, cols, pattern = covering.verify_ca(m, args.d)
        return _dump({"verified": ok, "witness": list(cols) if cols else None, "missing": list(pattern) if pattern else None})
    bad = int(covering.non_shattered_subsets(m, args.d).shape[0])
    ca = covering.build_by_deletion(m, args.d)
    if args.output and not ca.empty:
        _write(args.output, ca.to_text())
    return _dump({
        "k": m.k, "n_initial": m.n, "initial_nonshattered": bad,
        "n_final": 0 if ca.empty else ca.matrix.n, "deletions": ca.deletion_log,
        "verified": ca.verified, "empty": ca.empty,
    })


# -- parser -------------------------------------------------------------------
def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=1, help="thread count (results do not depend on it)")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="enumeration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shatter", description="Shattering counts, constructions, bounds and covering arrays.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="count shattered d-subsets of a matrix file")
    p.add_argument("matrix")
    p.add_argument("--d", type=int, required=True)
    _common(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("construct", help="build a named construction")
    p.add_argument("recipe", choices=["full-space", "codim", "turan", "ks", "product", "stack", "iid", "balanced"])
    for flag in ("--d", "--r", "--n", "--k", "--v", "--seed"):
        p.add_argument(flag, type=int)
    p.add_argument("--inputs", nargs=2, metavar="FILE", help="operand matrices for product/stack")
    p.add_argument("-o", "--output")
    p.add_argument("--recipe-out", help="also write the recipe description here")
    _common(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("lagrangian", help="maximise the shattering-hypergraph Lagrangian")
    for flag in ("--k", "--d", "--seed", "--round-denominator"):
        p.add_argument(flag, type=int)
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--iterations", type=int, default=4000)
    p.add_argument("--balanced-only", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_lagrangian)

    p = sub.add_parser("bounds", help="closed forms, bound tables and curves")
    p.add_argument("which", choices=[
        "cd", "cinf", "d2", "random", "balanced-beta", "codim", "gamma-table",
        "gamma-staircase", "conjecture-curve", "simplex-max", "lemma25",
    ])
    for flag in ("--d", "--r", "--n", "--k", "--v", "--seed"):
        p.add_argument(flag, type=int)
    p.add_argument("--precision", type=float, default=1e-12)
    p.add_argument("--t-max", type=float, default=20.0)
    p.add_argument("--start")
    p.add_argument("--stop")
    p.add_argument("--step", default="1/16")
    _common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("oracle", help="exact brute-force f or g")
    p.add_argument("which", choices=["f", "g"])
    for flag in ("--n", "--k", "--d", "--v"):
        p.add_argument(flag, type=int)
    _common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gmin", help="family minimising the shattered count")
    for flag in ("--n", "--k", "--d"):
        p.add_argument(flag, type=int)
    p.add_argument("--order", choices=["lex", "colex"], default="lex")
    _common(p)
    p.set_defaults(func=cmd_gmin)

    p = sub.add_parser("ca", help="covering arrays")
    p.add_argument("action", choices=["build", "verify", "pipeline"])
    p.add_argument("matrix", nargs="?")
    for flag in ("--d", "--v", "--seed", "--target-n"):
        p.add_argument(flag, type=int)
    p.add_argument("--strategy", choices=list(covering.STRATEGIES))
    p.add_argument("-o", "--output")
    _common(p)
    p.set_defaults(func=cmd_ca)
    return parser


def run(argv: Sequence[str] | None = None) -> tuple[int, str, str]:
    """Dispatch ``argv``; returns ``(exit code, stdout payload, stderr text)``."""
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "workers", 1) < 1:
            raise InputError("--workers must be >= 1")
        return EXIT_OK, args.func(args), ""
    except InputError as exc:
        return EXIT_INPUT, "", f"error: {exc}\n"
    except (ResourceError, MemoryError) as exc:
        return EXIT_RESOURCE, "", f"resource error: {exc}\n"
    except NumericError as exc:
        return EXIT_RESOURCE, "", f"numeric error: {exc}\n"


def main(argv: Sequence[str] | None = None) -> int:
    code, out, err = run(argv)
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
