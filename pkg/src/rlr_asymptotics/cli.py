"""Command line: ``rlr-asym predict | sweep | selftest``.

Exit codes: 0 success, 1 invalid configuration or failed selftest, 2 a
theory cell failed to converge. Output is plain text (no color).
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load, parse_grid
from .scalar import DEFAULT_ORDER
from .sweep import STATUS_OK, run_sweep, theory_only, write_csv

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NONCONVERGED = 2

# flag dest -> (section, key)
FLAG_FIELDS = {
    "reg": ("problem", "reg"),
    "kappa": ("problem", "kappa"),
    "sparsity": ("problem", "sparsity"),
    "delta": ("sweep", "delta"),
    "lam": ("sweep", "lambda"),
    "workers": ("sweep", "workers"),
    "quad_order": ("solver", "quad_order"),
    "tol": ("solver", "tol"),
    "p": ("experiment", "p"),
    "trials": ("experiment", "trials"),
    "seed": ("experiment", "seed"),
    "epsilon": ("experiment", "epsilon"),
}


def _add_common(sp):
    sp.add_argument("--config", metavar="PATH", help="INI file with [problem]/[solver]/[experiment]/[sweep]")
    sp.add_argument("--preset", choices=["figure1", "figure2", "figure3"], help="built-in configuration")
    sp.add_argument("--reg", choices=["none", "l1", "l2sq"])
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--delta", type=parse_grid, metavar="F|GRID")
    sp.add_argument("--lambda", dest="lam", type=parse_grid, metavar="F|GRID")
    sp.add_argument("--sparsity", type=float, metavar="S", help="sparse prior with P(nonzero) = S")
    sp.add_argument("--quad-order", type=int, metavar="N")
    sp.add_argument("--tol", type=float, metavar="F")
    sp.add_argument("--workers", type=int, metavar="N", default=None)
    sp.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
    sp.add_argument("--svg", action="store_true", help="also write one SVG chart per metric next to --out")
    sp.add_argument("--timing", action="store_true", help="fill runtime_ms (makes output nondeterministic)")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rlr-asym", description="Asymptotic theory and Monte Carlo for regularized logistic regression")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("predict", help="theory only, one CSV row per (delta, lambda)")
    _add_common(pr)
    sw = sub.add_parser("sweep", help="theory plus Monte Carlo trials")
    _add_common(sw)
    sw.add_argument("--p", type=int)
    sw.add_argument("--trials", type=int)
    sw.add_argument("--seed", type=int, metavar="U64")
    sw.add_argument("--epsilon", type=float)
    st = sub.add_parser("selftest", help="run the invariant suites")
    st.add_argument("--quad-order", type=int, default=DEFAULT_ORDER, help=argparse.SUPPRESS)
    return ap


def _overrides(args) -> dict:
    out = {}
    for dest, field in FLAG_FIELDS.items():
        val = getattr(args, dest, None)
        if val is not None:
            out[field] = val
    return out


def _emit(rows, args) -> None:
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(rows, fh, args.timing)
        if args.svg:
            from .plotting import write_svgs

            for path in write_svgs(rows, args.out):
                print(f"wrote {path}", file=sys.stderr)
    else:
        write_csv(rows, sys.stdout, args.timing)


def _run_grid(args, predict: bool) -> int:
    if args.svg and not args.out:
        print("error: --svg needs --out", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = load(args.config, args.preset, _overrides(args))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if predict:
        cfg = theory_only(cfg)
    rows = run_sweep(cfg)
    _emit(rows, args)
    bad = [r for r in rows if r.status != STATUS_OK]
    if bad:
        for r in bad:
            print(f"warning: theory {r.status} at delta={r.delta:g} lambda={r.lam:g}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _selftest(args) -> int:
    from .selftest import run_selftest

    ok, first, rows = run_selftest(args.quad_order)
    total = sum(r[2] for r in rows)
    if ok:
        print(f"all {len(rows)} suites passed in {total:.2f} s")
        return EXIT_OK
    print(f"selftest failed: first failing invariant: {first}")
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO if getattr(args, "verbose", False) else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "selftest":
        return _selftest(args)
    return _run_grid(args, predict=args.command == "predict")


if __name__ == "__main__":
    sys.exit(main())
