"""Command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .analysis import AnalysisConfig, analyze
from .cir.parser import CIRError, load_program
from .cir.validate import ValidationError
from .detectors.rules import RulesError, default_rules, load_rules
from .ifds.engine import DEFAULT_BUDGET, FactBudgetExceeded
from .report import emit

EXIT_CLEAN, EXIT_FINDINGS, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _nonneg(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cryptoscan", description="Detect cryptographic API misuse in CIR programs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", help="analyze CIR files")
    an.add_argument("files", nargs="+")
    an.add_argument("--rules", help="rules file (defaults apply to omitted sections)")
    an.add_argument("--format", choices=("json", "text"), default="text")
    an.add_argument("--no-refinements", action="store_true", help="use the default call edges at library calls")
    an.add_argument("--max-layers", type=_positive, default=20)
    an.add_argument("--library-mode", action="store_true")
    an.add_argument("--fidelity", choices=("paper", "fixed"), default="fixed")
    an.add_argument("--dump-callgraph", nargs="?", const="-", metavar="PATH",
                    help="write the call graph in DOT format (stderr when no PATH)")
    an.add_argument("--workers", type=_positive, default=1)
    an.add_argument("--max-access-path", type=_nonneg, default=2, metavar="K")
    an.add_argument("--fact-budget", type=_positive, default=DEFAULT_BUDGET)

    bench = sub.add_parser("bench", help="score the bundled fixture corpus")
    bench.add_argument("--category")
    bench.add_argument("--fidelity", choices=("paper", "fixed"), default="fixed")
    bench.add_argument("--no-refinements", action="store_true")
    bench.add_argument("--format", choices=("table", "json"), default="table")
    bench.add_argument("--workers", type=_positive, default=1)
    return ap


def _analyze(args) -> int:
    rules = default_rules()
    if args.rules:
        try:
            with open(args.rules, encoding="utf-8") as fh:
                rules = load_rules(fh.read())
        except OSError as exc:
            print(f"cryptoscan: cannot read rules: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except RulesError as exc:
            print(f"cryptoscan: {args.rules}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        program = load_program(args.files)
    except OSError as exc:
        print(f"cryptoscan: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        for d in exc.diagnostics:
            print(f"cryptoscan: {d}", file=sys.stderr)
        return EXIT_USAGE
    except CIRError as exc:
        print(f"cryptoscan: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cfg = AnalysisConfig(rules=rules, refinements=not args.no_refinements, fidelity=args.fidelity,
                         library_mode=args.library_mode, max_layers=args.max_layers, workers=args.workers,
                         k=args.max_access_path, budget=args.fact_budget)
    try:
        report = analyze(program, cfg)
    except FactBudgetExceeded as exc:
        print(f"cryptoscan: analysis incomplete: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    if args.dump_callgraph:
        dot = report.details["graph"].to_dot()
        if args.dump_callgraph == "-":
            sys.stderr.write(dot)
        else:
            with open(args.dump_callgraph, "w", encoding="utf-8") as fh:
                fh.write(dot)
    sys.stdout.write(emit(report, args.format))
    if report.incomplete:
        print("cryptoscan: analysis incomplete: fact budget exceeded", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_FINDINGS if report.findings else EXIT_CLEAN


def _bench(args) -> int:
    from .benchkit.corpus import CATEGORIES, load_corpus
    from .benchkit.scoring import format_table, metrics_json, run_corpus, score

    cases = load_corpus()
    if args.category:
        if args.category not in CATEGORIES:
            print(f"cryptoscan: unknown category {args.category!r}", file=sys.stderr)
            return EXIT_USAGE
        cases = [c for c in cases if c.category == args.category]
    cfg = AnalysisConfig(refinements=not args.no_refinements, fidelity=args.fidelity, workers=args.workers)
    results = run_corpus(cases, cfg)
    rows, total = score(cases, results)
    sys.stdout.write(metrics_json(rows, total) if args.format == "json" else format_table(rows, total))
    return EXIT_CLEAN


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_CLEAN
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "analyze":
        return _analyze(args)
    return _bench(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
