"""Command-line driver: ``gny check|trace|explain|list``.

Exit status: 0 all goals proved, 1 some goal unproved (or statement not
derivable), 2 usage or parse error, 3 internal engine error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .dsl import Renderer, export_trace, parse_spec, parse_statement, Context
from .engine import EngineConfig, explain
from .errors import AttackError, GNYError, ParseFailure
from .protocol import ATTACKS, FIXTURE_NAMES, apply_attack, fixture, fixture_text, verify
from .rules import LOCALIZE, catalog

EXIT_PROVED, EXIT_UNPROVED, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
BUILTIN = "builtin:"

log = logging.getLogger("gnylogic")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _color(stream) -> bool:
    mode = os.environ.get("GNY_COLOR", "auto")
    if mode == "always":
        return True
    if mode == "never":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def _paint(text, code, on):
    return f"\033[{code}m{text}\033[0m" if on else text


def load(source: str):
    """A spec from ``builtin:<name>`` or a ``.gny`` path."""
    if source.startswith(BUILTIN):
        name = source[len(BUILTIN):]
        if name not in FIXTURE_NAMES:
            raise UsageError(f"no built-in fixture {name!r} (have: {', '.join(FIXTURE_NAMES)})")
        return fixture(name), fixture_text(name)
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {source}: {e.strerror}") from None
    return parse_spec(text), text


def _config(args) -> EngineConfig:
    return EngineConfig(max_belief_depth=args.max_belief_depth, r6_enabled=args.enable_r6,
                        commutative_asym=not args.no_commutative_asym)


def _prepare(args):
    spec, _ = load(args.spec)
    if args.attack:
        spec = apply_attack(spec, ATTACKS[args.attack](spec))
    return spec


def cmd_check(args, out) -> int:
    spec = _prepare(args)
    run, report = verify(spec, _config(args))
    r = Renderer(spec.aliases())
    if args.trace:
        Path(args.trace).write_text(export_trace(run.trace, "structured", spec.aliases(), spec.name),
                                    encoding="utf-8")
    if args.format == "structured":
        doc = {
            "protocol": spec.name,
            "attack": args.attack,
            "all_proved": report.all_proved,
            "goals": [{"label": g.label, "statement": r.statement(g.statement), "proved": g.proved}
                      for g in report],
        }
        out.write(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
    else:
        color = _color(out)
        width = max((len(g.label) for g in report), default=0)
        out.write(f"{spec.name}: {len(spec.messages)} messages, {len(run.kb)} statements\n")
        for g in report:
            mark = _paint("proved  ", 32, color) if g.proved else _paint("UNPROVED", 31, color)
            out.write(f"  {mark}  {g.label.ljust(width)}  {r.statement(g.statement)}\n")
        proved = sum(g.proved for g in report)
        out.write(f"{proved}/{len(report)} goals proved\n")
    return EXIT_PROVED if report.all_proved else EXIT_UNPROVED


def cmd_trace(args, out) -> int:
    spec = _prepare(args)
    run, report = verify(spec, _config(args))
    fmt = "structured" if args.format == "structured" else "derivation-text"
    text = export_trace(run.trace, fmt, spec.aliases(), spec.name)
    if args.trace:
        Path(args.trace).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return EXIT_PROVED if report.all_proved else EXIT_UNPROVED


def cmd_explain(args, out) -> int:
    spec = _prepare(args)
    try:
        stmt = parse_statement(args.statement, Context.from_spec(spec))
    except ParseFailure as e:
        for pe in e.errors:
            args.err.write(f"statement:{pe}\n")
        return EXIT_USAGE
    run, _ = verify(spec, _config(args))
    trace = run.trace
    if stmt not in trace:
        out.write("not derivable\n")
        return EXIT_UNPROVED
    r = Renderer(spec.aliases())
    sl = trace.slice(stmt)
    if args.format == "structured":
        out.write(export_trace(sl, "structured", spec.aliases(), spec.name))
    else:
        out.write(explain(sl, stmt, render=r.statement))
    return EXIT_PROVED


def _sketch(rule, r) -> str:
    prem = ", ".join(r.any(p) if not hasattr(p, "pattern") else f"each part: {r.any(p.pattern)}"
                     for p in rule.premises)
    concl = ", ".join(r.any(c) for c in rule.conclusions)
    return f"{prem}  =>  {concl}"


def cmd_list(args, out) -> int:
    if args.what == "rules":
        r = Renderer()
        cat = catalog()
        for rule in cat:
            note = {"commutative_asym": "  [commutative asymmetric keys]",
                    "r6": "  [off unless --enable-r6]"}.get(rule.requires, "")
            out.write(f"{rule.name:<4} {_sketch(rule, r)}{note}\n")
        out.write(f"{LOCALIZE}  any rule may be applied inside ?L believes ...\n")
        out.write(f"{len(cat)} rules + {LOCALIZE}\n")
    else:
        for name in FIXTURE_NAMES:
            spec = fixture(name)
            out.write(f"{name:<22} {len(spec.messages)} messages, {len(spec.goals)} goals\n")
        out.write(f"{len(FIXTURE_NAMES)} fixtures\n")
    return EXIT_PROVED


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gny", description="GNY belief-logic protocol checker")
    p.add_argument("-v", "--verbose", action="store_true", help="log saturation progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_opts(sp):
        sp.add_argument("spec", help="path to a .gny file, or builtin:<name>")
        sp.add_argument("--attack", choices=sorted(ATTACKS))
        sp.add_argument("--format", choices=("text", "structured"), default="text")
        sp.add_argument("--max-belief-depth", type=int, default=EngineConfig.max_belief_depth)
        sp.add_argument("--enable-r6", action="store_true")
        sp.add_argument("--no-commutative-asym", action="store_true")

    c = sub.add_parser("check", help="run a protocol and report its goals")
    run_opts(c)
    c.add_argument("--trace", metavar="FILE", help="also write the structured trace to FILE")
    c.set_defaults(func=cmd_check)

    t = sub.add_parser("trace", help="print the full derivation trace")
    run_opts(t)
    t.add_argument("--trace", metavar="FILE", help="write to FILE instead of stdout")
    t.set_defaults(func=cmd_trace)

    e = sub.add_parser("explain", help="show how one statement is derived")
    run_opts(e)
    e.add_argument("statement", help="statement text, e.g. 'B holds K_AB'")
    e.set_defaults(func=cmd_explain)

    lst = sub.add_parser("list", help="list rules or built-in fixtures")
    lst.add_argument("what", choices=("rules", "fixtures"))
    lst.set_defaults(func=cmd_list)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        err.write(f"gny: {e}\n")
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_PROVED if not e.code else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=err,
                        format="%(name)s: %(message)s")
    if getattr(args, "max_belief_depth", 1) < 1:
        err.write("gny: --max-belief-depth must be at least 1\n")
        return EXIT_USAGE
    args.err = err
    try:
        return args.func(args, out)
    except (UsageError, AttackError) as e:
        err.write(f"gny: {e}\n")
        return EXIT_USAGE
    except ParseFailure as e:
        where = getattr(args, "spec", "<statement>")
        for pe in e.errors:
            err.write(f"{where}:{pe}\n")
        return EXIT_USAGE
    except GNYError as e:
        err.write(f"gny: engine error: {e}\n")
        return EXIT_INTERNAL
    except Exception as e:  # noqa: BLE001 - last-resort status for unexpected failures
        log.debug("internal error", exc_info=True)
        err.write(f"gny: internal error: {type(e).__name__}: {e}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
