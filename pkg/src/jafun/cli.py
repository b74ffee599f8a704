"""``jafun`` command line: check, run and fuzz.

Exit codes: 0 normal result or clean check, 1 uncaught exception, 2 stuck
configuration, lockstep divergence or fuzz counterexample, 3 static error
(parse, well-formedness, typing, bad entry), 4 out of fuel, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO

from . import __version__
from .conformance import PROPERTIES, GenConfig, lockstep, report, run_property
from .frontend import ParseError, load, parse_file
from .heap import dump_heap
from .program import well_formed
from .semantics import ENGINES, NormalResult, OutOfFuel, Stuck, UncaughtException, run
from .syntax import show_frame
from .typed_semantics import TYPED_ENGINES, EntryError, fs_of_tfs, run_typed, start_typed
from .typesystem import check_program

EXIT_OK, EXIT_EXC, EXIT_STUCK, EXIT_STATIC, EXIT_FUEL, EXIT_USAGE = 0, 1, 2, 3, 4, 64
ENGINE_CHOICES = sorted(ENGINES) + sorted(TYPED_ENGINES) + ["lockstep"]
_ENTRY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)$")


@dataclass
class CliConfig:
    command: str
    file: Optional[str] = None
    entry: str = "Main.main"
    max_steps: Optional[int] = None
    engine: str = "red"
    trace: bool = False
    dump_heap: bool = False
    seed: int = 0
    count: int = 100
    json: bool = False
    prop: str = "all"
    jobs: int = 1
    unrestricted: bool = False


class _Parser(argparse.ArgumentParser):
    # argparse's default status 2 would collide with the "stuck" exit code.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _entry(text: str) -> str:
    if not _ENTRY_RE.match(text):
        raise argparse.ArgumentTypeError(f"entry must look like Class.method, got {text!r}")
    return text


def _natural(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("expected a non-negative integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="jafun", description="Check, run and fuzz Jafun programs.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    chk = sub.add_parser("check", help="parse, check well-formedness and type-check a program")
    chk.add_argument("file")
    chk.add_argument("--json", action="store_true", help="one JSON diagnostic per line")

    rn = sub.add_parser("run", help="execute the entry method")
    rn.add_argument("file")
    rn.add_argument("--entry", type=_entry, default="Main.main")
    rn.add_argument("--max-steps", type=_natural, default=10000)
    rn.add_argument("--engine", choices=ENGINE_CHOICES, default="red")
    rn.add_argument("--trace", action="store_true", help="print every reduction step")
    rn.add_argument("--dump-heap", action="store_true", help="print the final heap")
    rn.add_argument("--json", action="store_true", help="line-delimited JSON output")

    fz = sub.add_parser("fuzz", help="check executable properties on generated programs")
    fz.add_argument("--property", dest="prop", choices=sorted(PROPERTIES) + ["all"], default="all")
    fz.add_argument("--seed", type=_natural, default=0)
    fz.add_argument("--count", type=_natural, default=100)
    fz.add_argument("--max-steps", type=_natural, default=300, help="fuel per run")
    fz.add_argument("--jobs", type=int, default=1)
    fz.add_argument("--unrestricted", action="store_true",
                    help="generate well-formed but possibly ill-typed programs")
    fz.add_argument("--json", action="store_true", help="compact single-line reports")
    return ap


def _load(path: str, err: TextIO):
    """Parse and load ``path``; prints diagnostics and returns None on failure."""
    try:
        p = load(parse_file(path))
    except ParseError as exc:
        print(f"{path}:{exc.line}:{exc.column}: ParseError: {exc.message}", file=err)
        return None
    except OSError as exc:
        print(f"{path}: {exc.strerror or exc}", file=err)
        return None
    violations = well_formed(p)
    for v in violations:
        print(f"{path}:{v.subject}: {v.kind.value}: {v.detail}", file=err)
    return None if violations else p


def cmd_check(cfg: CliConfig, out: TextIO, err: TextIO) -> int:
    p = _load(cfg.file, err)
    if p is None:
        return EXIT_STATIC
    diags = check_program(p)
    for d in diags:
        if cfg.json:
            print(json.dumps({"file": cfg.file, "path": d.path, "reason": d.reason.value,
                              "expected": None if d.expected is None else str(d.expected),
                              "found": None if d.found is None else str(d.found),
                              "detail": d.detail, "warning": d.warning}), file=err)
        else:
            prefix = "warning: " if d.warning else ""
            print(f"{cfg.file}:{prefix}{d.render()}", file=err)
    errors = [d for d in diags if not d.warning]
    if not cfg.json:
        print(f"{cfg.file}: {len(errors)} error(s), {len(diags) - len(errors)} warning(s)", file=out)
    return EXIT_STATIC if errors else EXIT_OK


def _outcome_record(outcome) -> dict:
    rec = {"outcome": type(outcome).__name__, "steps": outcome.steps}
    if isinstance(outcome, NormalResult):
        rec["loc"] = outcome.loc
    elif isinstance(outcome, UncaughtException):
        rec.update(loc=outcome.loc, exception=outcome.cls)
    return rec


def _describe(outcome) -> str:
    if isinstance(outcome, NormalResult):
        where = "null" if outcome.loc is None else f"@{outcome.loc}"
        return f"NormalResult {where} after {outcome.steps} step(s)"
    if isinstance(outcome, UncaughtException):
        return f"UncaughtException {outcome.cls} @{outcome.loc} after {outcome.steps} step(s)"
    return f"{type(outcome).__name__} after {outcome.steps} step(s)"


def cmd_run(cfg: CliConfig, out: TextIO, err: TextIO) -> int:
    p = _load(cfg.file, err)
    if p is None:
        return EXIT_STATIC
    if cfg.engine in TYPED_ENGINES or cfg.engine == "lockstep":
        type_errors = [d for d in check_program(p) if not d.warning]
        for d in type_errors:
            print(f"{cfg.file}:{d.render()}", file=err)
        if type_errors:
            return EXIT_STATIC
    cls, mth = cfg.entry.split(".")
    try:
        h, tfs = start_typed(p, cls, mth)
    except EntryError as exc:
        print(f"{cfg.file}: {exc}", file=err)
        return EXIT_STATIC
    fuel = 10000 if cfg.max_steps is None else cfg.max_steps

    divergence = None
    if cfg.engine == "lockstep":
        outcome, trace, divergence = lockstep(p, h, tfs, fuel)
    elif cfg.engine in TYPED_ENGINES:
        outcome, trace = run_typed(p, h, tfs, fuel, engine=cfg.engine)
    else:
        outcome, trace = run(p, h, fs_of_tfs(tfs), fuel, engine=cfg.engine)

    if cfg.trace:
        for ev in trace:
            if cfg.json:
                print(ev.to_json(), file=out)
            else:
                mode = "normal" if ev.mode is None else ev.mode
                extra = "" if ev.gamma_size is None else f" gamma={ev.gamma_size}"
                print(f"{ev.step:6d} {ev.rule:<10} depth={ev.stack_depth} heap={ev.heap_size} "
                      f"mode={mode}{extra}", file=out)
    if cfg.json:
        rec = _outcome_record(outcome)
        if divergence:
            rec["divergence"] = divergence
        if cfg.dump_heap:
            rec["heap"] = dump_heap(outcome.heap).splitlines()
        print(json.dumps(rec), file=out)
    else:
        print(_describe(outcome), file=out)
        if divergence:
            print(f"lockstep divergence: {divergence}", file=out)
        if isinstance(outcome, Stuck):
            stack = outcome.stack
            frames = fs_of_tfs(stack) if stack and hasattr(stack[0], "fr") else stack
            for fr in frames:
                print("  " + show_frame(fr), file=out)
        if cfg.dump_heap:
            print(dump_heap(outcome.heap), file=out)

    if divergence or isinstance(outcome, Stuck):
        return EXIT_STUCK
    if isinstance(outcome, UncaughtException):
        return EXIT_EXC
    if isinstance(outcome, OutOfFuel):
        return EXIT_FUEL
    return EXIT_OK


def cmd_fuzz(cfg: CliConfig, out: TextIO, err: TextIO) -> int:
    props = sorted(PROPERTIES) if cfg.prop == "all" else [cfg.prop]
    gen = GenConfig(seed=cfg.seed, well_typed_only=not cfg.unrestricted)
    fuel = 300 if cfg.max_steps is None else cfg.max_steps
    found = False
    for prop in props:
        if cfg.unrestricted and prop in ("soundness", "completeness", "preservation"):
            print(f"{prop}: skipped, needs well-typed programs", file=err)
            continue
        cexs, stats = run_property(prop, gen, cfg.count, fuel=fuel, jobs=cfg.jobs)
        found = found or bool(cexs)
        rec = report(prop, stats.runs, cexs, stats)
        print(json.dumps(rec) if cfg.json else json.dumps(rec, indent=2), file=out)
    return EXIT_STUCK if found else EXIT_OK


COMMANDS = {"check": cmd_check, "run": cmd_run, "fuzz": cmd_fuzz}


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None,
         err: Optional[TextIO] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = CliConfig(**{k: v for k, v in vars(args).items() if k in CliConfig.__dataclass_fields__})
    return COMMANDS[cfg.command](cfg, out or sys.stdout, err or sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
