"""Command-line pipeline: verify, weave, run, corpus.

Exit codes: 0 success, 1 usage or IO error, 2 static verification error,
3 a transaction reverted, 4 oracle disagreement.  Human-readable text goes
to stdout; machine-readable JSON only to files.  GVC_COLOR=0 disables color.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .frontend import (InferenceError, WellFormednessError, load_source)
from .lang import ResolutionError
from .lexer import LexError
from .parser import ParseError
from .printer import pretty_print

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STATIC = 2
EXIT_REVERTED = 3
EXIT_DISAGREEMENT = 4

_FRONTEND_ERRORS = (LexError, ParseError, ResolutionError,
                    InferenceError, WellFormednessError)


def _color(s, code):
    if os.environ.get("GVC_COLOR") == "0" or not sys.stdout.isatty():
        return s
    return f"\x1b[{code}m{s}\x1b[0m"


def _green(s):
    return _color(s, "32")


def _red(s):
    return _color(s, "31")


def _load(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SystemExit2(EXIT_USAGE, f"cannot read {path}: {e.strerror or e}")
    try:
        return load_source(text, str(path))
    except _FRONTEND_ERRORS as e:
        raise SystemExit2(EXIT_STATIC, f"{path}: {e}")


class SystemExit2(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code
        self.message = message


# ---------------------------------------------------------------------------


def cmd_verify(args):
    from .verifier import Status, verify_program

    program, _ = _load(args.path)
    report = verify_program(program)
    for m in report.methods:
        tag = {"verified": _green("verified"),
               "verified-with-residuals": _green("verified-with-residuals"),
               "static-error": _red("static-error")}[m.status.value]
        print(f"{m.contract}.{m.name}: {tag} ({len(m.residuals)} residual check(s))")
        for ob, reason in m.diagnostics:
            from .printer import fmt_atom
            if ob is not None:
                print(f"  line {ob.loc.line}: {ob.kind} obligation "
                      f"'{fmt_atom(ob.atom)}' is {reason}")
            else:
                print(f"  {reason}")
        for w in m.warnings:
            print(f"  warning: {w}")
    if args.dump_constraints:
        p = report.prover.as_dict()
        print(f"prover: {p}")
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
        print(f"report written to {args.report}")
    return EXIT_STATIC if report.has_static_error else EXIT_OK


def cmd_weave(args):
    from .verifier import verify_program, program_digest
    from .weaver import WeaveError, sidecar_json, weave

    program, _ = _load(args.path)
    report = verify_program(program)
    if args.report:
        try:
            on_disk = json.loads(Path(args.report).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            print(f"cannot read report {args.report}: {e}")
            return EXIT_USAGE
        if on_disk.get("digest") != program_digest(program):
            print("stale report: program digest does not match")
            return EXIT_USAGE
    elif not args.auto:
        print("either --report or --auto is required")
        return EXIT_USAGE
    try:
        ip = weave(program, report)
    except WeaveError as e:
        print(f"refusing to weave: {e}")
        return EXIT_STATIC
    out = args.output or (str(args.path) + ".woven.gcl")
    Path(out).write_text(ip.to_text(), encoding="utf-8")
    sidecar = args.sidecar or (out + ".sidecar.json")
    Path(sidecar).write_text(sidecar_json(ip) + "\n", encoding="utf-8")
    n = sum(1 for v in ip.sidecar)
    print(f"woven {n} residual check(s) -> {out} (sidecar {sidecar})")
    return EXIT_OK


def _parse_adversaries(pairs):
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise SystemExit2(EXIT_USAGE, f"--adversary expects NAME=path, got {p!r}")
        name, path = p.split("=", 1)
        try:
            out[name] = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise SystemExit2(EXIT_USAGE, f"cannot read {path}: {e.strerror or e}")
    return out


def cmd_run(args):
    from .vm import (Ledger, VmLoadError, VmOptions, VmUsageError,
                     load_program, parse_script, run_script)

    program, boundary = _load(args.path)
    try:
        image = load_program((program, boundary), _parse_adversaries(args.adversary))
    except (VmLoadError,) + _FRONTEND_ERRORS as e:
        print(f"cannot load program: {e}")
        return EXIT_USAGE

    txs = []
    if args.txs:
        try:
            txs = parse_script(Path(args.txs).read_text(encoding="utf-8"))
        except OSError as e:
            print(f"cannot read {args.txs}: {e.strerror or e}")
            return EXIT_USAGE
        except (ValueError, KeyError) as e:
            print(f"malformed transaction script: {e}")
            return EXIT_USAGE
    init = {}
    if args.ledger:
        try:
            init = json.loads(Path(args.ledger).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            print(f"cannot read ledger init: {e}")
            return EXIT_USAGE

    options = VmOptions(enforce_permissions=not args.unprotected,
                        run_checks=not args.unprotected)
    ledger = Ledger(image.program, init)
    try:
        outcomes, report = run_script(image, txs, gas_limit=args.gas_limit,
                                      ledger=ledger, options=options)
    except VmUsageError as e:
        print(f"bad transaction: {e}")
        return EXIT_USAGE
    for i, o in enumerate(outcomes):
        if o.committed:
            print(f"tx {i}: {_green('committed')} exec_gas={o.exec_gas} check_gas={o.check_gas}")
        else:
            where = ""
            if o.detail.get("check_id"):
                where = f" check {o.detail['check_id']}"
            if o.detail.get("line"):
                where += f" at line {o.detail['line']}"
            print(f"tx {i}: {_red('reverted')} {o.reason}{where} "
                  f"exec_gas={o.exec_gas} check_gas={o.check_gas}")
    print(f"final ledger: {json.dumps(ledger.as_dict(), sort_keys=True)}")
    t = report["totals"]
    print(f"totals: exec_gas={t['exec_gas']} check_gas={t['check_gas']}")
    if args.gas_report:
        Path(args.gas_report).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return EXIT_REVERTED if any(not o.committed for o in outcomes) else EXIT_OK


def cmd_corpus(args):
    from .erosion import check_dynamic_monotonic, check_static_monotonic, erode_program
    from .oracle import enumerate_equivalence
    from .verifier import verify_program
    from .weaver import weave

    root = Path(args.dir)
    if not root.is_dir():
        print(f"not a directory: {root}")
        return EXIT_USAGE
    files = sorted(p for p in root.glob("*.gcl")
                   if not p.name.endswith(".adversary.gcl")
                   and not p.name.endswith(".woven.gcl"))
    if not files:
        print("warning: no corpus programs found")
        return EXIT_OK

    worst = EXIT_OK
    total_erosions = 0
    for path in files:
        program, _ = _load(path)
        adv_path = path.with_name(path.stem + ".adversary.gcl")
        adversaries = {}
        if adv_path.exists():
            text = adv_path.read_text(encoding="utf-8")
            for c in program.contracts:
                if c.extern and f"contract {c.name}" in text:
                    adversaries[c.name] = text
        report = verify_program(program)
        if report.has_static_error:
            print(f"{path.name}: {_red('static-error')}")
            worst = max(worst, EXIT_STATIC)
            continue
        ip = weave(program, report)
        eq = enumerate_equivalence(program, ip, bound=args.bound, adversaries=adversaries)
        n_dis = len(eq["disagreements"])
        bad_static = check_static_monotonic(program)
        erosions = list(erode_program(program))
        total_erosions += len(erosions)
        bad_dynamic = []
        for e in erosions:
            bad_dynamic += check_dynamic_monotonic(program, e, bound=args.erosion_bound,
                                                   adversaries=adversaries)
        ok = not n_dis and not bad_static and not bad_dynamic
        mark = _green("ok") if ok else _red("FAIL")
        print(f"{path.name}: {mark} equivalence {eq['cases']} case(s), "
              f"{n_dis} disagreement(s); {len(erosions)} erosion(s), "
              f"{len(bad_static)} static / {len(bad_dynamic)} dynamic violation(s)")
        if not ok:
            worst = max(worst, EXIT_DISAGREEMENT)
    print(f"{len(files)} program(s), {total_erosions} erosion(s) checked")
    return worst


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(
        prog="gvc",
        description="Gradual verification toolchain: static verification, "
                    "residual check weaving, and a checked ledger VM.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    v = sub.add_parser("verify", help="statically verify a program")
    v.add_argument("path")
    v.add_argument("--report", help="write the verification report JSON here")
    v.add_argument("--dump-constraints", action="store_true",
                   help="print prover query statistics")
    v.set_defaults(fn=cmd_verify)

    w = sub.add_parser("weave", help="weave residual checks into a program")
    w.add_argument("path")
    w.add_argument("--report", help="verification report JSON to validate against")
    w.add_argument("--auto", action="store_true", help="verify and weave in one step")
    w.add_argument("-o", "--output", help="woven output path")
    w.add_argument("--sidecar", help="sidecar check-map output path")
    w.set_defaults(fn=cmd_weave)

    r = sub.add_parser("run", help="execute a transaction script on a woven program")
    r.add_argument("path")
    r.add_argument("--txs", help="transaction script (JSON lines)")
    r.add_argument("--ledger", help="initial ledger JSON")
    r.add_argument("--gas-limit", type=int, default=None)
    r.add_argument("--gas-report", help="write the gas report JSON here")
    r.add_argument("--adversary", action="append", metavar="NAME=PATH",
                   help="source implementing an extern contract")
    r.add_argument("--unprotected", action="store_true",
                   help="debug mode: no permissions, no checks (demonstrates the "
                        "vulnerability class the protections close)")
    r.set_defaults(fn=cmd_run)

    c = sub.add_parser("corpus", help="regression: verify, weave, equivalence, erosion")
    c.add_argument("dir")
    c.add_argument("--bound", type=int, default=8)
    c.add_argument("--erosion-bound", type=int, default=2)
    c.set_defaults(fn=cmd_corpus)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except SystemExit2 as e:
        print(e.message)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
