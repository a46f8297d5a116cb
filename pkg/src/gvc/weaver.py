"""Weaves residual run-time checks into a verified program.

Before-statement residuals become `check` statements immediately preceding
their statement; at-entry/at-exit residuals land in the boundary-check table
together with the spec-derived entries (precise precondition atoms and acc
list at entry, precise postcondition atoms at exit) that protect verified
methods from unverified callers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .lang import Acc, Check, Cmp, Formula, If, Program, While
from .parser import BoundaryResidual
from .printer import fmt_atom, pretty_print
from .verifier import Status, VerificationReport, program_digest


class WeaveError(Exception):
    pass


@dataclass
class BoundaryEntry:
    kind: str  # "entry" | "exit"
    payload: object  # Cmp / Acc / PredUse
    check_id: str = None  # set iff this entry realizes a residual


@dataclass
class InstrumentedProgram:
    program: Program  # with woven Check statements
    boundary: dict = field(default_factory=dict)  # (contract, method) -> [BoundaryEntry]
    sidecar: dict = field(default_factory=dict)  # id -> {line, kind, payload}

    @property
    def boundary_residuals(self):
        # printable form: only residual-backed and spec-derived entries; the
        # printer renders residual ids so stripped text re-loads faithfully
        out = {}
        for key, entries in self.boundary.items():
            out[key] = [BoundaryResidual(e.kind, e.payload, e.check_id)
                        for e in entries if e.check_id is not None]
        return {k: v for k, v in out.items() if v}

    def to_text(self):
        return pretty_print(self.program, self.boundary_residuals)


def spec_boundary_entries(contract, method):
    """Boundary table rows implied by the method's own specification."""
    entries = []
    for a in method.spec.requires.atoms:
        if isinstance(a, Acc):
            continue
        entries.append(BoundaryEntry("entry", a))
    for a in method.spec.requires.atoms:
        if isinstance(a, Acc):
            entries.append(BoundaryEntry("entry", a))
    for a in method.spec.ensures.atoms:
        if not isinstance(a, Acc):
            entries.append(BoundaryEntry("exit", a))
    return entries


def build_boundary_table(contract, method, residual_entries=()):
    """Spec-derived rows plus residual-backed rows, merged by payload so no
    atom is evaluated twice at a boundary."""
    entries = [] if contract.extern else spec_boundary_entries(contract, method)
    for r in residual_entries:
        for e in entries:
            if (e.kind == r.kind and e.check_id is None
                    and fmt_atom(e.payload) == fmt_atom(r.payload)):
                e.check_id = r.check_id
                break
        else:
            entries.append(BoundaryEntry(r.kind, r.payload, r.check_id))
    return entries


def weave(program: Program, report: VerificationReport) -> InstrumentedProgram:
    if report.digest != program_digest(program):
        raise WeaveError("stale report: program digest does not match")
    if report.has_static_error:
        bad = [m.name for m in report.methods if m.status is Status.STATIC_ERROR]
        raise WeaveError(f"refusing to weave: static errors in {', '.join(bad)}")

    sidecar = {}
    boundary = {}
    contracts = []
    for c in program.contracts:
        methods = []
        for m in c.methods:
            mrep = report.method(c.name, m.name)
            entries = [] if c.extern else spec_boundary_entries(c, m)
            inserts = {}  # (block_path, index) -> [Check]
            if mrep is not None:
                for r in mrep.residuals:
                    sidecar[r.id] = {
                        "line": r.obligation.loc.line,
                        "kind": r.obligation.kind,
                        "payload": r.payload_text,
                    }
                    if r.insertion.kind == "before":
                        key = (r.insertion.block_path, r.insertion.index)
                        inserts.setdefault(key, []).append(
                            Check(r.id, r.payload, r.obligation.loc))
                    else:
                        # merge with a matching spec-derived row so the same
                        # atom is not evaluated twice at the boundary
                        for e in entries:
                            if (e.kind == r.insertion.kind and e.check_id is None
                                    and fmt_atom(e.payload) == r.payload_text):
                                e.check_id = r.id
                                break
                        else:
                            entries.append(BoundaryEntry(
                                r.insertion.kind, r.payload, r.id))
            body = _weave_block(m.body, (), inserts)
            methods.append(replace(m, body=body))
            if entries:
                boundary[(c.name, m.name)] = entries
        contracts.append(replace(c, methods=tuple(methods)))
    return InstrumentedProgram(Program(tuple(contracts)), boundary, sidecar)


def _weave_block(body, path, inserts):
    out = []
    for i, s in enumerate(body):
        for chk in inserts.get((path, i), []):
            out.append(chk)
        if isinstance(s, If):
            s = replace(s,
                        then=_weave_block(s.then, path + (i, "then"), inserts),
                        orelse=_weave_block(s.orelse, path + (i, "else"), inserts))
        elif isinstance(s, While):
            s = replace(s, body=_weave_block(s.body, path + (i, "body"), inserts))
        out.append(s)
    for chk in inserts.get((path, len(body)), []):
        out.append(chk)
    return tuple(out)


def strip(ip) -> Program:
    """Remove all woven check statements (and the boundary table); inverse of
    weave.  Accepts an InstrumentedProgram or a bare Program; idempotent."""
    program = ip.program if isinstance(ip, InstrumentedProgram) else ip
    contracts = []
    for c in program.contracts:
        methods = [replace(m, body=_strip_block(m.body)) for m in c.methods]
        contracts.append(replace(c, methods=tuple(methods)))
    return Program(tuple(contracts))


def _strip_block(body):
    out = []
    for s in body:
        if isinstance(s, Check):
            continue
        if isinstance(s, If):
            s = replace(s, then=_strip_block(s.then), orelse=_strip_block(s.orelse))
        elif isinstance(s, While):
            s = replace(s, body=_strip_block(s.body))
        out.append(s)
    return tuple(out)


def count_woven_checks(program: Program) -> int:
    from .lang import stmts_recursive
    n = 0
    for c in program.contracts:
        for m in c.methods:
            n += sum(1 for s in stmts_recursive(m.body) if isinstance(s, Check))
    return n


def sidecar_json(ip: InstrumentedProgram) -> str:
    return json.dumps(ip.sidecar, indent=2, sort_keys=True)
