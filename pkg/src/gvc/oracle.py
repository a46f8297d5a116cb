"""Ground-truth dynamic verifier and bounded equivalence enumeration.

The oracle executes un-instrumented programs while checking every
specification obligation at its site: precondition and postcondition atoms,
loop invariants, asserts, arithmetic safety, and access against the declared
permissions with the imprecise lazy-acquisition rules.  It never consults a
verification report or a woven program; the VM and the static pipeline are
validated against it, so it re-implements evaluation on its own.
"""

from __future__ import annotations

import itertools
import json
import sys
from dataclasses import dataclass, field

from .lang import (
    Acc, Assign, AssertStmt, BinOp, BoolOp, Call, Check, Cmp, Formula,
    GAssign, If, IntLit, Name, NotOp, Old, PredUse, Program, Result, Return,
    UINT_MAX, While,
)

ALL_HELD = "AllObligationsHeld"
FIRST_VIOLATION = "FirstViolation"

_DEPTH_CAP = 1024


@dataclass(frozen=True)
class Site:
    """Canonical identity of an obligation: what kind of requirement failed
    and the source line it is attributed to."""

    kind: str
    line: int


@dataclass
class TraceJudgment:
    tx: object
    verdict: str  # ALL_HELD | FIRST_VIOLATION
    site: Site = None
    payload: str = None
    storage: dict = None  # final storage when all obligations held

    @property
    def held(self):
        return self.verdict == ALL_HELD


class _Violation(Exception):
    def __init__(self, kind, line, payload=""):
        super().__init__(f"{kind} at line {line}: {payload}")
        self.site = Site(kind, line)
        self.payload = payload


class _Returned(Exception):
    def __init__(self, value):
        self.value = value


class _OFrame:
    def __init__(self, contract, verified, imprecise, caller):
        self.contract = contract
        self.verified = verified
        self.imprecise = imprecise
        self.caller = caller
        self.vars = {}
        self.old = {}
        self.result = None
        self.borrows = []  # (slot, previous holder) for lazy acquisitions


class Oracle:
    """Reference interpreter over a resolved, un-instrumented program."""

    def __init__(self, program: Program, unverified=frozenset()):
        self.program = program
        self.unverified = frozenset(unverified)

    def judge(self, storage: dict, tx) -> TraceJudgment:
        """Run one transaction from `storage` (not mutated) and report either
        the final storage or the first violated obligation."""
        self.mem = {c.name: dict(storage.get(c.name, {})) for c in self.program.contracts}
        for c in self.program.contracts:
            for g in c.globals:
                self.mem[c.name].setdefault(g, 0)
        self.holder = {}
        self._frames = 0
        try:
            self.enter(tx.contract, tx.method, list(tx.args), caller=None, call_line=0)
        except _Violation as v:
            return TraceJudgment(tx, FIRST_VIOLATION, v.site, v.payload)
        return TraceJudgment(tx, ALL_HELD, storage={k: dict(v) for k, v in self.mem.items()})

    # -- frames --------------------------------------------------------------

    def enter(self, cname, mname, args, caller, call_line):
        contract = self.program.contract(cname)
        method = contract.method(mname)
        verified = cname not in self.unverified
        req, ens = method.spec.requires, method.spec.ensures
        fr = _OFrame(contract, verified, req.imprecise or not verified, caller)
        fr.vars = {p: v for (p, _), v in zip(method.params, args)}

        caller_verified = caller is not None and caller.verified
        internal = caller is not None and caller.contract.name == cname
        pre_line = lambda atom: call_line if caller_verified else atom.loc.line

        # caller-side permission surrender happens at the call site for
        # same-contract calls from verified code
        if caller_verified and internal:
            for a in req.atoms:
                if isinstance(a, Acc) and not self._holds_or_lazy(caller, cname, a.slot):
                    raise _Violation("access", call_line, f"acc({a.slot})")

        for a in req.atoms:
            if isinstance(a, Acc):
                continue
            if not self.spec_atom(fr, a):
                raise _Violation("precondition", pre_line(a), self._fmt(a))
        for a in req.atoms:
            if not isinstance(a, Acc):
                continue
            h = self.holder.get((cname, a.slot))
            if h is None or h is caller:
                self.holder[(cname, a.slot)] = fr
            else:
                raise _Violation("access", a.loc.line, f"acc({a.slot})")

        fr.old = dict(self.mem[cname])
        try:
            self.block(fr, method.body)
        except _Returned as r:
            fr.result = r.value

        post_loc = ens.loc or method.loc
        for a in ens.atoms:
            if isinstance(a, Acc):
                continue
            if not self.spec_atom(fr, a):
                raise _Violation("postcondition", post_loc.line, self._fmt(a))
        kept = set()
        for a in ens.atoms:
            if not isinstance(a, Acc):
                continue
            kept.add(a.slot)
            if not self._holds_or_lazy(fr, cname, a.slot):
                raise _Violation("access", a.loc.line, f"acc({a.slot})")
            if caller is None:
                self.holder.pop((cname, a.slot), None)
            else:
                self.holder[(cname, a.slot)] = caller
        for slot, prev in reversed(fr.borrows):
            if slot in kept:
                continue
            if self.holder.get((cname, slot)) is fr:
                if prev is None:
                    self.holder.pop((cname, slot), None)
                else:
                    self.holder[(cname, slot)] = prev
        for key, h in list(self.holder.items()):
            if h is fr:
                del self.holder[key]
        return fr.result

    def _holds_or_lazy(self, fr, cname, slot):
        h = self.holder.get((cname, slot))
        if h is fr:
            return True
        if fr.imprecise and (h is None or (fr.caller is not None and h is fr.caller)):
            fr.borrows.append((slot, h))
            self.holder[(cname, slot)] = fr
            return True
        return False

    # -- statements ----------------------------------------------------------

    def block(self, fr, body):
        for s in body:
            self.stmt(fr, s)

    def stmt(self, fr, s):
        if isinstance(s, Assign):
            fr.vars[s.target] = self.value(fr, s.expr, s.loc.line)
        elif isinstance(s, GAssign):
            v = self.value(fr, s.expr, s.loc.line)
            if not self._holds_or_lazy(fr, fr.contract.name, s.slot):
                raise _Violation("access", s.loc.line, s.slot)
            self.mem[fr.contract.name][s.slot] = v
        elif isinstance(s, If):
            if self.truth(fr, s.cond, s.loc.line):
                self.block(fr, s.then)
            else:
                self.block(fr, s.orelse)
        elif isinstance(s, While):
            line = s.loc.line
            while True:
                taken = self.truth(fr, s.cond, line)
                for a in s.invariant.atoms:
                    if isinstance(a, Acc):
                        if not self._holds_or_lazy(fr, fr.contract.name, a.slot):
                            raise _Violation("access", line, f"acc({a.slot})")
                    elif not self.spec_atom(fr, a):
                        raise _Violation("loop-invariant", line, self._fmt(a))
                if not taken:
                    break
                self.block(fr, s.body)
        elif isinstance(s, Call):
            args = [self.value(fr, a, s.loc.line) for a in s.args]
            ret = self.enter(s.contract, s.method, args, fr, s.loc.line)
            if s.target is not None:
                fr.vars[s.target] = ret
        elif isinstance(s, Return):
            raise _Returned(self.value(fr, s.expr, s.loc.line) if s.expr is not None else None)
        elif isinstance(s, AssertStmt):
            for a in s.formula.atoms:
                if isinstance(a, Acc):
                    if not self._holds_or_lazy(fr, fr.contract.name, a.slot):
                        raise _Violation("access", s.loc.line, f"acc({a.slot})")
                elif not self.spec_atom(fr, a):
                    raise _Violation("assert", s.loc.line, self._fmt(a))
        elif isinstance(s, Check):
            pass  # instrumentation, not part of the source semantics
        else:
            raise TypeError(f"not a statement: {s!r}")

    # -- program expressions (checked uint64) --------------------------------

    def value(self, fr, e, line):
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, Name):
            if e.name in fr.vars:
                return fr.vars[e.name]
            if not self._holds_or_lazy(fr, fr.contract.name, e.name):
                raise _Violation("access", e.loc.line, e.name)
            return self.mem[fr.contract.name][e.name]
        if isinstance(e, BinOp):
            l = self.value(fr, e.left, line)
            r = self.value(fr, e.right, line)
            if e.op == "-" and l < r:
                raise _Violation("underflow", line, f"{l} - {r}")
            if (e.op == "+" and l + r > UINT_MAX) or (e.op == "*" and l * r > UINT_MAX):
                raise _Violation("overflow", line, f"{l} {e.op} {r}")
            if e.op in "/%" and r == 0:
                raise _Violation("div-zero", line, f"{l} {e.op} 0")
            return {"+": l + r, "-": l - r, "*": l * r,
                    "/": l // r if r else 0, "%": l % r if r else 0}[e.op]
        raise TypeError(f"not a runtime expression: {e!r}")

    def truth(self, fr, c, line):
        # strict: every leaf is evaluated, obligations included
        if isinstance(c, Cmp):
            return _rel(c.op, self.value(fr, c.left, line), self.value(fr, c.right, line))
        if isinstance(c, BoolOp):
            parts = [self.truth(fr, p, line) for p in c.parts]
            return all(parts) if c.op == "and" else any(parts)
        if isinstance(c, NotOp):
            return not self.truth(fr, c.operand, line)
        raise TypeError(f"not a condition: {c!r}")

    # -- specification atoms (mathematical integers) -------------------------

    def spec_atom(self, fr, a):
        if isinstance(a, Cmp):
            return _rel(a.op, self.spec_value(fr, a.left), self.spec_value(fr, a.right))
        if isinstance(a, PredUse):
            args = [self.spec_value(fr, x) for x in a.args]
            return self.pred(fr.contract, a.name, args, 1)
        raise TypeError(f"not a value atom: {a!r}")

    def spec_value(self, fr, e):
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, Name):
            if e.name in fr.vars:
                return fr.vars[e.name]
            return self.mem[fr.contract.name][e.name]
        if isinstance(e, Old):
            return fr.old[e.slot]
        if isinstance(e, Result):
            return fr.result if fr.result is not None else 0
        if isinstance(e, BinOp):
            l, r = self.spec_value(fr, e.left), self.spec_value(fr, e.right)
            if e.op in "/%" and r == 0:
                raise _Violation("div-zero", e.loc.line, "division by zero in spec")
            return {"+": l + r, "-": l - r, "*": l * r,
                    "/": l // r if r else 0, "%": l % r if r else 0}[e.op]
        raise TypeError(f"not a spec expression: {e!r}")

    def pred(self, contract, name, args, depth):
        if depth > _DEPTH_CAP:
            raise _Violation("predicate-depth", 0, name)
        if depth <= 1:
            sys.setrecursionlimit(max(sys.getrecursionlimit(), 40 * _DEPTH_CAP))
        body = contract.predicate(name).body
        env = dict(zip(contract.predicate(name).params, args))

        def val(e):
            if isinstance(e, IntLit):
                return e.value
            if isinstance(e, Name):
                return env[e.name] if e.name in env else self.mem[contract.name][e.name]
            l, r = val(e.left), val(e.right)
            if e.op in "/%" and r == 0:
                raise _Violation("div-zero", e.loc.line, "division by zero in predicate")
            return {"+": l + r, "-": l - r, "*": l * r,
                    "/": l // r if r else 0, "%": l % r if r else 0}[e.op]

        def go(node):
            if isinstance(node, Cmp):
                return _rel(node.op, val(node.left), val(node.right))
            if isinstance(node, PredUse):
                return self.pred(contract, node.name, [val(x) for x in node.args], depth + 1)
            if isinstance(node, BoolOp):
                it = (go(p) for p in node.parts)
                return all(it) if node.op == "and" else any(it)
            if isinstance(node, NotOp):
                return not go(node.operand)
            raise TypeError(f"not a predicate body node: {node!r}")

        return go(body)

    @staticmethod
    def _fmt(a):
        from .printer import fmt_atom
        return fmt_atom(a)


def _rel(op, l, r):
    return {"==": l == r, "!=": l != r, "<": l < r,
            "<=": l <= r, ">": l > r, ">=": l >= r}[op]


def dynamic_verify_trace(program: Program, storage: dict, tx,
                         unverified=frozenset()) -> TraceJudgment:
    return Oracle(program, unverified).judge(storage, tx)


# ---------------------------------------------------------------------------
# Equivalence enumeration


def vm_site(outcome, sidecar):
    """Canonical obligation identity of a VM revert, for comparison with the
    oracle's FirstViolation site."""
    from . import vm as _vm

    d = outcome.detail
    if outcome.reason == _vm.CHECK_FAILURE:
        cid = d.get("check_id")
        if cid is not None and cid in sidecar:
            rec = sidecar[cid]
            kind = rec["kind"]
            if kind == "access":
                return Site("access", rec["line"])
            return Site(kind, rec["line"])
        return Site(d.get("kind", "check"), d.get("line", 0))
    if outcome.reason == _vm.OWNERSHIP_FAILURE:
        return Site("access", d.get("line", 0))
    if outcome.reason == _vm.ARITHMETIC_PANIC:
        return Site(d.get("kind", "arithmetic"), d.get("line", 0))
    if outcome.reason == _vm.PREDICATE_DEPTH:
        return Site("predicate-depth", 0)
    return Site(outcome.reason, 0)


def enumerate_equivalence(program: Program, woven, bound: int = 8,
                          adversaries: dict = None) -> dict:
    """Exhaustively compare the instrumented VM against the oracle on every
    initial storage and argument vector in [0, bound]^n, one transaction per
    case.  Returns {"cases": n, "disagreements": [...]}."""
    from .vm import Ledger, Transaction, Vm, load_program, merge_adversaries

    image = load_program(woven, adversaries)
    base, unverified = merge_adversaries(program, adversaries)
    oracle = Oracle(base, unverified)

    gslots = [(c.name, g) for c in program.contracts for g in c.globals]
    cases = 0
    disagreements = []
    for c in program.contracts:
        if c.extern:
            continue
        for m in c.methods:
            pnames = [p for p, _ in m.params]
            dims = len(gslots) + len(pnames)
            for point in itertools.product(range(bound + 1), repeat=dims):
                cases += 1
                init = {}
                for (cn, g), v in zip(gslots, point):
                    init.setdefault(cn, {})[g] = v
                args = tuple(point[len(gslots):])
                tx = Transaction(c.name, m.name, args)

                ledger = Ledger(image.program, init)
                vm = Vm(image, ledger)
                out = vm.exec_transaction(tx, gas_limit=None)
                judgment = oracle.judge(init, tx)

                agree = _agree(out, judgment, ledger, image.sidecar)
                if not agree:
                    disagreements.append({
                        "initial_state": init,
                        "method": f"{c.name}.{m.name}",
                        "args": list(args),
                        "vm_outcome": _vm_desc(out, image.sidecar),
                        "oracle_verdict": _oracle_desc(judgment),
                    })
    return {"cases": cases, "disagreements": disagreements}


def _agree(out, judgment, ledger, sidecar):
    if out.committed and judgment.held:
        return ledger.slots == judgment.storage
    if out.committed or judgment.held:
        return False
    return vm_site(out, sidecar) == judgment.site


def _vm_desc(out, sidecar):
    d = out.as_dict()
    if not out.committed:
        s = vm_site(out, sidecar)
        d["site"] = {"kind": s.kind, "line": s.line}
    return d


def _oracle_desc(j):
    if j.held:
        return {"verdict": ALL_HELD}
    return {"verdict": FIRST_VIOLATION, "kind": j.site.kind,
            "line": j.site.line, "payload": j.payload}


def disagreement_json(report: dict) -> str:
    return json.dumps(report["disagreements"], indent=2, sort_keys=True)
