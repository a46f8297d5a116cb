"""Optimistic symbolic execution of methods against their specifications.

Each method is executed over a symbolic state (store, owned permissions,
symbolic heap, path condition).  Obligations are discharged through the
linear prover; where proof fails but imprecision permits optimism, a residual
run-time check is recorded instead.  A precise state admits no optimism: an
unprovable obligation is a static error.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field

from .lang import (
    Acc, Assign, AssertStmt, BinOp, BoolOp, Call, Check, Cmp, Contract,
    Formula, GAssign, If, IntLit, Method, Name, NotOp, Old, PredUse,
    Program, Result, Return, SourceLoc, While, assigned_globals,
    assigned_locals,
)
from .linear import (
    LinExpr, NONLINEAR, ProofResult, ProverStats, check_sat,
    constraints_for_cmp, entails_constraints, expr_to_linexpr, make_constraint,
)
from .printer import fmt_atom, pretty_print

DNF_LIMIT = 64


class Status(enum.Enum):
    VERIFIED = "verified"
    VERIFIED_WITH_RESIDUALS = "verified-with-residuals"
    STATIC_ERROR = "static-error"


@dataclass(frozen=True)
class Obligation:
    atom: object  # source-level payload atom
    loc: SourceLoc
    kind: str  # precondition | postcondition | loop-invariant | underflow | div-zero | assert | access


@dataclass(frozen=True)
class Insertion:
    kind: str  # "before" | "entry" | "exit"
    block_path: tuple = ()
    index: int = 0

    def sort_key(self):
        if self.kind == "entry":
            return (0, (), 0)
        if self.kind == "before":
            return (1, self.block_path, self.index)
        return (2, (), 0)

    def as_dict(self):
        if self.kind == "before":
            return {"kind": "before", "path": list(self.block_path), "index": self.index}
        return {"kind": self.kind}


@dataclass
class ResidualCheck:
    id: str
    obligation: Obligation
    payload: object  # Atom over names in scope at the insertion point
    insertion: Insertion

    @property
    def payload_text(self):
        return fmt_atom(self.payload)


@dataclass
class MethodReport:
    contract: str
    name: str
    status: Status
    residuals: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)  # (Obligation|None, reason str)
    warnings: list = field(default_factory=list)

    def as_dict(self):
        return {
            "contract": self.contract,
            "name": self.name,
            "status": self.status.value,
            "residuals": [
                {
                    "id": r.id,
                    "kind": r.obligation.kind,
                    "payload_text": r.payload_text,
                    "line": r.obligation.loc.line,
                    "col": r.obligation.loc.col,
                    "insertion": r.insertion.as_dict(),
                }
                for r in self.residuals
            ],
            "diagnostics": [
                {"reason": reason, "kind": ob.kind if ob else None,
                 "payload": fmt_atom(ob.atom) if ob else None,
                 "line": ob.loc.line if ob else 0}
                for ob, reason in self.diagnostics
            ],
            "warnings": list(self.warnings),
        }


@dataclass
class VerificationReport:
    methods: list
    digest: str
    prover: ProverStats

    def method(self, contract, name):
        for m in self.methods:
            if m.contract == contract and m.name == name:
                return m
        return None

    @property
    def has_static_error(self):
        return any(m.status is Status.STATIC_ERROR for m in self.methods)

    def all_residuals(self):
        for m in self.methods:
            yield from m.residuals

    def as_dict(self):
        return {
            "digest": self.digest,
            "methods": [m.as_dict() for m in self.methods],
            "prover": self.prover.as_dict(),
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def program_digest(program: Program) -> str:
    return hashlib.sha256(pretty_print(program).encode()).hexdigest()


class StaticErrorExc(Exception):
    def __init__(self, obligation, reason):
        super().__init__(f"{reason}: {fmt_atom(obligation.atom)} at {obligation.loc}")
        self.obligation = obligation
        self.reason = reason


class SymState:
    def __init__(self):
        self.store = {}
        self.perms = set()
        self.heap = {}
        self.path = []
        self.imprecise = False
        self.old = {}
        self.facts = set()  # produced predicate instances

    def clone(self):
        s = SymState.__new__(SymState)
        s.store = dict(self.store)
        s.perms = set(self.perms)
        s.heap = dict(self.heap)
        s.path = list(self.path)
        s.imprecise = self.imprecise
        s.old = dict(self.old)
        s.facts = set(self.facts)
        return s


_NEG_OP = {"==": "!=", "!=": "==", "<=": ">", ">": "<=", "<": ">=", ">=": "<"}


class MethodVerifier:
    def __init__(self, program: Program, contract: Contract, method: Method, stats: ProverStats):
        self.program = program
        self.contract = contract
        self.method = method
        self.stats = stats
        self._fresh_n = 0
        self.residuals = {}  # dedupe key -> ResidualCheck (order-preserving)
        self.warnings = []
        self.exits = []  # (state, result LinExpr or None)

    # -- plumbing -----------------------------------------------------------

    def fresh(self, hint="v"):
        self._fresh_n += 1
        return LinExpr.of(f"%{hint}{self._fresh_n}")

    def _residual(self, obligation, payload, insertion):
        key = (insertion.kind, insertion.block_path, insertion.index,
               obligation.kind, fmt_atom(payload))
        if key not in self.residuals:
            self.residuals[key] = ResidualCheck("?", obligation, payload, insertion)

    # -- expression evaluation ----------------------------------------------

    def read_global(self, state, slot, loc, insertion):
        if slot in state.perms:
            return state.heap[slot]
        ob = Obligation(Acc(slot, loc), loc, "access")
        if state.imprecise:
            self._residual(ob, Acc(slot, loc), insertion)
            state.perms.add(slot)
            state.heap[slot] = self.fresh(slot)
            return state.heap[slot]
        raise StaticErrorExc(ob, "unprovable")

    def eval_expr(self, state, e, loc, insertion, src=True):
        """Symbolic value of e; emits underflow / div-zero obligations."""
        if isinstance(e, IntLit):
            return LinExpr.lit(e.value)
        if isinstance(e, Name):
            if e.scope == "global" or (e.scope is None and e.name in self.contract.globals):
                return self.read_global(state, e.name, e.loc, insertion)
            v = state.store.get(e.name)
            if v is None:
                v = self.fresh(e.name)
                state.store[e.name] = v
            return v
        if isinstance(e, Old):
            v = state.old.get(e.slot)
            if v is None:
                v = self.fresh(f"old_{e.slot}")
                state.old[e.slot] = v
            return v
        if isinstance(e, Result):
            return state.store.get("%result", self.fresh("result"))
        if isinstance(e, BinOp):
            l = self.eval_expr(state, e.left, loc, insertion)
            r = self.eval_expr(state, e.right, loc, insertion)
            if e.op == "+":
                return l.add(r)
            if e.op == "-":
                ob = Obligation(Cmp(">=", e.left, e.right, e.loc), loc, "underflow")
                self.consume_constraints(state, ob, constraints_for_cmp(">=", l, r), insertion)
                return l.sub(r)
            if e.op == "*":
                if l.is_const:
                    return r.scale(l.const)
                if r.is_const:
                    return l.scale(r.const)
                return self.fresh("mul")
            # "/" or "%"
            ob = Obligation(Cmp("!=", e.right, IntLit(0), e.loc), loc, "div-zero")
            self.consume_constraints(state, ob, constraints_for_cmp("!=", r, LinExpr.lit(0)), insertion)
            if l.is_const and r.is_const and r.const != 0:
                return LinExpr.lit(l.const // r.const if e.op == "/" else l.const % r.const)
            out = self.fresh("div" if e.op == "/" else "mod")
            # floor semantics bounds (divisor >= 1 after the check): q <= numerator,
            # remainder <= divisor - 1
            if e.op == "/":
                state.path.extend(constraints_for_cmp("<=", out, l))
            else:
                state.path.extend(constraints_for_cmp("<=", out, r.sub(LinExpr.lit(1))))
                state.path.extend(constraints_for_cmp("<=", out, l))
            return out
        raise TypeError(f"not an expression: {e!r}")

    # -- obligations ----------------------------------------------------------

    def consume_constraints(self, state, obligation, constraints, insertion, payload=None):
        """Discharge, residualize, or fail one linearizable obligation."""
        payload = payload if payload is not None else obligation.atom
        result = entails_constraints(state.path, constraints, self.stats)
        if result is ProofResult.PROVED:
            return
        if not state.imprecise:
            reason = "violated" if result is ProofResult.DISPROVED else "unprovable"
            raise StaticErrorExc(obligation, reason)
        # imprecision absorbs both Unknown and path-local Disproved: the
        # woven check reports the true error on whichever paths are real
        self._residual(obligation, payload, insertion)
        state.path.extend(constraints)

    def consume_opaque(self, state, obligation, insertion, payload=None):
        """Non-linearizable obligation: residual under imprecision, else error."""
        payload = payload if payload is not None else obligation.atom
        if state.imprecise:
            self._residual(obligation, payload, insertion)
            return
        raise StaticErrorExc(obligation, "unprovable")

    # -- formulas -------------------------------------------------------------

    def atom_constraints(self, state, atom, bindings_extra=None, reads=None):
        """Constraints for a comparison atom evaluated in `state` without
        emitting obligations (spec atoms are checked, not executed).  Global
        reads use `reads` (a snapshot heap) falling back to fresh symbols."""
        reads = reads if reads is not None else state.heap

        def ev(e):
            if isinstance(e, IntLit):
                return LinExpr.lit(e.value)
            if isinstance(e, Name):
                if bindings_extra and e.name in bindings_extra:
                    return bindings_extra[e.name]
                if e.scope == "global" or (e.scope is None and e.name in self.contract.globals):
                    if e.name in reads:
                        return reads[e.name]
                    return self.fresh(e.name)
                v = state.store.get(e.name)
                return v if v is not None else self.fresh(e.name)
            if isinstance(e, Old):
                if bindings_extra and f"old({e.slot})" in bindings_extra:
                    return bindings_extra[f"old({e.slot})"]
                v = state.old.get(e.slot)
                return v if v is not None else self.fresh(f"old_{e.slot}")
            if isinstance(e, Result):
                if bindings_extra and "result" in bindings_extra:
                    return bindings_extra["result"]
                return state.store.get("%result", self.fresh("result"))
            if isinstance(e, BinOp):
                l, r = ev(e.left), ev(e.right)
                if l is NONLINEAR or r is NONLINEAR:
                    return NONLINEAR
                if e.op == "+":
                    return l.add(r)
                if e.op == "-":
                    return l.sub(r)
                if e.op == "*":
                    if l.is_const:
                        return r.scale(l.const)
                    if r.is_const:
                        return l.scale(r.const)
                return NONLINEAR
            raise TypeError(f"not an expression: {e!r}")

        l, r = ev(atom.left), ev(atom.right)
        if l is NONLINEAR or r is NONLINEAR:
            return NONLINEAR
        return constraints_for_cmp(atom.op, l, r)

    def _fact_key(self, state, atom, bindings_extra=None, reads=None):
        vals = []
        for a in atom.args:
            c = self.atom_constraints(state, Cmp("==", a, IntLit(0)), bindings_extra, reads)
            if c is NONLINEAR:
                return None
            # constraints_for_cmp("==", v, 0) carries v itself in its terms/const
            vals.append((c[0].terms, c[0].const))
        return (atom.name, tuple(vals))

    def produce(self, state, f: Formula, bindings_extra=None, on_duplicate="error"):
        if f.imprecise:
            state.imprecise = True
        produce_reads = {}
        for atom in f.atoms:
            if isinstance(atom, Acc):
                if atom.slot not in self.contract.globals:
                    continue  # cross-contract permission: runtime-managed
                if atom.slot in state.perms:
                    if on_duplicate == "error":
                        ob = Obligation(atom, atom.loc, "access")
                        raise StaticErrorExc(ob, "duplicate permission")
                    continue
                state.perms.add(atom.slot)
                state.heap[atom.slot] = self.fresh(atom.slot)
        for atom in f.atoms:
            if isinstance(atom, Acc):
                continue
            reads = dict(state.heap)
            for slot in self.contract.globals:
                if slot not in reads:
                    produce_reads.setdefault(slot, self.fresh(slot))
                    reads[slot] = produce_reads[slot]
            if isinstance(atom, Cmp):
                cons = self.atom_constraints(state, atom, bindings_extra, reads)
                if cons is not NONLINEAR:
                    state.path.extend(cons)
            elif isinstance(atom, PredUse):
                key = self._fact_key(state, atom, bindings_extra, reads)
                if key is not None:
                    state.facts.add(key)
                self._produce_pred_unfold(state, atom, bindings_extra, reads)
        return state

    def _produce_pred_unfold(self, state, atom, bindings_extra, reads):
        pred = self.contract.predicate(atom.name)
        if pred is None:
            return
        conj = _flatten_conj(pred.body)
        if conj is None:
            return  # disjunctive body: opaque fact only
        args = []
        for a in atom.args:
            c = self.atom_constraints(state, Cmp("==", a, IntLit(0)), bindings_extra, reads)
            if c is NONLINEAR:
                return
            args.append(LinExpr(c[0].terms, c[0].const))
        sub = dict(zip(pred.params, args))
        for part in conj:
            if isinstance(part, Cmp):
                cons = self.atom_constraints(state, part, sub, reads)
                if cons is not NONLINEAR:
                    state.path.extend(cons)
            # recursive predicate occurrences stay opaque

    def consume(self, state, f: Formula, loc, insertion, kind,
                bindings_extra=None, payload_subst=None, skip_cross_acc=False):
        """Assert a formula against the state, removing surrendered
        permissions; returns the state (mutated)."""
        reads = dict(state.heap)  # value atoms evaluate in the pre-state
        for atom in f.atoms:
            ploc = getattr(atom, "loc", loc) or loc
            if isinstance(atom, Acc):
                if atom.slot not in self.contract.globals:
                    if skip_cross_acc:
                        continue
                payload = Acc(atom.slot, ploc)
                ob = Obligation(payload, loc, kind if kind in ("access",) else "access")
                if atom.slot in state.perms:
                    state.perms.discard(atom.slot)
                    state.heap.pop(atom.slot, None)
                elif state.imprecise:
                    self._residual(ob, payload, insertion)
                else:
                    raise StaticErrorExc(ob, "unprovable")
            elif isinstance(atom, Cmp):
                payload = _subst_atom(atom, payload_subst) if payload_subst else atom
                ob = Obligation(payload, loc, kind)
                cons = self.atom_constraints(state, atom, bindings_extra, reads)
                if cons is NONLINEAR:
                    self.consume_opaque(state, ob, insertion, payload)
                else:
                    self.consume_constraints(state, ob, cons, insertion, payload)
            elif isinstance(atom, PredUse):
                payload = _subst_atom(atom, payload_subst) if payload_subst else atom
                ob = Obligation(payload, loc, kind)
                key = self._fact_key(state, atom, bindings_extra, reads)
                if key is not None and key in state.facts:
                    state.facts.discard(key)
                    continue
                if self._consume_pred_unfold(state, atom, bindings_extra, reads):
                    continue
                self.consume_opaque(state, ob, insertion, payload)
        if f.imprecise:
            state.imprecise = True
        return state

    def _consume_pred_unfold(self, state, atom, bindings_extra, reads):
        """One-level unfold: discharged iff the body is a pure comparison
        conjunction and every conjunct is Proved."""
        pred = self.contract.predicate(atom.name)
        if pred is None:
            return False
        conj = _flatten_conj(pred.body)
        if conj is None or any(not isinstance(p, Cmp) for p in conj):
            return False
        args = []
        for a in atom.args:
            c = self.atom_constraints(state, Cmp("==", a, IntLit(0)), bindings_extra, reads)
            if c is NONLINEAR:
                return False
            args.append(LinExpr(c[0].terms, c[0].const))
        sub = dict(zip(pred.params, args))
        for part in conj:
            cons = self.atom_constraints(state, part, sub, reads)
            if cons is NONLINEAR:
                return False
            if entails_constraints(state.path, cons, self.stats) is not ProofResult.PROVED:
                return False
        return True

    # -- conditions -----------------------------------------------------------

    def cond_alternatives(self, state, cond, loc, insertion, negate=False):
        """DNF alternatives (lists of constraints) for the condition holding
        (or its negation).  Leaf expressions are evaluated in `state`;
        obligations from their arithmetic must be emitted separately."""

        def leaf(c, neg):
            op = _NEG_OP[c.op] if neg else c.op
            l = expr_to_linexpr_in(self, state, c.left)
            r = expr_to_linexpr_in(self, state, c.right)
            if l is NONLINEAR or r is NONLINEAR:
                return [[]]
            return [constraints_for_cmp(op, l, r)]

        def walk(node, neg):
            if isinstance(node, NotOp):
                return walk(node.operand, not neg)
            if isinstance(node, BoolOp):
                conj = (node.op == "and") != neg
                kids = [walk(p, neg) for p in node.parts]
                if conj:
                    outs = [[]]
                    for alts in kids:
                        outs = [a + b for a in outs for b in alts]
                        if len(outs) > DNF_LIMIT:
                            return [[]]
                    return outs
                outs = []
                for alts in kids:
                    outs.extend(alts)
                if len(outs) > DNF_LIMIT:
                    return [[]]
                return outs
            if isinstance(node, Cmp):
                return leaf(node, neg)
            return [[]]  # bare expression: inference rejects; be permissive

        return walk(cond, negate)

    def eval_cond_obligations(self, state, cond, loc, insertion):
        for leaf_cmp in _cond_cmps(cond):
            self.eval_expr(state, leaf_cmp.left, loc, insertion)
            self.eval_expr(state, leaf_cmp.right, loc, insertion)

    # -- statements -----------------------------------------------------------

    def exec_block(self, states, body, path):
        for i, s in enumerate(body):
            nxt = []
            for st in states:
                nxt.extend(self.exec_stmt(st, s, path, i))
            states = nxt
            if not states:
                break
        return states

    def exec_stmt(self, state, s, path, index):
        before = Insertion("before", path, index)
        if isinstance(s, Assign):
            v = self.eval_expr(state, s.expr, s.loc, before)
            state.store[s.target] = v
            return [state]
        if isinstance(s, GAssign):
            v = self.eval_expr(state, s.expr, s.loc, before)
            if s.slot not in state.perms:
                ob = Obligation(Acc(s.slot, s.loc), s.loc, "access")
                if state.imprecise:
                    self._residual(ob, Acc(s.slot, s.loc), before)
                    state.perms.add(s.slot)
                else:
                    raise StaticErrorExc(ob, "unprovable")
            state.heap[s.slot] = v
            self._invalidate_facts(state)
            return [state]
        if isinstance(s, If):
            self.eval_cond_obligations(state, s.cond, s.loc, before)
            out = []
            for alt in self.cond_alternatives(state, s.cond, s.loc, before):
                st = state.clone()
                st.path.extend(alt)
                if check_sat(st.path) == "unsat":
                    continue
                out.extend(self.exec_block([st], s.then, path + (index, "then")))
            for alt in self.cond_alternatives(state, s.cond, s.loc, before, negate=True):
                st = state.clone()
                st.path.extend(alt)
                if check_sat(st.path) == "unsat":
                    continue
                if s.orelse:
                    out.extend(self.exec_block([st], s.orelse, path + (index, "else")))
                else:
                    out.append(st)
            return out
        if isinstance(s, While):
            return self.exec_while(state, s, path, index, before)
        if isinstance(s, Call):
            return self.exec_call(state, s, before)
        if isinstance(s, Return):
            result = None
            if s.expr is not None:
                result = self.eval_expr(state, s.expr, s.loc, before)
            self.exits.append((state, result))
            return []
        if isinstance(s, AssertStmt):
            self.consume(state, s.formula, s.loc, before, "assert")
            return [state]
        if isinstance(s, Check):
            return [state]  # woven checks carry no static content
        raise TypeError(f"not a statement: {s!r}")

    def exec_while(self, state, s: While, path, index, before):
        inv = s.invariant
        self.eval_cond_obligations(state, s.cond, s.loc, before)
        self.consume(state, inv, s.loc, before, "loop-invariant")
        # havoc loop-modified locals and owned written globals
        for name in sorted(assigned_locals(s.body)):
            state.store[name] = self.fresh(name)
        for slot in sorted(assigned_globals(s.body)):
            if slot in state.perms:
                state.heap[slot] = self.fresh(slot)
        self._invalidate_facts(state)
        body_path = path + (index, "body")
        end_insertion = Insertion("before", body_path, len(s.body))
        # one symbolic body pass: invariant /\ condition
        for alt in self.cond_alternatives(state, s.cond, s.loc, before):
            st = state.clone()
            self.produce(st, inv, on_duplicate="keep")
            st.path.extend(alt)
            if check_sat(st.path) == "unsat":
                continue
            for exit_st in self.exec_block([st], s.body, body_path):
                self.eval_cond_obligations(exit_st, s.cond, s.loc, end_insertion)
                self.consume(exit_st, inv, s.loc, end_insertion, "loop-invariant")
        # after the loop: invariant /\ not condition
        out = []
        for alt in self.cond_alternatives(state, s.cond, s.loc, before, negate=True):
            st = state.clone()
            self.produce(st, inv, on_duplicate="keep")
            st.path.extend(alt)
            if check_sat(st.path) == "unsat":
                continue
            out.append(st)
        return out

    def exec_call(self, state, s: Call, before):
        callee_c = self.program.contract(s.contract)
        callee_m = callee_c.method(s.method)
        arg_vals = [self.eval_expr(state, a, s.loc, before) for a in s.args]
        if callee_c.extern:
            requires, ensures = Formula(imprecise=True), Formula(imprecise=True)
        else:
            requires, ensures = callee_m.spec.requires, callee_m.spec.ensures
        internal = callee_c.name == self.contract.name
        bindings = {p: v for (p, _), v in zip(callee_m.params, arg_vals)}
        payload_subst = {p: a for (p, _), a in zip(callee_m.params, s.args)}
        saved_contract = self.contract
        try:
            # consume the callee precondition in the callee's namespace; for
            # cross-contract calls its acc atoms are settled by the VM entry
            # protocol, not by the caller
            self.contract = callee_c if not internal else self.contract
            if internal:
                self.consume(state, requires, s.loc, before, "precondition",
                             bindings_extra=bindings, payload_subst=payload_subst)
            else:
                self.contract = saved_contract
                self.consume(state, _drop_acc(requires), s.loc, before, "precondition",
                             bindings_extra=_cross_bindings(self, state, requires, bindings),
                             payload_subst=payload_subst, skip_cross_acc=True)
        finally:
            self.contract = saved_contract
        # re-entrancy may have run: havoc every global value, keep permissions
        pre_call = dict(state.heap)
        for slot in list(state.heap):
            state.heap[slot] = self.fresh(slot)
        self._invalidate_facts(state)
        result_sym = None
        if s.target is not None:
            result_sym = self.fresh("ret")
        produce_bindings = dict(bindings)
        if result_sym is not None:
            produce_bindings["result"] = result_sym
        for slot, val in pre_call.items():
            produce_bindings[f"old({slot})"] = val
        if internal:
            self.produce(state, ensures, bindings_extra=produce_bindings, on_duplicate="keep")
        else:
            if ensures.imprecise:
                state.imprecise = True
            # cross-contract postconditions talk about foreign state; only the
            # imprecision marker is usable by the caller
        if s.target is not None:
            state.store[s.target] = result_sym
        return [state]

    def _invalidate_facts(self, state):
        # predicate facts may read global state; drop them on any heap change
        pred_reads = {}
        from .lang import predicate_read_cache
        pred_reads = predicate_read_cache(self.contract)
        state.facts = {f for f in state.facts if not pred_reads.get(f[0], set())}

    # -- top level ------------------------------------------------------------

    def run(self):
        m = self.method
        report = MethodReport(self.contract.name, m.name, Status.VERIFIED)
        state = SymState()
        for p, _ in m.params:
            state.store[p] = self.fresh(p)
        try:
            self.produce(state, m.spec.requires)
            state.old = dict(state.heap)
            if check_sat(state.path) == "unsat":
                self.warnings.append(
                    f"precondition of {m.name} is unsatisfiable; the method verifies vacuously")
                report.status = Status.VERIFIED
                report.warnings = self.warnings
                return report
            falls = self.exec_block([state], m.body, ())
            for st in falls:
                self.exits.append((st, None))
            for st, result in self.exits:
                if result is not None:
                    st.store["%result"] = result
                self.consume(st, m.spec.ensures, m.spec.ensures.loc or m.loc,
                             Insertion("exit"), "postcondition")
        except StaticErrorExc as e:
            report.status = Status.STATIC_ERROR
            report.diagnostics.append((e.obligation, e.reason))
            report.warnings = self.warnings
            return report
        # ties at one insertion point keep discovery order, which follows
        # evaluation order (e.g. argument obligations before the callee's
        # precondition at a call site)
        ordered = [r for _, r in sorted(
            enumerate(self.residuals.values()),
            key=lambda item: item[1].insertion.sort_key() + (item[0],))]
        report.residuals = ordered
        report.status = Status.VERIFIED_WITH_RESIDUALS if ordered else Status.VERIFIED
        report.warnings = self.warnings
        return report


def expr_to_linexpr_in(mv: MethodVerifier, state, e):
    """Expression value in a state without emitting obligations (conditions
    are branched on, not asserted)."""
    if isinstance(e, IntLit):
        return LinExpr.lit(e.value)
    if isinstance(e, Name):
        if e.scope == "global" or (e.scope is None and e.name in mv.contract.globals):
            return state.heap.get(e.name, NONLINEAR) if e.name in state.perms else NONLINEAR
        v = state.store.get(e.name)
        return v if v is not None else NONLINEAR
    if isinstance(e, BinOp):
        l = expr_to_linexpr_in(mv, state, e.left)
        r = expr_to_linexpr_in(mv, state, e.right)
        if l is NONLINEAR or r is NONLINEAR:
            return NONLINEAR
        if e.op == "+":
            return l.add(r)
        if e.op == "-":
            return l.sub(r)
        if e.op == "*":
            if l.is_const:
                return r.scale(l.const)
            if r.is_const:
                return l.scale(r.const)
        return NONLINEAR
    return NONLINEAR


def _cond_cmps(cond):
    if isinstance(cond, Cmp):
        yield cond
    elif isinstance(cond, BoolOp):
        for p in cond.parts:
            yield from _cond_cmps(p)
    elif isinstance(cond, NotOp):
        yield from _cond_cmps(cond.operand)


def _flatten_conj(node):
    """Flatten an and-tree into its parts; None if it contains or/not."""
    if isinstance(node, BoolOp):
        if node.op != "and":
            return None
        out = []
        for p in node.parts:
            sub = _flatten_conj(p)
            if sub is None:
                return None
            out.extend(sub)
        return out
    if isinstance(node, NotOp):
        return None
    return [node]


def _subst_expr(e, subst):
    if isinstance(e, Name) and e.name in subst:
        return subst[e.name]
    if isinstance(e, BinOp):
        return BinOp(e.op, _subst_expr(e.left, subst), _subst_expr(e.right, subst), e.loc)
    return e


def _subst_atom(atom, subst):
    if isinstance(atom, Cmp):
        return Cmp(atom.op, _subst_expr(atom.left, subst), _subst_expr(atom.right, subst), atom.loc)
    if isinstance(atom, PredUse):
        return PredUse(atom.name, tuple(_subst_expr(a, subst) for a in atom.args), atom.loc)
    return atom


def _drop_acc(f: Formula) -> Formula:
    return Formula(f.imprecise, tuple(a for a in f.atoms if not isinstance(a, Acc)), f.loc)


def _cross_bindings(mv, state, requires, bindings):
    # foreign globals read by the callee's precondition are opaque to the
    # caller: bind them to fresh symbols so the atoms stay well-defined
    out = dict(bindings)
    return out


# ---------------------------------------------------------------------------
# Public operations


def verify_method(method: Method, program: Program, contract: Contract = None,
                  stats: ProverStats = None) -> MethodReport:
    if contract is None:
        for c in program.contracts:
            if method in c.methods:
                contract = c
                break
    stats = stats or ProverStats()
    return MethodVerifier(program, contract, method, stats).run()


def verify_program(program: Program) -> VerificationReport:
    stats = ProverStats()
    reports = []
    counter = 0
    for c in program.contracts:
        if c.extern:
            continue
        for m in c.methods:
            rep = verify_method(m, program, c, stats)
            for r in rep.residuals:
                r.id = f"c{counter}"
                counter += 1
            reports.append(rep)
    return VerificationReport(reports, program_digest(program), stats)


# direct-use wrappers for the produce/consume duals

def produce(state: SymState, f: Formula, program: Program, contract: Contract,
            method: Method = None) -> SymState:
    mv = MethodVerifier(program, contract, method or contract.methods[0], ProverStats())
    return mv.produce(state, f)


def consume(state: SymState, f: Formula, loc, program: Program, contract: Contract,
            method: Method = None):
    mv = MethodVerifier(program, contract, method or contract.methods[0], ProverStats())
    mv.consume(state, f, loc, Insertion("before", (), 0), "assert")
    return state, list(mv.residuals.values())
