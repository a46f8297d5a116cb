"""Core model for GCL: contract/method AST, specification formulas with
imprecision, and the well-formedness rules shared by every pipeline stage.

All node types are immutable; operations here are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

UINT_MAX = 2**64 - 1

RELOPS = ("==", "!=", "<=", "<", ">=", ">")
ARITH_OPS = ("+", "-", "*", "/", "%")


@dataclass(frozen=True)
class SourceLoc:
    file: str = "<mem>"
    line: int = 0
    col: int = 0
    path: tuple = ()

    def __str__(self):
        return f"{self.file}:{self.line}:{self.col}"


NOLOC = SourceLoc()


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class IntLit:
    value: int
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class Name:
    name: str
    # scope is None until resolution; then "local" | "param" | "global"
    scope: Optional[str] = None
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class Old:
    slot: str
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class Result:
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    loc: SourceLoc = NOLOC


Expr = Union[IntLit, Name, Old, Result, BinOp]


# ---------------------------------------------------------------------------
# Formula atoms and conditions


@dataclass(frozen=True)
class Cmp:
    op: str
    left: Expr
    right: Expr
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class Acc:
    slot: str
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class PredUse:
    name: str
    args: tuple = ()
    loc: SourceLoc = NOLOC


Atom = Union[Cmp, Acc, PredUse]


@dataclass(frozen=True)
class QMark:
    """Imprecision marker; legal only transiently while parsing predicate
    bodies, where well-formedness then rejects it."""

    loc: SourceLoc = NOLOC


# Boolean combinations: statement conditions use Cmp (or a bare Expr, which
# type inference rejects) as leaves; predicate bodies use Cmp/PredUse/QMark.


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    parts: tuple
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class NotOp:
    operand: "CondT"
    loc: SourceLoc = NOLOC


CondT = Union[Cmp, BoolOp, NotOp, Expr]


@dataclass(frozen=True)
class Formula:
    imprecise: bool = False
    atoms: tuple = ()
    loc: SourceLoc = NOLOC

    @property
    def is_trivial(self):
        return not self.imprecise and not self.atoms


TRUE = Formula()
UNKNOWN_FORMULA = Formula(imprecise=True)


@dataclass(frozen=True)
class Spec:
    requires: Formula = TRUE
    ensures: Formula = TRUE


# ---------------------------------------------------------------------------
# Statements


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class GAssign:
    slot: str
    expr: Expr
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class If:
    cond: CondT
    then: tuple
    orelse: tuple = ()
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class While:
    cond: CondT
    invariant: Formula
    body: tuple
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class Call:
    contract: str
    method: str
    args: tuple = ()
    target: Optional[str] = None  # result binding
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class Return:
    expr: Expr = None
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class AssertStmt:
    formula: Formula
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class Check:
    """Woven run-time check; produced by the weaver (or read back from woven
    source), never by parsing a plain program."""

    check_id: str
    payload: Atom
    loc: SourceLoc = NOLOC


Stmt = Union[Assign, GAssign, If, While, Call, Return, AssertStmt, Check]


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class Predicate:
    name: str
    params: tuple  # parameter names, all uint64
    body: CondT  # and/or tree over Cmp / PredUse (QMark rejected by wf)
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class Method:
    name: str
    params: tuple  # of (name, "uint64")
    returns: bool
    spec: Spec
    body: tuple
    opaque: bool = False
    loc: SourceLoc = NOLOC


@dataclass(frozen=True)
class Contract:
    name: str
    globals: tuple = ()
    predicates: tuple = ()
    methods: tuple = ()
    extern: bool = False
    loc: SourceLoc = NOLOC

    def method(self, name):
        for m in self.methods:
            if m.name == name:
                return m
        return None

    def predicate(self, name):
        for p in self.predicates:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class Program:
    contracts: tuple = ()

    def contract(self, name):
        for c in self.contracts:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class Diagnostic:
    loc: SourceLoc
    message: str

    def __str__(self):
        return f"{self.loc}: {self.message}"


class ResolutionError(Exception):
    def __init__(self, loc, message):
        super().__init__(f"{loc}: {message}")
        self.loc = loc


# ---------------------------------------------------------------------------
# Formula operations


def normalize_formula(f: Formula) -> Formula:
    """Hoist imprecision to a single leading marker and drop duplicate acc
    atoms; atom order is otherwise preserved.  Idempotent."""
    seen_acc = set()
    atoms = []
    for a in f.atoms:
        if isinstance(a, Acc):
            if a.slot in seen_acc:
                continue
            seen_acc.add(a.slot)
        atoms.append(a)
    return Formula(imprecise=f.imprecise, atoms=tuple(atoms), loc=f.loc)


def expr_global_reads(e: Expr, global_names=None):
    """Slot names read by an expression (old(G) counts as reading G)."""
    out = []

    def walk(x):
        if isinstance(x, Name):
            if x.scope == "global" or (
                global_names is not None and x.scope is None and x.name in global_names
            ):
                out.append(x.name)
        elif isinstance(x, Old):
            out.append(x.slot)
        elif isinstance(x, BinOp):
            walk(x.left)
            walk(x.right)

    walk(e)
    return out


def expr_local_names(e: Expr):
    out = []

    def walk(x):
        if isinstance(x, Name) and x.scope != "global":
            out.append(x.name)
        elif isinstance(x, BinOp):
            walk(x.left)
            walk(x.right)

    walk(e)
    return out


def predicate_global_reads(ctx: Contract):
    """Per-predicate sets of globals read, closed under recursion."""
    reads = {p.name: set() for p in ctx.predicates}

    def direct(node, acc):
        if isinstance(node, Cmp):
            acc.update(expr_global_reads(node.left, set(ctx.globals)))
            acc.update(expr_global_reads(node.right, set(ctx.globals)))
        elif isinstance(node, PredUse):
            for a in node.args:
                acc.update(expr_global_reads(a, set(ctx.globals)))
        elif isinstance(node, BoolOp):
            for part in node.parts:
                direct(part, acc)
        elif isinstance(node, NotOp):
            direct(node.operand, acc)

    def pred_deps(node, acc):
        if isinstance(node, PredUse):
            acc.add(node.name)
        elif isinstance(node, BoolOp):
            for part in node.parts:
                pred_deps(part, acc)
        elif isinstance(node, NotOp):
            pred_deps(node.operand, acc)

    deps = {}
    for p in ctx.predicates:
        direct(p.body, reads[p.name])
        d = set()
        pred_deps(p.body, d)
        deps[p.name] = d
    changed = True
    while changed:
        changed = False
        for p in ctx.predicates:
            for q in deps[p.name]:
                if q in reads and not reads[q] <= reads[p.name]:
                    reads[p.name] |= reads[q]
                    changed = True
    return reads


def free_globals(f: Formula, global_names=None, pred_reads=None):
    """Globals read by precise atoms plus those under acc."""
    out = set()
    for a in f.atoms:
        if isinstance(a, Acc):
            out.add(a.slot)
        elif isinstance(a, Cmp):
            out.update(expr_global_reads(a.left, global_names))
            out.update(expr_global_reads(a.right, global_names))
        elif isinstance(a, PredUse):
            for arg in a.args:
                out.update(expr_global_reads(arg, global_names))
            if pred_reads and a.name in pred_reads:
                out.update(pred_reads[a.name])
    return out


def formula_acc_slots(f: Formula):
    return [a.slot for a in f.atoms if isinstance(a, Acc)]


def is_self_framed(f: Formula, ctx: Contract, extra_acc=()):
    """Every global read by a comparison or predicate atom must be covered by
    an acc in the formula itself (or, for postconditions and loop invariants,
    by an acc granted elsewhere via extra_acc)."""
    have = set(formula_acc_slots(f)) | set(extra_acc)
    gnames = set(ctx.globals)
    pred_reads = predicate_read_cache(ctx)
    for a in f.atoms:
        reads = set()
        if isinstance(a, Cmp):
            reads.update(expr_global_reads(a.left, gnames))
            reads.update(expr_global_reads(a.right, gnames))
        elif isinstance(a, PredUse):
            for arg in a.args:
                reads.update(expr_global_reads(arg, gnames))
            reads.update(pred_reads.get(a.name, set()))
        if not reads <= have:
            return False
    return True


_PRED_READ_CACHE = {}


def predicate_read_cache(ctx: Contract):
    key = id(ctx)
    hit = _PRED_READ_CACHE.get(key)
    if hit is None:
        hit = predicate_global_reads(ctx)
        _PRED_READ_CACHE[key] = hit
    return hit


# ---------------------------------------------------------------------------
# Well-formedness


def _walk_exprs(node):
    if isinstance(node, BinOp):
        yield node
        yield from _walk_exprs(node.left)
        yield from _walk_exprs(node.right)
    else:
        yield node


def _cond_leaves(c):
    if isinstance(c, (BoolOp,)):
        for p in c.parts:
            yield from _cond_leaves(p)
    elif isinstance(c, NotOp):
        yield from _cond_leaves(c.operand)
    else:
        yield c


def _formula_exprs(f: Formula):
    for a in f.atoms:
        if isinstance(a, Cmp):
            yield from _walk_exprs(a.left)
            yield from _walk_exprs(a.right)
        elif isinstance(a, PredUse):
            for arg in a.args:
                yield from _walk_exprs(arg)


def _stmts_recursive(body):
    for s in body:
        yield s
        if isinstance(s, If):
            yield from _stmts_recursive(s.then)
            yield from _stmts_recursive(s.orelse)
        elif isinstance(s, While):
            yield from _stmts_recursive(s.body)


def well_formed_program(p: Program):
    """Structural invariants beyond what parsing and resolution enforce.
    Returns diagnostics; the program is well-formed iff the list is empty."""
    diags = []

    def check_expr_ranges(e, loc):
        for node in _walk_exprs(e):
            if isinstance(node, IntLit) and not (0 <= node.value <= UINT_MAX):
                diags.append(Diagnostic(node.loc or loc, "integer literal out of uint64 range"))

    def check_no_spec_markers(f: Formula, where, loc):
        # old()/result placement
        for node in _formula_exprs(f):
            if isinstance(node, Old) and where != "ensures":
                diags.append(Diagnostic(node.loc, "old(...) is only allowed in ensures"))
            if isinstance(node, Result) and where != "ensures":
                diags.append(Diagnostic(node.loc, "result is only allowed in ensures"))

    for c in p.contracts:
        if len(set(c.globals)) != len(c.globals):
            diags.append(Diagnostic(c.loc, f"duplicate global declaration in {c.name}"))
        for pred in c.predicates:
            def scan(node):
                if isinstance(node, QMark):
                    diags.append(Diagnostic(node.loc, f"predicate {pred.name} must be precise: '?' not allowed in its body"))
                elif isinstance(node, Acc):
                    diags.append(Diagnostic(node.loc, f"acc(...) not allowed in predicate {pred.name} body"))
                elif isinstance(node, BoolOp):
                    for part in node.parts:
                        scan(part)
                elif isinstance(node, NotOp):
                    scan(node.operand)
            scan(pred.body)
        for m in c.methods:
            req = m.spec.requires
            ens = m.spec.ensures
            if normalize_formula(req) != req or normalize_formula(ens) != ens:
                diags.append(Diagnostic(m.loc, f"specification of {m.name} is not normalized"))
            check_no_spec_markers(req, "requires", m.loc)
            for node in _formula_exprs(ens):
                if isinstance(node, Result) and not m.returns:
                    diags.append(Diagnostic(node.loc, f"ensures of {m.name} mentions result but the method returns nothing"))
            if c.extern and not (req == UNKNOWN_FORMULA and ens == UNKNOWN_FORMULA):
                if not (req.imprecise and not req.atoms and ens.imprecise and not ens.atoms):
                    diags.append(Diagnostic(m.loc, f"extern method {c.name}.{m.name} may not declare specifications beyond '?'"))
            if not is_self_framed(req, c):
                diags.append(Diagnostic(req.loc, f"requires of {m.name} is not self-framed"))
            req_acc = formula_acc_slots(req)
            if not is_self_framed(ens, c, extra_acc=req_acc):
                diags.append(Diagnostic(ens.loc, f"ensures of {m.name} is not self-framed"))
            if not m.opaque and not m.body:
                diags.append(Diagnostic(m.loc, f"method {m.name} has an empty body"))
            if m.opaque and not c.extern:
                diags.append(Diagnostic(m.loc, f"only extern methods may be opaque ({m.name})"))
            for e in _formula_exprs(req):
                if isinstance(e, IntLit):
                    check_expr_ranges(e, m.loc)
            returns_somewhere = False
            for s in _stmts_recursive(m.body):
                if isinstance(s, (Assign, GAssign, Return)):
                    if isinstance(s, Return):
                        returns_somewhere = True
                        if m.returns and s.expr is None:
                            diags.append(Diagnostic(s.loc, "return without a value in a method returning uint64"))
                        if not m.returns and s.expr is not None:
                            diags.append(Diagnostic(s.loc, "return with a value in a method returning nothing"))
                    e = s.expr
                    if e is not None:
                        check_expr_ranges(e, s.loc)
                elif isinstance(s, Call):
                    for a in s.args:
                        check_expr_ranges(a, s.loc)
                elif isinstance(s, While):
                    inv = s.invariant
                    if normalize_formula(inv) != inv:
                        diags.append(Diagnostic(s.loc, "loop invariant is not normalized"))
                    check_no_spec_markers(inv, "invariant", s.loc)
                    if not is_self_framed(inv, c, extra_acc=req_acc):
                        diags.append(Diagnostic(inv.loc, "loop invariant is not self-framed"))
                elif isinstance(s, AssertStmt):
                    check_no_spec_markers(s.formula, "assert", s.loc)
                    if not is_self_framed(s.formula, c, extra_acc=req_acc):
                        diags.append(Diagnostic(s.loc, "asserted formula is not self-framed"))
            if m.returns and not m.opaque and not _always_returns(m.body):
                diags.append(Diagnostic(m.loc, f"method {m.name} may fall off the end without returning a value"))
            _ = returns_somewhere
    return diags


def _always_returns(body):
    for s in body:
        if isinstance(s, Return):
            return True
        if isinstance(s, If) and s.orelse and _always_returns(s.then) and _always_returns(s.orelse):
            return True
    return False


# ---------------------------------------------------------------------------
# Misc helpers shared downstream


def assigned_locals(body):
    out = set()
    for s in _stmts_recursive(body):
        if isinstance(s, Assign):
            out.add(s.target)
        elif isinstance(s, Call) and s.target:
            out.add(s.target)
    return out


def assigned_globals(body):
    out = set()
    for s in _stmts_recursive(body):
        if isinstance(s, GAssign):
            out.add(s.slot)
    return out


def stmts_recursive(body):
    return _stmts_recursive(body)
