"""Recursive-descent parser for GCL token streams.

Parsing a plain program yields zero Check statements; woven source (with `#!`
directives) round-trips through the same grammar, carrying its boundary
residual entries alongside the program.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lang import (
    Acc, Assign, AssertStmt, BinOp, BoolOp, Call, Check, Cmp, Contract,
    Formula, If, IntLit, Method, Name, NotOp, Old, PredUse, Predicate,
    Program, QMark, Result, Return, SourceLoc, Spec, Stmt, TRUE,
    UNKNOWN_FORMULA, While, normalize_formula,
)
from .lexer import Token

RELOPS = {"==", "!=", "<=", "<", ">=", ">"}


class ParseError(Exception):
    def __init__(self, loc, message):
        super().__init__(f"{loc}: {message}")
        self.loc = loc


@dataclass
class BoundaryResidual:
    """A `#! entry/exit atom @id;` directive read back from woven source."""

    kind: str  # "entry" | "exit"
    payload: object
    check_id: str


@dataclass
class ParsedUnit:
    program: Program
    boundary: dict = field(default_factory=dict)  # (contract, method) -> [BoundaryResidual]


class _Parser:
    def __init__(self, tokens):
        self.toks = list(tokens)
        self.pos = 0
        self.boundary = {}

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead=0):
        i = self.pos + ahead
        if i < len(self.toks):
            return self.toks[i]
        loc = self.toks[-1].loc if self.toks else SourceLoc()
        return Token("EOF", "", loc)

    def next(self):
        t = self.peek()
        self.pos += 1
        return t

    def at(self, kind, lexeme=None):
        t = self.peek()
        return t.kind == kind and (lexeme is None or t.lexeme == lexeme)

    def at_kw(self, word):
        return self.at("KW", word)

    def expect(self, kind, lexeme=None):
        t = self.peek()
        if t.kind != kind or (lexeme is not None and t.lexeme != lexeme):
            want = lexeme or kind
            raise ParseError(t.loc, f"expected {want!r}, found {t.lexeme or t.kind!r}")
        return self.next()

    def expect_kw(self, word):
        return self.expect("KW", word)

    def expect_sym(self, sym):
        return self.expect("SYM", sym)

    def expect_ident(self):
        t = self.peek()
        if t.kind != "IDENT":
            raise ParseError(t.loc, f"expected identifier, found {t.lexeme or t.kind!r}")
        return self.next()

    # -- program structure -------------------------------------------------

    def parse_program(self):
        contracts = []
        while not self.at("EOF"):
            contracts.append(self.parse_contract())
        if not contracts:
            t = self.peek()
            raise ParseError(t.loc, "expected at least one contract")
        return ParsedUnit(Program(tuple(contracts)), self.boundary)

    def parse_contract(self):
        extern = False
        loc = self.peek().loc
        if self.at_kw("extern"):
            self.next()
            extern = True
        self.expect_kw("contract")
        name = self.expect_ident().lexeme
        self.expect_sym(":")
        self.expect("INDENT")
        globals_, predicates, methods = [], [], []
        while not self.at("DEDENT") and not self.at("EOF"):
            if self.at("SPEC"):
                marker = self.peek(1)
                if marker.kind == "KW" and marker.lexeme == "global":
                    self.next(); self.next()
                    globals_.append(self.expect_ident().lexeme)
                    self.expect_sym(";")
                    continue
                if marker.kind == "KW" and marker.lexeme == "predicate":
                    predicates.append(self.parse_predicate())
                    continue
                raise ParseError(marker.loc, "expected 'global' or 'predicate' after '#@' at contract level")
            if self.at_kw("method"):
                methods.append(self.parse_method(name))
                continue
            t = self.peek()
            raise ParseError(t.loc, f"expected contract item, found {t.lexeme or t.kind!r}")
        self.expect("DEDENT")
        if not globals_ and not predicates and not methods:
            raise ParseError(loc, f"contract {name} has an empty body")
        return Contract(name, tuple(globals_), tuple(predicates), tuple(methods), extern, loc)

    def parse_predicate(self):
        loc = self.expect("SPEC").loc
        self.expect_kw("predicate")
        name = self.expect_ident().lexeme
        self.expect_sym("(")
        params = []
        if not self.at("SYM", ")"):
            params.append(self.expect_ident().lexeme)
            while self.at("SYM", ","):
                self.next()
                params.append(self.expect_ident().lexeme)
        self.expect_sym(")")
        self.expect_sym("=")
        body = self.parse_bool(self.parse_pred_leaf)
        self.expect_sym(";")
        return Predicate(name, tuple(params), body, loc)

    def parse_method(self, contract_name):
        loc = self.expect_kw("method").loc
        name = self.expect_ident().lexeme
        self.expect_sym("(")
        params = []
        if not self.at("SYM", ")"):
            params.append(self.parse_param())
            while self.at("SYM", ","):
                self.next()
                params.append(self.parse_param())
        self.expect_sym(")")
        returns = False
        if self.at("SYM", "->"):
            self.next()
            self.expect_kw("uint64")
            returns = True
        self.expect_sym(":")
        self.expect("INDENT")
        requires, ensures = None, None
        while self.at("SPEC") and self.peek(1).lexeme in ("requires", "ensures"):
            self.next()
            which = self.next().lexeme
            f = self.parse_formula()
            self.expect_sym(";")
            if which == "requires":
                requires = f if requires is None else _conjoin(requires, f)
            else:
                ensures = f if ensures is None else _conjoin(ensures, f)
        residuals = []
        while self.at("BANG") and self.peek(1).lexeme in ("entry", "exit"):
            self.next()
            kind = self.next().lexeme
            payload = self.parse_formula_term()
            cid = None
            if self.at("SYM", "@"):
                self.next()
                cid = self.expect_ident().lexeme
            self.expect_sym(";")
            residuals.append(BoundaryResidual(kind, payload, cid))
        if residuals:
            self.boundary[(contract_name, name)] = residuals
        opaque = False
        body = []
        if self.at_kw("opaque"):
            self.next()
            self.expect_sym(";")
            opaque = True
        else:
            while not self.at("DEDENT") and not self.at("EOF"):
                body.append(self.parse_stmt())
            if not body:
                raise ParseError(loc, f"method {name} requires a body")
        self.expect("DEDENT")
        spec = Spec(
            requires=normalize_formula(requires) if requires is not None else UNKNOWN_FORMULA,
            ensures=normalize_formula(ensures) if ensures is not None else UNKNOWN_FORMULA,
        )
        return Method(name, tuple(params), returns, spec, tuple(body), opaque, loc)

    def parse_param(self):
        name = self.expect_ident().lexeme
        self.expect_sym(":")
        self.expect_kw("uint64")
        return (name, "uint64")

    # -- statements --------------------------------------------------------

    def parse_block(self):
        self.expect("INDENT")
        stmts = []
        while not self.at("DEDENT") and not self.at("EOF"):
            stmts.append(self.parse_stmt())
        self.expect("DEDENT")
        if not stmts:
            t = self.peek()
            raise ParseError(t.loc, "empty block")
        return tuple(stmts)

    def parse_stmt(self):
        t = self.peek()
        if t.kind == "SPEC":
            marker = self.peek(1)
            if marker.lexeme == "assert":
                self.next(); self.next()
                f = self.parse_formula()
                self.expect_sym(";")
                return AssertStmt(normalize_formula(f), t.loc)
            raise ParseError(marker.loc, f"unexpected specification {marker.lexeme!r} in statement position")
        if t.kind == "BANG":
            marker = self.peek(1)
            if marker.lexeme != "check":
                raise ParseError(marker.loc, "expected 'check' after '#!' in statement position")
            self.next(); self.next()
            payload = self.parse_formula_term()
            self.expect_sym("@")
            cid = self.expect_ident().lexeme
            self.expect_sym(";")
            return Check(cid, payload, t.loc)
        if t.kind == "KW" and t.lexeme == "if":
            self.next()
            cond = self.parse_cond()
            self.expect_sym(":")
            then = self.parse_block()
            orelse = ()
            if self.at_kw("else"):
                self.next()
                self.expect_sym(":")
                orelse = self.parse_block()
            return If(cond, then, orelse, t.loc)
        if t.kind == "KW" and t.lexeme == "while":
            self.next()
            cond = self.parse_cond()
            self.expect_sym(":")
            self.expect("INDENT")
            inv = None
            while self.at("SPEC") and self.peek(1).lexeme == "invariant":
                self.next(); self.next()
                f = self.parse_formula()
                self.expect_sym(";")
                inv = f if inv is None else _conjoin(inv, f)
            body = []
            while not self.at("DEDENT") and not self.at("EOF"):
                body.append(self.parse_stmt())
            self.expect("DEDENT")
            if not body:
                raise ParseError(t.loc, "while loop requires a body")
            invariant = normalize_formula(inv) if inv is not None else UNKNOWN_FORMULA
            return While(cond, invariant, tuple(body), t.loc)
        if t.kind == "KW" and t.lexeme == "return":
            self.next()
            expr = None
            if not self.at("SYM", ";"):
                expr = self.parse_expr()
            self.expect_sym(";")
            return Return(expr, t.loc)
        if t.kind == "KW" and t.lexeme == "call":
            self.next()
            contract, method, args = self.parse_call_tail()
            self.expect_sym(";")
            return Call(contract, method, args, None, t.loc)
        if t.kind == "IDENT":
            target = self.next().lexeme
            self.expect_sym(":=")
            if self.at_kw("call"):
                self.next()
                contract, method, args = self.parse_call_tail()
                self.expect_sym(";")
                return Call(contract, method, args, target, t.loc)
            expr = self.parse_expr()
            self.expect_sym(";")
            return Assign(target, expr, t.loc)
        raise ParseError(t.loc, f"expected statement, found {t.lexeme or t.kind!r}")

    def parse_call_tail(self):
        contract = self.expect_ident().lexeme
        self.expect_sym(".")
        method = self.expect_ident().lexeme
        self.expect_sym("(")
        args = []
        if not self.at("SYM", ")"):
            args.append(self.parse_expr())
            while self.at("SYM", ","):
                self.next()
                args.append(self.parse_expr())
        self.expect_sym(")")
        return contract, method, tuple(args)

    # -- conditions and predicate bodies -----------------------------------

    def parse_cond(self):
        return self.parse_bool(self.parse_cond_leaf)

    def parse_bool(self, leaf):
        return self._parse_or(leaf)

    def _parse_or(self, leaf):
        loc = self.peek().loc
        parts = [self._parse_and(leaf)]
        while self.at_kw("or"):
            self.next()
            parts.append(self._parse_and(leaf))
        return parts[0] if len(parts) == 1 else BoolOp("or", tuple(parts), loc)

    def _parse_and(self, leaf):
        loc = self.peek().loc
        parts = [self._parse_not(leaf)]
        while self.at_kw("and"):
            self.next()
            parts.append(self._parse_not(leaf))
        return parts[0] if len(parts) == 1 else BoolOp("and", tuple(parts), loc)

    def _parse_not(self, leaf):
        if self.at_kw("not"):
            loc = self.next().loc
            return NotOp(self._parse_not(leaf), loc)
        return leaf()

    def parse_cond_leaf(self):
        saved = self.pos
        try:
            e = self.parse_expr()
            if self.peek().lexeme in RELOPS:
                op = self.next().lexeme
                rhs = self.parse_expr()
                return Cmp(op, e, rhs, _eloc(e))
            return e  # bare expression; type inference rejects it
        except ParseError:
            self.pos = saved
        tok = self.expect_sym("(")
        c = self.parse_cond()
        self.expect_sym(")")
        _ = tok
        return c

    def parse_pred_leaf(self):
        t = self.peek()
        if t.kind == "SYM" and t.lexeme == "?":
            self.next()
            return QMark(t.loc)
        if t.kind == "SYM" and t.lexeme == "(":
            saved = self.pos
            try:
                self.next()
                c = self.parse_bool(self.parse_pred_leaf)
                self.expect_sym(")")
                return c
            except ParseError:
                self.pos = saved
        if t.kind == "IDENT" and self.peek(1).lexeme == "(" and t.lexeme != "acc":
            # predicate instance
            name = self.next().lexeme
            self.next()
            args = []
            if not self.at("SYM", ")"):
                args.append(self.parse_expr())
                while self.at("SYM", ","):
                    self.next()
                    args.append(self.parse_expr())
            self.expect_sym(")")
            return PredUse(name, tuple(args), t.loc)
        if t.kind == "IDENT" and t.lexeme == "acc" and self.peek(1).lexeme == "(":
            self.next(); self.next()
            slot = self.expect_ident().lexeme
            self.expect_sym(")")
            return Acc(slot, t.loc)
        e = self.parse_expr()
        op = self.peek()
        if op.lexeme not in RELOPS:
            raise ParseError(op.loc, "expected comparison in predicate body")
        self.next()
        rhs = self.parse_expr()
        return Cmp(op.lexeme, e, rhs, t.loc)

    # -- formulas ----------------------------------------------------------

    def parse_formula(self):
        loc = self.peek().loc
        imprecise = False
        atoms = []
        while True:
            t = self.peek()
            if t.kind == "SYM" and t.lexeme == "?":
                self.next()
                imprecise = True
            elif t.kind == "KW" and t.lexeme == "true":
                self.next()
            else:
                atoms.append(self.parse_formula_term())
            if self.at_kw("and"):
                self.next()
                continue
            break
        return Formula(imprecise, tuple(atoms), loc)

    def parse_formula_term(self):
        t = self.peek()
        if t.kind == "IDENT" and t.lexeme == "acc" and self.peek(1).lexeme == "(":
            self.next(); self.next()
            slot = self.expect_ident().lexeme
            self.expect_sym(")")
            return Acc(slot, t.loc)
        if t.kind == "IDENT" and self.peek(1).lexeme == "(":
            name = self.next().lexeme
            self.next()
            args = []
            if not self.at("SYM", ")"):
                args.append(self.parse_expr())
                while self.at("SYM", ","):
                    self.next()
                    args.append(self.parse_expr())
            self.expect_sym(")")
            return PredUse(name, tuple(args), t.loc)
        left = self.parse_expr()
        op = self.peek()
        if op.lexeme not in RELOPS:
            raise ParseError(op.loc, "expected comparison, acc(...), or predicate instance")
        self.next()
        right = self.parse_expr()
        return Cmp(op.lexeme, left, right, t.loc)

    # -- expressions -------------------------------------------------------

    def parse_expr(self):
        left = self.parse_mul()
        while self.peek().lexeme in ("+", "-") and self.peek().kind == "SYM":
            op = self.next().lexeme
            right = self.parse_mul()
            left = BinOp(op, left, right, _eloc(left))
        return left

    def parse_mul(self):
        left = self.parse_unary()
        while self.peek().lexeme in ("*", "/", "%") and self.peek().kind == "SYM":
            op = self.next().lexeme
            right = self.parse_unary()
            left = BinOp(op, left, right, _eloc(left))
        return left

    def parse_unary(self):
        t = self.peek()
        if t.kind == "INT":
            self.next()
            return IntLit(int(t.lexeme), t.loc)
        if t.kind == "KW" and t.lexeme == "old":
            self.next()
            self.expect_sym("(")
            slot = self.expect_ident().lexeme
            self.expect_sym(")")
            return Old(slot, t.loc)
        if t.kind == "KW" and t.lexeme == "result":
            self.next()
            return Result(t.loc)
        if t.kind == "IDENT":
            self.next()
            return Name(t.lexeme, None, t.loc)
        if t.kind == "SYM" and t.lexeme == "(":
            self.next()
            e = self.parse_expr()
            self.expect_sym(")")
            return e
        raise ParseError(t.loc, f"expected expression, found {t.lexeme or t.kind!r}")


def _eloc(e):
    return getattr(e, "loc", SourceLoc())


def _conjoin(f1: Formula, f2: Formula) -> Formula:
    return Formula(f1.imprecise or f2.imprecise, f1.atoms + f2.atoms, f1.loc)


def parse_program(tokens) -> ParsedUnit:
    return _Parser(tokens).parse_program()
