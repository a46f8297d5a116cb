"""Lexing, parsing, type inference, and name resolution."""

import pytest

from gvc.frontend import InferenceError, WellFormednessError, infer_types, load_source
from gvc.lang import Call, GAssign, If, ResolutionError, While
from gvc.lexer import LexError, lex
from gvc.parser import ParseError, parse_program


class TestLexer:
    def test_spec_comment_line(self):
        toks = [t for t in lex("#@ global Count;\n", "t") if t.kind not in ("INDENT", "DEDENT")]
        assert [t.kind for t in toks] == ["SPEC", "KW", "IDENT", "SYM"]
        assert toks[2].lexeme == "Count"

    def test_empty_file(self):
        assert lex("", "t") == []

    def test_tab_indentation_rejected(self):
        with pytest.raises(LexError):
            lex("contract C:\n\tmethod m():\n", "t")

    def test_plain_comments_skipped(self):
        toks = lex("# just a note\n", "t")
        assert toks == []

    def test_locations(self):
        toks = lex("contract C:\n", "t")
        assert toks[0].loc.line == 1 and toks[0].loc.col == 1


class TestParser:
    def test_sell_structure(self, sell_program):
        assert len(sell_program.contracts) == 1
        c = sell_program.contracts[0]
        assert c.globals == ("Count",)
        assert len(c.methods) == 1
        m = c.methods[0]
        assert len(m.body) == 2
        assert m.spec.requires.imprecise
        assert not m.spec.ensures.imprecise

    def test_missing_spec_defaults_to_unknown(self):
        src = (
            "contract C:\n"
            "  method m(x: uint64):\n"
            "    y := x;\n"
        )
        program, _ = load_source(src, "t.gcl")
        spec = program.contracts[0].methods[0].spec
        assert spec.requires.imprecise and spec.requires.atoms == ()
        assert spec.ensures.imprecise and spec.ensures.atoms == ()

    def test_multiple_requires_lines_conjoin(self):
        src = (
            "contract C:\n"
            "  method m(x: uint64):\n"
            "    #@ requires x >= 1;\n"
            "    #@ requires x <= 9;\n"
            "    #@ ensures ?;\n"
            "    y := x;\n"
        )
        program, _ = load_source(src, "t.gcl")
        assert len(program.contracts[0].methods[0].spec.requires.atoms) == 2

    def test_while_invariant_inside_body(self):
        src = (
            "contract C:\n"
            "  method m(n: uint64):\n"
            "    #@ requires ?;\n"
            "    #@ ensures ?;\n"
            "    i := 0;\n"
            "    while i < n:\n"
            "      #@ invariant ? and i <= n;\n"
            "      i := i + 1;\n"
        )
        program, _ = load_source(src, "t.gcl")
        loop = program.contracts[0].methods[0].body[1]
        assert isinstance(loop, While)
        assert loop.invariant.imprecise and len(loop.invariant.atoms) == 1

    def test_boundary_directives(self):
        src = (
            "contract C:\n"
            "  #@ global G;\n"
            "  method m():\n"
            "    #@ requires ? and acc(G);\n"
            "    #@ ensures ?;\n"
            "    #! exit G >= 1 @c3;\n"
            "    G := 1;\n"
        )
        _, boundary = load_source(src, "t.gcl")
        [entry] = boundary[("C", "m")]
        assert entry.kind == "exit" and entry.check_id == "c3"

    def test_parse_error_has_location(self):
        with pytest.raises(ParseError):
            load_source("contract C\n", "t.gcl")


class TestInference:
    def test_use_before_assignment(self):
        src = (
            "contract C:\n"
            "  method m():\n"
            "    #@ requires ?;\n"
            "    #@ ensures ?;\n"
            "    y := z;\n"
        )
        with pytest.raises(InferenceError):
            load_source(src, "t.gcl")

    def test_branch_assignment_not_definite(self):
        src = (
            "contract C:\n"
            "  method m(x: uint64):\n"
            "    #@ requires ?;\n"
            "    #@ ensures ?;\n"
            "    if x >= 1:\n"
            "      y := 1;\n"
            "    z := y;\n"
        )
        with pytest.raises(InferenceError):
            load_source(src, "t.gcl")

    def test_bare_expression_condition_rejected(self):
        src = (
            "contract C:\n"
            "  method m(x: uint64):\n"
            "    #@ requires ?;\n"
            "    #@ ensures ?;\n"
            "    if x:\n"
            "      y := 1;\n"
        )
        with pytest.raises(InferenceError) as e:
            load_source(src, "t.gcl")
        assert "condition" in str(e.value)


class TestResolution:
    def test_global_assignment_becomes_gassign(self, sell_program):
        body = sell_program.contracts[0].methods[0].body
        assert isinstance(body[1], GAssign) and body[1].slot == "Count"

    def test_unknown_name_in_spec(self):
        src = (
            "contract C:\n"
            "  method m():\n"
            "    #@ requires mystery >= 1;\n"
            "    #@ ensures ?;\n"
            "    y := 1;\n"
        )
        with pytest.raises(ResolutionError):
            load_source(src, "t.gcl")

    def test_assignment_to_parameter(self):
        src = (
            "contract C:\n"
            "  method m(x: uint64):\n"
            "    #@ requires ?;\n"
            "    #@ ensures ?;\n"
            "    x := 1;\n"
        )
        with pytest.raises(ResolutionError):
            load_source(src, "t.gcl")

    def test_call_arity_checked(self):
        src = (
            "contract C:\n"
            "  method a(x: uint64):\n"
            "    #@ requires ?;\n"
            "    #@ ensures ?;\n"
            "    y := x;\n"
            "  method b():\n"
            "    #@ requires ?;\n"
            "    #@ ensures ?;\n"
            "    call C.a(1, 2);\n"
        )
        with pytest.raises(ResolutionError):
            load_source(src, "t.gcl")

    def test_extern_spec_must_be_unknown(self):
        src = (
            "contract C:\n"
            "  method m():\n"
            "    #@ requires ?;\n"
            "    #@ ensures ?;\n"
            "    call X.go();\n"
            "\n"
            "extern contract X:\n"
            "  method go():\n"
            "    #@ requires 1 >= 0;\n"
            "    opaque;\n"
        )
        with pytest.raises(WellFormednessError):
            load_source(src, "t.gcl")
