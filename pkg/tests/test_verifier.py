"""Static verification: residuals, statuses, and report shape."""

import json

from gvc.frontend import load_file, load_source
from gvc.verifier import Status, program_digest, verify_program

from conftest import CORPUS, FIXTURES


class TestSellGolden:
    def test_status(self, sell_report):
        [m] = sell_report.methods
        assert m.status is Status.VERIFIED_WITH_RESIDUALS

    def test_exactly_one_residual(self, sell_report):
        [r] = list(sell_report.all_residuals())
        assert r.payload_text == "scratch >= quantity"

    def test_residual_precedes_global_write(self, sell_report):
        # insertion point: top-level block, immediately before statement 1
        [r] = list(sell_report.all_residuals())
        assert r.insertion.kind == "before"
        assert r.insertion.block_path == ()
        assert r.insertion.index == 1

    def test_postcondition_discharged(self, sell_report):
        kinds = [r.obligation.kind for r in sell_report.all_residuals()]
        assert "postcondition" not in kinds


def test_precise_sell_no_residuals():
    program, _ = load_file(CORPUS / "sell_precise.gcl")
    report = verify_program(program)
    [m] = report.methods
    assert m.status is Status.VERIFIED
    assert not m.residuals


def test_strong_postcondition_static_error():
    program, _ = load_file(FIXTURES / "sell_strong.gcl")
    report = verify_program(program)
    [m] = report.methods
    assert m.status is Status.STATIC_ERROR
    [(ob, reason)] = m.diagnostics
    assert ob.kind == "postcondition"


def test_unprovable_precise_precondition_at_call_site():
    src = (
        "contract C:\n"
        "  method need(x: uint64):\n"
        "    #@ requires x >= 1;\n"
        "    #@ ensures ?;\n"
        "    y := x;\n"
        "  method go():\n"
        "    #@ requires ?;\n"
        "    #@ ensures ?;\n"
        "    call C.need(0);\n"
    )
    program, _ = load_source(src, "t.gcl")
    report = verify_program(program)
    # caller is imprecise, so the impossible precondition becomes a residual
    # check that always fails at run time rather than a static error
    m = report.method("C", "go")
    assert m.status is Status.VERIFIED_WITH_RESIDUALS


class TestResidualKinds:
    def _kinds(self, name):
        program, _ = load_file(CORPUS / name)
        return sorted(r.obligation.kind for r in verify_program(program).all_residuals())

    def test_underflow_residual(self):
        assert self._kinds("sell.gcl") == ["underflow"]

    def test_div_zero_residuals(self):
        assert self._kinds("divmod.gcl") == ["div-zero"]

    def test_assert_residual(self):
        assert self._kinds("assertions.gcl") == ["assert"]

    def test_havoc_forces_residual(self):
        assert self._kinds("extern_havoc.gcl") == ["underflow"]

    def test_loop_residual_after_havoc(self):
        assert self._kinds("loop.gcl") == ["underflow"]

    def test_exit_residual(self):
        program, _ = load_file(CORPUS / "branching.gcl")
        [r] = list(verify_program(program).all_residuals())
        assert r.obligation.kind == "postcondition"
        assert r.insertion.kind == "exit"

    def test_precise_loop_discharges(self):
        program, _ = load_file(CORPUS / "guarded_loop.gcl")
        assert not list(verify_program(program).all_residuals())


class TestReport:
    def test_digest_matches_program(self, sell_program, sell_report):
        assert sell_report.digest == program_digest(sell_program)

    def test_json_round_trip(self, sell_report):
        doc = json.loads(sell_report.to_json())
        assert doc["digest"] == sell_report.digest
        [m] = doc["methods"]
        assert m["status"] == "verified-with-residuals"
        [r] = m["residuals"]
        assert r["payload_text"] == "scratch >= quantity"
        assert r["insertion"] == {"kind": "before", "path": [], "index": 1}

    def test_prover_stats_counted(self, sell_report):
        stats = sell_report.prover.as_dict()
        assert stats["queries"] >= 1
        assert stats["queries"] == (stats["proved"] + stats["disproved"]
                                    + stats["unknown"])

    def test_check_ids_globally_unique(self):
        program, _ = load_file(CORPUS / "divmod.gcl")
        report = verify_program(program)
        ids = [r.id for r in report.all_residuals()]
        assert len(ids) == len(set(ids))
        assert all(i.startswith("c") for i in ids)


def test_verification_deterministic(sell_program):
    a = verify_program(sell_program).to_json()
    b = verify_program(sell_program).to_json()
    assert a == b
