"""Transaction VM: execution, gas accounting, permissions, atomicity."""

import pytest

from gvc.frontend import load_file, load_source
from gvc.verifier import verify_program
from gvc.vm import (
    ARITHMETIC_PANIC, CHECK_FAILURE, GAS_EXHAUSTED, OWNERSHIP_FAILURE,
    PREDICATE_DEPTH, Ledger, Transaction, Vm, VmOptions, VmUsageError,
    load_program, parse_script, run_script,
)
from gvc.weaver import weave

from conftest import CORPUS, adversaries_for


def make_image(name, adversaries=None):
    path = CORPUS / name
    program, _ = load_file(path)
    ip = weave(program, verify_program(program))
    if adversaries is None:
        adversaries = adversaries_for(path, program)
    return load_program(ip, adversaries)


def sell_ledger(image, count=10):
    return Ledger(image.program, {"Counter": {"Count": count}})


def tx(contract, method, *args):
    return Transaction(contract, method, tuple(args))


class TestSellScript:
    def test_three_sales_commit(self):
        image = make_image("sell.gcl")
        outs, _ = run_script(image, [tx("Counter", "sell", 3)] * 3,
                             ledger=(led := sell_ledger(image)))
        assert [o.status for o in outs] == ["committed"] * 3
        assert [o.deltas["Counter"]["Count"] for o in outs] == [7, 4, 1]
        assert led.read("Counter", "Count") == 1

    def test_oversell_reverts_via_residual(self):
        image = make_image("sell.gcl")
        led = sell_ledger(image)
        outs, _ = run_script(image, [tx("Counter", "sell", 3),
                                     tx("Counter", "sell", 12)], ledger=led)
        assert outs[0].committed and not outs[1].committed
        assert outs[1].reason == CHECK_FAILURE
        assert outs[1].detail["check_id"] == "c0"
        assert outs[1].detail["line"] == 7
        assert led.read("Counter", "Count") == 7

    def test_empty_script(self):
        image = make_image("sell.gcl")
        outs, report = run_script(image, [])
        assert outs == []
        assert report["totals"] == {"exec_gas": 0, "check_gas": 0}

    def test_parse_script(self):
        txs = parse_script((CORPUS / "sell.txs.jsonl").read_text())
        assert txs == [tx("Counter", "sell", 3)] * 3


class TestGas:
    def test_imprecise_sell_gas(self):
        # exec: two assignments.  check: entry comparison + entry acc +
        # woven residual + exit postcondition atom.
        image = make_image("sell.gcl")
        outs, report = run_script(image, [tx("Counter", "sell", 3)] * 3,
                                  ledger=sell_ledger(image))
        assert all(o.exec_gas == 2 and o.check_gas == 4 for o in outs)
        assert report["totals"] == {"exec_gas": 6, "check_gas": 12}

    def test_precise_sell_gas(self):
        # no woven check: entry comparison + entry acc + exit atom.
        image = make_image("sell_precise.gcl")
        outs, report = run_script(image, [tx("Counter", "sell", 3)] * 3,
                                  ledger=sell_ledger(image))
        assert all(o.exec_gas == 2 and o.check_gas == 3 for o in outs)
        assert report["totals"] == {"exec_gas": 6, "check_gas": 9}

    def test_predicate_gas_short_circuits(self):
        # even(4): five comparisons plus three predicate-call atoms; the
        # boundary row for acc(Value) adds one more check unit.
        image = make_image("pred.gcl")
        [out], _ = run_script(image, [tx("Parity", "bump", 4)])
        assert out.committed
        assert out.exec_gas == 1
        assert out.check_gas == 9

    def test_gas_limit_exhausts(self):
        image = make_image("sell.gcl")
        [out], _ = run_script(image, [tx("Counter", "sell", 3)],
                              gas_limit=3, ledger=sell_ledger(image))
        assert out.reason == GAS_EXHAUSTED


class TestAtomicity:
    def test_division_by_zero_caught_by_residual(self):
        image = make_image("divmod.gcl")
        led = Ledger(image.program, {"Divider": {"Pool": 8}})
        vm = Vm(image, led)
        out = vm.exec_transaction(tx("Divider", "split", 0))
        assert out.reason == CHECK_FAILURE
        assert led.read("Divider", "Pool") == 8

    def test_overflow_panic_restores_ledger(self):
        # addition overflow carries no static obligation; it panics at run
        # time and the partial write to G is rolled back
        src = (
            "contract C:\n"
            "  #@ global G;\n"
            "  method add(x: uint64):\n"
            "    #@ requires ? and acc(G);\n"
            "    #@ ensures ?;\n"
            "    G := G + 1;\n"
            "    G := G + x;\n"
        )
        program, _ = load_source(src, "add.gcl")
        image = load_program(weave(program, verify_program(program)))
        led = Ledger(image.program)
        vm = Vm(image, led)
        out = vm.exec_transaction(tx("C", "add", 2 ** 64 - 1))
        assert out.reason == ARITHMETIC_PANIC
        assert out.detail["kind"] == "overflow"
        assert led.read("C", "G") == 0

    def test_permissions_cleared_after_tx(self):
        image = make_image("sell.gcl")
        vm = Vm(image, sell_ledger(image))
        vm.exec_transaction(tx("Counter", "sell", 3))
        assert vm.perm == {}

    def test_repeat_runs_identical(self):
        script = [tx("Counter", "sell", 3), tx("Counter", "sell", 12),
                  tx("Counter", "sell", 1)]

        def once():
            image = make_image("sell.gcl")
            led = sell_ledger(image)
            outs, report = run_script(image, script, ledger=led)
            return [o.as_dict() for o in outs], report, led.as_dict()

        assert once() == once()


class TestFailureModes:
    def test_odd_step_rejected_at_boundary(self):
        image = make_image("pred.gcl")
        [out], _ = run_script(image, [tx("Parity", "bump", 3)])
        assert out.reason == CHECK_FAILURE
        assert out.detail["kind"] == "precondition"

    def test_predicate_depth_cap(self):
        src = (
            "contract C:\n"
            "  #@ predicate spin(n) = spin(n + 1);\n"
            "  method go(x: uint64):\n"
            "    #@ requires ? and spin(x);\n"
            "    #@ ensures ?;\n"
            "    y := x;\n"
        )
        program, _ = load_source(src, "spin.gcl")
        image = load_program(weave(program, verify_program(program)))
        [out], _ = run_script(image, [tx("C", "go", 0)])
        assert out.reason == PREDICATE_DEPTH

    def test_usage_errors(self):
        image = make_image("sell.gcl")
        vm = Vm(image, sell_ledger(image))
        with pytest.raises(VmUsageError):
            vm.exec_transaction(tx("Nope", "sell", 3))
        with pytest.raises(VmUsageError):
            vm.exec_transaction(tx("Counter", "nope", 3))
        with pytest.raises(VmUsageError):
            vm.exec_transaction(tx("Counter", "sell", 3, 4))
        with pytest.raises(VmUsageError):
            vm.exec_transaction(tx("Counter", "sell", -1))


class TestReentrancy:
    def _bank(self, options=None):
        image = make_image("bank.gcl")
        led = Ledger(image.program, {"Bank": {"Balance": 10}})
        return Vm(image, led, options), led

    def test_protected_attack_reverts(self):
        vm, led = self._bank()
        out = vm.exec_transaction(tx("Bank", "withdraw", 4))
        assert out.reason == OWNERSHIP_FAILURE
        assert out.detail["slot"] == "Balance"
        assert out.detail["line"] == 4
        assert led.read("Bank", "Balance") == 10

    def test_unprotected_attack_double_spends(self):
        vm, led = self._bank(VmOptions(enforce_permissions=False,
                                       run_checks=False))
        out = vm.exec_transaction(tx("Bank", "withdraw", 4))
        assert out.committed
        assert led.read("Bank", "Balance") == 2  # honest result is 6
