"""Command-line interface: exit codes and pipeline wiring."""

import json
import shutil

import pytest

from gvc.cli import (
    EXIT_DISAGREEMENT, EXIT_OK, EXIT_REVERTED, EXIT_STATIC, EXIT_USAGE, main,
)

from conftest import CORPUS, FIXTURES


@pytest.fixture(autouse=True)
def plain_output(monkeypatch):
    monkeypatch.setenv("GVC_COLOR", "0")


SELL = str(CORPUS / "sell.gcl")


class TestVerify:
    def test_ok(self, capsys):
        assert main(["verify", SELL]) == EXIT_OK
        out = capsys.readouterr().out
        assert "Counter.sell: verified-with-residuals (1 residual check(s))" in out
        assert "\x1b[" not in out

    def test_static_error(self, capsys):
        assert main(["verify", str(FIXTURES / "sell_strong.gcl")]) == EXIT_STATIC
        out = capsys.readouterr().out
        assert "static-error" in out
        assert "postcondition obligation" in out

    def test_missing_file(self, capsys):
        assert main(["verify", "no/such/file.gcl"]) == EXIT_USAGE

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.gcl"
        bad.write_text("contract C\n")
        assert main(["verify", str(bad)]) == EXIT_STATIC

    def test_report_written(self, tmp_path, capsys):
        rep = tmp_path / "report.json"
        assert main(["verify", SELL, "--report", str(rep)]) == EXIT_OK
        doc = json.loads(rep.read_text())
        assert doc["methods"][0]["status"] == "verified-with-residuals"

    def test_dump_constraints(self, capsys):
        assert main(["verify", SELL, "--dump-constraints"]) == EXIT_OK
        assert "prover:" in capsys.readouterr().out


class TestWeave:
    def test_auto(self, tmp_path, capsys):
        out = tmp_path / "sell.woven.gcl"
        code = main(["weave", SELL, "--auto", "-o", str(out)])
        assert code == EXIT_OK
        assert "#! check scratch >= quantity @c0;" in out.read_text()
        sidecar = json.loads((tmp_path / "sell.woven.gcl.sidecar.json").read_text())
        assert sidecar["c0"]["kind"] == "underflow"

    def test_two_step_with_report(self, tmp_path, capsys):
        rep = tmp_path / "report.json"
        assert main(["verify", SELL, "--report", str(rep)]) == EXIT_OK
        out = tmp_path / "w.gcl"
        assert main(["weave", SELL, "--report", str(rep),
                     "-o", str(out)]) == EXIT_OK

    def test_stale_report(self, tmp_path, capsys):
        rep = tmp_path / "report.json"
        assert main(["verify", str(CORPUS / "loop.gcl"),
                     "--report", str(rep)]) == EXIT_OK
        code = main(["weave", SELL, "--report", str(rep),
                     "-o", str(tmp_path / "w.gcl")])
        assert code == EXIT_USAGE
        assert "stale report" in capsys.readouterr().out

    def test_requires_report_or_auto(self, tmp_path, capsys):
        assert main(["weave", SELL, "-o", str(tmp_path / "w.gcl")]) == EXIT_USAGE

    def test_refuses_static_error(self, tmp_path, capsys):
        code = main(["weave", str(FIXTURES / "sell_strong.gcl"), "--auto",
                     "-o", str(tmp_path / "w.gcl")])
        assert code == EXIT_STATIC


class TestRun:
    def _woven(self, tmp_path, src=SELL):
        out = tmp_path / "w.gcl"
        assert main(["weave", src, "--auto", "-o", str(out)]) == EXIT_OK
        return str(out)

    def _ledger(self, tmp_path, init):
        p = tmp_path / "ledger.json"
        p.write_text(json.dumps(init))
        return str(p)

    def test_commits(self, tmp_path, capsys):
        woven = self._woven(tmp_path)
        code = main(["run", woven, "--txs", str(CORPUS / "sell.txs.jsonl"),
                     "--ledger", self._ledger(tmp_path, {"Counter": {"Count": 10}})])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("committed") == 3
        assert '"Count": 1' in out

    def test_revert_exit_code_and_message(self, tmp_path, capsys):
        woven = self._woven(tmp_path)
        txs = tmp_path / "txs.jsonl"
        txs.write_text('{"contract": "Counter", "method": "sell", "args": [12]}\n')
        code = main(["run", woven, "--txs", str(txs),
                     "--ledger", self._ledger(tmp_path, {"Counter": {"Count": 10}})])
        assert code == EXIT_REVERTED
        assert "reverted CheckFailure check c0 at line 7" in capsys.readouterr().out

    def test_gas_limit(self, tmp_path, capsys):
        woven = self._woven(tmp_path)
        code = main(["run", woven, "--txs", str(CORPUS / "sell.txs.jsonl"),
                     "--ledger", self._ledger(tmp_path, {"Counter": {"Count": 10}}),
                     "--gas-limit", "3"])
        assert code == EXIT_REVERTED
        assert "GasExhausted" in capsys.readouterr().out

    def test_adversary_and_unprotected(self, tmp_path, capsys):
        woven = self._woven(tmp_path, str(CORPUS / "bank.gcl"))
        adv = f"Attacker={CORPUS / 'bank.adversary.gcl'}"
        led = self._ledger(tmp_path, {"Bank": {"Balance": 10}})
        base = ["run", woven, "--txs", str(CORPUS / "bank.txs.jsonl"),
                "--ledger", led, "--adversary", adv]
        assert main(base) == EXIT_REVERTED
        assert "OwnershipFailure" in capsys.readouterr().out
        assert main(base + ["--unprotected"]) == EXIT_OK
        assert '"Balance": 2' in capsys.readouterr().out

    def test_gas_report_file(self, tmp_path, capsys):
        woven = self._woven(tmp_path)
        gr = tmp_path / "gas.json"
        main(["run", woven, "--txs", str(CORPUS / "sell.txs.jsonl"),
              "--ledger", self._ledger(tmp_path, {"Counter": {"Count": 10}}),
              "--gas-report", str(gr)])
        doc = json.loads(gr.read_text())
        assert doc["totals"] == {"exec_gas": 6, "check_gas": 12}


class TestCorpus:
    def test_small_sample(self, tmp_path, capsys):
        for name in ("sell.gcl", "bank.gcl", "bank.adversary.gcl"):
            shutil.copy(CORPUS / name, tmp_path / name)
        code = main(["corpus", str(tmp_path), "--bound", "3",
                     "--erosion-bound", "1"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "sell.gcl: ok" in out and "bank.gcl: ok" in out

    def test_empty_dir_warns(self, tmp_path, capsys):
        assert main(["corpus", str(tmp_path)]) == EXIT_OK
        assert "no corpus programs" in capsys.readouterr().out

    def test_not_a_directory(self, capsys):
        assert main(["corpus", "no/such/dir"]) == EXIT_USAGE
