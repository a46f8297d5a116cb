import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

CORPUS = ROOT / "corpus"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def corpus_files():
    return sorted(p for p in CORPUS.glob("*.gcl")
                  if not p.name.endswith(".adversary.gcl"))


def adversaries_for(path, program):
    adv_path = path.with_name(path.stem + ".adversary.gcl")
    out = {}
    if adv_path.exists():
        text = adv_path.read_text(encoding="utf-8")
        for c in program.contracts:
            if c.extern and f"contract {c.name}" in text:
                out[c.name] = text
    return out


@pytest.fixture(scope="session")
def sell_path():
    return CORPUS / "sell.gcl"


@pytest.fixture(scope="session")
def sell_program(sell_path):
    from gvc.frontend import load_file
    program, _ = load_file(sell_path)
    return program


@pytest.fixture(scope="session")
def sell_report(sell_program):
    from gvc.verifier import verify_program
    return verify_program(sell_program)


@pytest.fixture(scope="session")
def sell_woven(sell_program, sell_report):
    from gvc.weaver import weave
    return weave(sell_program, sell_report)
