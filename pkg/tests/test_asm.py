import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from relu_subleq.asm import (AsmError, CapacityError, DisassemblyError, assemble, corpus, disassemble, resolve)
from relu_subleq.config import MachineConfig
from relu_subleq.machine import init_state, step
from relu_subleq.oracle import oracle_init, oracle_run

CFG = MachineConfig()
SMALL = MachineConfig(w=4, d=8, K=8, m=4)


def test_minimal_program():
    src = assemble(".data x 5\n.text\nL: SUBLEQ x x HALT\n")
    assert len(src.data) == 1 and len(src.instructions) == 1
    assert src.instructions[0].label == "L"


def test_unknown_label():
    with pytest.raises(AsmError) as e:
        assemble(".data x 1\n.text\nSUBLEQ x x FOO\n")
    assert "FOO" in str(e.value) and e.value.line == 3 and e.value.column == 12


def test_duplicate_label():
    with pytest.raises(AsmError) as e:
        assemble(".data x 1\n.text\nA: SUBLEQ x x ?\nA: SUBLEQ x x ?\n")
    assert e.value.line == 4


@pytest.mark.parametrize("text, line", [
    (".data x\n", 1),
    (".data x y\n", 1),
    (".text\nMOV x x ?\n", 2),
    ("SUBLEQ x x ?\n", 1),
    (".data x 1\n.text\nSUBLEQ x x\n", 3),
    (".data x 1\n.text\nSUBLEQ x y ?\n", 3),
    (".bogus\n", 1),
])
def test_syntax_errors_have_locations(text, line):
    with pytest.raises(AsmError) as e:
        assemble(text)
    assert e.value.line == line and e.value.column >= 1


def test_next_and_halt_resolution():
    prog = resolve(".data x 1\n.data y 2\n.text\nSUBLEQ x y ?\nSUBLEQ x y ?\nSUBLEQ y y HALT\n", SMALL)
    assert [n for n, _ in prog.names] == ["x", "y"]
    assert prog.names == (("x", 1), ("y", 2))
    assert prog.instructions == ((1, 2, 9), (1, 2, 10), (2, 2, 11))
    assert prog.eof_slot == 11
    assert prog.instruction_table()[3] == (0, 0, 11)


def test_capacity_errors():
    many = "".join(f".data v{i} 0\n" for i in range(8)) + ".text\n"
    with pytest.raises(CapacityError) as e:
        resolve(many, SMALL)
    assert "K >= 9" in str(e.value)
    code = ".data x 0\n.text\n" + "SUBLEQ x x ?\n" * 4
    with pytest.raises(CapacityError):
        resolve(code, SMALL)
    with pytest.raises(AsmError):
        resolve(".data x 300\n.text\n", SMALL)


def test_resolve_deterministic():
    text = corpus()[0].text
    assert resolve(text, CFG) == resolve(text, CFG)


def test_corpus_contents():
    names = [e.name for e in corpus()]
    for required in ("clear", "copy", "increment", "multiply", "countdown"):
        assert required in names
    assert len(names) >= 5


@pytest.mark.parametrize("entry", corpus(), ids=lambda e: e.name)
def test_corpus_sidecars_match_oracle(entry):
    cfg = MachineConfig(**entry.expected["config"])
    prog = resolve(entry.source, cfg)
    final, status, trace = oracle_run(oracle_init(prog), 10 ** 6)
    assert status.halted == entry.expected["halted"]
    assert status.iteration == entry.expected["iterations"]
    assert prog.named_values(final.mem) == entry.expected["final"]
    assert sum(r.flag for r in trace) == entry.expected["branches_taken"]


def test_corpus_known_results():
    exp = {e.name: e.expected for e in corpus()}
    assert exp["multiply"]["final"]["result"] == 42
    assert exp["copy"]["final"]["dst"] == 5 and exp["copy"]["final"]["src"] == 5
    assert exp["countdown"]["branches_taken"] == 3
    assert exp["clear"]["final"]["x"] == 0


@pytest.mark.parametrize("entry", corpus(), ids=lambda e: e.name)
def test_disassemble_round_trip(entry):
    prog = resolve(entry.source, CFG)
    text = disassemble(prog)
    again = resolve(text, CFG)
    assert again.instructions == prog.instructions and again.data == prog.data
    t1 = oracle_run(oracle_init(prog), 10 ** 6)[2]
    t2 = oracle_run(oracle_init(again), 10 ** 6)[2]
    assert t1 == t2


def test_disassemble_state_and_eof_annotation():
    prog = resolve(corpus()[0].text, CFG)
    s = init_state(CFG, prog)
    text = disassemble(s)
    assert f"SUBLEQ 0 0 {prog.eof_slot}" in text and "HALT" in text.splitlines()[-1]
    assert resolve(text, CFG).instructions == prog.instructions


def test_disassemble_corrupt_encoding():
    prog = resolve(".data x 1\n.text\nSUBLEQ x x ?\n", SMALL)
    s = init_state(SMALL, prog)
    m = s.matrix.copy()
    lay = s.layout
    m[lay.instruction_rows(0)[: SMALL.w]] = 1  # a = 15, not a data slot
    with pytest.raises(DisassemblyError) as e:
        disassemble(type(s)(SMALL, m.ravel(), s.eof_slot))
    assert "slot 8" in str(e.value)


names = st.sampled_from(["a", "b", "c"])
targets = st.sampled_from(["?", "HALT", "L0", "L1"])


@given(st.lists(st.tuples(names, names, targets), min_size=2, max_size=3),
       st.lists(st.integers(-128, 127), min_size=3, max_size=3))
def test_random_programs_round_trip(instrs, vals):
    lines = [f".data {n} {v}" for n, v in zip("abc", vals)] + [".text"]
    for j, (a, b, c) in enumerate(instrs):
        lines.append(f"L{j}: SUBLEQ {a} {b} {c}")
    prog = resolve("\n".join(lines) + "\n", SMALL)
    again = resolve(disassemble(prog), SMALL)
    assert again.instructions == prog.instructions
    assert oracle_run(oracle_init(prog), 30)[2] == oracle_run(oracle_init(again), 30)[2]
