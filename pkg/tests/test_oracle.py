import pytest
from hypothesis import given
from hypothesis import strategies as st

from relu_subleq.asm import resolve
from relu_subleq.config import MachineConfig
from relu_subleq.oracle import OracleState, ProgramFault, oracle_init, oracle_run, oracle_step, wrap
from relu_subleq.trace import dump_trace, load_trace

CFG = MachineConfig(w=4, d=4, K=8, m=4)


@pytest.mark.parametrize("x, d, want", [(0, 4, 0), (8, 4, -8), (-9, 4, 7), (15, 4, -1), (127, 8, 127)])
def test_wrap_examples(x, d, want):
    assert wrap(x, d) == want


@given(st.integers(-10 ** 6, 10 ** 6), st.integers(2, 16))
def test_wrap_properties(x, d):
    r = wrap(x, d)
    assert -(2 ** (d - 1)) <= r < 2 ** (d - 1)
    assert (r - x) % 2 ** d == 0
    assert wrap(r, d) == r
    assert wrap(x + 2 ** d, d) == r


def one_step(a_val, b_val, d=4):
    cfg = MachineConfig(w=4, d=d, K=8, m=4)
    prog = resolve(f".data a {a_val}\n.data b {b_val}\n.text\nSUBLEQ a b HALT\n", cfg)
    return oracle_step(oracle_init(prog))


def test_step_examples():
    s, rec = one_step(3, 5)
    assert s.mem[2] == 2 and s.pc == CFG.K + 1 and not rec.flag
    s, rec = one_step(5, 5)
    assert s.mem[2] == 0 and rec.flag and s.halted
    s, rec = one_step(-8, 7)
    assert s.mem[2] == -1 and rec.flag


def test_empty_program_halts_at_1():
    _, status, trace = oracle_run(oracle_init(resolve(".text\n", CFG)), 10)
    assert status.halted and status.iteration == 1 and len(trace) == 1


def test_infinite_loop_hits_limit():
    prog = resolve(".data z 0\n.text\nL: SUBLEQ z z L\n", CFG)
    _, status, _ = oracle_run(oracle_init(prog), 50)
    assert status.kind == "iteration_limit" and status.iteration == 50


def test_program_fault():
    s = OracleState(CFG, (0,) * 8, ((0, 9, 8),) * 4, 8, 9)
    with pytest.raises(ProgramFault):
        oracle_step(s)
    s = OracleState(CFG, (0,) * 8, ((0, 1, 3),) * 4, 8, 9)
    with pytest.raises(ProgramFault):
        oracle_step(s)
    with pytest.raises(ValueError):
        oracle_run(oracle_init(resolve(".text\n", CFG)), 0)


def test_trace_serialization_round_trip():
    prog = resolve(".data n 3\n.data one 1\n.data z 0\n.text\nL: SUBLEQ one n HALT\nSUBLEQ z z L\n", CFG)
    _, _, trace = oracle_run(oracle_init(prog), 100)
    text = dump_trace(trace)
    assert load_trace(text) == trace
    first = text.splitlines()[0]
    assert first.startswith('{"iteration":1,"pc_slot":8,"instruction_triple":[2,1,10],')


@given(st.lists(st.integers(-8, 7), min_size=3, max_size=3))
def test_memory_stays_in_range(vals):
    src = ".data a {}\n.data b {}\n.data c {}\n.text\nSUBLEQ a b ?\nSUBLEQ b c ?\nSUBLEQ c a HALT\n".format(*vals)
    s, _, trace = oracle_run(oracle_init(resolve(src, CFG)), 10)
    assert all(-8 <= v <= 7 for v in s.mem)
    assert trace == oracle_run(oracle_init(resolve(src, CFG)), 10)[2]
