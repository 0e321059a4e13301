import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relu_subleq.asm import resolve
from relu_subleq.config import ConfigError, MachineConfig, StateLayout
from relu_subleq.ir import counted_layers
from relu_subleq.machine import (InvariantViolation, build_subleq_core, extract_pc, extract_word, init_state,
                                 run, run_batch, step)
from relu_subleq.oracle import oracle_init, oracle_run, oracle_step

SMALL = MachineConfig(w=4, d=8, K=8, m=4)

ONE = """.data x 3
.data y 5
.text
SUBLEQ x y L
L: SUBLEQ x x HALT
"""


def test_config_validation():
    with pytest.raises(ConfigError):
        MachineConfig(w=3, d=4, K=6, m=4)
    with pytest.raises(ConfigError):
        MachineConfig(w=3, d=1, K=2, m=2)
    with pytest.raises(ConfigError):
        MachineConfig(w=3, d=4, K=2, m=0)


def test_layout_regions():
    lay = StateLayout(SMALL)
    assert lay.scratch_rows == 3 + 4 * SMALL.w
    assert lay.rows == lay.scratch_rows + SMALL.K + 3 * SMALL.w * SMALL.m
    assert lay.size == lay.rows * SMALL.d


def test_core_has_23_layers():
    assert counted_layers(build_subleq_core(SMALL)) == 23
    assert counted_layers(build_subleq_core(MachineConfig())) == 23


def test_no_branch_example():
    # mem[a] = 3, mem[b] = 5: mem[b] = 2 > 0, fall through
    prog = resolve(ONE, SMALL)
    s = step(init_state(SMALL, prog))
    assert extract_word(s, prog.slot_of("y")) == 2
    assert extract_pc(s) == SMALL.K + 1


def test_branch_example():
    src = ONE.replace(".data x 3", ".data x 5").replace(".data y 5", ".data y 3").replace(
        "SUBLEQ x y L", "SUBLEQ x y HALT")
    prog = resolve(src, SMALL)
    s = step(init_state(SMALL, prog))
    assert extract_word(s, prog.slot_of("y")) == -2
    assert extract_pc(s) == prog.eof_slot


def test_empty_program_halts_immediately():
    prog = resolve(".text\n", SMALL)
    s0 = init_state(SMALL, prog)
    assert s0.pc == prog.eof_slot == SMALL.K
    final, status, trace = run(s0, 1)
    assert status.halted and status.iteration == 1
    assert final == s0


def test_max_iters_zero_rejected():
    prog = resolve(".text\n", SMALL)
    with pytest.raises(ValueError):
        run(init_state(SMALL, prog), 0)


def test_instruction_rows_decode():
    prog = resolve(ONE, SMALL)
    s = init_state(SMALL, prog)
    table = [s.instruction(SMALL.K + j) for j in range(SMALL.m)]
    assert table == prog.instruction_table()
    assert table[:2] == list(prog.instructions)
    assert table[2] == (0, 0, prog.eof_slot)


def test_reserved_slot_rejected():
    prog = resolve(ONE, SMALL)
    with pytest.raises(ValueError):
        init_state(SMALL, prog, {0: 5})
    s = init_state(SMALL, prog, {"x": -4})
    assert s.word(prog.slot_of("x")) == -4


def test_fixed_point_and_code_immutability():
    prog = resolve(ONE, SMALL)
    s0 = init_state(SMALL, prog)
    final, status, _ = run(s0, 100)
    assert status.halted
    lay = StateLayout(SMALL)
    code = np.s_[lay.INSTR0:]
    assert np.array_equal(final.matrix[code], s0.matrix[code])
    cur = final
    for _ in range(10):
        cur = step(cur)
        assert cur == final


def test_trace_matches_oracle():
    prog = resolve(ONE, SMALL)
    _, st1, t1 = run(init_state(SMALL, prog), 100)
    _, st2, t2 = oracle_run(oracle_init(prog), 100)
    assert st1 == st2 and t1 == t2


def test_invariant_violation_on_bad_state():
    prog = resolve(ONE, SMALL)
    s = init_state(SMALL, prog)
    cells = s.cells.copy()
    cells[0] = 0
    with pytest.raises(InvariantViolation):
        step(type(s)(SMALL, cells, s.eof_slot))


def test_iteration_limit():
    src = ".data z 0\n.text\nL: SUBLEQ z z L\n"
    prog = resolve(src, SMALL)
    _, status, trace = run(init_state(SMALL, prog), 5)
    assert not status.halted and status.iteration == 5 and len(trace) == 5


def test_run_batch_halts_each_row():
    src = ".data n 3\n.data one 1\n.data z 0\n.text\nL: SUBLEQ one n HALT\nSUBLEQ z z L\n"
    prog = resolve(src, SMALL)
    cells = np.stack([init_state(SMALL, prog, {"n": v}).cells for v in (1, 2, 3)])
    final, halted = run_batch(cells, SMALL, prog.eof_slot, 50)
    assert halted.tolist() == [1, 3, 5]


@given(st.integers(-128, 127), st.integers(-128, 127), st.booleans())
def test_single_step_equivalence(x, y, to_target):
    src = f""".data x {x}
.data y {y}
.text
SUBLEQ x y {'T' if to_target else '?'}
SUBLEQ x x HALT
T: SUBLEQ y y HALT
"""
    prog = resolve(src, SMALL)
    s = step(init_state(SMALL, prog))
    o, rec = oracle_step(oracle_init(prog))
    assert s.memory() == list(o.mem)
    assert s.pc == o.pc


def test_frame_condition_random_states():
    # random data and registers; only mem[b] and the PC may change, scratch resets to -1
    cfg = MachineConfig(w=3, d=4, K=4, m=2)
    lay = StateLayout(cfg)
    rng = np.random.default_rng(7)
    core = build_subleq_core(cfg)
    prog = resolve(".data a 1\n.text\nSUBLEQ a a ?\n", cfg)
    for _ in range(20):
        s = init_state(cfg, prog)
        m = s.matrix.copy()
        m[: lay.RPC] = rng.choice([-1, 1], size=(lay.RPC, lay.d))
        m[lay.DATA0:lay.INSTR0] = rng.choice([-1, 1], size=(cfg.K, lay.d))
        s2 = type(s)(cfg, m.ravel(), s.eof_slot)
        out = step(s2, core).matrix
        b = s2.instruction(s2.pc)[1]
        changed = {r for r in range(lay.rows) if not np.array_equal(out[r], m[r])}
        allowed = set(range(lay.RPC + lay.w)) | {lay.data_row(b)}
        assert changed <= allowed
        assert np.all(out[: lay.RPC] == -1)
