"""The looped SUBLEQ network: one forward pass executes one instruction.

The state is a (rows x d) matrix of +/-1 cells (see :class:`StateLayout`).
A pass runs eight phases, each compiled from the circuits module:

=============  ======  ==========================================
phase          layers  effect
=============  ======  ==========================================
fetch          2       r_a1, r_a2, r_a3 <- instruction at r_pc
load           2       r_d1 <- mem[a], r_d2 <- mem[b]
negate         1       r_d1 <- ~r_d1, carry-in <- 1
add            6       r_d1 <- r_d2 + r_d1 + carry (i.e. mem[b] - mem[a])
write          2       mem[b] <- r_d1
pc setup       0       r_a2 <- r_pc, carries <- 1
pc increment   6       r_a2 <- r_pc + 1
branch         4       r_pc <- r_a3 if r_d1 <= 0 else r_a2; scratch reset
=============  ======  ==========================================
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .asm import LoadedProgram
from .circuits import (LAYER_BUDGETS, column_rotation, emit_branch, emit_full_adder, emit_negate,
                       emit_read, emit_write, scatter)
from .config import MachineConfig, StateLayout
from .encoding import decode_address, decode_instruction, decode_word, encode_address, encode_instruction, encode_word
from .ir import ProgramBuilder, TensorProgram, execute, lower_gates
from .trace import HALTED, ITERATION_LIMIT, HaltStatus, TraceRecord

__all__ = [
    "InvariantViolation",
    "MachineState",
    "build_subleq_core",
    "merge_data",
    "init_state",
    "step",
    "step_batch",
    "run",
    "run_batch",
    "extract_word",
    "extract_pc",
]


class InvariantViolation(RuntimeError):
    """A state cell left {-1, +1}; the state no longer encodes a machine."""


# --------------------------------------------------------------------------- construction

def _codes(lo: int, n: int, w: int) -> np.ndarray:
    return np.stack([encode_address(s, w) for s in range(lo, lo + n)])


def _phase(name: str, lay: StateLayout, repeat: int) -> ProgramBuilder:
    return ProgramBuilder(name, lay.size, repeat=repeat, boundary_bound=1)


def _fetch(lay: StateLayout) -> TensorProgram:
    cfg = lay.cfg
    b = _phase("fetch", lay, lay.d)
    addr = lay.block(lay.RPC + np.arange(lay.w), 0)
    dest = lay.block(lay.RA1 + np.arange(3 * lay.w), 0)
    mem = np.stack([lay.block(lay.instruction_rows(j), 0) for j in range(cfg.m)])
    val = emit_read(b, "x", addr[None, :], dest[None, :], mem, _codes(cfg.K, cfg.m, lay.w), label="fetch")
    out = scatter(b, "x", [(dest, val)], permute=column_rotation(lay.rows, lay.d), label="fetch.rotate")
    return b.build(out)


def _load(lay: StateLayout) -> TensorProgram:
    cfg = lay.cfg
    b = _phase("load", lay, lay.d)
    addr = np.stack([lay.block(lay.RA1 + np.arange(lay.w), 0), lay.block(lay.RA2 + np.arange(lay.w), 0)])
    dest = np.array([[lay.cell(lay.RD1, 0)], [lay.cell(lay.RD2, 0)]])
    mem = np.array([[lay.cell(lay.data_row(s), 0)] for s in range(cfg.K)])
    val = emit_read(b, "x", addr, dest, mem, _codes(0, cfg.K, lay.w), label="load")
    out = scatter(b, "x", [(dest, val)], permute=column_rotation(lay.rows, lay.d), label="load.rotate")
    return b.build(out)


def _negate(lay: StateLayout) -> TensorProgram:
    b = _phase("negate", lay, 1)
    rd1 = lay.block(lay.RD1)
    src = b.route("x", rd1, label="negate.operand")
    neg = emit_negate(b, src, extra_ones=1)
    out = scatter(b, "x", [(np.append(rd1, lay.cell(lay.RC, 0)), neg)], label="negate.put")
    return b.build(out)


def _add(lay: StateLayout) -> TensorProgram:
    b = _phase("add", lay, lay.d)
    c = b.route("x", [lay.cell(lay.RC, 0)], label="add.carry_in")
    x = b.route("x", [lay.cell(lay.RD1, 0)], label="add.lhs")
    y = b.route("x", [lay.cell(lay.RD2, 0)], label="add.rhs")
    s, cy = emit_full_adder(b, c, x, y, label="add")
    # rotate only the three register rows; everything else is untouched
    perm = np.arange(lay.size)
    perm[: 3 * lay.d] = column_rotation(3, lay.d)
    out = scatter(b, "x", [([lay.cell(lay.RD1, 0)], s), ([lay.cell(lay.RC, 1)], cy)], permute=perm,
                  label="add.carry_rotate")
    return b.build(out)


def _write(lay: StateLayout) -> TensorProgram:
    cfg = lay.cfg
    b = _phase("write", lay, lay.d)
    addr = lay.block(lay.RA2 + np.arange(lay.w), 0)
    mem_cells = np.array([lay.cell(lay.data_row(s), 0) for s in range(cfg.K)])
    mem = emit_write(b, "x", addr, lay.cell(lay.RD1, 0), mem_cells, _codes(0, cfg.K, lay.w), label="write")
    out = scatter(b, "x", [(mem_cells, mem)], permute=column_rotation(lay.rows, lay.d), label="write.rotate")
    return b.build(out)


def _pc_setup(lay: StateLayout) -> TensorProgram:
    b = _phase("pc_setup", lay, 1)
    pc = b.route("x", lay.block(lay.RPC + np.arange(lay.w)), label="pc_setup.copy")
    ones = b.const(np.ones(lay.d, dtype=np.int64), label="pc_setup.carry")
    out = scatter(b, "x", [(lay.block(lay.RA2 + np.arange(lay.w)), pc), (lay.block(lay.RC), ones)],
                  label="pc_setup.put")
    return b.build(out)


def _pc_increment(lay: StateLayout) -> TensorProgram:
    """Ripple ``r_a2 + 1`` one bit per iteration, every column in parallel."""
    w, d = lay.w, lay.d
    b = _phase("pc_increment", lay, w)
    low = lay.block(lay.RA2)
    c = b.route("x", lay.block(lay.RC), label="inc.carry_in")
    x = b.route("x", low, label="inc.bit")
    zero = b.const(-np.ones(d, dtype=np.int64), label="inc.zero")
    s, cy = emit_full_adder(b, c, x, zero, label="inc")
    perm = np.arange(lay.size)
    rows = lay.RA2 + np.arange(w)
    perm[lay.block(rows)] = lay.block(np.roll(rows, -1))
    out = scatter(b, "x", [(low, s), (lay.block(lay.RC), cy)], permute=perm, label="inc.shift")
    return b.build(out)


def _branch(lay: StateLayout) -> TensorProgram:
    w, d = lay.w, lay.d
    b = _phase("branch", lay, 1)
    target = b.route("x", lay.block(lay.RA3 + np.arange(w)), label="branch.target_in")
    nxt = b.route("x", lay.block(lay.RA2 + np.arange(w)), label="branch.next_in")
    word = b.route("x", lay.block(lay.RD1), label="branch.word")
    pc = emit_branch(b, target, nxt, word=word, lanes=d)
    scratch = lay.block(np.arange(lay.RPC))
    reset = b.const(-np.ones(scratch.shape[0], dtype=np.int64), label="branch.reset")
    out = scatter(b, "x", [(lay.block(lay.RPC + np.arange(w)), pc), (scratch, reset)], label="branch.put")
    return b.build(out)


@lru_cache(maxsize=16)
def _build(cfg: MachineConfig, lowered: bool) -> TensorProgram:
    lay = StateLayout(cfg)
    b = ProgramBuilder(f"subleq_w{cfg.w}_d{cfg.d}_K{cfg.K}_m{cfg.m}", lay.size, boundary_bound=1)
    x = "x"
    for make in (_fetch, _load, _negate, _add, _write, _pc_setup, _pc_increment, _branch):
        body = make(lay)
        x = b.loop(x, body, label=body.name)
    core = b.build(x, declared_layers=LAYER_BUDGETS["subleq"])
    return lower_gates(core) if lowered else core


def build_subleq_core(cfg: MachineConfig, lowered: bool = False) -> TensorProgram:
    """Compile the one-instruction network for ``cfg``.

    With ``lowered=True`` every gate is replaced by plain ReLU layers.
    """
    return _build(cfg, lowered)


# --------------------------------------------------------------------------- state

@dataclass(frozen=True, eq=False)
class MachineState:
    cfg: MachineConfig
    cells: np.ndarray
    eof_slot: int

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).ravel()
        n = StateLayout(self.cfg).size
        if cells.shape != (n,):
            raise ValueError(f"state must have {n} cells, got {cells.shape[0]}")
        object.__setattr__(self, "cells", cells)

    def __eq__(self, other) -> bool:
        return (isinstance(other, MachineState) and self.cfg == other.cfg
                and self.eof_slot == other.eof_slot and np.array_equal(self.cells, other.cells))

    @property
    def layout(self) -> StateLayout:
        return StateLayout(self.cfg)

    @property
    def matrix(self) -> np.ndarray:
        lay = self.layout
        return self.cells.reshape(lay.rows, lay.d)

    def word(self, slot: int) -> int:
        return extract_word(self, slot)

    @property
    def pc(self) -> int:
        return extract_pc(self)

    @property
    def halted(self) -> bool:
        return self.pc == self.eof_slot

    def instruction(self, slot: int) -> tuple[int, int, int]:
        lay = self.layout
        rows = lay.instruction_rows(slot - self.cfg.K)
        return decode_instruction(self.matrix[rows, 0], self.cfg.w)

    def memory(self) -> list[int]:
        return [self.word(s) for s in range(self.cfg.K)]


def extract_word(state: MachineState, slot: int) -> int:
    if not state.cfg.is_data_slot(slot):
        raise ValueError(f"slot {slot} is not a data slot")
    return decode_word(state.matrix[state.layout.data_row(slot)])


def extract_pc(state: MachineState) -> int:
    lay = state.layout
    return decode_address(state.matrix[lay.RPC : lay.RPC + lay.w, 0])


def merge_data(program: LoadedProgram, data=None) -> list[int]:
    """Initial memory: the program's words overridden by ``data``.

    ``data`` is a mapping ``{slot or name: value}`` or a sequence of values for
    slots ``1, 2, ...``.  Slot 0 is reserved and cannot be set.
    """
    cfg = program.cfg
    mem = list(program.data)
    if data is None:
        return mem
    names = dict(program.names)
    items = data.items() if isinstance(data, Mapping) else enumerate(data, 1)
    for key, val in items:
        slot = names[key] if isinstance(key, str) else int(key)
        if slot == 0:
            raise ValueError("slot 0 is reserved for the halting instruction and cannot be initialised")
        if not cfg.is_data_slot(slot):
            raise ValueError(f"slot {slot} is not a data slot (K={cfg.K})")
        mem[slot] = int(val)
    return mem


def init_state(cfg: MachineConfig, program: LoadedProgram, data=None) -> MachineState:
    """Encode ``program`` and its data into a fresh state with the PC at the first instruction."""
    if program.cfg != cfg:
        raise ValueError(f"program was resolved for {program.cfg}, not {cfg}")
    lay = StateLayout(cfg)
    mat = -np.ones((lay.rows, lay.d), dtype=np.int64)
    for s, v in enumerate(merge_data(program, data)):
        mat[lay.data_row(s)] = encode_word(v, cfg.d)
    for j, (a, b, c) in enumerate(program.instruction_table()):
        mat[lay.instruction_rows(j)] = encode_instruction(a, b, c, cfg.w)[:, None]
    mat[lay.RPC : lay.RPC + lay.w] = encode_address(program.entry_slot, cfg.w)[:, None]
    return MachineState(cfg, mat.ravel(), program.eof_slot)


# --------------------------------------------------------------------------- execution

def _check(cells: np.ndarray) -> None:
    bad = ~((cells == 1) | (cells == -1))
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise InvariantViolation(f"cell {tuple(int(i) for i in idx)} = {cells[tuple(idx)]} is not +/-1")


def step_batch(cells: np.ndarray, core: TensorProgram) -> np.ndarray:
    """One forward pass on a (n, size) batch of states."""
    cells = np.asarray(cells, dtype=np.int64)
    _check(cells)
    out = execute(core, cells)
    _check(out)
    return out


def step(state: MachineState, core: TensorProgram | None = None) -> MachineState:
    core = build_subleq_core(state.cfg) if core is None else core
    return MachineState(state.cfg, step_batch(state.cells, core), state.eof_slot)


def _pc_cols(cfg: MachineConfig) -> np.ndarray:
    lay = StateLayout(cfg)
    return lay.block(lay.RPC + np.arange(cfg.w), 0)


def run(state: MachineState, max_iters: int = 1_000_000, core: TensorProgram | None = None,
        trace: bool = True) -> tuple[MachineState, HaltStatus, list[TraceRecord]]:
    """Iterate the network until the PC reaches the halting slot.

    Each trace record is decoded from the states before and after a pass;
    the flag is the ``<= 0`` test on the written word.
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    core = build_subleq_core(state.cfg) if core is None else core
    records = []
    for t in range(1, max_iters + 1):
        pc = state.pc
        instr = state.instruction(pc) if state.cfg.is_instruction_slot(pc) else None
        state = step(state, core)
        halted = state.halted
        if trace:
            if instr is None:
                raise InvariantViolation(f"PC {pc} is not an instruction slot")
            b = instr[1]
            v = state.word(b) if state.cfg.is_data_slot(b) else 0
            records.append(TraceRecord(t, pc, instr, b, v, v <= 0, halted))
        if halted:
            return state, HaltStatus(HALTED, t), records
    return state, HaltStatus(ITERATION_LIMIT, max_iters), records


def run_batch(cells: np.ndarray, cfg: MachineConfig, eof_slots: Sequence[int] | int, max_iters: int,
              core: TensorProgram | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run a batch until every state halts; returns final cells and halt iterations (-1 if not halted).

    Halted states are fixed points of the network, so they simply keep
    being stepped along with the rest.
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    core = build_subleq_core(cfg) if core is None else core
    cells = np.atleast_2d(np.asarray(cells, dtype=np.int64))
    eof = np.broadcast_to(np.asarray(eof_slots), (cells.shape[0],))
    pcs = _pc_cols(cfg)
    weights = 1 << np.arange(cfg.w)
    halted_at = np.full(cells.shape[0], -1)
    for t in range(1, max_iters + 1):
        cells = step_batch(cells, core)
        pc = ((cells[:, pcs] == 1) * weights).sum(axis=1)
        halted_at[(halted_at < 0) & (pc == eof)] = t
        if (halted_at >= 0).all():
            break
    return cells, halted_at
