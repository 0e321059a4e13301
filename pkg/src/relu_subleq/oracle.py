"""Plain SUBLEQ interpreter on Python integers with ``d``-bit wraparound.

It shares the slot table and trace format of the network so that the two
can be compared record by record.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .asm import LoadedProgram
from .config import MachineConfig
from .trace import HALTED, ITERATION_LIMIT, HaltStatus, TraceRecord

__all__ = ["ProgramFault", "wrap", "OracleState", "oracle_init", "oracle_step", "oracle_run"]


class ProgramFault(RuntimeError):
    pass


def wrap(x: int, d: int) -> int:
    """Reduce ``x`` into the signed ``d``-bit range."""
    m = 1 << d
    x = (int(x) + (m >> 1)) % m
    return x - (m >> 1)


@dataclass(frozen=True)
class OracleState:
    cfg: MachineConfig
    mem: tuple[int, ...]
    table: tuple[tuple[int, int, int], ...]
    pc: int
    eof_slot: int

    @property
    def halted(self) -> bool:
        return self.pc == self.eof_slot

    def instruction(self, slot: int) -> tuple[int, int, int]:
        return self.table[slot - self.cfg.K]


def oracle_init(program: LoadedProgram, data=None) -> OracleState:
    from .machine import merge_data

    mem = merge_data(program, data)
    return OracleState(program.cfg, tuple(mem), tuple(program.instruction_table()),
                       program.entry_slot, program.eof_slot)


def oracle_step(s: OracleState, iteration: int = 1) -> tuple[OracleState, TraceRecord]:
    cfg = s.cfg
    if not cfg.is_instruction_slot(s.pc):
        raise ProgramFault(f"PC {s.pc} is not an instruction slot")
    a, b, c = s.instruction(s.pc)
    if not (cfg.is_data_slot(a) and cfg.is_data_slot(b)):
        raise ProgramFault(f"instruction at slot {s.pc} addresses a non-data slot ({a}, {b})")
    if not cfg.is_instruction_slot(c):
        raise ProgramFault(f"instruction at slot {s.pc} branches to non-instruction slot {c}")
    value = wrap(s.mem[b] - s.mem[a], cfg.d)
    mem = list(s.mem)
    mem[b] = value
    flag = value <= 0
    nxt = s.pc + 1
    if not flag and not cfg.is_instruction_slot(nxt):
        raise ProgramFault(f"fall-through from slot {s.pc} leaves the instruction slots")
    pc = c if flag else nxt
    new = replace(s, mem=tuple(mem), pc=pc)
    rec = TraceRecord(iteration, s.pc, (a, b, c), b, value, flag, new.halted)
    return new, rec


def oracle_run(s: OracleState, max_iters: int) -> tuple[OracleState, HaltStatus, list[TraceRecord]]:
    """Step until the PC reaches the halting slot or ``max_iters`` steps have run."""
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    trace = []
    for t in range(1, max_iters + 1):
        s, rec = oracle_step(s, t)
        trace.append(rec)
        if s.halted:
            return s, HaltStatus(HALTED, t), trace
    return s, HaltStatus(ITERATION_LIMIT, max_iters), trace
