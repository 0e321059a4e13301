"""Execution traces shared by the network and the reference interpreter."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

RUNNING = "running"
HALTED = "halted"
ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class HaltStatus:
    kind: str
    iteration: int

    @property
    def halted(self) -> bool:
        return self.kind == HALTED

    def __str__(self) -> str:
        return f"{self.kind}@{self.iteration}"


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    pc_slot: int
    instruction: tuple[int, int, int]
    written_slot: int
    written_value: int
    flag: bool
    halted: bool

    def to_line(self) -> str:
        rec = {
            "iteration": self.iteration,
            "pc_slot": self.pc_slot,
            "instruction_triple": list(self.instruction),
            "written_slot": self.written_slot,
            "written_value": self.written_value,
            "flag": self.flag,
            "halted": self.halted,
        }
        return json.dumps(rec, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "TraceRecord":
        r = json.loads(line)
        return cls(r["iteration"], r["pc_slot"], tuple(r["instruction_triple"]),
                   r["written_slot"], r["written_value"], r["flag"], r["halted"])


def dump_trace(records: Iterable[TraceRecord]) -> str:
    return "".join(r.to_line() + "\n" for r in records)


def load_trace(text: str) -> list[TraceRecord]:
    return [TraceRecord.from_line(line) for line in text.splitlines() if line.strip()]


def first_divergence(a: list[TraceRecord], b: list[TraceRecord]) -> int | None:
    """Index of the first differing record, or ``None`` if the traces are equal."""
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    if len(a) != len(b):
        return min(len(a), len(b))
    return None
