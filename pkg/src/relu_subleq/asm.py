"""A small assembly language for SUBLEQ programs.

Source layout::

    .data x 37          ; one word per line: name and initial value
    .text
    loop: SUBLEQ x x ?  ; '?' = next instruction, HALT = stop, or a label

Comments start with ``;`` or ``#``.  Data words get slots ``1, 2, ...`` in
declaration order (slot 0 is reserved for the halting instruction's
scratch word).  Instruction ``j`` lands in slot ``K + j`` and a halting
instruction is appended after the last one.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from .config import MachineConfig
from .encoding import word_range

__all__ = [
    "AsmError",
    "CapacityError",
    "DisassemblyError",
    "DataDecl",
    "SourceInstruction",
    "SourceProgram",
    "LoadedProgram",
    "CorpusEntry",
    "parse",
    "assemble",
    "resolve",
    "disassemble",
    "corpus",
    "corpus_entry",
]

NEXT = "?"
HALT = "HALT"
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_INT = re.compile(r"[+-]?\d+\Z")


class AsmError(ValueError):
    """Assembly error carrying a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message, self.line, self.column = message, line, column
        where = f"{line}:{column}: " if line else ""
        super().__init__(f"{where}{message}")


class CapacityError(AsmError):
    pass


class DisassemblyError(ValueError):
    pass


@dataclass(frozen=True)
class DataDecl:
    name: str
    value: int
    line: int


@dataclass(frozen=True)
class SourceInstruction:
    label: str | None
    a: str
    b: str
    c: str
    line: int
    columns: tuple[int, int, int] = (0, 0, 0)


@dataclass(frozen=True)
class SourceProgram:
    data: tuple[DataDecl, ...]
    instructions: tuple[SourceInstruction, ...]

    def data_names(self) -> list[str]:
        return [x.name for x in self.data]


@dataclass(frozen=True)
class LoadedProgram:
    """A program bound to concrete slots of a :class:`MachineConfig`."""

    cfg: MachineConfig
    instructions: tuple[tuple[int, int, int], ...]
    data: tuple[int, ...]
    names: tuple[tuple[str, int], ...] = ()
    labels: tuple[tuple[str, int], ...] = ()

    @property
    def eof_slot(self) -> int:
        return self.cfg.K + len(self.instructions)

    @property
    def entry_slot(self) -> int:
        return self.cfg.K

    def halt_instruction(self) -> tuple[int, int, int]:
        return (0, 0, self.eof_slot)

    def instruction_table(self) -> list[tuple[int, int, int]]:
        """All ``m`` instruction slots: user code, the halting instruction, then copies of it."""
        table = list(self.instructions) + [self.halt_instruction()]
        table += [self.halt_instruction()] * (self.cfg.m - len(table))
        return table

    def slot_of(self, name: str) -> int:
        return dict(self.names)[name]

    def named_values(self, data=None) -> dict[str, int]:
        data = self.data if data is None else data
        return {n: int(data[s]) for n, s in self.names}


# --------------------------------------------------------------------------- parsing

def _tokens(text: str) -> list[tuple[str, int]]:
    out = []
    for m in re.finditer(r"\S+", text):
        out.append((m.group(), m.start() + 1))
    return out


def _strip_comment(line: str) -> str:
    for ch in ";#":
        i = line.find(ch)
        if i >= 0:
            line = line[:i]
    return line


def parse(text: str) -> SourceProgram:
    """Parse source text; raises :class:`AsmError` with the offending position."""
    data: list[DataDecl] = []
    instrs: list[SourceInstruction] = []
    seen_data: dict[str, int] = {}
    seen_labels: dict[str, int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        toks = _tokens(_strip_comment(raw))
        if not toks:
            continue
        head, col = toks[0]
        if head == ".data":
            if len(toks) != 3:
                raise AsmError("expected '.data <name> <integer>'", lineno, col)
            (name, ncol), (val, vcol) = toks[1], toks[2]
            if not _IDENT.match(name) or name == HALT:
                raise AsmError(f"invalid data name {name!r}", lineno, ncol)
            if not _INT.match(val):
                raise AsmError(f"invalid integer {val!r}", lineno, vcol)
            if name in seen_data:
                raise AsmError(f"duplicate data name {name!r} (first on line {seen_data[name]})", lineno, ncol)
            seen_data[name] = lineno
            data.append(DataDecl(name, int(val), lineno))
            section = "data"
            continue
        if head == ".text":
            if len(toks) != 1:
                raise AsmError("unexpected tokens after '.text'", lineno, toks[1][1])
            section = "text"
            continue
        if head.startswith("."):
            raise AsmError(f"unknown directive {head!r}", lineno, col)
        if section != "text":
            raise AsmError("instruction outside a .text section", lineno, col)
        label = None
        if head.endswith(":"):
            label = head[:-1]
            if not _IDENT.match(label) or label == HALT:
                raise AsmError(f"invalid label {label!r}", lineno, col)
            if label in seen_labels:
                raise AsmError(f"duplicate label {label!r} (first on line {seen_labels[label]})", lineno, col)
            seen_labels[label] = lineno
            toks = toks[1:]
            if not toks:
                raise AsmError("label must precede an instruction on the same line", lineno, col)
        op, ocol = toks[0]
        if op.upper() != "SUBLEQ":
            raise AsmError(f"unknown mnemonic {op!r}", lineno, ocol)
        if len(toks) != 4:
            raise AsmError(f"SUBLEQ takes 3 operands, got {len(toks) - 1}", lineno, ocol)
        (a, ac), (bb, bc), (c, cc) = toks[1:]
        for opnd, oc in ((a, ac), (bb, bc)):
            if not _IDENT.match(opnd):
                raise AsmError(f"invalid data operand {opnd!r}", lineno, oc)
        if c not in (NEXT, HALT) and not _IDENT.match(c):
            raise AsmError(f"invalid branch target {c!r}", lineno, cc)
        instrs.append(SourceInstruction(label, a, bb, c, lineno, (ac, bc, cc)))
    return SourceProgram(tuple(data), tuple(instrs))


def assemble(text: str) -> SourceProgram:
    """Parse and check symbol references; the result can be resolved on any large enough machine."""
    src = parse(text)
    names = set(src.data_names())
    labels = {i.label for i in src.instructions if i.label}
    for ins in src.instructions:
        for opnd, col in ((ins.a, ins.columns[0]), (ins.b, ins.columns[1])):
            if opnd not in names:
                raise AsmError(f"unknown data name {opnd!r}", ins.line, col)
        if ins.c not in (NEXT, HALT) and ins.c not in labels:
            raise AsmError(f"unknown label {ins.c!r}", ins.line, ins.columns[2])
    return src


def resolve(src: SourceProgram | str, cfg: MachineConfig) -> LoadedProgram:
    """Assign slots under ``cfg``; raises :class:`CapacityError` if the program does not fit."""
    if isinstance(src, str):
        src = assemble(src)
    n_data, n_instr = len(src.data), len(src.instructions)
    if n_data + 1 > cfg.K:
        raise CapacityError(f"{n_data} data words plus the reserved slot need K >= {n_data + 1}, got K={cfg.K}")
    if n_instr + 1 > cfg.m:
        raise CapacityError(
            f"{n_instr} instructions plus the halting instruction need m >= {n_instr + 1}, got m={cfg.m}")
    lo, hi = word_range(cfg.d)
    slots = {}
    data = [0] * cfg.K
    for i, decl in enumerate(src.data, 1):
        if not lo <= decl.value <= hi:
            raise AsmError(f"value {decl.value} of {decl.name!r} does not fit in {cfg.d} bits [{lo}, {hi}]",
                           decl.line, 1)
        slots[decl.name] = i
        data[i] = decl.value
    K = cfg.K
    eof = K + n_instr
    labels = {ins.label: K + j for j, ins in enumerate(src.instructions) if ins.label}
    out = []
    for j, ins in enumerate(src.instructions):
        if ins.c == NEXT:
            c = K + j + 1
        elif ins.c == HALT:
            c = eof
        else:
            if ins.c not in labels:
                raise AsmError(f"unknown label {ins.c!r}", ins.line, ins.columns[2])
            c = labels[ins.c]
        for opnd, col in ((ins.a, ins.columns[0]), (ins.b, ins.columns[1])):
            if opnd not in slots:
                raise AsmError(f"unknown data name {opnd!r}", ins.line, col)
        out.append((slots[ins.a], slots[ins.b], c))
    return LoadedProgram(cfg, tuple(out), tuple(data), tuple(slots.items()), tuple(sorted(labels.items(), key=lambda kv: kv[1])))


# --------------------------------------------------------------------------- disassembly

def _render(cfg: MachineConfig, table, data, eof: int, names: dict[int, str], labels: dict[int, str]) -> str:
    K = cfg.K
    n_instr = eof - K
    if not K <= eof < K + cfg.m:
        raise DisassemblyError(f"halting slot {eof} is not an instruction slot")
    user = table[:n_instr]
    used = set()
    for j, (a, b, c) in enumerate(user):
        slot = K + j
        for x in (a, b):
            if not cfg.is_data_slot(x):
                raise DisassemblyError(f"instruction at slot {slot} reads slot {x}, which is not a data slot")
            if x == 0:
                raise DisassemblyError(f"instruction at slot {slot} uses reserved slot 0")
            used.add(x)
        if not K <= c <= eof:
            raise DisassemblyError(f"instruction at slot {slot} branches to slot {c}, outside the program")
    if tuple(table[n_instr]) != (0, 0, eof):
        raise DisassemblyError(f"slot {eof} does not hold the halting instruction")
    top = max([s for s, _ in names.items()] + list(used), default=0)
    targets = {c for j, (_, _, c) in enumerate(user) if c not in (K + j + 1, eof)}
    lines = [f"; K={K} m={cfg.m} w={cfg.w} d={cfg.d}"]
    for s in range(1, top + 1):
        lines.append(f".data {names.get(s, f'w{s}')} {int(data[s])}")
    lines.append(".text")
    for j, (a, b, c) in enumerate(user):
        slot = K + j
        if c == K + j + 1 and c != eof:
            tgt = NEXT
        elif c == eof:
            tgt = HALT
        else:
            tgt = labels.get(c, f"L{c}")
        lab = labels.get(slot, f"L{slot}") + ": " if slot in targets else ""
        lines.append(f"{lab}SUBLEQ {names.get(a, f'w{a}')} {names.get(b, f'w{b}')} {tgt}")
    lines.append(f"; slot {eof}: SUBLEQ 0 0 {eof}  HALT")
    return "\n".join(lines) + "\n"


def disassemble(obj) -> str:
    """Render a :class:`LoadedProgram` or a machine state back to source text.

    The output re-assembles to the same slot assignment.  Names and labels
    missing from the object are synthesized (``w<slot>``, ``L<slot>``).
    """
    if isinstance(obj, LoadedProgram):
        names = {s: n for n, s in obj.names}
        labels = {s: n for n, s in obj.labels}
        return _render(obj.cfg, obj.instruction_table(), obj.data, obj.eof_slot, names, labels)
    from .machine import MachineState

    if isinstance(obj, MachineState):
        table = [obj.instruction(s) for s in range(obj.cfg.K, obj.cfg.K + obj.cfg.m)]
        data = [obj.word(s) for s in range(obj.cfg.K)]
        return _render(obj.cfg, table, data, obj.eof_slot, {}, {})
    raise TypeError(f"cannot disassemble {type(obj).__name__}")


# --------------------------------------------------------------------------- corpus

@dataclass(frozen=True)
class CorpusEntry:
    name: str
    text: str
    expected: dict

    @property
    def source(self) -> SourceProgram:
        return assemble(self.text)


def _corpus_dir():
    return resources.files("relu_subleq") / "corpus"


def corpus_entry(name: str) -> CorpusEntry:
    base = _corpus_dir()
    text = (base / f"{name}.sq").read_text()
    exp_file = base / f"{name}.expected.json"
    expected = json.loads(exp_file.read_text()) if exp_file.is_file() else {}
    return CorpusEntry(name, text, expected)


def corpus() -> list[CorpusEntry]:
    """The bundled example programs, sorted by name."""
    names = sorted(p.name[:-3] for p in _corpus_dir().iterdir() if p.name.endswith(".sq"))
    return [corpus_entry(n) for n in names]
