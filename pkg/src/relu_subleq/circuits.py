"""Integer-weight ReLU circuits for memory access, arithmetic and branching.

Two layers of API live here.  The ``emit_*`` functions append a circuit to a
:class:`~relu_subleq.ir.ProgramBuilder` given the names of the vectors it
reads, and return the names it produces; the machine composes them.  The
``build_*`` functions wrap those emitters into standalone programs over small
self-contained state layouts, which is what the lemma-level test suites run.

State vectors hold +/-1 bits.  Intermediate wires carry {0, 1} flags or
shifted values ``v + 1`` in {0, 2} so that every layer is a real
``ReLU(W x + b)``; a +/-1 value ``v`` survives a ReLU as ``ReLU(v + 1) - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .encoding import encode_address
from .ir import ProgramBuilder, TensorProgram

__all__ = [
    "CircuitParams",
    "LAYER_BUDGETS",
    "column_rotation",
    "scatter",
    "emit_read",
    "emit_write",
    "emit_full_adder",
    "emit_negate",
    "emit_branch",
    "full_adder_table",
    "two_pass_full_add",
    "build_read_one_bit",
    "build_read_word",
    "build_write_one_bit",
    "build_write_word",
    "build_full_adder",
    "build_add_word",
    "build_sub_word",
    "build_leq_zero_flag",
    "build_cond_branch",
    "ReadLayout",
    "RegisterLayout",
    "BranchLayout",
]

# Layer budgets stated for each construction.
LAYER_BUDGETS = {
    "read": 2,
    "write": 2,
    "full_adder": 6,
    "subtract": 7,
    "cond_branch": 4,
    "subleq": 23,
}


@dataclass(frozen=True)
class CircuitParams:
    """Address width ``w``, word width ``d`` and the number of addressable slots.

    Slot ``i`` is addressed by the LSB-first binary code of ``i``.
    """

    w: int
    d: int = 4
    n_slots: int | None = None
    codes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.w < 1 or self.d < 2:
            raise ValueError(f"need w >= 1 and d >= 2, got w={self.w}, d={self.d}")
        n = (1 << self.w) if self.n_slots is None else self.n_slots
        if not 1 <= n <= (1 << self.w):
            raise ValueError(f"{n} slots cannot be addressed with {self.w} bits")
        object.__setattr__(self, "n_slots", n)
        object.__setattr__(self, "codes", np.stack([encode_address(i, self.w) for i in range(n)]))


# --------------------------------------------------------------------------- routing helpers

def column_rotation(rows: int, cols: int) -> np.ndarray:
    """Index map that shifts every row of a row-major (rows x cols) matrix left by one column."""
    r, c = np.divmod(np.arange(rows * cols), cols)
    return r * cols + (c + 1) % cols


def scatter(b: ProgramBuilder, base: str, writes, permute: np.ndarray | None = None,
            label: str = "scatter") -> str:
    """Copy ``base`` with ``writes = [(cells, name), ...]`` overwritten, then optionally permute.

    Compiles to a single route step.
    """
    n = b.size(base)
    srcs = [base]
    index = np.arange(n)
    offset = n
    for cells, name in writes:
        cells = np.asarray(cells, dtype=np.int64).ravel()
        if cells.shape[0] != b.size(name):
            raise ValueError(f"{label}: {cells.shape[0]} cells but {name!r} has size {b.size(name)}")
        index[cells] = offset + np.arange(cells.shape[0])
        srcs.append(name)
        offset += cells.shape[0]
    if permute is not None:
        index = index[permute]
    return b.route(srcs, index, label=label)


def _take(b: ProgramBuilder, src: str, cells, label: str) -> str:
    return b.route(src, np.asarray(cells, dtype=np.int64).ravel(), label=label)


def _const(b: ProgramBuilder, n: int, v: int, label: str) -> str:
    return b.const(np.full(n, v), label=label)


def _unshift(b: ProgramBuilder, src: str, label: str) -> str:
    n = b.size(src)
    return b.affine(src, np.eye(n, dtype=np.int64), np.full(n, -1), label=label)


# --------------------------------------------------------------------------- emitters

def emit_read(b: ProgramBuilder, src: str, addr_cells, dest_cells, mem_cells, codes,
              label: str = "read") -> str:
    """Read ``r`` words in parallel: ``dest[j] <- mem[slot matched by addr[j]]``.

    ``addr_cells`` is (r, w), ``dest_cells`` (r, L), ``mem_cells`` (S, L) and
    ``codes`` (S, w).  Two layers: erase the destination registers, and the
    slot matcher ``e = ReLU(A q - (w - 1))``.  The selected word is
    ``sum_s e_s * v_s`` (gated, free) added onto the erased registers.
    Returns the name of the new (r * L) register contents.
    """
    addr_cells = np.atleast_2d(np.asarray(addr_cells))
    dest_cells = np.asarray(dest_cells)
    dest_cells = dest_cells.reshape(addr_cells.shape[0], -1)
    mem_cells = np.asarray(mem_cells).reshape(codes.shape[0], -1)
    r, w = addr_cells.shape
    S, L = mem_cells.shape
    if dest_cells.shape[1] != L:
        raise ValueError(f"{label}: register width {dest_cells.shape[1]} != slot width {L}")

    dest = _take(b, src, dest_cells, f"{label}.dest")
    erased = b.affine_relu(dest, np.zeros((r * L, r * L), dtype=np.int64), label=f"{label}.erase")
    q = _take(b, src, addr_cells, f"{label}.addr")
    e = b.affine_relu(q, np.kron(np.eye(r, dtype=np.int64), codes), np.full(r * S, -(w - 1)),
                      label=f"{label}.match")
    # e laid out (r, S); broadcast to (r, S, L)
    e_b = b.route(e, np.repeat(np.arange(r * S), L), label=f"{label}.bcast")
    mem = _take(b, src, np.tile(mem_cells.ravel(), r), f"{label}.mem")
    picked = b.gate(e_b, mem, label=f"{label}.select")
    sum_w = np.kron(np.eye(r, dtype=np.int64), np.tile(np.eye(L, dtype=np.int64), (1, S)))
    val = b.affine(picked, sum_w, label=f"{label}.gather")
    return b.add(erased, val, label=f"{label}.put")


def emit_write(b: ProgramBuilder, src: str, addr_cells, data_cell, mem_cells, codes,
               label: str = "write") -> str:
    """``mem[slot matched by addr] <- data`` for one-bit slots.

    Two layers: the slot matcher ``e``, and ``h = ReLU(v0 + 1)`` extracting the
    register bit.  New memory is ``(1 - e) * v + e * v0`` evaluated as
    ``v - e*v + e*h - e``.  Returns the name of the new (S,) memory contents.
    """
    addr_cells = np.asarray(addr_cells).ravel()
    mem_cells = np.asarray(mem_cells).ravel()
    w = addr_cells.shape[0]
    S = mem_cells.shape[0]
    q = _take(b, src, addr_cells, f"{label}.addr")
    e = b.affine_relu(q, codes, np.full(S, -(w - 1)), label=f"{label}.match")
    v0 = _take(b, src, [data_cell], f"{label}.data")
    h = b.affine_relu(v0, [[1]], [1], label=f"{label}.extract")
    mem = _take(b, src, mem_cells, f"{label}.mem")
    erased_part = b.gate(e, mem, label=f"{label}.erase")
    h_b = b.route(h, np.zeros(S, dtype=np.int64), label=f"{label}.bcast")
    deposit = b.gate(e, h_b, label=f"{label}.deposit")
    parts = b.route([mem, erased_part, deposit, e], np.arange(4 * S), label=f"{label}.parts")
    eye = np.eye(S, dtype=np.int64)
    return b.affine(parts, np.hstack([eye, -eye, eye, -eye]), label=f"{label}.combine")


def full_adder_table() -> dict[tuple[int, int, int], tuple[int, int]]:
    """``(a, b, cin)`` in {0,1} -> ``(sum, carry)`` in {0,1}."""
    return {(a, bb, c): ((a + bb + c) & 1, (a + bb + c) >> 1) for a, bb, c in product((0, 1), repeat=3)}


def two_pass_full_add(a: int, b: int, cin: int) -> tuple[int, int, int, int]:
    """Full addition as two half-adder passes over {0,1} bits.

    Pass one folds the carry-in into ``a``; pass two adds ``b``.  Returns
    ``(sum, carry, carry_pass1, carry_pass2)``; the two pass carries are never
    both 1, so their plain sum is the carry-out.
    """
    s1, c1 = (a + cin) & 1, (a + cin) >> 1
    s2, c2 = (s1 + b) & 1, (s1 + b) >> 1
    return s2, c1 + c2, c1, c2


def emit_full_adder(b: ProgramBuilder, cin: str, a: str, bb: str, label: str = "add") -> tuple[str, str]:
    """``k``-lane full adder over +/-1 bits; returns (sum, carry) names, each size k.

    Six layers: map to {0,1}; then the "is one" and "is zero" flags of the
    operands (a and carry-in share layers, b gets its own pair); the eight
    case indicators are products of flags (gates, free); a final layer maps
    the indicators to the +/-1 sum and carry.
    """
    k = b.size(a)
    eye = np.eye(k, dtype=np.int64)
    z = np.zeros((k, k), dtype=np.int64)
    cat = b.route([cin, a, bb], np.arange(3 * k), label=f"{label}.in")
    x1 = b.affine_relu(cat, np.eye(3 * k, dtype=np.int64), label=f"{label}.to01")
    sel_a = np.hstack([z, eye, z])
    sel_c = np.hstack([eye, z, z])
    sel_b = np.hstack([z, z, eye])
    ones = np.ones(k, dtype=np.int64)
    ac1 = b.affine_relu(x1, np.vstack([sel_a, sel_c]), label=f"{label}.flags_ac_one")
    ac0 = b.affine_relu(x1, -np.vstack([sel_a, sel_c]), np.tile(ones, 2), label=f"{label}.flags_ac_zero")
    b1 = b.affine_relu(x1, sel_b, label=f"{label}.flags_b_one")
    b0 = b.affine_relu(x1, -sel_b, ones, label=f"{label}.flags_b_zero")
    A = {1: _take(b, ac1, np.arange(k), f"{label}.a1"), 0: _take(b, ac0, np.arange(k), f"{label}.a0")}
    C = {1: _take(b, ac1, k + np.arange(k), f"{label}.c1"), 0: _take(b, ac0, k + np.arange(k), f"{label}.c0")}
    B = {1: b1, 0: b0}
    ab = {(x, y): b.gate(A[x], B[y], label=f"{label}.case_ab") for x, y in product((0, 1), repeat=2)}
    cases = list(product((0, 1), repeat=3))
    inds = [b.gate(C[c], ab[(x, y)], label=f"{label}.case") for x, y, c in cases]
    stack = b.route(inds, np.arange(8 * k), label=f"{label}.cases")
    table = full_adder_table()
    w_out = np.zeros((2 * k, 8 * k), dtype=np.int64)
    for j, (x, y, c) in enumerate(cases):
        s, cy = table[(x, y, c)]
        w_out[:k, j * k:(j + 1) * k] = (2 * s - 1) * eye
        w_out[k:, j * k:(j + 1) * k] = (2 * cy - 1) * eye
    # indicators sum to 1, so a +1 shift keeps the pre-activation in {0, 2}
    h = b.affine_relu(stack, w_out, np.ones(2 * k), label=f"{label}.emit")
    out = _unshift(b, h, f"{label}.out")
    return _take(b, out, np.arange(k), f"{label}.sum"), _take(b, out, k + np.arange(k), f"{label}.carry")


def emit_negate(b: ProgramBuilder, src: str, extra_ones: int = 0, label: str = "negate") -> str:
    """One layer mapping bits ``v -> -v``; optionally appends ``extra_ones`` constant +1 cells."""
    n = b.size(src)
    w = np.vstack([-np.eye(n, dtype=np.int64), np.zeros((extra_ones, n), dtype=np.int64)])
    bias = np.concatenate([np.ones(n), np.full(extra_ones, 2)])
    h = b.affine_relu(src, w, bias, label=f"{label}.invert")
    return _unshift(b, h, f"{label}.out")


def emit_branch(b: ProgramBuilder, target: str, nxt: str, *, flag: str | None = None,
                word: str | None = None, lanes: int = 1, label: str = "branch") -> str:
    """Select ``target`` (jump) or ``nxt`` (fall through); returns the new PC bits.

    Either ``flag`` (one +/-1 cell, +1 = jump) or ``word`` (d LSB-first bits,
    jump iff the value is <= 0) decides.  ``target``/``nxt`` hold ``lanes``
    copies of the address laid out lane-minor.  Four layers; in ``word`` mode
    the sign and zero tests share the first layer.
    """
    n = b.size(target)
    eye = np.eye(n, dtype=np.int64)
    ones = np.ones((n, 1), dtype=np.int64)
    if (flag is None) == (word is None):
        raise ValueError("pass exactly one of flag= or word=")
    if word is not None:
        d = b.size(word)
        cat = b.route([target, word], np.arange(n + d), label=f"{label}.in")
        sign = np.zeros((1, d), dtype=np.int64)
        sign[0, d - 1] = 1
        w1 = np.block([
            [eye, np.zeros((n, d), dtype=np.int64)],
            [np.zeros((1, n), dtype=np.int64), sign],
            [np.zeros((1, n), dtype=np.int64), -np.ones((1, d), dtype=np.int64)],
        ])
        b1 = np.concatenate([np.ones(n), [0, -(d - 1)]])
        l1 = b.affine_relu(cat, w1, b1, label=f"{label}.extract_target+flag")
        h1 = _take(b, l1, np.arange(n), f"{label}.h_target")
        pz = _take(b, l1, n + np.arange(2), f"{label}.sign_zero")
    else:
        h1 = b.affine_relu(target, eye, np.ones(n), label=f"{label}.extract_target")
    h2 = b.affine_relu(nxt, eye, np.ones(n), label=f"{label}.extract_next")
    if word is not None:
        # negative (p) or zero (z) jumps; neither stays.  p and z are exclusive.
        w3 = np.block([[ones, 0 * ones], [0 * ones, ones], [-ones, -ones]])
        b3 = np.concatenate([np.zeros(2 * n), np.ones(n)])
        g = b.affine_relu(pz, w3, b3, label=f"{label}.flag_gates")
        jp = _take(b, g, np.arange(n), f"{label}.jump_neg")
        jz = _take(b, g, n + np.arange(n), f"{label}.jump_zero")
        st = _take(b, g, 2 * n + np.arange(n), f"{label}.stay")
        parts = [b.gate(jp, h1, label=f"{label}.pick"), b.gate(jz, h1, label=f"{label}.pick"),
                 b.gate(st, h2, label=f"{label}.pick")]
    else:
        g = b.affine_relu(flag, np.vstack([ones, -ones]), label=f"{label}.flag_gates")
        jump = _take(b, g, np.arange(n), f"{label}.jump")
        stay = _take(b, g, n + np.arange(n), f"{label}.stay")
        parts = [b.gate(jump, h1, label=f"{label}.pick"), b.gate(stay, h2, label=f"{label}.pick")]
    stack = b.route(parts, np.arange(len(parts) * n), label=f"{label}.picks")
    sel = b.affine(stack, np.hstack([eye] * len(parts)), np.full(n, -1), label=f"{label}.select")
    h4 = b.affine_relu(sel, eye, np.ones(n), label=f"{label}.repoint")
    return _unshift(b, h4, f"{label}.pc")


# --------------------------------------------------------------------------- standalone layouts

@dataclass(frozen=True)
class ReadLayout:
    """``[r_d; r_a (w); v_1 .. v_n]`` rows, each ``cols`` wide, row-major."""

    w: int
    n: int
    cols: int = 1

    @property
    def rows(self) -> int:
        return 1 + self.w + self.n

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def cell(self, row: int, col: int = 0) -> int:
        return row * self.cols + col

    def reg(self, col: int = 0) -> int:
        return self.cell(0, col)

    def addr(self, col: int = 0) -> np.ndarray:
        return np.array([self.cell(1 + i, col) for i in range(self.w)])

    def mem(self, col: int = 0) -> np.ndarray:
        return np.array([self.cell(1 + self.w + i, col) for i in range(self.n)])

    def pack(self, reg, addr, mem) -> np.ndarray:
        """Assemble a state from (cols,), (w, cols) and (n, cols) arrays."""
        m = np.vstack([np.reshape(reg, (1, self.cols)), np.reshape(addr, (self.w, self.cols)),
                       np.reshape(mem, (self.n, self.cols))])
        return m.astype(np.int64).ravel()

    def unpack(self, x: np.ndarray):
        m = np.asarray(x).reshape(self.rows, self.cols)
        return m[0], m[1:1 + self.w], m[1 + self.w:]


@dataclass(frozen=True)
class RegisterLayout:
    """``[r_c; r_d1; r_d2]`` rows of ``d`` columns (bit j+1 in column j)."""

    d: int

    @property
    def size(self) -> int:
        return 3 * self.d

    def cell(self, row: int, col: int) -> int:
        return row * self.d + col

    def pack(self, rc, rd1, rd2) -> np.ndarray:
        return np.vstack([np.reshape(rc, (1, -1)), np.reshape(rd1, (1, -1)),
                          np.reshape(rd2, (1, -1))]).astype(np.int64).ravel()

    def unpack(self, x: np.ndarray):
        m = np.asarray(x).reshape(3, self.d)
        return m[0], m[1], m[2]


@dataclass(frozen=True)
class BranchLayout:
    """``[flag; r_pc (w); r_pc+1 (w); r_target (w)]``."""

    w: int

    @property
    def size(self) -> int:
        return 1 + 3 * self.w

    def pc(self) -> np.ndarray:
        return 1 + np.arange(self.w)

    def nxt(self) -> np.ndarray:
        return 1 + self.w + np.arange(self.w)

    def target(self) -> np.ndarray:
        return 1 + 2 * self.w + np.arange(self.w)


def build_read_one_bit(params: CircuitParams) -> TensorProgram:
    """``r_d <- v_i`` where ``r_a`` holds the code of slot ``i``; layout :class:`ReadLayout`."""
    lay = ReadLayout(params.w, params.n_slots)
    b = ProgramBuilder("read_one_bit", lay.size)
    val = emit_read(b, "x", lay.addr()[None, :], [[lay.reg()]], lay.mem()[:, None], params.codes)
    out = scatter(b, "x", [([lay.reg()], val)])
    return b.build(out, declared_layers=LAYER_BUDGETS["read"])


def _column_loop_body(name: str, lay: ReadLayout, params: CircuitParams, kind: str) -> TensorProgram:
    b = ProgramBuilder(f"{name}.column", lay.size, repeat=params.d, boundary_bound=1)
    rot = column_rotation(lay.rows, lay.cols)
    if kind == "read":
        val = emit_read(b, "x", lay.addr(0)[None, :], [[lay.reg(0)]], lay.mem(0)[:, None], params.codes)
        out = scatter(b, "x", [([lay.reg(0)], val)], permute=rot)
    else:
        mem = emit_write(b, "x", lay.addr(0), lay.reg(0), lay.mem(0), params.codes)
        out = scatter(b, "x", [(lay.mem(0), mem)], permute=rot)
    return b.build(out)


def build_read_word(params: CircuitParams) -> TensorProgram:
    """Column-wise read looped ``d`` times over a (1 + w + n) x d state matrix."""
    lay = ReadLayout(params.w, params.n_slots, params.d)
    b = ProgramBuilder("read_word", lay.size)
    out = b.loop("x", _column_loop_body("read_word", lay, params, "read"), label="read_word")
    return b.build(out, declared_layers=LAYER_BUDGETS["read"])


def build_write_one_bit(params: CircuitParams) -> TensorProgram:
    """``v_i <- r_d`` where ``r_a`` holds the code of slot ``i``."""
    lay = ReadLayout(params.w, params.n_slots)
    b = ProgramBuilder("write_one_bit", lay.size)
    mem = emit_write(b, "x", lay.addr(), lay.reg(), lay.mem(), params.codes)
    out = scatter(b, "x", [(lay.mem(), mem)])
    return b.build(out, declared_layers=LAYER_BUDGETS["write"])


def build_write_word(params: CircuitParams) -> TensorProgram:
    lay = ReadLayout(params.w, params.n_slots, params.d)
    b = ProgramBuilder("write_word", lay.size)
    out = b.loop("x", _column_loop_body("write_word", lay, params, "write"), label="write_word")
    return b.build(out, declared_layers=LAYER_BUDGETS["write"])


def build_full_adder(params: CircuitParams | None = None) -> TensorProgram:
    """State ``[r_c, r_d1, r_d2]``: ``r_d1 <- sum``, ``r_c <- carry``, carry-in read from ``r_c``."""
    b = ProgramBuilder("full_adder", 3)
    c, a, bb = (_take(b, "x", [i], n) for i, n in enumerate(("rc", "rd1", "rd2")))
    s, cy = emit_full_adder(b, c, a, bb)
    out = scatter(b, "x", [([1], s), ([0], cy)])
    return b.build(out, declared_layers=LAYER_BUDGETS["full_adder"])


def _adder_loop(name: str, d: int, first: int = 1, second: int = 2) -> TensorProgram:
    """One full-adder pass on column 0 of a :class:`RegisterLayout`, carry into column 1, rotate."""
    lay = RegisterLayout(d)
    b = ProgramBuilder(name, lay.size, repeat=d, boundary_bound=1)
    c = _take(b, "x", [lay.cell(0, 0)], "rc")
    a = _take(b, "x", [lay.cell(first, 0)], "lhs")
    bb = _take(b, "x", [lay.cell(second, 0)], "rhs")
    s, cy = emit_full_adder(b, c, a, bb)
    out = scatter(b, "x", [([lay.cell(first, 0)], s), ([lay.cell(0, 1)], cy)],
                  permute=column_rotation(3, d), label="carry_and_rotate")
    return b.build(out)


def build_add_word(params: CircuitParams) -> TensorProgram:
    """``r_d1 <- wrap(r_d1 + r_d2)`` on :class:`RegisterLayout`; ``r_c`` is scratch."""
    d = params.d
    lay = RegisterLayout(d)
    b = ProgramBuilder("add_word", lay.size)
    reset = _const(b, 1, -1, "carry_reset")
    x0 = scatter(b, "x", [([lay.cell(0, 0)], reset)], label="reset_carry")
    out = b.loop(x0, _adder_loop("add_word.column", d), label="add_word")
    return b.build(out, declared_layers=LAYER_BUDGETS["full_adder"])


def build_sub_word(params: CircuitParams) -> TensorProgram:
    """``r_d1 <- wrap(r_d2 - r_d1)`` on :class:`RegisterLayout`.

    The operand order matches the instruction: ``r_d1`` holds ``mem[a]`` and
    ``r_d2`` holds ``mem[b]``.  ``r_d2`` is preserved; ``r_c`` is scratch.
    Invert ``r_d1`` (one layer, also setting the carry-in to +1 so that
    the ``+1`` of two's-complement negation rides in as the first carry), then
    one adder loop.
    """
    d = params.d
    lay = RegisterLayout(d)
    b = ProgramBuilder("sub_word", lay.size)
    rd1 = _take(b, "x", [lay.cell(1, j) for j in range(d)], "subtrahend")
    neg = emit_negate(b, rd1, extra_ones=1)
    x0 = scatter(b, "x", [([lay.cell(1, j) for j in range(d)] + [lay.cell(0, 0)], neg)], label="negated")
    out = b.loop(x0, _adder_loop("sub_word.column", d), label="sub_word")
    return b.build(out, declared_layers=LAYER_BUDGETS["subtract"])


def build_leq_zero_flag(params: CircuitParams) -> TensorProgram:
    """State ``[flag; b_1 .. b_d]``: ``flag <- +1`` iff the word's value is <= 0.

    One layer computes ``ReLU(b_d)`` (negative) and ``ReLU(-sum b - (d-1))``
    (all bits off, i.e. zero); the flag is ``2 (neg + zero) - 1``.
    """
    d = params.d
    b = ProgramBuilder("leq_zero_flag", 1 + d)
    word = _take(b, "x", 1 + np.arange(d), "word")
    sign = np.zeros(d, dtype=np.int64)
    sign[-1] = 1
    pz = b.affine_relu(word, np.vstack([sign, -np.ones(d, dtype=np.int64)]), [0, -(d - 1)],
                       label="flag.sign_zero")
    f = b.affine(pz, [[2, 2]], [-1], label="flag.combine")
    out = scatter(b, "x", [([0], f)])
    return b.build(out)


def build_cond_branch(params: CircuitParams) -> TensorProgram:
    """State :class:`BranchLayout`: ``r_pc <- r_target`` if flag = +1 else ``r_pc+1``."""
    lay = BranchLayout(params.w)
    b = ProgramBuilder("cond_branch", lay.size)
    target = _take(b, "x", lay.target(), "target")
    nxt = _take(b, "x", lay.nxt(), "next")
    flag = _take(b, "x", [0], "flag")
    pc = emit_branch(b, target, nxt, flag=flag)
    out = scatter(b, "x", [(lay.pc(), pc)])
    return b.build(out, declared_layers=LAYER_BUDGETS["cond_branch"])
