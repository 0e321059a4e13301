"""Differential test engine: circuits and the full network against plain
integer references.

Every suite evaluates its cases in one or a few batched forward passes and
reports pass counts plus a :class:`Discrepancy` per failing case.  A
discrepancy holds the serialized inputs, enough to rebuild and replay the
case with :func:`replay`.  Reports render as line-delimited JSON in case
order, so seeded runs are byte-identical.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import circuits as C
from .asm import corpus, resolve
from .config import MachineConfig, StateLayout
from .encoding import decode_address, decode_word, encode_address, encode_instruction, encode_word, word_range
from .ir import TensorProgram, execute, lower_gates
from .machine import InvariantViolation, build_subleq_core, init_state, run, step
from .oracle import OracleState, oracle_init, oracle_run, oracle_step, wrap
from .trace import first_divergence

__all__ = [
    "SUITES",
    "TestPlan",
    "Discrepancy",
    "SuiteResult",
    "Report",
    "run_plan",
    "run_lemma_suites",
    "run_step_equivalence",
    "run_corpus",
    "run_lowering_equivalence",
    "replay",
]

SUITES = ("lemma", "step", "corpus", "lowering")
EXHAUSTIVE_LIMIT = 1 << 20
EDGE_KINDS = ("min", "-1", "0", "+1", "max")


@dataclass(frozen=True)
class TestPlan:
    __test__ = False  # not a pytest class

    suites: tuple[str, ...] = ("lemma", "step", "corpus")
    lemma_w: int = 3
    lemma_d: int = 4
    arith_widths: tuple[int, ...] = (4, 8)
    memories: int = 64
    grid: MachineConfig = MachineConfig(w=3, d=4, K=4, m=2)
    grid_memories: int = 32
    random_cfg: MachineConfig = MachineConfig(w=4, d=8, K=8, m=4)
    random_cases: int = 10_000
    corpus_cfg: MachineConfig = MachineConfig()
    fixed_point_iters: int = 10
    max_iters: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        bad = [s for s in self.suites if s not in SUITES]
        if bad:
            raise ValueError(f"unknown suites {bad}; choose from {SUITES}")


@dataclass(frozen=True)
class Discrepancy:
    suite: str
    case: int
    inputs: dict
    expected: object
    actual: object
    divergence: object = None

    def to_dict(self) -> dict:
        return {"suite": self.suite, "case": self.case, "inputs": self.inputs, "expected": self.expected,
                "actual": self.actual, "divergence": self.divergence}


@dataclass
class SuiteResult:
    suite: str
    cases: int = 0
    passed: int = 0
    violations: int = 0
    discrepancies: list[Discrepancy] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.cases and self.violations == 0 and not self.discrepancies

    def record(self) -> dict:
        return {"suite": self.suite, "cases": self.cases, "passed": self.passed,
                "violations": self.violations, "ok": self.ok}


@dataclass
class Report:
    results: list[SuiteResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def __getitem__(self, suite: str) -> SuiteResult:
        for r in self.results:
            if r.suite == suite:
                return r
        raise KeyError(suite)

    def suites(self) -> list[str]:
        return [r.suite for r in self.results]

    def to_text(self) -> str:
        lines = []
        for r in self.results:
            lines.append(json.dumps(r.record(), separators=(",", ":")))
            for dsc in r.discrepancies:
                lines.append(json.dumps(dsc.to_dict(), separators=(",", ":"), sort_keys=True))
        lines.append(json.dumps({"summary": "pass" if self.ok else "fail",
                                 "suites": len(self.results),
                                 "failed": sum(not r.ok for r in self.results)}, separators=(",", ":")))
        return "\n".join(lines) + "\n"


def _prep(p: TensorProgram, lowered: bool) -> TensorProgram:
    return lower_gates(p) if lowered else p


def _discrete(out: np.ndarray) -> np.ndarray:
    """Per-case flag: every cell is +/-1."""
    return np.all((out == 1) | (out == -1), axis=-1)


def _bits(values, width: int, signed: bool = True) -> np.ndarray:
    enc = encode_word if signed else encode_address
    return np.stack([enc(int(v), width) for v in values])


def _tally(res: SuiteResult, ok: np.ndarray, discrete: np.ndarray, make) -> SuiteResult:
    res.cases += int(ok.shape[0])
    res.passed += int((ok & discrete).sum())
    res.violations += int((~discrete).sum())
    for i in np.flatnonzero(~(ok & discrete)):
        res.discrepancies.append(make(int(i)))
    return res


# --------------------------------------------------------------------------- lemma suites

def _suite_read(plan: TestPlan, rng, lowered: bool, word: bool) -> SuiteResult:
    w, d = plan.lemma_w, plan.lemma_d
    n = 1 << w
    cols = d if word else 1
    params = C.CircuitParams(w, d, n)
    prog = _prep(C.build_read_word(params) if word else C.build_read_one_bit(params), lowered)
    lay = C.ReadLayout(w, n, cols)
    mems = rng.choice([-1, 1], size=(plan.memories, n, cols))
    regs = rng.choice([-1, 1], size=(plan.memories, cols))
    cases = [(addr, k) for k in range(plan.memories) for addr in range(n)]
    X = np.stack([lay.pack(regs[k], np.repeat(encode_address(addr, w)[:, None], cols, 1), mems[k])
                  for addr, k in cases])
    Y = execute(prog, X)
    got = Y.reshape(len(cases), lay.rows, cols)
    want = X.reshape(len(cases), lay.rows, cols).copy()
    for i, (addr, k) in enumerate(cases):
        want[i, 0] = mems[k, addr]
    ok = np.all(got == want, axis=(1, 2))
    name = "lemma.read_word" if word else "lemma.read_bit"
    return _tally(SuiteResult(name), ok, _discrete(Y), lambda i: Discrepancy(
        name, i, {"w": w, "cols": cols, "state": X[i].tolist()}, want[i].ravel().tolist(), Y[i].tolist()))


def _suite_write(plan: TestPlan, rng, lowered: bool, word: bool) -> SuiteResult:
    w, d = plan.lemma_w, plan.lemma_d
    n = 1 << w
    cols = d if word else 1
    params = C.CircuitParams(w, d, n)
    prog = _prep(C.build_write_word(params) if word else C.build_write_one_bit(params), lowered)
    lay = C.ReadLayout(w, n, cols)
    mems = rng.choice([-1, 1], size=(plan.memories, n, cols))
    regs = rng.choice([-1, 1], size=(plan.memories, cols))
    cases = [(addr, k) for k in range(plan.memories) for addr in range(n)]
    X = np.stack([lay.pack(regs[k], np.repeat(encode_address(addr, w)[:, None], cols, 1), mems[k])
                  for addr, k in cases])
    Y = execute(prog, X)
    want = X.reshape(len(cases), lay.rows, cols).copy()
    for i, (addr, k) in enumerate(cases):
        want[i, 1 + w + addr] = regs[k]
    ok = np.all(Y.reshape(want.shape) == want, axis=(1, 2))
    name = "lemma.write_word" if word else "lemma.write_bit"
    return _tally(SuiteResult(name), ok, _discrete(Y), lambda i: Discrepancy(
        name, i, {"w": w, "cols": cols, "state": X[i].tolist()}, want[i].ravel().tolist(), Y[i].tolist()))


def _suite_full_adder(plan: TestPlan, lowered: bool) -> SuiteResult:
    prog = _prep(C.build_full_adder(), lowered)
    table = C.full_adder_table()
    cases = list(product((0, 1), repeat=3))
    X = np.array([[2 * c - 1, 2 * a - 1, 2 * b - 1] for a, b, c in cases])
    Y = execute(prog, X)
    want = np.array([[2 * table[k][1] - 1, 2 * table[k][0] - 1, 2 * k[1] - 1] for k in cases])
    ok = np.all(Y == want, axis=1)
    return _tally(SuiteResult("lemma.full_adder"), ok, _discrete(Y), lambda i: Discrepancy(
        "lemma.full_adder", i, {"a": cases[i][0], "b": cases[i][1], "cin": cases[i][2]},
        want[i].tolist(), Y[i].tolist()))


def _suite_arith(plan: TestPlan, lowered: bool, op: str, d: int) -> SuiteResult:
    params = C.CircuitParams(1, d)
    prog = _prep(C.build_add_word(params) if op == "add" else C.build_sub_word(params), lowered)
    lay = C.RegisterLayout(d)
    lo, hi = word_range(d)
    vals = np.arange(lo, hi + 1)
    if vals.size ** 2 > EXHAUSTIVE_LIMIT:
        raise ValueError(f"d={d} exceeds the exhaustive limit for {op}")
    enc = _bits(vals, d)
    xs, ys = np.meshgrid(np.arange(vals.size), np.arange(vals.size), indexing="ij")
    xs, ys = xs.ravel(), ys.ravel()
    n = xs.size
    rc = -np.ones((n, d), dtype=np.int64)
    X = np.concatenate([rc, enc[xs], enc[ys]], axis=1)
    Y = execute(prog, X)
    _, rd1, rd2 = (Y[:, :d], Y[:, d:2 * d], Y[:, 2 * d:])
    weights = 1 << np.arange(d)
    u = ((rd1 == 1) * weights).sum(axis=1)
    got = np.where(u >= (1 << (d - 1)), u - (1 << d), u)
    x, y = vals[xs], vals[ys]
    want = np.array([wrap(v, d) for v in (x + y if op == "add" else y - x)])
    ok = (got == want) & np.all(rd2 == enc[ys], axis=1)
    name = f"lemma.{op}_word.d{d}"
    return _tally(SuiteResult(name), ok, _discrete(Y), lambda i: Discrepancy(
        name, i, {"d": d, "r_d1": int(x[i]), "r_d2": int(y[i])}, int(want[i]), int(got[i])))


def _suite_flag(plan: TestPlan, lowered: bool) -> SuiteResult:
    d = plan.lemma_d
    prog = _prep(C.build_leq_zero_flag(C.CircuitParams(1, d)), lowered)
    lo, hi = word_range(d)
    vals = list(range(lo, hi + 1))
    X = np.concatenate([-np.ones((len(vals), 1), dtype=np.int64), _bits(vals, d)], axis=1)
    Y = execute(prog, X)
    want = np.array([1 if v <= 0 else -1 for v in vals])
    ok = (Y[:, 0] == want) & np.all(Y[:, 1:] == X[:, 1:], axis=1)
    return _tally(SuiteResult("lemma.leq_zero_flag"), ok, _discrete(Y), lambda i: Discrepancy(
        "lemma.leq_zero_flag", i, {"d": d, "value": vals[i]}, int(want[i]), int(Y[i, 0])))


def _suite_branch(plan: TestPlan, lowered: bool) -> SuiteResult:
    w = plan.lemma_w
    prog = _prep(C.build_cond_branch(C.CircuitParams(w)), lowered)
    lay = C.BranchLayout(w)
    n = 1 << w
    cases = list(product((-1, 1), range(n), range(n), range(n)))
    X = np.array([np.concatenate([[f], encode_address(pc, w), encode_address(nx, w), encode_address(t, w)])
                  for f, pc, nx, t in cases])
    Y = execute(prog, X)
    want_pc = np.array([t if f == 1 else nx for f, _, nx, t in cases])
    got_pc = np.array([decode_address(y[lay.pc()]) if _discrete(y[lay.pc()]) else -1 for y in Y])
    rest = np.setdiff1d(np.arange(lay.size), lay.pc())
    ok = (got_pc == want_pc) & np.all(Y[:, rest] == X[:, rest], axis=1)
    return _tally(SuiteResult("lemma.cond_branch"), ok, _discrete(Y), lambda i: Discrepancy(
        "lemma.cond_branch", i, dict(zip(("flag", "pc", "next", "target"), cases[i])),
        int(want_pc[i]), int(got_pc[i])))


def run_lemma_suites(plan: TestPlan, lowered: bool = False) -> Report:
    """Exhaustive (or seeded, for memories) checks of every standalone circuit."""
    rng = np.random.default_rng(plan.seed)
    results = [
        _suite_read(plan, rng, lowered, word=False),
        _suite_read(plan, rng, lowered, word=True),
        _suite_write(plan, rng, lowered, word=False),
        _suite_write(plan, rng, lowered, word=True),
        _suite_full_adder(plan, lowered),
    ]
    for d in plan.arith_widths:
        results += [_suite_arith(plan, lowered, "add", d), _suite_arith(plan, lowered, "sub", d)]
    results += [_suite_flag(plan, lowered), _suite_branch(plan, lowered)]
    return Report(results)


# --------------------------------------------------------------------------- single-step equivalence

@dataclass(frozen=True)
class _StepCase:
    cfg: MachineConfig
    mem: tuple[int, ...]
    table: tuple[tuple[int, int, int], ...]
    pc: int

    def inputs(self) -> dict:
        c = self.cfg
        return {"cfg": [c.w, c.d, c.K, c.m], "mem": list(self.mem),
                "table": [list(t) for t in self.table], "pc": self.pc}

    def encode(self) -> np.ndarray:
        lay = StateLayout(self.cfg)
        mat = -np.ones((lay.rows, lay.d), dtype=np.int64)
        for s, v in enumerate(self.mem):
            mat[lay.data_row(s)] = encode_word(v, self.cfg.d)
        for j, (a, b, c) in enumerate(self.table):
            mat[lay.instruction_rows(j)] = encode_instruction(a, b, c, self.cfg.w)[:, None]
        mat[lay.RPC:lay.RPC + lay.w] = encode_address(self.pc, self.cfg.w)[:, None]
        return mat.ravel()

    def oracle(self) -> OracleState:
        # the halting slot plays no role in a single step
        return OracleState(self.cfg, self.mem, self.table, self.pc, -1)


def _decode_outcome(cfg: MachineConfig, cells: np.ndarray) -> dict:
    lay = StateLayout(cfg)
    mat = cells.reshape(lay.rows, lay.d)
    return {"mem": [decode_word(mat[lay.data_row(s)]) for s in range(cfg.K)],
            "pc": decode_address(mat[lay.RPC:lay.RPC + lay.w, 0])}


def _check_steps(name: str, cases: list[_StepCase], core: TensorProgram, chunk: int = 2048) -> SuiteResult:
    res = SuiteResult(name)
    for start in range(0, len(cases), chunk):
        part = cases[start:start + chunk]
        cfg = part[0].cfg
        lay = StateLayout(cfg)
        X = np.stack([c.encode() for c in part])
        Y = execute(core, X)
        disc = _discrete(Y)
        code_rows = lay.block(np.arange(lay.INSTR0, lay.rows))
        for i, case in enumerate(part):
            idx = start + i
            res.cases += 1
            if not disc[i]:
                res.violations += 1
                res.discrepancies.append(Discrepancy(name, idx, case.inputs(), "all cells +/-1",
                                                     "non +/-1 cell", None))
                continue
            o, rec = oracle_step(case.oracle())
            want = {"mem": list(o.mem), "pc": o.pc, "flag": rec.flag}
            got = _decode_outcome(cfg, Y[i])
            got["flag"] = got["mem"][rec.written_slot] <= 0
            frame = np.array_equal(Y[i][code_rows], X[i][code_rows]) and np.all(
                Y[i][lay.block(np.arange(lay.RPC))] == -1)
            if got == want and frame:
                res.passed += 1
            else:
                div = next((k for k in ("mem", "pc", "flag") if got[k] != want[k]), "frame")
                res.discrepancies.append(Discrepancy(name, idx, case.inputs(), want, got, div))
    return res


def _grid_cases(plan: TestPlan, rng) -> list[_StepCase]:
    cfg = plan.grid
    lo, hi = word_range(cfg.d)
    K = cfg.K
    triples = list(product(range(K), range(K), range(K, K + cfg.m)))
    if len(triples) * plan.grid_memories > EXHAUSTIVE_LIMIT:
        raise ValueError("grid exceeds the exhaustive limit")
    cases = []
    for a, b, c in triples:
        for _ in range(plan.grid_memories):
            mem = tuple(int(v) for v in rng.integers(lo, hi + 1, size=K))
            filler = [(int(rng.integers(0, K)), int(rng.integers(0, K)), int(rng.integers(K, K + cfg.m)))
                      for _ in range(cfg.m - 1)]
            cases.append(_StepCase(cfg, mem, tuple([(a, b, c)] + filler), K))
    return cases


def _random_cases(plan: TestPlan, rng) -> list[_StepCase]:
    cfg = plan.random_cfg
    lo, hi = word_range(cfg.d)
    K, m = cfg.K, cfg.m
    edges = {"min": lo, "-1": -1, "0": 0, "+1": 1, "max": hi}
    cases = []
    for i in range(plan.random_cases):
        table = [(int(rng.integers(0, K)), int(rng.integers(0, K)), int(rng.integers(K, K + m)))
                 for _ in range(m)]
        # keep the fall-through address inside the instruction slots
        j = int(rng.integers(0, m - 1)) if m > 1 else 0
        mem = [int(v) for v in rng.integers(lo, hi + 1, size=K)]
        a, b, c = table[j]
        if i % 2 == 0:
            # forced edge result mem[b] - mem[a]
            target = edges[EDGE_KINDS[(i // 2) % len(EDGE_KINDS)]]
            if a == b and target != 0:
                b = (a + 1 + int(rng.integers(0, K - 1))) % K if K > 1 else a
                table[j] = (a, b, c)
            if a != b:
                mem[a] = wrap(mem[b] - target, cfg.d)
        cases.append(_StepCase(cfg, tuple(mem), tuple(table), K + j))
    return cases


def run_step_equivalence(plan: TestPlan, lowered: bool = False) -> Report:
    """One network pass against one interpreter step, on the exhaustive grid and on seeded random states."""
    rng = np.random.default_rng(plan.seed)
    out = []
    grid = _grid_cases(plan, rng)
    out.append(_check_steps("step.grid", grid, build_subleq_core(plan.grid, lowered)))
    if plan.random_cases:
        rand = _random_cases(plan, rng)
        out.append(_check_steps("step.random", rand, build_subleq_core(plan.random_cfg, lowered)))
    return Report(out)


# --------------------------------------------------------------------------- corpus

def run_corpus(plan: TestPlan, lowered: bool = False) -> Report:
    """Whole programs: traces, halting iteration and final data against the interpreter and the sidecars.

    Also checks that the halted state is a fixed point of the network.
    """
    cfg = plan.corpus_cfg
    core = build_subleq_core(cfg, lowered)
    traces = SuiteResult("corpus.trace")
    fixed = SuiteResult("corpus.fixed_point")
    for idx, entry in enumerate(corpus()):
        prog = resolve(entry.source, cfg)
        inputs = {"program": entry.name, "cfg": [cfg.w, cfg.d, cfg.K, cfg.m]}
        o_final, o_status, o_trace = oracle_run(oracle_init(prog), plan.max_iters)
        traces.cases += 1
        try:
            state, status, trace = run(init_state(cfg, prog), plan.max_iters, core)
        except InvariantViolation as e:
            traces.violations += 1
            traces.discrepancies.append(Discrepancy("corpus.trace", idx, inputs, "+/-1 state", str(e)))
            continue
        want = {"status": str(o_status), "final": prog.named_values(o_final.mem)}
        got = {"status": str(status), "final": prog.named_values(state.memory())}
        exp = entry.expected
        sidecar_ok = (not exp or exp.get("config") != {"w": cfg.w, "d": cfg.d, "K": cfg.K, "m": cfg.m}
                      or (exp["final"] == want["final"] and exp["iterations"] == o_status.iteration
                          and exp["halted"] == o_status.halted))
        div = first_divergence(o_trace, trace)
        if div is None and want == got and sidecar_ok:
            traces.passed += 1
        else:
            traces.discrepancies.append(Discrepancy("corpus.trace", idx, inputs, want, got,
                                                    div if div is not None else "final"))
        if status.halted:
            fixed.cases += 1
            cur = state
            same = True
            for _ in range(plan.fixed_point_iters):
                cur = step(cur, core)
                same = same and cur == state
            if same:
                fixed.passed += 1
            else:
                fixed.discrepancies.append(Discrepancy("corpus.fixed_point", idx, inputs,
                                                       "identical state", "state changed"))
    return Report([traces, fixed])


# --------------------------------------------------------------------------- lowering and plans

def run_lowering_equivalence(plan: TestPlan, gated: Report | None = None) -> Report:
    """Re-run the selected suites on gate-free circuits; verdicts must match the gated run.

    ``gated`` may carry results already computed for the same plan.
    """
    base = [s for s in plan.suites if s != "lowering"] or ["lemma", "step", "corpus"]
    runners = {"lemma": run_lemma_suites, "step": run_step_equivalence, "corpus": run_corpus}
    known = {r.suite: r for r in gated.results} if gated is not None else {}
    out = Report()
    agree = SuiteResult("lowering.verdicts")
    for s in base:
        low = runners[s](plan, True)
        names = [r.suite[len("lowered."):] if r.suite.startswith("lowered.") else r.suite for r in low.results]
        if all(n in known for n in names):
            g_results = [known[n] for n in names]
        else:
            g_results = runners[s](plan, False).results
        for g, l in zip(g_results, low.results):
            r = SuiteResult(f"lowered.{l.suite}", l.cases, l.passed, l.violations, l.discrepancies)
            out.results.append(r)
            agree.cases += 1
            if (g.ok, g.passed) == (l.ok, l.passed):
                agree.passed += 1
            else:
                agree.discrepancies.append(Discrepancy("lowering.verdicts", agree.cases - 1, {"suite": g.suite},
                                                       g.record(), l.record()))
    out.results.append(agree)
    return out


def run_plan(plan: TestPlan) -> Report:
    out = Report()
    if "lemma" in plan.suites:
        out.results += run_lemma_suites(plan).results
    if "step" in plan.suites:
        out.results += run_step_equivalence(plan).results
    if "corpus" in plan.suites:
        out.results += run_corpus(plan).results
    if "lowering" in plan.suites:
        out.results += run_lowering_equivalence(plan, out).results
    return out


def replay(dsc: Discrepancy | dict, lowered: bool = False) -> dict | None:
    """Re-run a step-equivalence discrepancy from its inputs; returns the network's outcome."""
    d = dsc.to_dict() if isinstance(dsc, Discrepancy) else dsc
    if not d["suite"].startswith("step."):
        raise ValueError(f"replay supports step suites, not {d['suite']!r}")
    inp = d["inputs"]
    cfg = MachineConfig(*inp["cfg"])
    case = _StepCase(cfg, tuple(inp["mem"]), tuple(tuple(t) for t in inp["table"]), inp["pc"])
    Y = execute(build_subleq_core(cfg, lowered), case.encode())
    if not _discrete(Y):
        return None
    return _decode_outcome(cfg, Y)
