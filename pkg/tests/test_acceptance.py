"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` to see the lines
inline; they are also repeated in the terminal summary.
"""
import io
import time
from contextlib import redirect_stdout

import pytest

from relu_subleq import circuits as C
from relu_subleq.asm import corpus_entry, resolve
from relu_subleq.cli import main
from relu_subleq.config import MachineConfig
from relu_subleq.difftest import (Report, TestPlan, run_corpus, run_lemma_suites, run_lowering_equivalence,
                                  run_step_equivalence)
from relu_subleq.ir import counted_layers
from relu_subleq.machine import build_subleq_core, init_state, run

PLAN = TestPlan(suites=("lemma", "step", "corpus"))
VERDICTS: list[str] = []


def report(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    VERDICTS.append(line)
    print(line)


def timed(fn, *args):
    t = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t


@pytest.fixture(scope="module")
def gated():
    runs = {}
    for name, fn in (("lemma", run_lemma_suites), ("step", run_step_equivalence), ("corpus", run_corpus)):
        runs[name] = timed(fn, PLAN)
    return runs


@pytest.fixture(scope="module")
def lowered(gated):
    merged = Report([r for rep, _ in gated.values() for r in rep.results])
    return run_lowering_equivalence(PLAN, merged)


def test_criterion_1_layer_counts():
    t = time.perf_counter()
    p = C.CircuitParams(3, 4)
    built = {
        "read": C.build_read_word(p),
        "write": C.build_write_word(p),
        "full_adder": C.build_full_adder(p),
        "subtract": C.build_sub_word(p),
        "cond_branch": C.build_cond_branch(p),
        "subleq": build_subleq_core(MachineConfig(w=3, d=4, K=4, m=2)),
    }
    counts = {k: counted_layers(v) for k, v in built.items()}
    elapsed = time.perf_counter() - t
    deltas = {k: counts[k] - C.LAYER_BUDGETS[k] for k in counts}
    ok = all(d <= 0 for d in deltas.values()) and elapsed < 1.0
    report(1, "layer counts", ok, " ".join(f"{k}={counts[k]}({deltas[k]:+d})" for k in counts)
           + f" in {elapsed:.2f}s")
    assert ok


def test_criterion_2_lemma_equivalence(gated):
    rep, elapsed = gated["lemma"]
    r = {x.suite: x for x in rep.results}
    ok = (rep.ok and elapsed < 120 and r["lemma.full_adder"].passed == 8
          and r["lemma.read_bit"].cases == 8 * 64 and r["lemma.write_bit"].cases == 8 * 64
          and r["lemma.add_word.d8"].cases == 65536 and r["lemma.sub_word.d8"].cases == 65536
          and r["lemma.leq_zero_flag"].passed == 16)
    fails = sum(x.cases - x.passed for x in rep.results)
    report(2, "lemma-level exhaustive equivalence", ok,
           f"{sum(x.cases for x in rep.results)} cases, {fails} failures, {elapsed:.1f}s")
    assert ok


def test_criterion_3_single_step(gated):
    rep, elapsed = gated["step"]
    grid, rand = rep["step.grid"], rep["step.random"]
    ok = rep.ok and grid.cases == 32 * 32 and rand.cases == 10_000 and elapsed < 300
    report(3, "single-step equivalence", ok,
           f"grid {grid.passed}/{grid.cases}, random d=8 {rand.passed}/{rand.cases}, {elapsed:.1f}s")
    assert ok


def test_criterion_4_corpus_traces(gated):
    rep, elapsed = gated["corpus"]
    tr = rep["corpus.trace"]
    cfg = PLAN.corpus_cfg
    prog = resolve(corpus_entry("multiply").source, cfg)
    final, status, _ = run(init_state(cfg, prog), PLAN.max_iters)
    product = prog.named_values(final.memory())["result"]
    ok = tr.ok and tr.cases >= 5 and elapsed < 60 and status.halted and product == 42
    report(4, "whole-program trace equivalence", ok,
           f"{tr.passed}/{tr.cases} programs, multiply 6*7={product}, {elapsed:.1f}s")
    assert ok


def test_criterion_5_halting_fixed_point(gated):
    rep, _ = gated["corpus"]
    fp = rep["corpus.fixed_point"]
    ok = fp.ok and fp.cases == rep["corpus.trace"].cases and PLAN.fixed_point_iters >= 10
    report(5, "halting fixed point", ok, f"{fp.passed}/{fp.cases} halted states unchanged over "
           f"{PLAN.fixed_point_iters} extra passes")
    assert ok


def test_criterion_6_lowering(lowered):
    agree = lowered["lowering.verdicts"]
    ok = lowered.ok and agree.passed == agree.cases > 0
    report(6, "lowering soundness", ok, f"{agree.passed}/{agree.cases} suite verdicts identical, "
           f"{sum(r.cases for r in lowered.results if r.suite.startswith('lowered.'))} lowered cases")
    assert ok


def test_criterion_7_discreteness(gated, lowered):
    results = [r for rep, _ in gated.values() for r in rep.results] + lowered.results
    violations = sum(r.violations for r in results)
    ok = violations == 0
    report(7, "discreteness invariant", ok, f"{violations} violations across {len(results)} suites")
    assert ok


def capture(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    return code, buf.getvalue()


def test_criterion_8_determinism(tmp_path):
    outputs = []
    for i in range(2):
        trace = tmp_path / f"trace{i}.jsonl"
        code_v, verify_out = capture(["verify", "--suites", "lemma,step,corpus", "--seed", "7"])
        code_r, run_out = capture(["run", "--backend", "both", "corpus/multiply.sq", "--trace", str(trace)])
        outputs.append((code_v, verify_out, code_r, run_out, trace.read_bytes()))
    ok = outputs[0] == outputs[1] and outputs[0][0] == 0 and outputs[0][2] == 0
    report(8, "determinism", ok, "verify reports, run output and traces byte-identical" if ok
           else "outputs differ between invocations")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
