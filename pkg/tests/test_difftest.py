import numpy as np
import pytest

from relu_subleq.config import MachineConfig
from relu_subleq.difftest import (Discrepancy, TestPlan, _check_steps, _StepCase, replay, run_corpus,
                                  run_lemma_suites, run_lowering_equivalence, run_plan, run_step_equivalence)
from relu_subleq.ir import ProgramBuilder
from relu_subleq.machine import build_subleq_core

SMALL = TestPlan(random_cases=300, memories=8, grid_memories=4, arith_widths=(4,))


def test_lemma_counts():
    rep = run_lemma_suites(TestPlan(arith_widths=(4,)))
    assert rep.ok
    assert rep["lemma.full_adder"].cases == 8
    assert rep["lemma.read_bit"].cases == 512
    assert rep["lemma.sub_word.d4"].cases == 256
    assert rep["lemma.leq_zero_flag"].cases == 16


def test_step_suites_pass():
    rep = run_step_equivalence(SMALL)
    assert rep.ok
    assert rep["step.grid"].cases == 32 * 4
    assert rep["step.random"].cases == 300


def test_corpus_suite():
    rep = run_corpus(SMALL)
    assert rep.ok and rep["corpus.trace"].cases >= 5


def test_reports_are_deterministic():
    a = run_plan(TestPlan(suites=("step",), random_cases=200, grid_memories=2, seed=11)).to_text()
    b = run_plan(TestPlan(suites=("step",), random_cases=200, grid_memories=2, seed=11)).to_text()
    assert a == b


def test_lowering_verdicts_agree():
    rep = run_lowering_equivalence(TestPlan(suites=("lemma",), memories=4, arith_widths=(4,)))
    assert rep.ok and rep["lowering.verdicts"].cases == len(rep.results) - 1


def test_unknown_suite_rejected():
    with pytest.raises(ValueError):
        TestPlan(suites=("nope",))


def broken_core(cfg):
    # a network that only clears the scratchpad: every real step is a discrepancy
    core = build_subleq_core(cfg)
    b = ProgramBuilder("broken", core.input_size)
    return b.build(b.route("x", np.arange(core.input_size)))


def test_discrepancy_records_and_replay():
    cfg = MachineConfig(w=3, d=4, K=4, m=2)
    case = _StepCase(cfg, (0, 3, 5, 0), ((1, 2, 5), (0, 0, 5)), 4)
    res = _check_steps("step.grid", [case], broken_core(cfg))
    assert not res.ok and len(res.discrepancies) == 1
    dsc = res.discrepancies[0]
    assert dsc.divergence == "mem"
    assert dsc.expected["mem"] == [0, 3, 2, 0] and dsc.expected["pc"] == 5
    # replaying the serialized inputs on the real core reproduces the oracle outcome
    out = replay(dsc.to_dict())
    assert out["mem"] == dsc.expected["mem"] and out["pc"] == dsc.expected["pc"]
    assert isinstance(Discrepancy(**dsc.to_dict()), Discrepancy)


def test_report_text_format():
    text = run_plan(TestPlan(suites=("corpus",))).to_text()
    lines = text.splitlines()
    assert lines[-1] == '{"summary":"pass","suites":2,"failed":0}'
    assert lines[0].startswith('{"suite":"corpus.trace"')
