"""Command-line entry point.

Exit status: 0 on success, 1 on bad input (flags, assembly, capacity), 2 when
backends disagree or verification fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import circuits as C
from .asm import AsmError, assemble, corpus_entry, disassemble, resolve
from .config import ConfigError, MachineConfig
from .difftest import SUITES, TestPlan, run_plan
from .ir import counted_layers, export_weights
from .machine import InvariantViolation, build_subleq_core, init_state, run
from .oracle import ProgramFault, oracle_init, oracle_run
from .trace import dump_trace, first_divergence

BACKENDS = ("mlp", "mlp-lowered", "oracle", "both")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _read_source(path: str) -> str:
    p = Path(path)
    if p.is_file():
        return p.read_text(encoding="utf-8")
    name = p.name[:-3] if p.name.endswith(".sq") else p.name
    if p.parent.name in ("corpus", ""):
        try:
            return corpus_entry(name).text
        except FileNotFoundError:
            pass
    raise UsageError(f"no such program: {path}")


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _config(args) -> MachineConfig:
    if getattr(args, "max_iters", 1) < 1:
        raise UsageError(f"--max-iters must be >= 1, got {args.max_iters}")
    return MachineConfig(args.w, args.d, args.K, args.m)


def _backend_run(backend: str, prog, cfg: MachineConfig, max_iters: int):
    if backend == "oracle":
        final, status, trace = oracle_run(oracle_init(prog), max_iters)
        mem = list(final.mem)
    else:
        core = build_subleq_core(cfg, lowered=backend == "mlp-lowered")
        final, status, trace = run(init_state(cfg, prog), max_iters, core)
        mem = final.memory()
    return status, trace, prog.named_values(mem)


# --------------------------------------------------------------------------- subcommands

def cmd_build(args) -> int:
    cfg = _config(args)
    core = build_subleq_core(cfg, lowered=args.lowered)
    data = export_weights(core)
    if args.output in (None, "-"):
        sys.stdout.buffer.write(data)
    else:
        Path(args.output).write_bytes(data)
    return 0


def cmd_asm(args) -> int:
    cfg = _config(args)
    prog = resolve(assemble(_read_source(args.source)), cfg)
    if args.disassemble:
        _emit(disassemble(prog), args.output)
        return 0
    rec = {
        "config": {"w": cfg.w, "d": cfg.d, "K": cfg.K, "m": cfg.m},
        "entry_slot": prog.entry_slot,
        "eof_slot": prog.eof_slot,
        "instructions": [list(t) for t in prog.instruction_table()],
        "data": list(prog.data),
        "names": dict(prog.names),
        "labels": dict(prog.labels),
    }
    _emit(json.dumps(rec, indent=2) + "\n", args.output)
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    prog = resolve(assemble(_read_source(args.source)), cfg)
    backends = ["mlp", "oracle"] if args.backend == "both" else [args.backend]
    results = {b: _backend_run(b, prog, cfg, args.max_iters) for b in backends}
    lines = []
    for b, (status, trace, final) in results.items():
        lines.append(_dump({"backend": b, "status": status.kind, "iteration": status.iteration,
                            "final": final}))
    _emit("\n".join(lines) + "\n", None)
    if args.trace:
        status, trace, _ = results[backends[0]]
        _emit(dump_trace(trace), args.trace)
    if len(results) == 2:
        (s1, t1, f1), (s2, t2, f2) = results.values()
        if s1 != s2 or f1 != f2 or first_divergence(t1, t2) is not None:
            print(_dump({"mismatch": True}), file=sys.stderr)
            return 2
    return 0


def cmd_diff(args) -> int:
    cfg = _config(args)
    prog = resolve(assemble(_read_source(args.source)), cfg)
    s1, t1, f1 = _backend_run("mlp-lowered" if args.lowered else "mlp", prog, cfg, args.max_iters)
    s2, t2, f2 = _backend_run("oracle", prog, cfg, args.max_iters)
    div = first_divergence(t1, t2)
    rec = {"program": args.source, "iterations": [s1.iteration, s2.iteration], "first_divergence": div,
           "final_equal": f1 == f2, "status": [s1.kind, s2.kind]}
    if div is not None:
        rec["mlp"] = t1[div].to_line() if div < len(t1) else None
        rec["oracle"] = t2[div].to_line() if div < len(t2) else None
    print(_dump(rec))
    return 0 if div is None and f1 == f2 and s1 == s2 else 2


def cmd_verify(args) -> int:
    suites = tuple(s for s in args.suites.split(",") if s)
    bad = [s for s in suites if s not in SUITES]
    if bad:
        raise UsageError(f"unknown suites {bad}; choose from {','.join(SUITES)}")
    plan = TestPlan(suites=suites, seed=args.seed, random_cases=args.random_cases,
                    corpus_cfg=_config(args), max_iters=args.max_iters)
    report = run_plan(plan)
    _emit(report.to_text(), args.output)
    return 0 if report.ok else 2


def layer_table(cfg: MachineConfig, lowered: bool = False) -> list[tuple[str, int, int]]:
    """``(construction, counted layers, budget)`` for every circuit and the full core."""
    from .ir import lower_gates

    p = C.CircuitParams(min(cfg.w, 3), cfg.d, None)
    builds = [
        ("read", C.build_read_word(p)),
        ("write", C.build_write_word(p)),
        ("full_adder", C.build_full_adder(p)),
        ("subtract", C.build_sub_word(p)),
        ("cond_branch", C.build_cond_branch(p)),
        ("subleq", build_subleq_core(cfg)),
    ]
    rows = []
    for name, prog in builds:
        prog = lower_gates(prog) if lowered else prog
        rows.append((name, counted_layers(prog), C.LAYER_BUDGETS[name]))
    return rows


def cmd_layers(args) -> int:
    cfg = _config(args)
    lines = [f"{'construction':<12} {'layers':>6} {'budget':>6} {'delta':>6}"]
    for name, n, budget in layer_table(cfg, args.lowered):
        lines.append(f"{name:<12} {n:>6} {budget:>6} {n - budget:>+6}")
    print("\n".join(lines))
    return 0


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("machine")
    g.add_argument("--w", type=int, default=6, help="address bits (default 6)")
    g.add_argument("--d", type=int, default=8, help="word bits (default 8)")
    g.add_argument("--K", type=int, default=32, help="data words (default 32)")
    g.add_argument("--m", type=int, default=16, help="instruction slots (default 16)")
    g.add_argument("--max-iters", type=int, default=1_000_000, dest="max_iters")

    ap = _Parser(prog="relu-subleq", description="Compile and run SUBLEQ programs on a looped ReLU network.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build", parents=[common], help="export the core's weights as JSON")
    p.add_argument("--lowered", action="store_true", help="replace gates by plain ReLU layers")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("asm", parents=[common], help="assemble and resolve a program")
    p.add_argument("source")
    p.add_argument("--disassemble", action="store_true", help="print the resolved program as source")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_asm)

    p = sub.add_parser("run", parents=[common], help="execute a program")
    p.add_argument("source")
    p.add_argument("--backend", choices=BACKENDS, default="mlp")
    p.add_argument("--trace", help="write the trace here ('-' for stdout)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("diff", parents=[common], help="compare network and interpreter traces")
    p.add_argument("source")
    p.add_argument("--lowered", action="store_true")
    p.set_defaults(fn=cmd_diff)

    p = sub.add_parser("verify", parents=[common], help="run the differential test suites")
    p.add_argument("--suites", default="lemma,step,corpus,lowering")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--random-cases", type=int, default=10_000, dest="random_cases")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("layers", parents=[common], help="counted layers against the budgets")
    p.add_argument("--lowered", action="store_true")
    p.set_defaults(fn=cmd_layers)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (AsmError, ConfigError, UsageError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ProgramFault, InvariantViolation) as e:
        print(f"fault: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
