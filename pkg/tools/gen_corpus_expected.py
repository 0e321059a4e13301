"""Regenerate corpus/*.expected.json from the reference interpreter."""
import json
from pathlib import Path

from relu_subleq.asm import assemble, resolve
from relu_subleq.config import MachineConfig
from relu_subleq.oracle import oracle_init, oracle_run

CORPUS = Path(__file__).resolve().parents[1] / "src" / "relu_subleq" / "corpus"


def expected_for(text: str, cfg: MachineConfig) -> dict:
    prog = resolve(assemble(text), cfg)
    final, status, trace = oracle_run(oracle_init(prog), 1_000_000)
    return {
        "config": {"w": cfg.w, "d": cfg.d, "K": cfg.K, "m": cfg.m},
        "final": prog.named_values(final.mem),
        "halted": status.halted,
        "iterations": status.iteration,
        "branches_taken": sum(r.flag for r in trace),
    }


def main():
    cfg = MachineConfig()
    for src in sorted(CORPUS.glob("*.sq")):
        exp = expected_for(src.read_text(), cfg)
        src.with_suffix(".expected.json").write_text(json.dumps(exp, indent=2, sort_keys=True) + "\n")
        print(src.stem, exp["final"], exp["iterations"])


if __name__ == "__main__":
    main()
