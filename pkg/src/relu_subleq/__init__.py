"""Compile SUBLEQ programs into a looped ReLU network with integer weights and run them."""
from .asm import LoadedProgram, SourceProgram, assemble, corpus, disassemble, resolve
from .config import MachineConfig, StateLayout
from .estimator import LoopedMLPComputer
from .ir import TensorProgram, counted_layers, execute, export_weights, import_weights, lower_gates
from .machine import MachineState, build_subleq_core, init_state, run, step
from .oracle import oracle_init, oracle_run, oracle_step, wrap

__version__ = "0.1.0"

__all__ = [
    "LoadedProgram",
    "LoopedMLPComputer",
    "MachineConfig",
    "MachineState",
    "SourceProgram",
    "StateLayout",
    "TensorProgram",
    "assemble",
    "build_subleq_core",
    "corpus",
    "counted_layers",
    "disassemble",
    "execute",
    "export_weights",
    "import_weights",
    "init_state",
    "lower_gates",
    "oracle_init",
    "oracle_run",
    "oracle_step",
    "resolve",
    "run",
    "step",
    "wrap",
]
