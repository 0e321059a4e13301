"""scikit-learn style wrapper: fit compiles a program, predict runs it on many inputs."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .asm import LoadedProgram, SourceProgram, assemble, resolve
from .config import MachineConfig, StateLayout
from .encoding import word_range
from .machine import build_subleq_core, init_state, run_batch
from .oracle import oracle_init, oracle_run

__all__ = ["LoopedMLPComputer"]


class LoopedMLPComputer(BaseEstimator):
    """Run one SUBLEQ program on a batch of initial data values.

    Parameters
    ----------
    w, d, K, m : int
        Machine dimensions (address bits, word bits, data words, instruction slots).
    max_iters : int
        Iteration budget per input.
    backend : {"mlp", "mlp-lowered", "oracle"}
        Forward passes of the network, of its gate-free form, or the plain interpreter.

    Examples
    --------
    >>> est = LoopedMLPComputer(w=4, d=8, K=8, m=4).fit(".data x 3\\n.text\\nSUBLEQ x x HALT\\n")
    >>> est.predict([[3], [-5]]).tolist()
    [[0], [0]]
    """

    def __init__(self, w: int = 6, d: int = 8, K: int = 32, m: int = 16, max_iters: int = 1_000_000,
                 backend: str = "mlp"):
        self.w = w
        self.d = d
        self.K = K
        self.m = m
        self.max_iters = max_iters
        self.backend = backend

    def fit(self, X, y=None):
        """Compile the core and load ``X`` (source text, SourceProgram or LoadedProgram)."""
        if self.backend not in ("mlp", "mlp-lowered", "oracle"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        cfg = MachineConfig(self.w, self.d, self.K, self.m)
        if isinstance(X, LoadedProgram):
            if X.cfg != cfg:
                raise ValueError(f"program was resolved for {X.cfg}, estimator is configured for {cfg}")
            prog = X
        elif isinstance(X, (str, SourceProgram)):
            prog = resolve(assemble(X) if isinstance(X, str) else X, cfg)
        else:
            raise TypeError(f"fit expects program text, SourceProgram or LoadedProgram, got {type(X).__name__}")
        self.config_ = cfg
        self.program_ = prog
        self.data_names_ = [n for n, _ in prog.names]
        self.data_slots_ = np.array([s for _, s in prog.names], dtype=np.int64)
        self.n_features_in_ = len(self.data_names_)
        if self.backend != "oracle":
            self.core_ = build_subleq_core(cfg, lowered=self.backend == "mlp-lowered")
        return self

    def predict(self, X) -> np.ndarray:
        """Final values of the declared data words, one row per row of initial values.

        Sets ``halt_iterations_`` (-1 where the budget ran out).
        """
        check_is_fitted(self, "program_")
        X = check_array(X, dtype=np.int64, ensure_min_features=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, the program declares {self.n_features_in_} data words")
        lo, hi = word_range(self.d)
        if X.size and (X.min() < lo or X.max() > hi):
            raise ValueError(f"inputs must lie in the {self.d}-bit range [{lo}, {hi}]")
        prog, cfg = self.program_, self.config_
        if self.backend == "oracle":
            out, iters = [], []
            for row in X:
                final, status, _ = oracle_run(oracle_init(prog, row.tolist()), self.max_iters)
                out.append([final.mem[s] for s in self.data_slots_])
                iters.append(status.iteration if status.halted else -1)
            self.halt_iterations_ = np.array(iters)
            return np.array(out, dtype=np.int64).reshape(len(X), -1)
        cells = np.stack([init_state(cfg, prog, row.tolist()).cells for row in X])
        final, self.halt_iterations_ = run_batch(cells, cfg, prog.eof_slot, self.max_iters, self.core_)
        lay = StateLayout(cfg)
        mats = final.reshape(len(X), lay.rows, lay.d)[:, lay.DATA0 + self.data_slots_]
        u = ((mats == 1) * (1 << np.arange(cfg.d))).sum(axis=-1)
        return np.where(u >= 1 << (cfg.d - 1), u - (1 << cfg.d), u).astype(np.int64)
