"""Machine dimensions and the row layout of the state matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MachineConfig:
    """``w`` address bits, ``d`` word bits, ``K`` data words, ``m`` instruction slots.

    Data words occupy slots ``0 .. K-1`` and instructions ``K .. K+m-1`` of
    one address space, so ``2**w >= K + m`` is required.
    """

    w: int = 6
    d: int = 8
    K: int = 32
    m: int = 16

    def __post_init__(self):
        if self.w < 1:
            raise ConfigError(f"address width w must be >= 1, got {self.w}")
        if self.d < 2:
            raise ConfigError(f"word width d must be >= 2, got {self.d}")
        if self.K < 1 or self.m < 1:
            raise ConfigError(f"need K >= 1 and m >= 1, got K={self.K}, m={self.m}")
        if self.K + self.m > (1 << self.w):
            raise ConfigError(
                f"{self.K} data + {self.m} instruction slots need {self.K + self.m} addresses, "
                f"but w={self.w} gives only {1 << self.w}"
            )

    @property
    def first_instruction_slot(self) -> int:
        return self.K

    def is_data_slot(self, slot: int) -> bool:
        return 0 <= slot < self.K

    def is_instruction_slot(self, slot: int) -> bool:
        return self.K <= slot < self.K + self.m


class StateLayout:
    """Row offsets of the (rows x d) state matrix, flattened row-major.

    Scratchpad rows come first: carry ``r_c``, data registers ``r_d1``, ``r_d2``,
    address registers ``r_a1..r_a3`` and the program counter, ``3 + 4w`` rows
    in all.  Then one row per data word (column ``j`` holds bit ``j + 1``), then
    ``3w`` rows per instruction slot, replicated across columns.
    """

    def __init__(self, cfg: MachineConfig):
        w = cfg.w
        self.cfg = cfg
        self.w, self.d = w, cfg.d
        self.RC, self.RD1, self.RD2 = 0, 1, 2
        self.RA1 = 3
        self.RA2 = 3 + w
        self.RA3 = 3 + 2 * w
        self.RPC = 3 + 3 * w
        self.scratch_rows = 3 + 4 * w
        self.DATA0 = self.scratch_rows
        self.INSTR0 = self.DATA0 + cfg.K
        self.rows = self.INSTR0 + 3 * w * cfg.m
        self.size = self.rows * self.d

    def cell(self, row, col):
        return np.asarray(row) * self.d + np.asarray(col)

    def reg_rows(self, start: int, length: int) -> np.ndarray:
        return start + np.arange(length)

    def block(self, rows, cols=None) -> np.ndarray:
        """Cells of ``rows`` x ``cols`` (all columns by default), row-major."""
        rows = np.atleast_1d(rows)
        cols = np.arange(self.d) if cols is None else np.atleast_1d(cols)
        return (rows[:, None] * self.d + cols[None, :]).ravel()

    def data_row(self, slot: int) -> int:
        return self.DATA0 + slot

    def instruction_rows(self, j: int) -> np.ndarray:
        """Rows of the instruction stored ``j`` slots after the first instruction slot."""
        return self.INSTR0 + 3 * self.w * j + np.arange(3 * self.w)
