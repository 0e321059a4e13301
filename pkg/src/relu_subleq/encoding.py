"""Codecs between host integers and the +/-1 bit, word, address and
instruction vectors that the network manipulates.

A bit is -1 (off) or +1 (on).  Words and addresses are stored LSB first.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = [
    "EncodingError",
    "word_range",
    "encode_word",
    "decode_word",
    "encode_address",
    "decode_address",
    "match_score",
    "encode_instruction",
    "decode_instruction",
]


class EncodingError(ValueError):
    """Raised when a value cannot be represented at the requested width."""


def word_range(d: int) -> tuple[int, int]:
    """Inclusive range of signed integers representable in ``d`` bits."""
    if d < 2:
        raise EncodingError(f"word width must be >= 2, got {d}")
    return -(1 << (d - 1)), (1 << (d - 1)) - 1


def _check_bits(bits: np.ndarray) -> None:
    if bits.ndim != 1:
        raise EncodingError(f"expected a 1-D bit vector, got shape {bits.shape}")
    if not np.all((bits == 1) | (bits == -1)):
        raise EncodingError("bit vectors may only contain -1 and +1")


def encode_word(x: int, d: int) -> np.ndarray:
    """Two's-complement encoding of ``x`` as ``d`` +/-1 bits, LSB first.

    >>> encode_word(5, 4).tolist()
    [1, -1, 1, -1]
    """
    lo, hi = word_range(d)
    x = int(x)
    if not lo <= x <= hi:
        raise EncodingError(f"{x} is outside the {d}-bit range [{lo}, {hi}]")
    u = x & ((1 << d) - 1)
    return np.array([1 if (u >> i) & 1 else -1 for i in range(d)], dtype=np.int64)


def decode_word(bits: Sequence[int] | np.ndarray) -> int:
    bits = np.asarray(bits, dtype=np.int64)
    _check_bits(bits)
    d = bits.shape[0]
    if d < 2:
        raise EncodingError(f"word width must be >= 2, got {d}")
    low = sum(1 << i for i in range(d - 1) if bits[i] == 1)
    return low - (1 << (d - 1)) if bits[d - 1] == 1 else low


def encode_address(slot: int, w: int) -> np.ndarray:
    """Unsigned binary of ``slot`` in ``w`` +/-1 bits, LSB first."""
    slot = int(slot)
    if w < 1:
        raise EncodingError(f"address width must be >= 1, got {w}")
    if not 0 <= slot < (1 << w):
        raise EncodingError(f"slot {slot} does not fit in {w} address bits (capacity {1 << w})")
    return np.array([1 if (slot >> i) & 1 else -1 for i in range(w)], dtype=np.int64)


def decode_address(code: Sequence[int] | np.ndarray) -> int:
    code = np.asarray(code, dtype=np.int64)
    _check_bits(code)
    return sum(1 << i for i in range(code.shape[0]) if code[i] == 1)


def match_score(q: Sequence[int] | np.ndarray, a: Sequence[int] | np.ndarray) -> int:
    """Inner product of two address codes: ``w`` on a match, at most ``w - 2`` otherwise."""
    q = np.asarray(q, dtype=np.int64)
    a = np.asarray(a, dtype=np.int64)
    if q.shape != a.shape:
        raise EncodingError(f"address width mismatch: {q.shape[0]} vs {a.shape[0]}")
    return int(q @ a)


def encode_instruction(a: int, b: int, c: int, w: int) -> np.ndarray:
    return np.concatenate([encode_address(a, w), encode_address(b, w), encode_address(c, w)])


def decode_instruction(code: Sequence[int] | np.ndarray, w: int) -> tuple[int, int, int]:
    code = np.asarray(code, dtype=np.int64)
    if code.shape != (3 * w,):
        raise EncodingError(f"instruction code must have length {3 * w}, got {code.shape}")
    return (
        decode_address(code[:w]),
        decode_address(code[w : 2 * w]),
        decode_address(code[2 * w :]),
    )
