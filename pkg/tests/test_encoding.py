import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relu_subleq.encoding import (EncodingError, decode_address, decode_instruction, decode_word,
                                  encode_address, encode_instruction, encode_word, match_score, word_range)


def weighted_value(bits):
    # independent reading of a +/-1 two's-complement word
    d = len(bits)
    u = sum(2 ** i * (b + 1) // 2 for i, b in enumerate(bits))
    return u - 2 ** d if bits[-1] == 1 else u


@pytest.mark.parametrize("x, d, bits", [
    (5, 4, [1, -1, 1, -1]),
    (0, 4, [-1, -1, -1, -1]),
    (-8, 4, [-1, -1, -1, 1]),
    (-1, 4, [1, 1, 1, 1]),
])
def test_encode_word_examples(x, d, bits):
    assert encode_word(x, d).tolist() == bits
    assert decode_word(bits) == x


@pytest.mark.parametrize("slot, code", [(0, [-1, -1, -1]), (5, [1, -1, 1]), (7, [1, 1, 1])])
def test_address_examples(slot, code):
    assert encode_address(slot, 3).tolist() == code
    assert decode_address(code) == slot


def test_match_score_examples():
    assert match_score([1, -1, 1], [1, -1, 1]) == 3
    assert match_score([1, -1, 1], [1, 1, 1]) == 1
    assert match_score([-1, -1, -1], [1, 1, 1]) == -3


def test_instruction_examples():
    assert encode_instruction(0, 0, 0, 2).tolist() == [-1] * 6
    assert encode_instruction(1, 2, 3, 2).tolist() == [1, -1, -1, 1, 1, 1]
    assert encode_instruction(3, 3, 3, 2).tolist() == [1] * 6
    assert decode_instruction([1, -1, -1, 1, 1, 1], 2) == (1, 2, 3)


@given(st.integers(2, 12).flatmap(lambda d: st.tuples(st.just(d), st.integers(*word_range(d)))))
def test_word_round_trip(dx):
    d, x = dx
    bits = encode_word(x, d)
    assert bits.shape == (d,)
    assert set(bits.tolist()) <= {-1, 1}
    assert decode_word(bits) == x
    assert weighted_value(bits.tolist()) == x


@given(st.integers(1, 10).flatmap(lambda w: st.tuples(st.just(w), st.integers(0, 2 ** w - 1))))
def test_address_round_trip(ws):
    w, s = ws
    assert decode_address(encode_address(s, w)) == s


@pytest.mark.parametrize("w", range(1, 9))
def test_matching_gap_exhaustive(w):
    codes = np.stack([encode_address(i, w) for i in range(2 ** w)])
    scores = codes @ codes.T
    assert np.all(np.diag(scores) == w)
    off = scores[~np.eye(2 ** w, dtype=bool)]
    if off.size:
        assert off.max() <= w - 2
    assert np.all((scores - w) % 2 == 0)
    assert len({tuple(c) for c in codes.tolist()}) == 2 ** w


def test_matcher_gives_indicator():
    w = 3
    codes = np.stack([encode_address(i, w) for i in range(8)])
    for i in range(8):
        e = np.maximum(codes @ codes[i] - (w - 1), 0)
        assert e.tolist() == [int(j == i) for j in range(8)]


@pytest.mark.parametrize("call", [
    lambda: encode_word(8, 4),
    lambda: encode_word(-9, 4),
    lambda: encode_address(8, 3),
    lambda: encode_address(-1, 3),
    lambda: decode_word([1, 0, -1]),
    lambda: decode_word([1]),
    lambda: match_score([1, 1], [1, 1, 1]),
    lambda: decode_instruction([1] * 5, 2),
])
def test_encoding_errors(call):
    with pytest.raises(EncodingError):
        call()
