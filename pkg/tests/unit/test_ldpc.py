# tests/unit/test_ldpc.py

import numpy as np
import pytest

from pncsim.errors import AlistParseError, CodeLengthError, ConstructionError
from pncsim.operations.ldpc import (
    GeneratorKind,
    ParityCheckMatrix,
    build_cyclic_eg_code,
    build_regular_code,
    cyclic_shift,
    emit_alist,
    emit_generator_poly,
    encode,
    gf2_rank,
    load_alist,
    load_generator_poly,
    make_code,
    syndrome,
)

HAMMING_ALIST = """7 3
3 4
2 2 2 3 1 1 1
4 4 4
1 2 0
1 3 0
2 3 0
1 2 3
1 0 0
2 0 0
3 0 0
1 2 4 5
1 3 4 6
2 3 4 7
"""

HAMMING_DENSE = np.array([
    [1, 1, 0, 1, 1, 0, 0],
    [1, 0, 1, 1, 0, 1, 0],
    [0, 1, 1, 1, 0, 0, 1],
])


# ---------------------------------------------
# alist import / export
# ---------------------------------------------

def test_load_alist_hamming():
    h = load_alist(HAMMING_ALIST)
    assert (h.m, h.n) == (3, 7)
    np.testing.assert_array_equal(h.dense(), HAMMING_DENSE)
    assert h.row_degrees() == [4, 4, 4]


def test_emit_alist_reloads_to_same_matrix():
    h = ParityCheckMatrix.from_dense(HAMMING_DENSE)
    again = load_alist(emit_alist(h))
    assert again.rows == h.rows and again.cols == h.cols


@pytest.mark.parametrize(
    "text, line",
    [
        (HAMMING_ALIST.replace("1 2 4 5", "1 2 4 9"), 12),
        (HAMMING_ALIST.replace("7 3\n", "7 x\n"), 1),
        (HAMMING_ALIST.replace("1 0 0\n2 0 0", "1 0 0\n2 3 0"), 10),
    ],
    ids=["index_out_of_range", "non_integer_header", "padding_beyond_degree"],
)
def test_load_alist_reports_line(text, line):
    """Malformed input names the offending line."""
    with pytest.raises(AlistParseError) as excinfo:
        load_alist(text)
    assert excinfo.value.line == line, f"Expected line {line}, got {excinfo.value.line}"


def test_load_alist_errors_do_not_quote_file_contents():
    text = HAMMING_ALIST.replace("7 3\n", "7 hunter2\n")
    with pytest.raises(AlistParseError) as excinfo:
        load_alist(text)
    assert "hunter2" not in str(excinfo.value)
    assert "token 2" in str(excinfo.value)


def test_load_alist_rows_and_columns_disagree():
    text = HAMMING_ALIST.replace("1 3 4 6", "1 3 5 6")
    with pytest.raises(AlistParseError):
        load_alist(text)


def test_load_alist_truncated():
    with pytest.raises(AlistParseError, match="unexpected end"):
        load_alist("\n".join(HAMMING_ALIST.splitlines()[:8]))


def test_generator_poly_text_format():
    assert load_generator_poly("1 1 0 1\n") == (1, 1, 0, 1)
    assert emit_generator_poly((1, 1, 0, 1)) == "1101\n"
    with pytest.raises(AlistParseError):
        load_generator_poly("12")


# ---------------------------------------------
# Constructions
# ---------------------------------------------

@pytest.mark.parametrize(
    "s, n, k, weight",
    [(2, 15, 7, 4), (3, 63, 37, 8)],
    ids=["eg_15_7", "eg_63_37"],
)
def test_cyclic_eg_dimensions(s, n, k, weight):
    h, generator = build_cyclic_eg_code(s)
    assert (h.n, generator.k) == (n, k), f"Expected ({n},{k}), got ({h.n},{generator.k})"
    assert h.n - gf2_rank(h) == k
    assert set(h.row_degrees()) == {weight}
    assert set(h.col_degrees()) == {weight}
    assert h.is_cyclic and generator.kind is GeneratorKind.CYCLIC


def test_cyclic_eg_rows_meet_in_at_most_one_point(eg63):
    dense = eg63.h.dense().astype(np.int64)
    overlap = dense @ dense.T
    np.fill_diagonal(overlap, 0)
    assert overlap.max() <= 1


def test_cyclic_eg_rejects_unknown_exponent():
    with pytest.raises(ConstructionError):
        build_cyclic_eg_code(5)


def test_regular_code_degrees_and_girth():
    h = build_regular_code(204, seed=3)
    assert set(h.row_degrees()) == {6}
    assert set(h.col_degrees()) == {3}
    dense = h.dense().astype(np.int64)
    overlap = dense.T @ dense
    np.fill_diagonal(overlap, 0)
    assert overlap.max() <= 1, "two columns share more than one check (4-cycle)"


def test_regular_code_is_seed_deterministic():
    assert build_regular_code(96, seed=7).rows == build_regular_code(96, seed=7).rows


@pytest.mark.parametrize(
    "kwargs",
    [dict(n=11), dict(n=12, girth_min=8), dict(n=0)],
    ids=["not_divisible", "unsupported_girth", "empty"],
)
def test_regular_code_rejects_bad_parameters(kwargs):
    with pytest.raises(ConstructionError):
        build_regular_code(**kwargs)


# ---------------------------------------------
# Encoding and closures
# ---------------------------------------------

def test_systematic_encoding_hamming(rng):
    code = make_code(ParityCheckMatrix.from_dense(HAMMING_DENSE))
    assert code.k == 4 and not code.is_cyclic
    for _ in range(16):
        msg = rng.integers(0, 2, size=4)
        word = encode(code.generator, msg)
        assert syndrome(code.h, word)
        np.testing.assert_array_equal(code.generator.extract(word), msg)


def test_cyclic_encoding_is_systematic_in_high_positions(eg15, rng):
    msg = rng.integers(0, 2, size=eg15.k)
    word = encode(eg15.generator, msg)
    np.testing.assert_array_equal(word[eg15.n - eg15.k:], msg)


def test_xor_closure(eg63, rng):
    """H (c_a + c_b) = 0 for random codeword pairs."""
    for _ in range(1000):
        c_a = encode(eg63.generator, rng.integers(0, 2, size=eg63.k))
        c_b = encode(eg63.generator, rng.integers(0, 2, size=eg63.k))
        assert syndrome(eg63.h, np.bitwise_xor(c_a, c_b))


@pytest.mark.parametrize("iota", range(-8, 9))
def test_shifted_xor_closure(eg63, rng, iota):
    """For a cyclic code c_a + c_b^(iota) is still a codeword."""
    for _ in range(20):
        c_a = encode(eg63.generator, rng.integers(0, 2, size=eg63.k))
        c_b = encode(eg63.generator, rng.integers(0, 2, size=eg63.k))
        assert syndrome(eg63.h, np.bitwise_xor(c_a, cyclic_shift(c_b, iota)))


def test_make_code_with_generator_poly(eg15):
    plain = ParityCheckMatrix.from_dense(eg15.h.dense())
    code = make_code(plain, eg15.h.generator_poly)
    assert code.is_cyclic and code.k == 7


def test_make_code_rejects_non_divisor(eg15):
    with pytest.raises(ConstructionError):
        make_code(ParityCheckMatrix.from_dense(eg15.h.dense()), (1, 0, 1))


def test_cyclic_shift_direction():
    np.testing.assert_array_equal(cyclic_shift(np.array([1, 0, 0, 0]), 1), [0, 1, 0, 0])
    np.testing.assert_array_equal(cyclic_shift(np.array([1, 0, 0, 0]), -1), [0, 0, 0, 1])


def test_length_errors(eg15):
    with pytest.raises(CodeLengthError):
        encode(eg15.generator, np.zeros(eg15.k + 1))
    with pytest.raises(CodeLengthError):
        syndrome(eg15.h, np.zeros(eg15.n - 1))


def test_fingerprint_identifies_matrix(eg15):
    same = ParityCheckMatrix.from_dense(eg15.h.dense())
    other = ParityCheckMatrix.from_dense(HAMMING_DENSE)
    assert same.fingerprint() == eg15.h.fingerprint()
    assert other.fingerprint() != eg15.h.fingerprint()
