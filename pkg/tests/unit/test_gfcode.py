# tests/unit/test_gfcode.py

import itertools

import numpy as np
import pytest

from pncsim.errors import DegenerateMessageError
from pncsim.operations.gfcode import (
    LOG_FLOOR,
    Anchor,
    Gf4Symbol,
    LogSumMode,
    box_plus,
    gf4_add,
    jacobian_log_sum,
    normalize,
    pack,
    saturate,
    unpack,
    xor_extract,
)


# ---------------------------------------------
# Field arithmetic
# ---------------------------------------------

@pytest.mark.parametrize(
    "x, y, expected",
    [
        (1, 2, 3),
        (3, 2, 1),
        (3, 3, 0),
        (0, 2, 2),
    ],
    ids=["one_plus_d", "one_plus_d_minus_d", "self_inverse", "zero_identity"],
)
def test_gf4_add(x, y, expected):
    """Addition is XOR of the packed (a, b) bits."""
    result = gf4_add(x, y)
    assert result == expected, f"Expected gf4_add({x}, {y}) to be {expected}, but got {result}"
    assert isinstance(result, Gf4Symbol)


def test_gf4_add_table_is_abelian_group():
    """Every element is its own inverse and addition commutes."""
    for x, y in itertools.product(range(4), repeat=2):
        assert gf4_add(x, y) == gf4_add(y, x)
        assert gf4_add(gf4_add(x, y), y) == x


def test_pack_unpack_scalar_and_array():
    assert pack(1, 1) == 3
    assert unpack(2) == (0, 1)
    a = np.array([0, 1, 0, 1])
    b = np.array([0, 0, 1, 1])
    packed = pack(a, b)
    np.testing.assert_array_equal(packed, [0, 1, 2, 3])
    back_a, back_b = unpack(packed)
    np.testing.assert_array_equal(back_a, a)
    np.testing.assert_array_equal(back_b, b)


@pytest.mark.parametrize(
    "symbol, expected",
    [(0, 0), (1, 1), (2, 1), (3, 0)],
    ids=["zero", "one", "d", "one_plus_d"],
)
def test_xor_extract(symbol, expected):
    """The XOR bit is a XOR b; 1 + D carries two equal bits."""
    assert xor_extract(symbol) == expected, f"Expected xor bit {expected} for symbol {symbol}"


# ---------------------------------------------
# Normalization and saturation
# ---------------------------------------------

def test_normalize_zero_anchor_preserves_differences(rng):
    v = rng.normal(size=(5, 4))
    out = normalize(v, Anchor.ZERO)
    np.testing.assert_allclose(out[:, 0], 0.0)
    np.testing.assert_allclose(np.diff(out, axis=1), np.diff(v, axis=1), atol=1e-12)


def test_normalize_max_anchor(rng):
    out = normalize(rng.normal(size=(3, 4)), Anchor.MAX)
    np.testing.assert_allclose(out.max(axis=1), 0.0)


def test_normalize_rejects_all_minus_inf():
    with pytest.raises(DegenerateMessageError):
        normalize(np.full(4, -np.inf))


def test_normalize_zero_anchor_with_impossible_zero_symbol():
    """l[0] = -inf cannot anchor; the vector is saturated first."""
    out = normalize(np.array([-np.inf, 0.0, -1.0, -2.0]), Anchor.ZERO)
    assert np.all(np.isfinite(out))
    assert out[0] == 0.0
    assert out[1] == pytest.approx(-LOG_FLOOR)


def test_saturate_clips_at_floor():
    out = saturate(np.array([0.0, -10.0, -200.0, -np.inf]))
    np.testing.assert_allclose(out, [0.0, -10.0, LOG_FLOOR, LOG_FLOOR])


# ---------------------------------------------
# Jacobian logarithm and box-plus
# ---------------------------------------------

@pytest.mark.parametrize(
    "a, b",
    [(3.0, 1.0), (-2.0, -2.0), (0.0, -40.0), (10.0, 12.5)],
    ids=["separated", "equal", "far_apart", "reversed"],
)
def test_jacobian_log_sum_matches_direct(a, b):
    expected = np.log(np.exp(a) + np.exp(b))
    result = jacobian_log_sum(a, b)
    assert result == pytest.approx(expected, abs=1e-12), f"Expected {expected}, got {result}"


def test_jacobian_log_sum_max_log_drops_correction():
    assert jacobian_log_sum(3.0, 1.0, LogSumMode.MAX_LOG) == 3.0


def test_box_plus_identity_message(rng):
    """A message certain at zero leaves the other operand unchanged."""
    identity = np.array([0.0, -np.inf, -np.inf, -np.inf])
    v = normalize(rng.normal(size=4))
    np.testing.assert_allclose(box_plus(identity, v), v, atol=1e-12)


def test_box_plus_deterministic_symbols():
    """Certain at D and at 1 + D gives certain at 1."""
    d = np.array([LOG_FLOOR, LOG_FLOOR, 0.0, LOG_FLOOR])
    one_plus_d = np.array([LOG_FLOOR, LOG_FLOOR, LOG_FLOOR, 0.0])
    out = box_plus(d, one_plus_d)
    assert int(np.argmax(out)) == 1, f"Expected the sum to be certain at 1, got {out}"


def test_box_plus_matches_probability_domain(rng):
    for _ in range(20):
        a, b = rng.normal(size=4), rng.normal(size=4)
        pa, pb = np.exp(a), np.exp(b)
        expected = np.array([sum(pa[x] * pb[i ^ x] for x in range(4)) for i in range(4)])
        np.testing.assert_allclose(box_plus(a, b), np.log(expected / expected[0]), atol=1e-10)
