# pncsim/operations/gfcode.py

"""
Module: gfcode.py

GF(4) arithmetic over GF(2)[D]/(1+D+D^2) and the log-domain algebra on
4-component probability vectors shared by the detector and the decoder.

A field element is packed into a 2-bit integer: bit 0 carries the source-A
bit and bit 1 the source-B bit, so alpha_0=0, alpha_1=1, alpha_2=D and
alpha_3=1+D. Addition is XOR of the packed integers. Multiplication is not
needed because every parity check uses coefficients in {0, 1}.

Conventions:
- "zero-anchor": l[0] = 0 (decoder messages).
- "max-anchor": max(l) = 0 (detector outputs).

Every function accepts scalars or numpy arrays; vectors live on the last axis.
"""

from enum import Enum, IntEnum
from typing import Union

import numpy as np
from scipy.special import logsumexp

from pncsim.errors import DegenerateMessageError

ArrayLike = Union[int, np.ndarray]

# Log-probabilities are clipped here before entering Jacobian sums.
LOG_FLOOR = -50.0

# XOR_TABLE[i, x] = i + x in GF(4)
XOR_TABLE = np.bitwise_xor.outer(np.arange(4), np.arange(4))

# Symbols whose A and B bits agree map to XOR bit 0.
XOR_ZERO_SYMBOLS = (0, 3)
XOR_ONE_SYMBOLS = (1, 2)


class Gf4Symbol(IntEnum):
    ZERO = 0
    ONE = 1
    D = 2
    ONE_PLUS_D = 3


class Anchor(str, Enum):
    ZERO = "zero-anchor"
    MAX = "max-anchor"


class LogSumMode(str, Enum):
    EXACT = "exact"
    MAX_LOG = "max-log"


def pack(a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """
    Pack a source-bit pair into a GF(4) symbol a + b*D.

    >>> pack(1, 1)
    3
    """
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.asarray(a, dtype=np.int64) | (np.asarray(b, dtype=np.int64) << 1)
    return int(a) | (int(b) << 1)


def unpack(x: ArrayLike):
    """Split a GF(4) symbol into its (a, b) bit pair."""
    if isinstance(x, np.ndarray):
        return np.bitwise_and(x, 1), np.right_shift(x, 1) & 1
    return int(x) & 1, (int(x) >> 1) & 1


def gf4_add(x: ArrayLike, y: ArrayLike) -> ArrayLike:
    """
    Add two GF(4) elements.

    Parameters:
    - x, y: packed symbols in {0,1,2,3} (or integer arrays of them).

    Returns:
    - The field sum. Addition is its own inverse.

    Example:
    >>> gf4_add(1, 2)
    3
    >>> gf4_add(3, 2)
    1
    """
    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        return np.bitwise_xor(x, y)
    return Gf4Symbol(int(x) ^ int(y))


def xor_extract(x: ArrayLike) -> ArrayLike:
    """
    Map c_a + c_b*D to the network-coded bit c_a XOR c_b.

    >>> xor_extract(3)
    0
    >>> xor_extract(2)
    1
    """
    if isinstance(x, np.ndarray):
        return np.bitwise_xor(x & 1, (x >> 1) & 1)
    return (int(x) & 1) ^ ((int(x) >> 1) & 1)


def normalize(v: np.ndarray, convention: Anchor = Anchor.ZERO) -> np.ndarray:
    """
    Shift log-probability vectors so that l[0] = 0 (zero-anchor) or
    max(l) = 0 (max-anchor). Pairwise differences are preserved exactly.

    Raises:
    - DegenerateMessageError: when some vector has no finite component.
    """
    v = np.asarray(v, dtype=float)
    peak = np.max(v, axis=-1, keepdims=True)
    if np.any(~np.isfinite(peak)):
        raise DegenerateMessageError("log-probability vector has no finite component")
    anchor = v[..., :1] if Anchor(convention) is Anchor.ZERO else peak
    if not np.all(np.isfinite(anchor)):
        # l[0] = -inf cannot serve as anchor; fall back to saturating first.
        v = saturate(v)
        anchor = v[..., :1]
    return v - anchor


def saturate(v: np.ndarray) -> np.ndarray:
    """Max-anchor and clip every component at LOG_FLOOR."""
    v = np.asarray(v, dtype=float)
    peak = np.max(v, axis=-1, keepdims=True)
    if np.any(~np.isfinite(peak)):
        raise DegenerateMessageError("log-probability vector has no finite component")
    return np.maximum(v - peak, LOG_FLOOR)


def jacobian_log_sum(a, b, mode: LogSumMode = LogSumMode.EXACT):
    """
    ln(e^a + e^b) = max(a, b) + ln(1 + e^{-|a-b|}).

    Max-log mode drops the correction term.

    >>> round(float(jacobian_log_sum(3.0, 1.0)), 6)
    3.126928
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if LogSumMode(mode) is LogSumMode.MAX_LOG:
        result = np.maximum(a, b)
    else:
        result = np.logaddexp(a, b)
    return float(result) if result.ndim == 0 else result


def log_sum(values: np.ndarray, axis: int = -1, mode: LogSumMode = LogSumMode.EXACT) -> np.ndarray:
    """Jacobian sum reduced along an axis."""
    if LogSumMode(mode) is LogSumMode.MAX_LOG:
        return np.max(values, axis=axis)
    return logsumexp(values, axis=axis)


def box_plus(a: np.ndarray, b: np.ndarray, mode: LogSumMode = LogSumMode.EXACT) -> np.ndarray:
    """
    Log-domain distribution of the GF(4) sum of two independent symbols.

    out[i] = ln sum_x exp(a[x] + b[i + x]), zero-anchored. The identity
    element is the message certain at zero, (0, -inf, -inf, -inf).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    # terms[..., i, x] = a[x] + b[i ^ x]
    terms = a[..., None, :] + b[..., XOR_TABLE]
    out = log_sum(terms, axis=-1, mode=mode)
    return out - out[..., :1]
