# pncsim/operations/framesync.py

"""
Module: framesync.py

Frame-asynchronism handling at the relay and at the sources:

- zero_pad_interference erases the edge samples that may carry
  interference instead of the cyclically shifted codeword.
- snr_loss_db accounts for the discarded energy.
- CRC-16/CCITT-FALSE framing of source messages.
- Delay resolution by CRC scan over cyclic shifts (and the posterior
  magnitude estimator kept for comparison).
- Broadcast-phase recovery of the other source's message.

Bit order: bit streams are numpy uint8 arrays; when bytes are turned into
bits the most significant bit comes first.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Sequence, Union

import numpy as np

from pncsim.errors import (
    AmbiguousDelayError,
    DelayResolutionError,
    FrameOffsetError,
    RecoveryError,
)
from pncsim.operations.jointdec import JointDecoder
from pncsim.operations.ldpc import GeneratorForm, cyclic_shift

logger = logging.getLogger(__name__)

CRC_BITS = 16
CRC_POLY = 0x1021
CRC_INIT = 0xFFFF
CRC_NAME = "CRC-16/CCITT-FALSE"


def _crc_table() -> List[int]:
    table = []
    for byte in range(256):
        reg = byte << 8
        for _ in range(8):
            reg = ((reg << 1) ^ CRC_POLY) if reg & 0x8000 else (reg << 1)
        table.append(reg & 0xFFFF)
    return table


CRC_TABLE = _crc_table()


# ---------------------------------------------
# Interference padding
# ---------------------------------------------

def zero_pad_interference(r: np.ndarray, iota_max: int, memory: int = 0) -> np.ndarray:
    """
    Replace the first iota_max + memory and the last iota_max samples of r
    by erasures (NaN rows).

    With channel memory L a B stream delayed by iota_max still reaches the
    L samples after the head through F_1..F_L, where its silent symbols stand
    in for the wrapped tail of the cyclic shift. The tail needs no extension
    since taps only look back. The detector drops the observation term of
    erased samples, so they carry only their priors.

    Raises:
    - FrameOffsetError: iota_max or memory negative, or nothing left unerased.
    """
    r = np.array(r, dtype=complex, copy=True)
    n = r.shape[0]
    head = iota_max + memory if iota_max else 0
    if iota_max < 0 or memory < 0 or head + iota_max >= n:
        raise FrameOffsetError(f"iota_max={iota_max} with memory {memory} leaves no samples of a length-{n} frame")
    if iota_max:
        r[:head] = np.nan
        r[n - iota_max:] = np.nan
    return r


def snr_loss_db(n: int, iota: int) -> float:
    """
    10 log10((N - 2 iota) / N): the energy given up by discarding 2*iota samples.

    >>> round(snr_loss_db(1365, 8), 4)
    -0.0512
    """
    if iota < 0 or 2 * iota >= n:
        raise FrameOffsetError(f"snr loss needs 0 <= 2*iota < n, got n={n}, iota={iota}")
    return 10.0 * math.log10((n - 2 * iota) / n)


# ---------------------------------------------
# CRC-16 framing
# ---------------------------------------------

def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def crc16_compute(bits: Union[Sequence[int], np.ndarray]) -> int:
    """
    CRC-16/CCITT-FALSE of a bit stream (poly 0x1021, init 0xFFFF, no reflection).

    Whole bytes go through the lookup table; trailing bits are shifted in
    one at a time.

    >>> hex(crc16_compute(bytes_to_bits(b"123456789")))
    '0x29b1'
    """
    bits = np.asarray(bits, dtype=np.uint8)
    whole = bits.size - bits.size % 8
    reg = CRC_INIT
    for byte in np.packbits(bits[:whole]).tolist():
        reg = ((reg << 8) & 0xFFFF) ^ CRC_TABLE[(reg >> 8) ^ byte]
    for bit in bits[whole:].tolist():
        top = ((reg >> 15) & 1) ^ bit
        reg = (reg << 1) & 0xFFFF
        if top:
            reg ^= CRC_POLY
    return reg


def crc_to_bits(crc: int) -> np.ndarray:
    return np.array([(crc >> (CRC_BITS - 1 - i)) & 1 for i in range(CRC_BITS)], dtype=np.uint8)


@dataclass(frozen=True)
class CrcFrame:
    message: np.ndarray = field(repr=False)
    crc: int
    polynomial: str = CRC_NAME

    @property
    def bits(self) -> np.ndarray:
        return np.concatenate([self.message, crc_to_bits(self.crc)])


def crc16_append(msg: Union[Sequence[int], np.ndarray]) -> CrcFrame:
    """Frame a nonempty message as msg || crc16(msg)."""
    msg = np.asarray(msg, dtype=np.uint8)
    if msg.size == 0:
        raise ValueError("cannot frame an empty message")
    return CrcFrame(message=msg, crc=crc16_compute(msg))


def crc16_check(frame_bits: Union[Sequence[int], np.ndarray]) -> bool:
    """True iff the last 16 bits are the CRC of the rest."""
    frame_bits = np.asarray(frame_bits, dtype=np.uint8)
    if frame_bits.size <= CRC_BITS:
        return False
    body, tail = frame_bits[:-CRC_BITS], frame_bits[-CRC_BITS:]
    return bool(np.array_equal(crc_to_bits(crc16_compute(body)), tail))


# ---------------------------------------------
# Delay resolution
# ---------------------------------------------

def candidate_offsets(iota_max: int) -> Iterator[int]:
    """0, 1, -1, 2, -2, ... up to +-iota_max."""
    yield 0
    for mag in range(1, iota_max + 1):
        yield mag
        yield -mag


def _crc_passes(stream: np.ndarray, generator: GeneratorForm, iota_max: int, own: np.ndarray = None):
    passes = []
    for shift in candidate_offsets(iota_max):
        if own is None:
            word = cyclic_shift(stream, -shift)
        else:
            word = np.bitwise_xor(stream, cyclic_shift(own, shift))
        if crc16_check(generator.extract(word)):
            passes.append(shift)
    return passes


def resolve_delay_crc(pair_b: np.ndarray, generator: GeneratorForm, iota_max: int) -> int:
    """
    Find the frame offset from the decoded source-B stream c_b^(iota).

    Every l in [-iota_max, iota_max] is tried: cyclic_shift(pair_b, -l) is
    taken as B's codeword, its systematic bits as B's framed message.

    Raises:
    - DelayResolutionError: no shift passes the CRC.
    - AmbiguousDelayError: several shifts pass (candidates listed by |l|).
    """
    passes = _crc_passes(np.asarray(pair_b, dtype=np.uint8), generator, iota_max)
    logger.debug("CRC scan over +-%d passed for %s", iota_max, passes)
    if not passes:
        raise DelayResolutionError(f"no shift in [-{iota_max}, {iota_max}] passes the CRC")
    if len(passes) > 1:
        logger.warning("ambiguous CRC scan: %s", passes)
        raise AmbiguousDelayError(passes)
    return passes[0]


def erase_for_offset(r: np.ndarray, iota: int) -> np.ndarray:
    """
    Erase the |iota| samples where a B stream delayed by iota departs from its
    cyclic shift: the head for iota > 0, the tail for iota < 0.
    """
    r = np.array(r, dtype=complex, copy=True)
    if iota > 0:
        r[:iota] = np.nan
    elif iota < 0:
        r[r.shape[0] + iota:] = np.nan
    return r


def posterior_magnitude(posterior: np.ndarray) -> float:
    """Sum over symbols of (max log-posterior - mean log-posterior)."""
    posterior = np.asarray(posterior, dtype=float)
    return float(np.sum(np.max(posterior, axis=1) - np.mean(posterior, axis=1)))


def resolve_delay_llr(r: np.ndarray, decoder: JointDecoder, b_mac, iota_max: int,
                      iteration: int = 1) -> int:
    """
    Pick the offset whose erasure pattern gives the most confident decoder
    output after `iteration` inner iterations of one outer round.

    Ties go to the earliest candidate in 0, 1, -1, 2, -2, ... order.
    """
    scout = JointDecoder(decoder.h, n_outer=1, n_inner=max(1, iteration), mode=decoder.mode)
    best, best_score = 0, -np.inf
    for iota in candidate_offsets(iota_max):
        result = scout.decode(erase_for_offset(r, iota), b_mac, early_stop=False)
        score = posterior_magnitude(result.posterior)
        logger.debug("LLR estimator: iota=%d score=%.3f", iota, score)
        if score > best_score:
            best, best_score = iota, score
    return best


# ---------------------------------------------
# Broadcast phase
# ---------------------------------------------

class Role(str, Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class RecoveryResult:
    message: np.ndarray = field(repr=False)
    iota: int


def broadcast_recover(relay_xor: np.ndarray, own_codeword: np.ndarray, role: Role,
                      generator: GeneratorForm, iota_max: int) -> RecoveryResult:
    """
    Recover the other source's message (without its CRC) from c_r = c_a XOR c_b^(iota).

    Role A removes its own codeword and scans cyclic shifts of the remainder;
    role B scans shifts of its own codeword, removing each from c_r.

    Raises:
    - RecoveryError: no shift (or more than one) yields a valid CRC frame.
    """
    relay_xor = np.asarray(relay_xor, dtype=np.uint8)
    own_codeword = np.asarray(own_codeword, dtype=np.uint8)
    if Role(role) is Role.A:
        remainder = np.bitwise_xor(relay_xor, own_codeword)
        passes = _crc_passes(remainder, generator, iota_max)
    else:
        passes = _crc_passes(relay_xor, generator, iota_max, own=own_codeword)

    if len(passes) != 1:
        raise RecoveryError(f"source {Role(role).value}: {len(passes)} shifts pass the CRC")
    iota = passes[0]
    if Role(role) is Role.A:
        word = cyclic_shift(remainder, -iota)
    else:
        word = np.bitwise_xor(relay_xor, cyclic_shift(own_codeword, iota))
    return RecoveryResult(message=generator.extract(word)[:-CRC_BITS], iota=iota)
