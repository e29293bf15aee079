# pncsim/operations/jointdec.py

"""
Module: jointdec.py

Joint LDPC + PNC decoding at the relay.

log_g_spa runs the log-domain generalized sum-product algorithm on the
virtual GF(4) codeword c_a + c_b D, alternating B_MAC passes (outer
iterations) with flooding LDPC iterations (inner iterations):

    1. channel priors uniform, check messages zero
    2. L_e = B_MAC(r, L_i)
    3. hard decision and syndrome test on c_r = c_a XOR c_b
    4. check-node box-plus, zero-anchored
    5. posterior = L_e + sum of incoming check messages
    6. variable-to-check = posterior - incoming; L_i = posterior - L_e

jcnc_decode is the disjoint baseline: one B_MAC pass, collapse to XOR-bit
LLRs, then binary sum-product.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from pncsim.operations.gfcode import (
    Anchor,
    LOG_FLOOR,
    LogSumMode,
    box_plus,
    jacobian_log_sum,
    normalize,
    saturate,
    xor_extract,
)
from pncsim.operations.ldpc import ParityCheckMatrix, syndrome

logger = logging.getLogger(__name__)

IDENTITY_MESSAGE = np.array([0.0, -np.inf, -np.inf, -np.inf])
LLR_CLIP = 50.0

BMacFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class DecoderState:
    """Messages on the edges of H (edges ordered check by check) and per-variable terms."""

    v2c: np.ndarray
    c2v: np.ndarray
    channel: np.ndarray
    posterior: np.ndarray
    outer: int = 0
    inner: int = 0


@dataclass(frozen=True)
class DecodeResult:
    xor_codeword: np.ndarray
    converged: bool
    outer_iters_used: int
    inner_iters_used: int
    symbols: Optional[np.ndarray] = field(default=None, repr=False)
    pair_a: Optional[np.ndarray] = field(default=None, repr=False)
    pair_b: Optional[np.ndarray] = field(default=None, repr=False)
    pair_converged: bool = False
    posterior: Optional[np.ndarray] = field(default=None, repr=False)


class TannerGraph:
    """Edge bookkeeping for H, padded per check for vectorized updates."""

    def __init__(self, h: ParityCheckMatrix):
        self.h = h
        self.edge_checks = h.edge_checks
        self.edge_vars = h.edge_vars
        self.n_edges = self.edge_vars.size
        degrees = np.array(h.row_degrees(), dtype=np.int64)
        self.max_degree = int(degrees.max(initial=0))
        starts = np.concatenate([[0], np.cumsum(degrees)[:-1]]) if h.m else np.zeros(0, dtype=np.int64)
        slots = np.full((h.m, max(self.max_degree, 1)), -1, dtype=np.int64)
        for chk in range(h.m):
            slots[chk, :degrees[chk]] = starts[chk] + np.arange(degrees[chk])
        self.slots = slots
        self.valid = slots >= 0
        # degree-1 checks send the zero message
        self.lonely_edges = starts[degrees == 1]


# ---------------------------------------------
# Check and variable node processing
# ---------------------------------------------

def _exclusive_box_plus(padded: np.ndarray, mode: LogSumMode) -> np.ndarray:
    """
    For messages (C, D, 4), the box-plus of all slots except each one, via
    forward and backward partial accumulations.
    """
    checks, degree, _ = padded.shape
    forward = np.empty_like(padded)
    backward = np.empty_like(padded)
    acc = np.broadcast_to(IDENTITY_MESSAGE, (checks, 4)).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(degree):
            forward[:, j] = acc
            acc = box_plus(acc, padded[:, j], mode)
        acc = np.broadcast_to(IDENTITY_MESSAGE, (checks, 4)).copy()
        for j in range(degree - 1, -1, -1):
            backward[:, j] = acc
            acc = box_plus(acc, padded[:, j], mode)
        return box_plus(forward, backward, mode)


def check_node_update(incoming: np.ndarray, mode: LogSumMode = LogSumMode.EXACT) -> np.ndarray:
    """
    Outgoing check-to-variable messages of one check.

    Parameters:
    - incoming: (d, 4) variable-to-check log vectors.

    Returns:
    - (d, 4) zero-anchored messages; entry n is the GF(4) box-plus of all
      incoming messages except n's. A degree-1 check returns the zero vector.
    """
    incoming = np.asarray(incoming, dtype=float)
    degree = incoming.shape[0]
    if degree <= 1:
        return np.zeros((degree, 4))
    msgs = normalize(saturate(incoming), Anchor.ZERO)
    return _exclusive_box_plus(msgs[None], mode)[0]


def variable_node_update(channel: np.ndarray, incoming: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    posterior = channel + sum(incoming); outgoing[m] = posterior - incoming[m].

    Returns:
    - (outgoing (k, 4), posterior (4,))
    """
    channel = np.asarray(channel, dtype=float)
    incoming = np.asarray(incoming, dtype=float).reshape(-1, 4)
    posterior = channel + incoming.sum(axis=0)
    return posterior[None, :] - incoming, posterior


def hard_decision(posteriors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    v_n = argmax of the log-posterior (lowest index on ties) and the XOR bit.

    Returns:
    - (symbols, xor bits)
    """
    symbols = np.argmax(np.asarray(posteriors), axis=-1).astype(np.int64)
    return symbols, xor_extract(symbols).astype(np.uint8)


def _check_update_all(graph: TannerGraph, v2c: np.ndarray, mode: LogSumMode) -> np.ndarray:
    padded = np.where(graph.valid[:, :, None], v2c[np.maximum(graph.slots, 0)], IDENTITY_MESSAGE)
    out = _exclusive_box_plus(padded, mode)
    c2v = np.zeros_like(v2c)
    c2v[graph.slots[graph.valid]] = out[graph.valid]
    c2v[graph.lonely_edges] = 0.0
    return c2v


def _posterior(graph: TannerGraph, channel: np.ndarray, c2v: np.ndarray) -> np.ndarray:
    post = channel.copy()
    np.add.at(post, graph.edge_vars, c2v)
    return post


def _outgoing(graph: TannerGraph, post: np.ndarray, c2v: np.ndarray) -> np.ndarray:
    return normalize(saturate(post[graph.edge_vars] - c2v), Anchor.ZERO)


def _result(h: ParityCheckMatrix, state: DecoderState, converged: bool) -> DecodeResult:
    symbols, xor_bits = hard_decision(state.posterior)
    pair_a = (symbols & 1).astype(np.uint8)
    pair_b = ((symbols >> 1) & 1).astype(np.uint8)
    return DecodeResult(xor_codeword=xor_bits, converged=converged,
                        outer_iters_used=state.outer, inner_iters_used=state.inner,
                        symbols=symbols, pair_a=pair_a, pair_b=pair_b,
                        pair_converged=syndrome(h, pair_a) and syndrome(h, pair_b),
                        posterior=state.posterior)


# ---------------------------------------------
# Log-G-SPA
# ---------------------------------------------

class JointDecoder:
    """
    Log-G-SPA bound to a parity-check matrix and an iteration schedule.

    decode() takes the received sequence and a B_MAC callable mapping
    (r, priors) to extrinsic log vectors.
    """

    def __init__(self, h: ParityCheckMatrix, n_outer: int = 4, n_inner: int = 5,
                 mode: LogSumMode = LogSumMode.EXACT):
        if n_outer < 1 or n_inner < 1:
            raise ValueError(f"schedule needs n_outer >= 1 and n_inner >= 1, got ({n_outer}, {n_inner})")
        self.h = h
        self.graph = TannerGraph(h)
        self.n_outer = n_outer
        self.n_inner = n_inner
        self.mode = LogSumMode(mode)

    def decode(self, r: np.ndarray, b_mac: BMacFn, early_stop: bool = True) -> DecodeResult:
        n = self.h.n
        graph = self.graph
        zeros = np.zeros((n, 4))
        state = DecoderState(v2c=np.zeros((graph.n_edges, 4)), c2v=np.zeros((graph.n_edges, 4)),
                             channel=zeros.copy(), posterior=zeros.copy())
        priors = zeros.copy()

        for outer in range(1, self.n_outer + 1):
            state.outer = outer
            state.channel = saturate(b_mac(r, priors))
            state.posterior = _posterior(graph, state.channel, state.c2v)
            state.v2c = _outgoing(graph, state.posterior, state.c2v)
            if early_stop and syndrome(self.h, hard_decision(state.posterior)[1]):
                logger.debug("converged after B_MAC pass %d", outer)
                return _result(self.h, state, True)

            for _ in range(self.n_inner):
                state.inner += 1
                state.c2v = _check_update_all(graph, state.v2c, self.mode)
                state.posterior = _posterior(graph, state.channel, state.c2v)
                if early_stop and syndrome(self.h, hard_decision(state.posterior)[1]):
                    logger.debug("converged at outer %d, inner total %d", outer, state.inner)
                    return _result(self.h, state, True)
                state.v2c = _outgoing(graph, state.posterior, state.c2v)

            priors = np.maximum(state.posterior - state.channel, -2 * LLR_CLIP)

        converged = syndrome(self.h, hard_decision(state.posterior)[1])
        return _result(self.h, state, converged)


def log_g_spa(h: ParityCheckMatrix, b_mac: BMacFn, r: np.ndarray, n_outer: int = 4, n_inner: int = 5,
              mode: LogSumMode = LogSumMode.EXACT, early_stop: bool = True) -> DecodeResult:
    """Run the outer/inner schedule once; see JointDecoder."""
    return JointDecoder(h, n_outer, n_inner, mode).decode(r, b_mac, early_stop)


# ---------------------------------------------
# JCNC baseline
# ---------------------------------------------

def xor_llr_from_joint(v: np.ndarray) -> np.ndarray:
    """
    ln((p_0 + p_3) / (p_1 + p_2)) of a joint GF(4) log vector.

    >>> round(float(xor_llr_from_joint(np.log([.4, .1, .2, .3]))), 4)
    0.8473
    """
    v = saturate(v)
    zero = jacobian_log_sum(v[..., 0], v[..., 3])
    one = jacobian_log_sum(v[..., 1], v[..., 2])
    return np.asarray(zero) - np.asarray(one)


def binary_spa(h: ParityCheckMatrix, llr: np.ndarray, iters: int) -> Tuple[np.ndarray, bool, int]:
    """
    Binary sum-product (tanh rule) with L = ln(P0/P1).

    Returns:
    - (hard decisions, converged, iterations used)
    """
    graph = TannerGraph(h)
    llr = np.clip(np.asarray(llr, dtype=float), -LLR_CLIP, LLR_CLIP)
    bits = (llr < 0).astype(np.uint8)
    if syndrome(h, bits):
        return bits, True, 0
    v2c = llr[graph.edge_vars]
    for it in range(1, iters + 1):
        t = np.tanh(np.clip(v2c, -LLR_CLIP, LLR_CLIP) / 2.0)
        padded = np.where(graph.valid, t[np.maximum(graph.slots, 0)], 1.0)
        ones = np.ones((h.m, 1))
        prefix = np.cumprod(np.hstack([ones, padded[:, :-1]]), axis=1)
        suffix = np.cumprod(np.hstack([ones, padded[:, :0:-1]]), axis=1)[:, ::-1]
        prod = np.clip(prefix * suffix, -1 + 1e-15, 1 - 1e-15)
        c2v = np.zeros_like(v2c)
        c2v[graph.slots[graph.valid]] = 2.0 * np.arctanh(prod[graph.valid])
        c2v[graph.lonely_edges] = 0.0
        post = llr.copy()
        np.add.at(post, graph.edge_vars, c2v)
        bits = (post < 0).astype(np.uint8)
        if syndrome(h, bits):
            return bits, True, it
        v2c = post[graph.edge_vars] - c2v
    return bits, False, iters


def jcnc_decode(h: ParityCheckMatrix, joint_posteriors: np.ndarray, iters: int = 20) -> DecodeResult:
    """
    Collapse joint posteriors to XOR-bit LLRs and decode c_r with binary SPA.

    Pair estimates are not available from this decoder.
    """
    llr = xor_llr_from_joint(joint_posteriors)
    bits, converged, used = binary_spa(h, llr, iters)
    return DecodeResult(xor_codeword=bits, converged=converged, outer_iters_used=1,
                        inner_iters_used=used)
