# pncsim/operations/detector.py

"""
Module: detector.py

Soft detection of the pair symbol c_ab(k) = c_a(k) + c_b(k) D on the
vector-ISI channel with a log-domain BCJR (the relay's B_MAC).

Trellis layout:
- full: state = (c_ab(k-1), ..., c_ab(k-L)) packed base 4, digit j holds
  c_ab(k-1-j); 4^L states.
- reduced: state = (c_b(k-1), ..., c_b(k-L)) packed base 2; valid when no
  tap beyond F_0 touches source A; 2^L states.

Branch b = 4 * state + u, so branches leaving a state are contiguous and
branch b carries input symbol b % 4.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from pncsim.errors import DegeneratePriorError, InvalidReductionError
from pncsim.operations.gfcode import LogSumMode, log_sum, normalize, Anchor, LOG_FLOOR
from pncsim.operations.macchannel import ChannelRealization, apply_psi, supports_reduction

logger = logging.getLogger(__name__)


def symbol_to_pair(symbols) -> np.ndarray:
    """BPSK pair (x_a, x_b) for GF(4) symbols, shape (..., 2)."""
    symbols = np.asarray(symbols, dtype=np.int64)
    return np.stack([1.0 - 2.0 * (symbols & 1), 1.0 - 2.0 * ((symbols >> 1) & 1)], axis=-1)


@dataclass(frozen=True)
class Trellis:
    memory: int
    reduced: bool
    n_states: int
    next_state: np.ndarray = field(repr=False)
    incoming: np.ndarray = field(repr=False)
    windows: np.ndarray = field(repr=False)

    @property
    def n_branches(self) -> int:
        return 4 * self.n_states

    @property
    def branch_from(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_states), 4)

    @property
    def branch_to(self) -> np.ndarray:
        return self.next_state.ravel()

    @property
    def branch_input(self) -> np.ndarray:
        return np.tile(np.arange(4), self.n_states)


def build_trellis(memory: int, reduced: bool = False,
                  taps: Optional[Sequence[np.ndarray]] = None) -> Trellis:
    """
    Build forward and reverse adjacency for a channel with the given memory.

    Parameters:
    - memory: number of past symbols L the channel output depends on.
    - reduced: track only source B's past bits.
    - taps: when given with reduced=True, checked for the reduction condition.

    Raises:
    - InvalidReductionError: reduced requested for taps that use past A symbols.
    """
    if memory < 0:
        raise ValueError(f"memory must be nonnegative, got {memory}")
    if reduced and taps is not None and not supports_reduction(taps):
        raise InvalidReductionError("channel taps depend on past source-A symbols")

    radix = 2 if reduced else 4
    n_states = radix ** memory
    states = np.arange(n_states)[:, None]
    inputs = np.arange(4)[None, :]
    if reduced:
        next_state = (2 * states + (inputs >> 1)) % n_states
    else:
        next_state = (4 * states + inputs) % n_states

    windows = np.zeros((n_states, 4, memory + 1), dtype=np.int64)
    windows[:, :, 0] = inputs
    for lag in range(1, memory + 1):
        if reduced:
            past = ((states >> (lag - 1)) & 1) << 1
        else:
            past = (states >> (2 * (lag - 1))) & 3
        windows[:, :, lag] = np.broadcast_to(past, (n_states, 4))

    order = np.argsort(next_state.ravel(), kind="stable")
    incoming = order.reshape(n_states, 4)
    if np.any(next_state.ravel()[incoming] != np.arange(n_states)[:, None]):
        raise ValueError("trellis states do not have exactly four incoming branches")
    return Trellis(memory=memory, reduced=reduced, n_states=n_states,
                   next_state=next_state, incoming=incoming, windows=windows)


def branch_outputs(trellis: Trellis, psi: Sequence[np.ndarray]) -> np.ndarray:
    """Noise-free channel output of every branch, shape (n_branches, 2)."""
    pairs = symbol_to_pair(trellis.windows.reshape(trellis.n_branches, trellis.memory + 1))
    out = np.zeros((trellis.n_branches, 2), dtype=complex)
    for lag, tap in enumerate(psi):
        out += pairs[:, lag, :] @ np.asarray(tap).T
    return out


def branch_metric(r_k: np.ndarray, window: Sequence[int], prior: np.ndarray,
                  psi: Sequence[np.ndarray], sigma2: float) -> float:
    """
    log Pr(c_ab(k)) - ||r(k) - Psi(window)||^2 / (2 sigma2).

    window[0] is the current symbol, window[l] the symbol l steps back. An
    erased sample (NaN) keeps only the prior term.
    """
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    prior_term = float(np.asarray(prior)[window[0]])
    r_k = np.asarray(r_k)
    if np.any(np.isnan(r_k)):
        return prior_term
    expected = apply_psi(psi, symbol_to_pair(window))
    return prior_term - float(np.sum(np.abs(r_k - expected) ** 2)) / (2.0 * sigma2)


@dataclass(frozen=True)
class ApSequence:
    """Per-symbol prior, extrinsic and posterior log vectors, each (N, 4), max-anchored."""

    prior: np.ndarray
    extrinsic: np.ndarray
    posterior: np.ndarray


def _checked_priors(priors: np.ndarray) -> np.ndarray:
    priors = np.asarray(priors, dtype=float)
    peak = np.max(priors, axis=1)
    bad = np.flatnonzero(~np.isfinite(peak))
    if bad.size:
        raise DegeneratePriorError(int(bad[0]))
    return np.maximum(priors - peak[:, None], LOG_FLOOR)


def bcjr(r: np.ndarray, priors: np.ndarray, psi: Sequence[np.ndarray], sigma2: float,
         trellis: Trellis, mode: LogSumMode = LogSumMode.EXACT) -> ApSequence:
    """
    Log-domain forward/backward recursions over the trellis.

    alpha_0 and beta_N are uniform over states; both recursions are
    re-anchored to max 0 at every step. Rows of r containing NaN are
    erasures and contribute only the prior.

    Returns:
    - ApSequence with posterior = prior + extrinsic (max-anchored).
    """
    r = np.asarray(r)
    n = r.shape[0]
    priors = _checked_priors(priors)
    if priors.shape != (n, 4):
        raise ValueError(f"priors must have shape ({n}, 4), got {priors.shape}")

    outputs = branch_outputs(trellis, psi)
    erased = np.any(np.isnan(r), axis=1)
    safe_r = np.where(erased[:, None], 0.0, r)
    dist = np.sum(np.abs(safe_r[:, None, :] - outputs[None, :, :]) ** 2, axis=2)
    dist[erased] = 0.0
    gamma = priors[:, trellis.branch_input] - dist / (2.0 * sigma2)

    src = trellis.branch_from
    dst = trellis.branch_to
    states = trellis.n_states

    alpha = np.zeros((n + 1, states))
    for k in range(n):
        vals = alpha[k, src] + gamma[k]
        step = log_sum(vals[trellis.incoming], axis=1, mode=mode)
        alpha[k + 1] = step - np.max(step)

    beta = np.zeros((n + 1, states))
    for k in range(n - 1, -1, -1):
        vals = gamma[k] + beta[k + 1, dst]
        step = log_sum(vals.reshape(states, 4), axis=1, mode=mode)
        beta[k] = step - np.max(step)

    joint = alpha[:-1, src] + gamma + beta[1:, dst]
    posterior = log_sum(joint.reshape(n, states, 4), axis=1, mode=mode)
    posterior = normalize(posterior, Anchor.MAX)
    extrinsic = normalize(posterior - priors, Anchor.MAX)
    return ApSequence(prior=priors, extrinsic=extrinsic, posterior=posterior)


def viterbi(r: np.ndarray, psi: Sequence[np.ndarray], sigma2: float, trellis: Trellis,
            priors: Optional[np.ndarray] = None) -> np.ndarray:
    """Maximum-likelihood symbol sequence on the same trellis (ties to the lowest index)."""
    r = np.asarray(r)
    n = r.shape[0]
    priors = np.zeros((n, 4)) if priors is None else _checked_priors(priors)
    outputs = branch_outputs(trellis, psi)
    erased = np.any(np.isnan(r), axis=1)
    dist = np.sum(np.abs(np.where(erased[:, None], 0.0, r)[:, None, :] - outputs[None]) ** 2, axis=2)
    dist[erased] = 0.0
    gamma = priors[:, trellis.branch_input] - dist / (2.0 * sigma2)

    metric = np.zeros(trellis.n_states)
    backpointer = np.zeros((n, trellis.n_states), dtype=np.int64)
    for k in range(n):
        vals = (metric[trellis.branch_from] + gamma[k])[trellis.incoming]
        best = np.argmax(vals, axis=1)
        backpointer[k] = trellis.incoming[np.arange(trellis.n_states), best]
        metric = vals[np.arange(trellis.n_states), best]
        metric = metric - np.max(metric)

    decisions = np.zeros(n, dtype=np.int64)
    state = int(np.argmax(metric))
    for k in range(n - 1, -1, -1):
        branch = backpointer[k, state]
        decisions[k] = branch % 4
        state = branch // 4
    return decisions


class BMac:
    """
    B_MAC: the BCJR bound to one channel realization.

    Calling it with the received sequence and a priori vectors returns the
    extrinsic vectors; `run` returns the full ApSequence.
    """

    def __init__(self, channel: ChannelRealization, mode: LogSumMode = LogSumMode.EXACT,
                 reduced: Optional[bool] = None):
        self.channel = channel
        self.mode = LogSumMode(mode)
        self.psi = channel.psi
        if reduced is None:
            reduced = channel.memory > 0 and supports_reduction(channel.taps)
        self.trellis = build_trellis(channel.memory, reduced=reduced, taps=channel.taps)
        logger.debug("B_MAC trellis: memory %d, %d states%s", channel.memory,
                     self.trellis.n_states, " (reduced)" if reduced else "")

    def run(self, r: np.ndarray, priors: Optional[np.ndarray] = None) -> ApSequence:
        r = np.asarray(r)
        if priors is None:
            priors = np.zeros((r.shape[0], 4))
        return bcjr(r, priors, self.psi, self.channel.sigma2, self.trellis, self.mode)

    def __call__(self, r: np.ndarray, priors: Optional[np.ndarray] = None) -> np.ndarray:
        return self.run(r, priors).extrinsic


def b_mac(channel: ChannelRealization, r: np.ndarray, priors: Optional[np.ndarray] = None,
          mode: LogSumMode = LogSumMode.EXACT) -> np.ndarray:
    """One-shot B_MAC call."""
    return BMac(channel, mode)(r, priors)
