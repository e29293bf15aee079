# pncsim/operations/macchannel.py

"""
Module: macchannel.py

The asynchronous two-user multiple-access channel seen by the relay.

Source A is the timing reference (tau_a = 0); source B lags by
delta = iota + epsilon symbols, where iota is the integer frame offset and
epsilon the fractional symbol offset. Matched filtering each user's pulse at
its own timing gives

    y(k) = sum_m S(m) diag(h_a, h_b) x(k - m) + w(k),   S(m) = Lambda(-m),

with E[w(k) w(k+l)^T] = sigma^2 Lambda(l) per real dimension. Spectral
factorization Omega = F^H F of the covariance spectrum yields the
whitened model

    r(k) = sum_l F_l diag(h_a, h_b) x(k - l) + n(k),   E[n n^H] = 2 sigma^2 I,

which is the vector-ISI channel the detector runs on.

Noise convention: sigma^2 is the variance per real dimension, so a complex
noise sample has E|n|^2 = 2 sigma^2. The harness maps Eb/N0 to
sigma^2 = 1 / (2 R 10^(EbN0/10)) with unit-energy BPSK per user.

For smooth pulses the correlations are inner products of the pulses sampled
on one common grid, so Omega is a Gram spectrum and stays semidefinite to
rounding. The full factor drives simulation and whitening; the detector
models only its leading max_memory + 1 taps.

Functions:
- compute_correlations: pulse cross-correlations rho_ab(l), rho_ba(l).
- noise_covariance / load_covariance: the Lambda(l) blocks, optionally loaded.
- spectral_factorize: minimum-phase factor F_0..F_L (Bauer, then polished).
- build_psi: taps with the complex gains folded in.
- simulate_whitened / simulate_matched_filter_domain / whiten / rectangular_samples.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, cholesky_banded
from scipy.optimize import least_squares

from pncsim.errors import (
    ChannelConfigError,
    CovarianceAssemblyError,
    DegenerateSamplingError,
    FactorizationError,
)

logger = logging.getLogger(__name__)

OVERSAMPLE = 32
# lags whose correlations all stay at or below this magnitude end the tail
CORRELATION_THRESHOLD = 0.0
ENERGY_TOLERANCE = 1e-6
SRRC_SPAN = 8
DEFAULT_LOADING = 1e-3
BAUER_BLOCKS = 512
GRID_POINTS = 256
RESIDUAL_TOLERANCE = 1e-8
SEMIDEFINITE_REGULARIZATION = 1e-12
# rounding-level negativity; the loading that cures it stays inside RESIDUAL_TOLERANCE
INDEFINITE_TOLERANCE = 1e-9
# det F(w) may touch the unit circle only within this margin
MIN_PHASE_MARGIN = 1e-3
WHITENING_GUARD = 256


# ---------------------------------------------
# Pulse shapes and correlations
# ---------------------------------------------

class PulseKind(str, Enum):
    RECTANGULAR = "rectangular"
    SRRC = "srrc"


def _srrc(t: np.ndarray, beta: float) -> np.ndarray:
    """Unit-energy square-root raised cosine with symbol period 1."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    at_zero = np.isclose(t, 0.0, atol=1e-12)
    at_pole = np.isclose(np.abs(4 * beta * t), 1.0, atol=1e-12) if beta > 0 else np.zeros_like(at_zero)
    regular = ~(at_zero | at_pole)
    tr = t[regular]
    num = np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    den = np.pi * tr * (1 - (4 * beta * tr) ** 2)
    out[regular] = num / den
    out[at_zero] = 1 - beta + 4 * beta / np.pi
    if beta > 0:
        out[at_pole] = (beta / np.sqrt(2)) * (
            (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta)))
    return out


def integrate(func, start: float, stop: float, oversample: int = OVERSAMPLE) -> float:
    """Trapezoidal quadrature on a grid aligned to both interval endpoints."""
    width = stop - start
    if width <= 0:
        return 0.0
    points = max(2, int(math.ceil(width * oversample)) + 1)
    t = np.linspace(start, stop, points)
    return float(trapezoid(func(t), t))


@dataclass(frozen=True)
class PulseShape:
    """
    Real, symmetric pulse with symbol period 1.

    Rectangular pulses occupy [0, 1]; SRRC pulses are centred on 0 and
    truncated to +/- span symbols, then scaled by gain to unit energy.
    """

    kind: PulseKind
    rolloff: Optional[float] = None
    span: int = SRRC_SPAN
    gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PulseKind(self.kind))
        if self.kind is PulseKind.SRRC and self.rolloff is None:
            raise ChannelConfigError("SRRC pulse needs a rolloff")

    @classmethod
    def rectangular(cls) -> "PulseShape":
        return cls(kind=PulseKind.RECTANGULAR)

    @classmethod
    def srrc(cls, rolloff: float = 1.0, span: int = SRRC_SPAN, oversample: int = OVERSAMPLE) -> "PulseShape":
        if not 0.0 <= rolloff <= 1.0:
            raise ChannelConfigError(f"rolloff must lie in [0, 1], got {rolloff}")
        if span < 1:
            raise ChannelConfigError(f"truncation span must be at least 1 symbol, got {span}")
        raw = cls(kind=PulseKind.SRRC, rolloff=rolloff, span=span)
        return replace(raw, gain=1.0 / math.sqrt(raw.energy(oversample)))

    @property
    def support(self) -> Tuple[float, float]:
        if self.kind is PulseKind.RECTANGULAR:
            return 0.0, 1.0
        return -float(self.span), float(self.span)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lo, hi = self.support
        inside = (t >= lo) & (t <= hi)
        if self.kind is PulseKind.RECTANGULAR:
            base = np.ones_like(t)
        else:
            base = _srrc(t, float(self.rolloff))
        return self.gain * np.where(inside, base, 0.0)

    @property
    def smooth(self) -> bool:
        return self.kind is not PulseKind.RECTANGULAR

    def energy(self, oversample: int = OVERSAMPLE) -> float:
        """
        Rectangular pulses integrate exactly by trapezoid; smooth pulses use
        the Riemann sum on the sampling grid the correlations are built on.
        """
        lo, hi = self.support
        if not self.smooth:
            return integrate(lambda t: self(t) ** 2, lo, hi, oversample)
        grid = np.arange(math.floor(lo * oversample), math.ceil(hi * oversample) + 1) / oversample
        return float(np.sum(self(grid) ** 2) / oversample)


def _cross(g_a: PulseShape, g_b: PulseShape, shift: float, oversample: int) -> float:
    """integral of g_a(t) g_b(t + shift) dt over the overlap of the supports."""
    a0, a1 = g_a.support
    b0, b1 = g_b.support
    start, stop = max(a0, b0 - shift), min(a1, b1 - shift)
    return integrate(lambda t: g_a(t) * g_b(t + shift), start, stop, oversample)


def _lagged(x: np.ndarray, y: np.ndarray, shift: int) -> float:
    """sum_i x(i) y(i + shift) over the overlap of two equal-length sequences."""
    size = x.size
    if abs(shift) >= size:
        return 0.0
    if shift >= 0:
        return float(x[:size - shift] @ y[shift:])
    return float(x[-shift:] @ y[:size + shift])


@dataclass(frozen=True)
class CorrelationSet:
    """
    rho_ab(l) = int g_a(t) g_b(t + l - eps) dt and
    rho_ba(l) = int g_b(t) g_a(t + l + eps) dt for |l| <= memory, with the
    autocorrelations rho_aa(l), rho_bb(l) (zero off lag 0 for Nyquist pulses).
    """

    rho_ab: Dict[int, float]
    rho_ba: Dict[int, float]
    memory: int
    epsilon: float
    rho_aa: Dict[int, float] = field(default_factory=lambda: {0: 1.0})
    rho_bb: Dict[int, float] = field(default_factory=lambda: {0: 1.0})


def compute_correlations(g_a: PulseShape, g_b: PulseShape, epsilon: float,
                         oversample: int = OVERSAMPLE,
                         threshold: float = CORRELATION_THRESHOLD) -> CorrelationSet:
    """
    Numerically integrate the pulse cross-correlations.

    Parameters:
    - g_a, g_b: unit-energy pulse shapes.
    - epsilon: fractional delay of source B, 0 <= epsilon < 1.

    Returns:
    - CorrelationSet with memory L = the largest |lag| with a correlation
      above threshold in magnitude.

    Two rectangular pulses integrate piecewise by trapezoid, which is exact.
    Otherwise both pulses are sampled on the grid t_i = i / oversample
    (g_b shifted by epsilon) and every correlation is the same Riemann inner
    product, which keeps the assembled spectrum a Gram spectrum.

    Example (rectangular, epsilon = 0.5):
    rho_ab(0) = rho_ab(1) = 0.5, rho_ba(0) = rho_ba(-1) = 0.5, L = 1.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ChannelConfigError(f"epsilon must lie in [0, 1), got {epsilon}")
    for name, pulse in (("g_a", g_a), ("g_b", g_b)):
        energy = pulse.energy(oversample)
        if abs(energy - 1.0) > ENERGY_TOLERANCE:
            raise ChannelConfigError(f"pulse {name} has energy {energy:.8f}, expected 1")

    width = (g_a.support[1] - g_a.support[0]) + (g_b.support[1] - g_b.support[0])
    reach = int(math.ceil(width)) + 1
    tables = {"rho_ab": {}, "rho_ba": {}, "rho_aa": {}, "rho_bb": {}}
    if g_a.smooth and g_b.smooth:
        lo = math.floor(min(g_a.support[0], g_b.support[0] + epsilon) * oversample)
        hi = math.ceil(max(g_a.support[1], g_b.support[1] + epsilon) * oversample)
        grid = np.arange(lo, hi + 1) / oversample
        a, b = g_a(grid), g_b(grid - epsilon)
        pairs = {"rho_ab": (a, b), "rho_ba": (b, a), "rho_aa": (a, a), "rho_bb": (b, b)}
        for lag in range(-reach, reach + 1):
            for key, (x, y) in pairs.items():
                tables[key][lag] = _lagged(x, y, lag * oversample) / oversample
    else:
        for lag in range(-reach, reach + 1):
            tables["rho_ab"][lag] = _cross(g_a, g_b, lag - epsilon, oversample)
            tables["rho_ba"][lag] = _cross(g_b, g_a, lag + epsilon, oversample)
            tables["rho_aa"][lag] = _cross(g_a, g_a, float(lag), oversample)
            tables["rho_bb"][lag] = _cross(g_b, g_b, float(lag), oversample)

    significant = [abs(lag) for lag in range(-reach, reach + 1)
                   if any(abs(table[lag]) > threshold for table in tables.values())]
    memory = max(significant, default=0)
    trimmed = {key: {lag: v for lag, v in table.items() if abs(lag) <= memory}
               for key, table in tables.items()}
    return CorrelationSet(memory=memory, epsilon=epsilon, **trimmed)


# ---------------------------------------------
# Noise covariance
# ---------------------------------------------

@dataclass(frozen=True)
class NoiseCovariance:
    """Lambda(l) blocks for 0 <= l <= memory; Lambda(-l) = Lambda(l)^T."""

    lags: Dict[int, np.ndarray]
    loading: float = 0.0

    @property
    def memory(self) -> int:
        return max(abs(lag) for lag in self.lags)

    @property
    def dim(self) -> int:
        return self.lags[0].shape[0]

    def block(self, lag: int) -> np.ndarray:
        if lag in self.lags:
            return self.lags[lag]
        if -lag in self.lags:
            return self.lags[-lag].T
        return np.zeros((self.dim, self.dim))

    def spectrum(self, omegas: np.ndarray) -> np.ndarray:
        """Omega(w) = sum_k Lambda(k) e^{jwk}, shape (len(omegas), d, d)."""
        out = np.zeros((len(omegas), self.dim, self.dim), dtype=complex)
        for lag in range(-self.memory, self.memory + 1):
            out += np.exp(1j * omegas * lag)[:, None, None] * self.block(lag)
        return out

    def min_eigenvalue(self, points: int = 4 * GRID_POINTS) -> float:
        omegas = 2 * np.pi * np.arange(points) / points
        return float(np.min(np.linalg.eigvalsh(self.spectrum(omegas))))

    def toeplitz(self, blocks: int) -> np.ndarray:
        """Dense block-Toeplitz covariance of `blocks` consecutive samples."""
        d = self.dim
        out = np.zeros((d * blocks, d * blocks))
        for p in range(blocks):
            for q in range(blocks):
                out[d * p:d * p + d, d * q:d * q + d] = self.block(q - p)
        return out

    def with_loading(self, amount: float) -> "NoiseCovariance":
        lags = dict(self.lags)
        lags[0] = lags[0] + amount * np.eye(self.dim)
        return NoiseCovariance(lags=lags, loading=self.loading + amount)


def noise_covariance(c: CorrelationSet, loading: float = 0.0) -> NoiseCovariance:
    """
    Lambda(0) = [[1, rho_ab(0)], [rho_ba(0), 1]] and, for 1 <= l <= L,
    Lambda(l) = [[0, rho_ba(l)], [rho_ab(l), 0]], with the autocorrelations
    rho_aa(l), rho_bb(l) on the diagonals (exactly 1 and 0 for ideal
    Nyquist pulses). A nonzero loading is added to the diagonal of Lambda(0).
    """
    lags = {}
    for lag in range(c.memory + 1):
        lags[lag] = np.array([[c.rho_aa.get(lag, 0.0), c.rho_ba.get(lag, 0.0)],
                              [c.rho_ab.get(lag, 0.0), c.rho_bb.get(lag, 0.0)]])
    cov = NoiseCovariance(lags=lags)
    return cov.with_loading(loading) if loading else cov


def load_covariance(cov: NoiseCovariance, margin: float = DEFAULT_LOADING) -> NoiseCovariance:
    """
    Diagonal loading that keeps the spectrum at least `margin` above zero.

    Any deficit below zero is added on top of the margin.
    """
    deficit = max(0.0, -cov.min_eigenvalue())
    amount = margin + deficit
    if amount <= 0:
        return cov
    logger.info("diagonal loading %.3e applied to Lambda(0) (deficit %.3e)", amount, deficit)
    return cov.with_loading(amount)


def _banded_lower(block_fn, d: int, memory: int, blocks: int) -> np.ndarray:
    """
    Lower banded storage (scipy convention ab[i - j, j] = T[i, j]) of the
    block-Toeplitz matrix whose (p, q) block is block_fn(p - q) for p >= q.
    """
    size = d * blocks
    band = d * (memory + 1) - 1
    stack = np.zeros((memory + 2, d, d))
    for lag in range(memory + 1):
        stack[lag] = block_fn(lag)
    offset = np.arange(band + 1)[:, None]
    col = np.arange(size)[None, :]
    row = col + offset
    valid = row < size
    lag = np.minimum(row // d - col // d, memory + 1)
    ab = stack[np.where(valid, lag, memory + 1), row % d, col % d]
    return np.where(valid, ab, 0.0)


def _banded_matvec(ab: np.ndarray, z: np.ndarray) -> np.ndarray:
    """C @ z for a lower-triangular C held in lower banded storage."""
    out = np.zeros_like(z)
    size = z.shape[0]
    for offset in range(ab.shape[0]):
        out[offset:] += ab[offset, :size - offset] * z[:size - offset]
    return out


# ---------------------------------------------
# Spectral factorization
# ---------------------------------------------

@dataclass(frozen=True)
class SpectralFactor:
    taps: Tuple[np.ndarray, ...]
    residual: float

    @property
    def memory(self) -> int:
        return len(self.taps) - 1


def _autocorrelation(taps: Sequence[np.ndarray], shift: int) -> np.ndarray:
    """sum_i F_i^T F_{i+shift}, which should equal Lambda(-shift)."""
    total = np.zeros_like(taps[0])
    for i in range(len(taps) - shift):
        total = total + taps[i].T @ taps[i + shift]
    return total


def factorization_residual(cov: NoiseCovariance, taps: Sequence[np.ndarray],
                           points: int = GRID_POINTS) -> float:
    """max over a unit-circle grid of ||Omega(w) - F(w)^H F(w)||_F."""
    omegas = 2 * np.pi * np.arange(points) / points
    spectrum = cov.spectrum(omegas)
    factor = np.zeros_like(spectrum)
    for lag, tap in enumerate(taps):
        factor += np.exp(-1j * omegas * lag)[:, None, None] * tap
    product = np.conj(np.transpose(factor, (0, 2, 1))) @ factor
    return float(np.max(np.linalg.norm(spectrum - product, axis=(1, 2))))


def _bauer(cov: NoiseCovariance, blocks: int) -> list:
    """
    Factor by Cholesky of the block-Toeplitz matrix with (p, q) block
    Lambda(p - q); the last block row converges to the innovations filter
    A_l, and F_l = A_l^T. Components are reversed first so that F_0 comes
    out lower-triangular.
    """
    d, memory = cov.dim, cov.memory
    flip = np.eye(d)[::-1]
    ab = _banded_lower(lambda lag: flip @ cov.block(lag) @ flip, d, memory, blocks)
    try:
        chol = cholesky_banded(ab, lower=True)
    except LinAlgError:
        ab[0] += SEMIDEFINITE_REGULARIZATION
        try:
            chol = cholesky_banded(ab, lower=True)
        except LinAlgError as exc:
            raise FactorizationError("block-Toeplitz matrix is not positive definite") from exc
    last = d * (blocks - 1)
    taps = []
    for lag in range(memory + 1):
        a = np.zeros((d, d))
        for r in range(d):
            for s in range(d):
                diag = d * lag + r - s
                if 0 <= diag < chol.shape[0]:
                    a[r, s] = chol[diag, last - d * lag + s]
        taps.append(flip @ a.T @ flip)
    return taps


def _pack(taps: Sequence[np.ndarray]) -> np.ndarray:
    d = taps[0].shape[0]
    return np.concatenate([taps[0][np.tril_indices(d)]] + [t.ravel() for t in taps[1:]])


def _unpack(theta: np.ndarray, d: int, memory: int) -> list:
    lower = np.tril_indices(d)
    first = np.zeros((d, d))
    first[lower] = theta[:len(lower[0])]
    rest = theta[len(lower[0]):].reshape(memory, d, d)
    return [first] + list(rest)


def _polish(cov: NoiseCovariance, taps: list) -> list:
    """
    Newton-type refinement of sum_i F_i^T F_{i+e} = Lambda(-e), e = 0..L,
    with F_0 held lower-triangular (upper triangle of e = 0 only).
    """
    d, memory = cov.dim, cov.memory
    upper = np.triu_indices(d)
    lower = np.tril_indices(d)
    targets = [cov.block(-shift) for shift in range(memory + 1)]

    # (tap j, row r, col s) of every free parameter
    params = [(0, r, s) for r, s in zip(*lower)]
    params += [(j, r, s) for j in range(1, memory + 1) for r in range(d) for s in range(d)]
    equations = [(0, p, q) for p, q in zip(*upper)]
    equations += [(e, p, q) for e in range(1, memory + 1) for p in range(d) for q in range(d)]

    def residuals(theta):
        current = _unpack(theta, d, memory)
        out = []
        for shift in range(memory + 1):
            diff = _autocorrelation(current, shift) - targets[shift]
            out.append(diff[upper] if shift == 0 else diff.ravel())
        return np.concatenate(out)

    def jacobian(theta):
        current = _unpack(theta, d, memory)
        jac = np.zeros((len(equations), len(params)))
        for row, (e, p, q) in enumerate(equations):
            for col, (j, r, s) in enumerate(params):
                value = 0.0
                if p == s and j + e <= memory:
                    value += current[j + e][r, q]
                if q == s and j - e >= 0:
                    value += current[j - e][r, p]
                jac[row, col] = value
        return jac

    result = least_squares(residuals, _pack(taps), jac=jacobian, method="lm",
                           xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=500)
    return _unpack(result.x, d, memory)


def _min_phase_roots(taps: Sequence[np.ndarray]) -> np.ndarray:
    """Roots of det(sum_l F_l w^l)."""
    d = taps[0].shape[0]
    entry = lambda r, s: np.array([t[r, s] for t in taps])
    if d == 1:
        det = entry(0, 0)
    elif d == 2:
        det = npoly.polysub(npoly.polymul(entry(0, 0), entry(1, 1)),
                            npoly.polymul(entry(0, 1), entry(1, 0)))
    else:
        raise FactorizationError(f"unsupported block dimension {d}")
    det = npoly.polytrim(det, tol=1e-14)
    if det.size <= 1:
        return np.array([])
    return npoly.polyroots(det)


def spectral_factorize(omega: NoiseCovariance, blocks: int = BAUER_BLOCKS,
                       tolerance: float = RESIDUAL_TOLERANCE) -> SpectralFactor:
    """
    Minimum-phase factor F(z) = sum_l F_l z^{-l} with Omega = F^H F.

    Bauer's method gives the starting point; a least-squares polish drives
    the coefficient equations to machine precision. F_0 is lower-triangular
    with a positive diagonal.

    A spectrum that is singular, or indefinite by at most
    INDEFINITE_TOLERANCE, is loaded by the smallest amount that lifts it to
    SEMIDEFINITE_REGULARIZATION; the residual is still measured against the
    covariance as given.

    Raises:
    - FactorizationError: spectrum clearly indefinite, factor not minimum
      phase, or residual above tolerance on the 256-point grid.
    """
    lam_min = omega.min_eigenvalue()
    if lam_min < -INDEFINITE_TOLERANCE:
        raise FactorizationError(
            f"spectrum is not positive semidefinite (min eigenvalue {lam_min:.2e})", residual=float("nan"))
    target = omega
    if lam_min < SEMIDEFINITE_REGULARIZATION:
        amount = SEMIDEFINITE_REGULARIZATION - lam_min
        logger.warning("spectrum min eigenvalue %.2e; regularizing Lambda(0) by %.2e", lam_min, amount)
        omega = omega.with_loading(amount)

    taps = _bauer(omega, blocks if omega.memory else 1)
    if omega.memory:
        taps = _polish(omega, taps)

    signs = np.where(np.diag(taps[0]) < 0, -1.0, 1.0)
    taps = [signs[:, None] * tap for tap in taps]

    residual = factorization_residual(target, taps)
    roots = _min_phase_roots(taps)
    if roots.size and np.min(np.abs(roots)) < 1.0 - MIN_PHASE_MARGIN:
        raise FactorizationError(
            f"factor is not minimum phase (smallest root modulus {np.min(np.abs(roots)):.4f})", residual)
    if residual >= tolerance:
        raise FactorizationError("spectral factorization did not converge", residual)
    logger.debug("spectral factor with memory %d, residual %.2e", len(taps) - 1, residual)
    return SpectralFactor(taps=tuple(taps), residual=residual)


def rectangular_taps(epsilon: float) -> Tuple[np.ndarray, ...]:
    """
    Closed-form factor for rectangular pulses:
    F_0 = [[sqrt(eps), 0], [sqrt(1-eps), sqrt(1-eps)]], F_1 = [[0, sqrt(eps)], [0, 0]].
    """
    if not 0.0 <= epsilon < 1.0:
        raise ChannelConfigError(f"epsilon must lie in [0, 1), got {epsilon}")
    a, b = math.sqrt(epsilon), math.sqrt(1.0 - epsilon)
    first = np.array([[a, 0.0], [b, b]])
    if epsilon == 0.0:
        return (first,)
    return first, np.array([[0.0, a], [0.0, 0.0]])


def supports_reduction(taps: Sequence[np.ndarray], tolerance: float = 1e-12) -> bool:
    """True when no tap beyond F_0 touches source A's column."""
    return all(np.all(np.abs(np.asarray(tap)[:, 0]) <= tolerance) for tap in taps[1:])


# ---------------------------------------------
# Channel realization and the equivalent ISI channel
# ---------------------------------------------

def build_psi(h_a: complex, h_b: complex, taps: Sequence[np.ndarray]) -> Tuple[np.ndarray, ...]:
    """Fold the complex gains into the taps: T_l = F_l diag(h_a, h_b)."""
    gains = np.diag([complex(h_a), complex(h_b)])
    return tuple(np.asarray(tap, dtype=complex) @ gains for tap in taps)


def apply_psi(psi: Sequence[np.ndarray], window: np.ndarray) -> np.ndarray:
    """
    Noise-free output for a symbol window.

    window[l] holds the pair symbol (x_a, x_b) at time k - l; the result is
    sum_l T_l window[l].
    """
    window = np.asarray(window)
    return sum(tap @ window[lag] for lag, tap in enumerate(psi))


@dataclass(frozen=True)
class ChannelRealization:
    """
    One fixed channel: gains, offsets, noise level and whitened taps.

    `taps` is the detector's model of the channel. `full_taps`, when set,
    is the complete factor the samples are generated and whitened with; the
    model taps are its leading max_memory + 1 entries.

    whitenable is false when the taps factor an unloaded spectrum, which may
    touch zero on the unit circle; such realizations support the whitened
    path only.
    """

    h_a: complex
    h_b: complex
    epsilon: float
    iota: int
    sigma2: float
    taps: Tuple[np.ndarray, ...] = field(repr=False)
    correlations: Optional[CorrelationSet] = field(default=None, repr=False)
    covariance: Optional[NoiseCovariance] = field(default=None, repr=False)
    whitenable: bool = True
    continuous: bool = False
    full_taps: Optional[Tuple[np.ndarray, ...]] = field(default=None, repr=False)

    @property
    def delta_theta(self) -> float:
        return float(np.angle(self.h_b / self.h_a))

    @property
    def memory(self) -> int:
        return len(self.taps) - 1

    @property
    def channel_taps(self) -> Tuple[np.ndarray, ...]:
        return self.full_taps if self.full_taps is not None else self.taps

    @property
    def channel_memory(self) -> int:
        return len(self.channel_taps) - 1

    @property
    def psi(self) -> Tuple[np.ndarray, ...]:
        return build_psi(self.h_a, self.h_b, self.taps)

    def with_noise(self, sigma2: float) -> "ChannelRealization":
        return replace(self, sigma2=sigma2)

    def with_offset(self, iota: int) -> "ChannelRealization":
        return replace(self, iota=int(iota))


def model_taps(taps: Sequence[np.ndarray], max_memory: Optional[int]) -> Tuple[np.ndarray, ...]:
    """Leading max_memory + 1 taps; logs the largest tap norm left out."""
    taps = tuple(taps)
    if max_memory is None or max_memory >= len(taps) - 1:
        return taps
    dropped = max(float(np.linalg.norm(tap)) for tap in taps[max_memory + 1:])
    logger.info("detector memory capped at %d (channel memory %d); largest dropped tap norm %.3e",
                max_memory, len(taps) - 1, dropped)
    return taps[:max_memory + 1]


def build_channel(pulse_a: PulseShape, pulse_b: PulseShape, epsilon: float, iota: int = 0,
                  delta_theta: float = 0.0, sigma2: float = 1.0, max_memory: Optional[int] = 1,
                  loading: float = DEFAULT_LOADING, exact_rectangular: bool = False,
                  continuous: bool = False) -> ChannelRealization:
    """
    Assemble a realization with h_a = 1 and h_b = exp(j delta_theta).

    With exact_rectangular and two rectangular pulses the closed-form factor
    is used without loading. Otherwise the full covariance, loaded when
    loading > 0, is factored numerically. The detector keeps the leading
    max_memory + 1 taps; simulation and whitening use the whole factor.
    """
    correlations = compute_correlations(pulse_a, pulse_b, epsilon)
    covariance = noise_covariance(correlations)
    rectangular = pulse_a.kind is PulseKind.RECTANGULAR and pulse_b.kind is PulseKind.RECTANGULAR
    if exact_rectangular and rectangular:
        full = rectangular_taps(epsilon)
        whitenable = False
    else:
        if loading > 0:
            covariance = load_covariance(covariance, loading)
        full = spectral_factorize(covariance).taps
        whitenable = loading > 0
    taps = model_taps(full, max_memory)
    return ChannelRealization(h_a=1.0 + 0j, h_b=complex(np.exp(1j * delta_theta)), epsilon=epsilon,
                              iota=int(iota), sigma2=sigma2, taps=taps,
                              correlations=correlations, covariance=covariance,
                              whitenable=whitenable, continuous=continuous,
                              full_taps=None if len(taps) == len(full) else tuple(full))


def bpsk(bits: np.ndarray) -> np.ndarray:
    """0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=float)


def _stream(symbols: np.ndarray, delay: int, start: int, stop: int,
            rng: Optional[np.random.Generator], continuous: bool) -> np.ndarray:
    """symbols(k - delay) for k in [start, stop); outside the frame silent or random."""
    k = np.arange(start, stop) - delay
    inside = (k >= 0) & (k < symbols.size)
    out = np.where(inside, symbols[np.clip(k, 0, symbols.size - 1)], 0.0)
    if continuous:
        filler = bpsk(rng.integers(0, 2, size=stop - start))
        out = np.where(inside, out, filler)
    return out


def symbol_pairs(c_a: np.ndarray, c_b: np.ndarray, iota: int, start: int, stop: int,
                 rng: Optional[np.random.Generator] = None, continuous: bool = False) -> np.ndarray:
    """Rows (x_a(k), x_b(k - iota)) for k in [start, stop)."""
    c_a, c_b = np.asarray(c_a), np.asarray(c_b)
    if c_a.shape != c_b.shape:
        raise ChannelConfigError("source codewords must have equal length")
    x_a = _stream(bpsk(c_a), 0, start, stop, rng, continuous)
    x_b = _stream(bpsk(c_b), iota, start, stop, rng, continuous)
    return np.stack([x_a, x_b], axis=1)


def _complex_noise(rng: np.random.Generator, shape, sigma2: float) -> np.ndarray:
    scale = math.sqrt(sigma2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def simulate_whitened(c_a: np.ndarray, c_b: np.ndarray, ch: ChannelRealization,
                      rng: np.random.Generator) -> np.ndarray:
    """
    r(k) = sum_l T_l (x_a(k-l), x_b(k-l-iota)) + n(k) for k in [0, N), summed
    over every tap of the channel factor, not just the detector model.

    Noise is circular complex Gaussian with variance sigma2 per real
    dimension. Returns an (N, 2) complex array.
    """
    n = np.asarray(c_a).size
    memory = ch.channel_memory
    pairs = symbol_pairs(c_a, c_b, ch.iota, -memory, n, rng, ch.continuous)
    out = np.zeros((n, 2), dtype=complex)
    for lag, tap in enumerate(build_psi(ch.h_a, ch.h_b, ch.channel_taps)):
        out += pairs[memory - lag:memory - lag + n] @ tap.T
    return out + _complex_noise(rng, (n, 2), ch.sigma2)


def _frame_end(n: int, iota: int, memory: int) -> int:
    """First index past every sample that carries signal."""
    return max(n, n + iota) + memory


def matched_filter_signal(c_a: np.ndarray, c_b: np.ndarray, covariance: NoiseCovariance,
                          h_a: complex, h_b: complex, iota: int, length: int,
                          rng: Optional[np.random.Generator] = None,
                          continuous: bool = False) -> np.ndarray:
    """Noise-free matched-filter outputs y(k) = sum_m Lambda(-m) H x(k-m), k in [0, length)."""
    memory = covariance.memory
    pairs = symbol_pairs(c_a, c_b, iota, -memory, length + memory, rng, continuous)
    pairs = pairs * np.array([h_a, h_b])
    out = np.zeros((length, 2), dtype=complex)
    for m in range(-memory, memory + 1):
        mix = covariance.block(-m)
        out += pairs[memory - m:memory - m + length] @ mix.T
    return out


def colored_noise(covariance: NoiseCovariance, length: int, sigma2: float,
                  rng: np.random.Generator) -> np.ndarray:
    """
    Complex noise with E[w(k) w(k+l)^T] = sigma2 Lambda(l) per real dimension,
    drawn through a banded Cholesky factor of the block-Toeplitz covariance.
    """
    d = covariance.dim
    ab = _banded_lower(lambda lag: covariance.block(-lag), d, covariance.memory, length)
    try:
        chol = cholesky_banded(ab, lower=True)
    except LinAlgError as exc:
        raise CovarianceAssemblyError(
            f"noise covariance over {length} samples is not positive definite") from exc
    real = _banded_matvec(chol, rng.standard_normal(d * length))
    imag = _banded_matvec(chol, rng.standard_normal(d * length))
    return math.sqrt(sigma2) * (real + 1j * imag).reshape(length, d)


def simulate_matched_filter_domain(c_a: np.ndarray, c_b: np.ndarray, ch: ChannelRealization,
                                   rng: np.random.Generator, guard: int = WHITENING_GUARD) -> np.ndarray:
    """
    Matched-filter outputs with colored noise over [0, K), where K extends
    `guard` samples past the last signal-bearing sample so that the
    anticausal whitening recursion settles before reaching the frame.
    """
    if ch.covariance is None or not ch.whitenable:
        raise ChannelConfigError("matched-filter path needs a realization with a loaded covariance")
    n = np.asarray(c_a).size
    length = _frame_end(n, ch.iota, ch.covariance.memory) + guard
    signal = matched_filter_signal(c_a, c_b, ch.covariance, ch.h_a, ch.h_b, ch.iota, length,
                                   rng, ch.continuous)
    return signal + colored_noise(ch.covariance, length, ch.sigma2, rng)


def whiten(y: np.ndarray, taps: Sequence[np.ndarray]) -> np.ndarray:
    """
    Invert F^H(z^{-1}): r(k) = (F_0^T)^{-1} (y(k) - sum_{i>=1} F_i^T r(k+i)),
    run backwards from the end of y with zero state beyond it.
    """
    y = np.asarray(y)
    length = y.shape[0]
    memory = len(taps) - 1
    head = np.linalg.inv(np.asarray(taps[0]).T)
    tails = [np.asarray(tap).T for tap in taps[1:]]
    out = np.zeros_like(y, dtype=complex)
    for k in range(length - 1, -1, -1):
        acc = y[k].astype(complex)
        for i in range(1, memory + 1):
            if k + i < length:
                acc = acc - tails[i - 1] @ out[k + i]
        out[k] = head @ acc
    return out


def rectangular_samples(c_a: np.ndarray, c_b: np.ndarray, ch: ChannelRealization,
                        rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Two samples per symbol for rectangular pulses, k in [0, N]:

        y_e(k) = h_a x_a(k) + h_b x_b'(k-1) + w_e(k),  var sigma2/eps
        y_o(k) = h_a x_a(k) + h_b x_b'(k)   + w_o(k),  var sigma2/(1-eps)

    with x_b'(k) = x_b(k - iota).
    """
    eps = ch.epsilon
    if not 0.0 < eps < 1.0:
        raise DegenerateSamplingError(f"epsilon = {eps} leaves one sampling interval empty")
    n = np.asarray(c_a).size
    pairs = symbol_pairs(c_a, c_b, ch.iota, -1, n + 1, rng, ch.continuous)
    x_a = pairs[1:, 0]
    x_b_now = pairs[1:, 1]
    x_b_prev = pairs[:-1, 1]
    y_e = ch.h_a * x_a + ch.h_b * x_b_prev + _complex_noise(rng, n + 1, ch.sigma2 / eps)
    y_o = ch.h_a * x_a + ch.h_b * x_b_now + _complex_noise(rng, n + 1, ch.sigma2 / (1 - eps))
    return y_e, y_o


def rectangular_to_matched(y_e: np.ndarray, y_o: np.ndarray, epsilon: float) -> np.ndarray:
    """
    Rebuild matched-filter outputs from the two sample streams:
    y_a(k) = eps y_e(k) + (1-eps) y_o(k), y_b(k) = (1-eps) y_o(k) + eps y_e(k+1).
    """
    y_a = epsilon * y_e[:-1] + (1 - epsilon) * y_o[:-1]
    y_b = (1 - epsilon) * y_o[:-1] + epsilon * y_e[1:]
    return np.stack([y_a, y_b], axis=1)
