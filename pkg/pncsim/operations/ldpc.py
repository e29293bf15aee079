# pncsim/operations/ldpc.py

"""
Module: ldpc.py

LDPC code representation shared by both sources: sparse parity-check
matrices, alist import/export, regular and cyclic Euclidean-geometry
constructions, systematic encoding, syndrome checks and cyclic shifts.

GF(2) linear algebra (rank, row reduction, null space, polynomial gcd) is
done with the galois package.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from typing import List, Optional, Sequence, Tuple

import galois
import numpy as np

from pncsim.errors import AlistParseError, CodeLengthError, ConstructionError

logger = logging.getLogger(__name__)

GF2 = galois.GF(2)

EG_FIELD_EXPONENTS = (2, 3, 4)


@dataclass(frozen=True)
class ParityCheckMatrix:
    """
    Sparse binary M x N parity-check matrix.

    rows[m] lists the variables of check m and cols[n] the checks of
    variable n, both sorted. The two views are cross-checked on construction.
    """

    m: int
    n: int
    rows: Tuple[Tuple[int, ...], ...]
    cols: Tuple[Tuple[int, ...], ...]
    is_cyclic: bool = False
    generator_poly: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if len(self.rows) != self.m or len(self.cols) != self.n:
            raise ConstructionError("row/column lists do not match the matrix shape")
        from_rows = set()
        for r, row in enumerate(self.rows):
            if len(set(row)) != len(row):
                raise ConstructionError(f"repeated index in row {r}")
            for c in row:
                if not 0 <= c < self.n:
                    raise ConstructionError(f"column index {c} out of range in row {r}")
                from_rows.add((r, c))
        from_cols = set()
        for c, col in enumerate(self.cols):
            if len(set(col)) != len(col):
                raise ConstructionError(f"repeated index in column {c}")
            for r in col:
                from_cols.add((r, c))
        if from_rows != from_cols:
            raise ConstructionError("row and column adjacency describe different matrices")

    @classmethod
    def from_dense(cls, dense: np.ndarray, is_cyclic: bool = False,
                   generator_poly: Optional[Sequence[int]] = None) -> "ParityCheckMatrix":
        dense = np.asarray(dense) % 2
        m, n = dense.shape
        rows = tuple(tuple(int(c) for c in np.flatnonzero(dense[r])) for r in range(m))
        cols = tuple(tuple(int(r) for r in np.flatnonzero(dense[:, c])) for c in range(n))
        poly = tuple(int(x) for x in generator_poly) if generator_poly is not None else None
        return cls(m=m, n=n, rows=rows, cols=cols, is_cyclic=is_cyclic, generator_poly=poly)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n), dtype=np.uint8)
        for r, row in enumerate(self.rows):
            out[r, list(row)] = 1
        return out

    @property
    def edge_checks(self) -> np.ndarray:
        """Check index of every edge, edges ordered check by check."""
        return np.repeat(np.arange(self.m), [len(row) for row in self.rows])

    @property
    def edge_vars(self) -> np.ndarray:
        """Variable index of every edge, in the same order as edge_checks."""
        return np.array([c for row in self.rows for c in row], dtype=np.int64)

    def row_degrees(self) -> List[int]:
        return [len(row) for row in self.rows]

    def col_degrees(self) -> List[int]:
        return [len(col) for col in self.cols]

    def fingerprint(self) -> str:
        """sha256 of the dense matrix bytes, used to identify a code in manifests."""
        digest = hashlib.sha256()
        digest.update(f"{self.m}x{self.n}:".encode())
        digest.update(np.packbits(self.dense(), axis=1).tobytes())
        return digest.hexdigest()


class GeneratorKind(str, Enum):
    SYSTEMATIC = "systematic"
    CYCLIC = "cyclic"


@dataclass(frozen=True)
class GeneratorForm:
    """
    Systematic encoder for a code.

    generator_matrix is k x N over GF(2); info_positions are the codeword
    positions that carry the message verbatim. Cyclic codes also keep g(x)
    with coefficients lowest degree first.
    """

    kind: GeneratorKind
    n: int
    k: int
    generator_matrix: np.ndarray = field(repr=False)
    info_positions: np.ndarray = field(repr=False)
    generator_poly: Optional[Tuple[int, ...]] = None

    def extract(self, codeword: np.ndarray) -> np.ndarray:
        """Read the systematic message bits back out of a codeword."""
        codeword = np.asarray(codeword)
        if codeword.shape[-1] != self.n:
            raise CodeLengthError(f"codeword length {codeword.shape[-1]} != {self.n}")
        return codeword[..., self.info_positions]


@dataclass(frozen=True)
class LdpcCode:
    """A parity-check matrix together with its encoder."""

    h: ParityCheckMatrix
    generator: GeneratorForm

    @property
    def n(self) -> int:
        return self.h.n

    @property
    def k(self) -> int:
        return self.generator.k

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def is_cyclic(self) -> bool:
        return self.h.is_cyclic


# ---------------------------------------------
# alist import / export
# ---------------------------------------------

def _parse_ints(tokens: List[str], line: int) -> List[int]:
    values = []
    for position, tok in enumerate(tokens, start=1):
        try:
            values.append(int(tok))
        except ValueError:
            # file contents stay out of the message
            raise AlistParseError(f"token {position} is not an integer", line) from None
    return values


def load_alist(text: str) -> ParityCheckMatrix:
    """
    Parse a parity-check matrix in MacKay's alist format.

    Layout (indices 1-based, lists may be zero-padded up to the max degree):
        n m
        max_col_degree max_row_degree
        n column degrees
        m row degrees
        n lines of row indices, one line per column
        m lines of column indices, one line per row

    Raises:
    - AlistParseError: naming the offending line number.
    """
    lines = [(num, raw.split()) for num, raw in enumerate(text.splitlines(), start=1) if raw.strip()]
    cursor = iter(lines)

    def take(what: str) -> Tuple[int, List[int]]:
        try:
            num, tokens = next(cursor)
        except StopIteration:
            raise AlistParseError(f"unexpected end of input while reading {what}") from None
        return num, _parse_ints(tokens, num)

    num, header = take("header")
    if len(header) != 2 or header[0] <= 0 or header[1] <= 0:
        raise AlistParseError("header must be two positive integers 'n m'", num)
    n, m = header

    num, maxima = take("maximum degrees")
    if len(maxima) != 2:
        raise AlistParseError("expected 'max_col_degree max_row_degree'", num)
    max_col, max_row = maxima

    num, col_deg = take("column degrees")
    if len(col_deg) != n:
        raise AlistParseError(f"expected {n} column degrees, got {len(col_deg)}", num)
    if any(d < 0 or d > max_col for d in col_deg):
        raise AlistParseError("column degree outside [0, max_col_degree]", num)

    num, row_deg = take("row degrees")
    if len(row_deg) != m:
        raise AlistParseError(f"expected {m} row degrees, got {len(row_deg)}", num)
    if any(d < 0 or d > max_row for d in row_deg):
        raise AlistParseError("row degree outside [0, max_row_degree]", num)

    def read_lists(count: int, degrees: List[int], bound: int, what: str) -> List[List[int]]:
        out = []
        for i in range(count):
            num, values = take(f"{what} {i + 1}")
            deg = degrees[i]
            if len(values) < deg:
                raise AlistParseError(f"{what} {i + 1} lists {len(values)} indices, degree is {deg}", num)
            used, padding = values[:deg], values[deg:]
            if any(v != 0 for v in padding):
                raise AlistParseError(f"{what} {i + 1} has more indices than its degree {deg}", num)
            for v in used:
                if not 1 <= v <= bound:
                    raise AlistParseError(f"{what} {i + 1} has an index outside 1..{bound}", num)
            if len(set(used)) != len(used):
                raise AlistParseError(f"repeated index in {what} {i + 1}", num)
            out.append(sorted(v - 1 for v in used))
        return out

    cols = read_lists(n, col_deg, m, "column")
    rows = read_lists(m, row_deg, n, "row")

    try:
        return ParityCheckMatrix(m=m, n=n, rows=tuple(map(tuple, rows)), cols=tuple(map(tuple, cols)))
    except ConstructionError as exc:
        raise AlistParseError("row and column sections disagree") from exc


def emit_alist(h: ParityCheckMatrix) -> str:
    """Serialize a matrix to alist text with zero padding up to the max degrees."""
    col_deg = h.col_degrees()
    row_deg = h.row_degrees()
    max_col = max(col_deg, default=0)
    max_row = max(row_deg, default=0)

    def padded(indices: Sequence[int], width: int) -> str:
        vals = [i + 1 for i in indices] + [0] * (width - len(indices))
        return " ".join(str(v) for v in vals)

    out = [f"{h.n} {h.m}", f"{max_col} {max_row}",
           " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    out += [padded(col, max_col) for col in h.cols]
    out += [padded(row, max_row) for row in h.rows]
    return "\n".join(out) + "\n"


def load_generator_poly(text: str) -> Tuple[int, ...]:
    """One line of binary coefficients, lowest degree first ("1101" or "1 1 0 1")."""
    digits = "".join(text.split())
    if not digits or any(ch not in "01" for ch in digits):
        raise AlistParseError("generator polynomial must be a line of 0/1 coefficients", 1)
    coeffs = tuple(int(ch) for ch in digits.rstrip("0") or "0")
    if coeffs == (0,):
        raise AlistParseError("generator polynomial is zero", 1)
    return coeffs


def emit_generator_poly(coeffs: Sequence[int]) -> str:
    return "".join(str(int(c)) for c in coeffs) + "\n"


# ---------------------------------------------
# Code construction
# ---------------------------------------------

def build_regular_code(n: int, col_degree: int = 3, row_degree: int = 6, girth_min: int = 6,
                       seed: int = 1, max_attempts: int = 50) -> ParityCheckMatrix:
    """
    Build a (col_degree, row_degree)-regular matrix by greedy edge growth.

    Variables are connected one edge at a time to the least-loaded check that
    still has room, ties broken by the seeded generator. With girth_min=6 a
    check is rejected when it would close a 4-cycle, so any two columns share
    at most one row. A dead end restarts the placement (up to max_attempts).
    """
    if n <= 0 or col_degree <= 0 or row_degree <= 0:
        raise ConstructionError("block length and degrees must be positive")
    if girth_min not in (4, 6):
        raise ConstructionError(f"girth_min must be 4 or 6, got {girth_min}")
    if (n * col_degree) % row_degree:
        raise ConstructionError(
            f"n*col_degree = {n * col_degree} is not divisible by row_degree = {row_degree}")
    m = n * col_degree // row_degree
    if col_degree > m:
        raise ConstructionError(f"column degree {col_degree} exceeds the number of checks {m}")

    rng = np.random.default_rng(seed)
    for attempt in range(1, max_attempts + 1):
        placed = _grow_edges(n, m, col_degree, row_degree, girth_min, rng)
        if placed is not None:
            rows, cols = placed
            logger.debug("regular code %dx%d built on attempt %d", m, n, attempt)
            return ParityCheckMatrix(m=m, n=n,
                                     rows=tuple(tuple(sorted(r)) for r in rows),
                                     cols=tuple(tuple(sorted(c)) for c in cols))
    raise ConstructionError(
        f"no ({col_degree},{row_degree}) matrix of length {n} with girth >= {girth_min} "
        f"found in {max_attempts} attempts")


def _grow_edges(n, m, dv, dc, girth_min, rng):
    degree = np.zeros(m, dtype=np.int64)
    rows: List[List[int]] = [[] for _ in range(m)]
    cols: List[List[int]] = [[] for _ in range(n)]
    for var in range(n):
        for _ in range(dv):
            allowed = degree < dc
            allowed[cols[var]] = False
            if girth_min >= 6:
                for chk in cols[var]:
                    for other in rows[chk]:
                        allowed[cols[other]] = False
            candidates = np.flatnonzero(allowed)
            if candidates.size == 0:
                return None
            lightest = candidates[degree[candidates] == degree[candidates].min()]
            chk = int(rng.choice(lightest))
            degree[chk] += 1
            rows[chk].append(var)
            cols[var].append(chk)
    return rows, cols


def build_cyclic_eg_code(s: int) -> Tuple[ParityCheckMatrix, GeneratorForm]:
    """
    Cyclic Euclidean-geometry LDPC code of length 2^(2s) - 1.

    Points of EG(2, 2^s) other than the origin are the nonzero elements of
    GF(2^(2s)), indexed by their discrete log. The line {1 + t*alpha} with
    t ranging over the subfield GF(2^s) misses the origin; its incidence
    vector and all its cyclic shifts form the circulant H.

    Parameters:
    - s: field exponent in {2, 3, 4}, giving lengths 15, 63 and 255.

    Returns:
    - (H, generator form) with H.is_cyclic set and g(x) attached.

    Example:
    >>> h, g = build_cyclic_eg_code(3)
    >>> (h.n, g.k)
    (63, 37)
    """
    if s not in EG_FIELD_EXPONENTS:
        raise ConstructionError(f"field exponent must be one of {EG_FIELD_EXPONENTS}, got {s}")
    q = 2 ** s
    n = q * q - 1
    field_ = galois.GF(2 ** (2 * s))
    alpha = field_.primitive_element
    beta = alpha ** (q + 1)
    subfield = field_([0] + [int(beta ** i) for i in range(q - 1)])
    points = field_(1) + subfield * alpha
    first_row = np.zeros(n, dtype=np.uint8)
    first_row[np.asarray(points.log()).astype(np.int64)] = 1

    dense = np.stack([np.roll(first_row, shift) for shift in range(n)])
    g_poly = cyclic_generator_poly(dense)
    h = ParityCheckMatrix.from_dense(dense, is_cyclic=True, generator_poly=g_poly)
    generator = cyclic_generator_form(n, g_poly)
    logger.info("built cyclic EG code (%d,%d), row weight %d", n, generator.k, q)
    return h, generator


def cyclic_generator_poly(dense_h: np.ndarray) -> Tuple[int, ...]:
    """g(x) = gcd(x^n - 1, every codeword polynomial of the null space of H)."""
    n = dense_h.shape[1]
    basis = GF2(np.asarray(dense_h, dtype=np.uint8)).null_space()
    x_n_minus_1 = galois.Poly.Degrees([n, 0])
    polys = [galois.Poly(row, order="asc") for row in basis]
    g = reduce(galois.gcd, polys, x_n_minus_1)
    return tuple(int(c) for c in g.coefficients(order="asc"))


# ---------------------------------------------
# Encoding
# ---------------------------------------------

def gf2_rank(h: ParityCheckMatrix) -> int:
    return int(np.linalg.matrix_rank(GF2(h.dense())))


def systematic_generator_form(h: ParityCheckMatrix) -> GeneratorForm:
    """
    Gaussian elimination of H to reduced row echelon form over GF(2).

    Pivot columns carry parity, the remaining k = N - rank(H) columns carry
    the message. Redundant rows of H are tolerated.
    """
    reduced = GF2(h.dense()).row_reduce().view(np.ndarray).astype(np.uint8)
    nonzero = reduced[np.any(reduced, axis=1)]
    pivots = np.array([int(np.argmax(row)) for row in nonzero], dtype=np.int64)
    info = np.setdiff1d(np.arange(h.n), pivots)
    k = info.size
    if k == 0:
        raise ConstructionError("parity-check matrix has full column rank; code is trivial")
    generator = np.zeros((k, h.n), dtype=np.uint8)
    generator[:, info] = np.eye(k, dtype=np.uint8)
    generator[:, pivots] = nonzero[:, info].T
    return GeneratorForm(kind=GeneratorKind.SYSTEMATIC, n=h.n, k=k,
                         generator_matrix=generator, info_positions=info)


def cyclic_generator_form(n: int, g_coeffs: Sequence[int]) -> GeneratorForm:
    """
    Systematic cyclic encoder: c(x) = m(x) x^(n-k) + (m(x) x^(n-k) mod g(x)).

    The message occupies the high positions n-k .. n-1. The k x n generator
    matrix is tabulated once by dividing each unit message.
    """
    g = galois.Poly(list(g_coeffs), order="asc")
    if (galois.Poly.Degrees([n, 0]) % g) != galois.Poly.Zero():
        raise ConstructionError("generator polynomial does not divide x^n - 1")
    k = n - g.degree
    if k <= 0:
        raise ConstructionError(f"generator polynomial degree {g.degree} leaves no message bits")
    shift = galois.Poly.Degrees([n - k])
    generator = np.zeros((k, n), dtype=np.uint8)
    for i in range(k):
        unit = galois.Poly.Degrees([i]) * shift
        word = unit + (unit % g)
        generator[i] = word.coefficients(n, order="asc").view(np.ndarray).astype(np.uint8)
    return GeneratorForm(kind=GeneratorKind.CYCLIC, n=n, k=k, generator_matrix=generator,
                         info_positions=np.arange(n - k, n),
                         generator_poly=tuple(int(c) for c in g.coefficients(order="asc")))


def make_code(h: ParityCheckMatrix, generator_poly: Optional[Sequence[int]] = None) -> LdpcCode:
    """Attach an encoder: cyclic when a generator polynomial is known, else systematic."""
    poly = generator_poly if generator_poly is not None else h.generator_poly
    if poly is None:
        return LdpcCode(h=h, generator=systematic_generator_form(h))
    generator = cyclic_generator_form(h.n, poly)
    if np.any((h.dense().astype(np.int64) @ generator.generator_matrix.T) % 2):
        raise ConstructionError("generator polynomial codewords violate H")
    if not h.is_cyclic or h.generator_poly is None:
        h = ParityCheckMatrix(m=h.m, n=h.n, rows=h.rows, cols=h.cols, is_cyclic=True,
                              generator_poly=generator.generator_poly)
    return LdpcCode(h=h, generator=generator)


def encode(g: GeneratorForm, msg: np.ndarray) -> np.ndarray:
    """
    Encode k message bits into an N-bit codeword.

    Raises:
    - CodeLengthError: when the message length differs from k.
    """
    msg = np.asarray(msg, dtype=np.int64)
    if msg.shape[-1] != g.k:
        raise CodeLengthError(f"message length {msg.shape[-1]} != k = {g.k}")
    return ((msg @ g.generator_matrix) % 2).astype(np.uint8)


def syndrome(h: ParityCheckMatrix, c: np.ndarray) -> bool:
    """True iff every check of H sums to zero over GF(2)."""
    c = np.asarray(c)
    if c.shape[-1] != h.n:
        raise CodeLengthError(f"word length {c.shape[-1]} != n = {h.n}")
    sums = np.bincount(h.edge_checks, weights=c[h.edge_vars].astype(float), minlength=h.m)
    return not np.any(sums.astype(np.int64) % 2)


def cyclic_shift(c: np.ndarray, iota: int) -> np.ndarray:
    """out[k] = in[(k - iota) mod N]; negative iota shifts the other way."""
    return np.roll(np.asarray(c), int(iota), axis=-1)
