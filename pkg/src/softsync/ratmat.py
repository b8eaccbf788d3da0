"""Linear algebra over the field R(s).

Every operation first clears denominators row by row, turning the rational
matrix into a polynomial one with the same row space.  Elimination is then
fraction-free (Bareiss), so intermediate entries stay polynomial and each
output entry is canonicalized exactly once.

Zero tests are numeric: a freshly eliminated entry is compared, at a few random
points in ``[0.3, 3] ∪ j[0.3, 3]``, against the magnitude of the products that
formed it.
"""
from __future__ import annotations

import enum
import itertools
from typing import Iterable, Sequence

import numpy as np

from .errors import NotInImage, RankDeficient, Underdetermined, ZeroEntry
from .ratcore import ONE_POLY, ZERO_POLY, Polynomial, RationalFunction, as_rational

EPS_RANK = 1e-8
N_ZERO_TEST_POINTS = 5


def sample_points(rng: np.random.Generator | None = None, n: int = N_ZERO_TEST_POINTS) -> np.ndarray:
    """Random points drawn from ``[0.3, 3]`` on the real or the imaginary axis."""
    rng = np.random.default_rng(0x5EED) if rng is None else rng
    mag = rng.uniform(0.3, 3.0, size=n)
    on_imag = rng.random(n) < 0.5
    return np.where(on_imag, 1j * mag, mag + 0j)


class LeftInverseKind(enum.Enum):
    AVERAGED = "averaged"
    GRAM = "gram"

    @classmethod
    def parse(cls, name) -> "LeftInverseKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {"averaged": cls.AVERAGED, "gram": cls.GRAM, "grambased": cls.GRAM, "gram_based": cls.GRAM}
        if key not in aliases:
            raise ValueError(f"unknown left-inverse kind {name!r}")
        return aliases[key]


class RationalMatrix:
    """Dense row-major matrix of rational functions (immutable)."""

    __slots__ = ("entries",)

    def __init__(self, rows: Iterable[Iterable]):
        entries = tuple(tuple(as_rational(x) for x in row) for row in rows)
        if not entries or not entries[0]:
            raise ValueError("a rational matrix needs at least one row and one column")
        width = len(entries[0])
        if any(len(r) != width for r in entries):
            raise ValueError("ragged rows")
        object.__setattr__(self, "entries", entries)

    def __setattr__(self, name, value):
        raise AttributeError("RationalMatrix is immutable")

    @classmethod
    def column(cls, items: Sequence) -> "RationalMatrix":
        return cls([[x] for x in items])

    @classmethod
    def row(cls, items: Sequence) -> "RationalMatrix":
        return cls([list(items)])

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        return cls([[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "RationalMatrix":
        return cls([[0.0] * cols for _ in range(rows)])

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    def __getitem__(self, ij: tuple[int, int]) -> RationalFunction:
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other) -> bool:
        return isinstance(other, RationalMatrix) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def __repr__(self) -> str:
        body = "; ".join(", ".join(e.to_text() for e in row) for row in self.entries)
        return f"RationalMatrix([{body}])"

    @property
    def T(self) -> "RationalMatrix":
        return RationalMatrix(zip(*self.entries))

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = RationalFunction()
                for k in range(self.cols):
                    acc = acc + self.entries[i][k] * other.entries[k][j]
                row.append(acc)
            out.append(row)
        return RationalMatrix(out)

    def scale(self, f) -> "RationalMatrix":
        f = as_rational(f)
        return RationalMatrix([[f * e for e in row] for row in self.entries])

    def hstack(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.rows != other.rows:
            raise ValueError("row counts differ")
        return RationalMatrix([a + b for a, b in zip(self.entries, other.entries)])

    def take_rows(self, idx: Sequence[int]) -> "RationalMatrix":
        return RationalMatrix([self.entries[i] for i in idx])

    def evaluate(self, s0: complex) -> np.ndarray:
        s0 = complex(s0)
        return np.array([[e(s0) for e in row] for row in self.entries], dtype=complex)

    def is_zero(self) -> bool:
        return all(e.is_zero for row in self.entries for e in row)


# -- polynomial-matrix machinery ------------------------------------------------

def _clear_row(row: Sequence[RationalFunction]) -> tuple[list[Polynomial], Polynomial]:
    """Multiply a row by the product of its distinct denominators."""
    dens: list[Polynomial] = []
    for e in row:
        if not e.is_zero and e.den.degree > 0 and e.den not in dens:
            dens.append(e.den)
    mult = ONE_POLY
    for d in dens:
        mult = mult * d
    out = []
    for e in row:
        if e.is_zero:
            out.append(ZERO_POLY)
            continue
        p = e.num
        for d in dens:
            if d != e.den:
                p = p * d
        out.append(p)
    return out, mult


def _clear(M: RationalMatrix) -> tuple[list[list[Polynomial]], list[Polynomial]]:
    rows, mults = [], []
    for row in M.entries:
        r, m = _clear_row(row)
        rows.append(r)
        mults.append(m)
    return rows, mults


def _abs_eval(p: Polynomial, pts: np.ndarray) -> np.ndarray:
    return np.abs(p(pts))


def _cross(a: Polynomial, b: Polynomial, c: Polynomial, d: Polynomial, pts: np.ndarray) -> Polynomial:
    """``a*b - c*d`` snapped to zero when negligible against its terms."""
    ab, cd = a * b, c * d
    out = ab - cd
    if out.is_zero:
        return out
    ref = _abs_eval(ab, pts) + _abs_eval(cd, pts)
    if np.all(_abs_eval(out, pts) <= EPS_RANK * np.maximum(ref, 1e-300)):
        return ZERO_POLY
    return out


def _bareiss(rows: list[list[Polynomial]], pts: np.ndarray, ncols: int | None = None):
    """Fraction-free row echelon form.  Returns (rows, pivot_columns, row_order)."""
    A = [list(r) for r in rows]
    order = list(range(len(A)))
    nr = len(A)
    nc = len(A[0])
    ncols = nc if ncols is None else ncols
    pivots: list[int] = []
    prev = ONE_POLY
    r = 0
    for c in range(ncols):
        if r >= nr:
            break
        best, best_mag = None, -1.0
        for i in range(r, nr):
            e = A[i][c]
            if e.is_zero:
                continue
            v = _abs_eval(e, pts)
            mag = float(np.min(v / np.maximum(_abs_scale(e, pts), 1e-300)))
            if mag > best_mag:
                best, best_mag = i, mag
        if best is None:
            continue
        A[r], A[best] = A[best], A[r]
        order[r], order[best] = order[best], order[r]
        piv = A[r][c]
        for i in range(r + 1, nr):
            for j in range(c + 1, nc):
                num = _cross(piv, A[i][j], A[i][c], A[r][j], pts)
                A[i][j] = num if num.is_zero else num // prev
            A[i][c] = ZERO_POLY
        prev = piv
        pivots.append(c)
        r += 1
    return A, pivots, order


def _abs_scale(p: Polynomial, pts: np.ndarray) -> np.ndarray:
    mags = np.abs(pts)
    return sum(abs(c) * mags ** k for k, c in enumerate(p.coeffs))


def _det(N: list[list[Polynomial]]) -> Polynomial:
    n = len(N)
    if n == 1:
        return N[0][0]
    if n == 2:
        return N[0][0] * N[1][1] - N[0][1] * N[1][0]
    total = ZERO_POLY
    for j in range(n):
        if N[0][j].is_zero:
            continue
        minor = [row[:j] + row[j + 1:] for row in N[1:]]
        term = N[0][j] * _det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def _adjugate(N: list[list[Polynomial]]) -> list[list[Polynomial]]:
    n = len(N)
    if n == 1:
        return [[ONE_POLY]]
    if n == 2:
        return [[N[1][1], -N[0][1]], [-N[1][0], N[0][0]]]
    adj = [[ZERO_POLY] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(N) if k != i]
            cof = _det(minor)
            adj[j][i] = cof if (i + j) % 2 == 0 else -cof
    return adj


def _is_zero_poly(p: Polynomial, ref: np.ndarray, pts: np.ndarray) -> bool:
    return p.is_zero or bool(np.all(_abs_eval(p, pts) <= EPS_RANK * np.maximum(ref, 1e-300)))


def _square_inverse(N: list[list[Polynomial]], mults: Sequence[Polynomial],
                    pts: np.ndarray) -> list[list[RationalFunction]]:
    """Inverse of ``diag(mults)^-1 N`` as rational entries ``adj(N)_ab mults_b / det N``."""
    det = _det(N)
    n = len(N)
    if n == 1:
        ref = _abs_eval(N[0][0], pts)
    else:
        ref = sum(np.prod([_abs_eval(N[i][p[i]], pts) for i in range(n)], axis=0)
                  for p in itertools.permutations(range(n)))
    if _is_zero_poly(det, ref, pts):
        raise RankDeficient("singular square matrix")
    adj = _adjugate(N)
    return [[RationalFunction(adj[a][b] * mults[b], det) for b in range(n)] for a in range(n)]


# -- public operations -----------------------------------------------------------

def rank_rs(M: RationalMatrix, rng: np.random.Generator | None = None) -> int:
    """Rank over R(s)."""
    pts = sample_points(rng)
    rows, _ = _clear(M)
    return len(_bareiss(rows, pts)[1])


def image_membership(P: RationalMatrix, y: RationalMatrix, rng: np.random.Generator | None = None) -> bool:
    """True iff ``y`` lies in the R(s)-span of the columns of ``P``."""
    if y.rows != P.rows or y.cols != 1:
        raise ValueError("y must be a column with the same row count as P")
    if y.is_zero():
        return True
    pts = sample_points(rng)
    rows, _ = _clear(P.hstack(y))
    _, pivots, _ = _bareiss(rows, pts)
    return all(c < P.cols for c in pivots)


def inverse_rs(M: RationalMatrix, rng: np.random.Generator | None = None) -> RationalMatrix:
    if M.rows != M.cols:
        raise ValueError("matrix is not square")
    pts = sample_points(rng)
    N, mults = _clear(M)
    return RationalMatrix(_square_inverse(N, mults, pts))


def solve_exact(P: RationalMatrix, y: RationalMatrix, rng: np.random.Generator | None = None) -> RationalMatrix:
    """Solve ``P u = y`` over R(s) following the Rouché–Capelli cases.

    Raises :class:`NotInImage` when ``y`` is outside the column span and
    :class:`Underdetermined` (carrying the free-variable count) when the
    solution is not unique.
    """
    if y.rows != P.rows or y.cols != 1:
        raise ValueError("y must be a column with the same row count as P")
    pts = sample_points(rng)
    rows, _ = _clear(P.hstack(y))
    _, pivots, _ = _bareiss(rows, pts)
    rank_p = sum(1 for c in pivots if c < P.cols)
    if len(pivots) > rank_p:
        raise NotInImage("rank([P | y]) > rank(P)")
    if rank_p < P.cols:
        raise Underdetermined(P.cols - rank_p)
    # P has full column rank: pick a nonsingular square block of rows
    Prows, Pmults = _clear(P)
    _, _, order = _bareiss(Prows, pts)
    chosen = sorted(order[: P.cols])
    inv = _square_inverse([Prows[i] for i in chosen], [Pmults[i] for i in chosen], pts)
    ys = [y[i, 0] for i in chosen]
    u = []
    for a in range(P.cols):
        acc = RationalFunction()
        for b in range(P.cols):
            acc = acc + inv[a][b] * ys[b]
        u.append(acc)
    return RationalMatrix.column(u)


def left_inverse(P: RationalMatrix, kind: LeftInverseKind | str = LeftInverseKind.AVERAGED,
                 rng: np.random.Generator | None = None) -> RationalMatrix:
    """Left inverse ``P_dag`` with ``P_dag @ P = I``.

    ``AVERAGED`` averages the inverses of every nonsingular square row-subset
    of ``P``, each embedded at its own rows.  For a column ``P`` this reduces
    to ``P_dag[i] = 1 / (n * P[i])``.  ``GRAM`` is ``(P^T P)^-1 P^T`` with the
    plain transpose over R(s).
    """
    kind = LeftInverseKind.parse(kind)
    n, m = P.shape
    pts = sample_points(rng)

    if kind is LeftInverseKind.GRAM:
        # column-wise common denominators: P = N diag(d)^-1
        d, N = [], [[ZERO_POLY] * m for _ in range(n)]
        for j in range(m):
            col, dj = _clear_row([P[i, j] for i in range(n)])
            d.append(dj)
            for i in range(n):
                N[i][j] = col[i]
        G = [[ZERO_POLY] * m for _ in range(m)]
        for a in range(m):
            for b in range(m):
                acc = ZERO_POLY
                for i in range(n):
                    acc = acc + N[i][a] * N[i][b]
                G[a][b] = acc
        det = _det(G)
        ref = _det([[Polynomial(np.abs(g.coeffs)) for g in row] for row in G]) if m > 1 else G[0][0]
        ref_vals = _abs_scale(ref, pts)
        if _is_zero_poly(det, ref_vals, pts):
            raise RankDeficient("P^T P is singular; P lacks full column rank")
        adj = _adjugate(G)
        out = []
        for a in range(m):
            row = []
            for i in range(n):
                acc = ZERO_POLY
                for b in range(m):
                    acc = acc + adj[a][b] * N[i][b]
                row.append(RationalFunction(d[a] * acc, det))
            out.append(row)
        return RationalMatrix(out)

    if m == 1:
        if any(P[i, 0].is_zero for i in range(n)):
            raise ZeroEntry("averaged inverse needs every channel nonzero")
        return RationalMatrix.row([P[i, 0].reciprocal() / n for i in range(n)])

    rows, mults = _clear(P)
    terms = []
    for subset in itertools.combinations(range(n), m):
        try:
            inv = _square_inverse([rows[i] for i in subset], [mults[i] for i in subset], pts)
        except RankDeficient:
            continue
        terms.append((subset, inv))
    if not terms:
        raise RankDeficient("no nonsingular square row-subset; P lacks full column rank")
    k = len(terms)
    out = []
    for a in range(m):
        row = []
        for i in range(n):
            acc = RationalFunction()
            for subset, inv in terms:
                if i in subset:
                    acc = acc + inv[a][subset.index(i)]
            row.append(acc / k)
        out.append(row)
    return RationalMatrix(out)
