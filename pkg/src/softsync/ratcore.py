"""Polynomials over R and rational functions over R(s).

Coefficients are doubles stored lowest degree first.  Zero tests are relative:
a coefficient is treated as zero when it is at most ``EPS_COEFF`` times the
largest coefficient magnitude of the operands it was computed from.

Text form used by configs, manifests and trace headers::

    1*s^3 + 2.66*s^2 + 3.61*s        # polynomial
    (7.831)/(1*s^3 + 2.66*s^2 + 3.61*s)   # rational function

Floats are written with 17 significant digits, so ``parse(to_text(x)) == x``
holds exactly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    BothZero,
    DivisionByZeroPolynomial,
    DivisionByZeroRational,
    ParseError,
    PoleAtEvaluationPoint,
    ZeroPolynomial,
)

EPS_COEFF = 1e-9
EPS_STAB = 1e-7
EPS_EVAL = 1e-12

Number = Union[int, float]


def _trim_leading(coeffs: list[float], scale: float, eps: float = EPS_COEFF) -> list[float]:
    tol = eps * scale
    n = len(coeffs)
    while n > 0 and abs(coeffs[n - 1]) <= tol:
        n -= 1
    return coeffs[:n]


class Polynomial:
    """Real polynomial ``c[0] + c[1] s + ... + c[k] s^k``.

    The zero polynomial has ``coeffs == ()`` and degree -1.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Number] = ()):
        c = [float(x) for x in coeffs]
        if any(not math.isfinite(x) for x in c):
            raise ValueError("polynomial coefficients must be finite")
        n = len(c)
        while n > 0 and c[n - 1] == 0.0:
            n -= 1
        object.__setattr__(self, "coeffs", tuple(c[:n]))

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # -- constructors ---------------------------------------------------------
    @classmethod
    def constant(cls, c: Number) -> "Polynomial":
        return cls((c,))

    @classmethod
    def s(cls) -> "Polynomial":
        return cls((0.0, 1.0))

    @classmethod
    def from_roots(cls, roots: Sequence[complex], lead: float = 1.0) -> "Polynomial":
        """Real polynomial with the given roots; complex roots must come in conjugate pairs."""
        if len(roots) == 0:
            return cls((lead,))
        c = np.poly(np.asarray(roots, dtype=complex))
        if np.max(np.abs(c.imag)) > 1e-9 * max(1.0, np.max(np.abs(c.real))):
            raise ValueError("roots are not closed under conjugation")
        return cls(lead * c.real[::-1])

    # -- basic queries ---------------------------------------------------------
    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def lead(self) -> float:
        return self.coeffs[-1] if self.coeffs else 0.0

    @property
    def scale(self) -> float:
        return max((abs(c) for c in self.coeffs), default=0.0)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, k: int) -> float:
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return 0.0

    def __call__(self, s0):
        """Horner evaluation; accepts scalars or numpy arrays (real or complex)."""
        acc = 0.0 * s0
        for c in reversed(self.coeffs):
            acc = acc * s0 + c
        return acc

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other)
        return isinstance(other, Polynomial) and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return f"Polynomial({self.to_text()!r})"

    def allclose(self, other: "Polynomial", rtol: float = 1e-9) -> bool:
        n = max(len(self), len(other))
        a = np.array([self[k] for k in range(n)])
        b = np.array([other[k] for k in range(n)])
        scale = max(self.scale, other.scale, 1e-300)
        return bool(np.all(np.abs(a - b) <= rtol * scale))

    # -- arithmetic ------------------------------------------------------------
    def __neg__(self) -> "Polynomial":
        return Polynomial(-c for c in self.coeffs)

    def __add__(self, other) -> "Polynomial":
        other = as_polynomial(other)
        n = max(len(self), len(other))
        c = [self[k] + other[k] for k in range(n)]
        return Polynomial(_trim_leading(c, max(self.scale, other.scale)))

    __radd__ = __add__

    def __sub__(self, other) -> "Polynomial":
        return self + (-as_polynomial(other))

    def __rsub__(self, other) -> "Polynomial":
        return as_polynomial(other) - self

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial(c * float(other) for c in self.coeffs)
        other = as_polynomial(other)
        if self.is_zero or other.is_zero:
            return Polynomial()
        return Polynomial(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, k: Number) -> "Polynomial":
        return Polynomial(c / float(k) for c in self.coeffs)

    def __pow__(self, m: int) -> "Polynomial":
        if m < 0:
            raise ValueError("negative power")
        out = Polynomial((1.0,))
        for _ in range(m):
            out = out * self
        return out

    def __divmod__(self, other) -> tuple["Polynomial", "Polynomial"]:
        return poly_divmod(self, as_polynomial(other))

    def __floordiv__(self, other) -> "Polynomial":
        return poly_divmod(self, as_polynomial(other))[0]

    def __mod__(self, other) -> "Polynomial":
        return poly_divmod(self, as_polynomial(other))[1]

    def monic(self) -> "Polynomial":
        if self.is_zero:
            raise ZeroPolynomial("zero polynomial has no monic form")
        return self / self.lead

    def derivative(self) -> "Polynomial":
        return Polynomial(k * c for k, c in enumerate(self.coeffs) if k > 0)

    def roots(self) -> np.ndarray:
        """Roots from the eigenvalues of the companion matrix.

        Zero roots from vanishing low-order coefficients are returned exactly.
        """
        if self.is_zero:
            raise ZeroPolynomial("zero polynomial has no finite root set")
        c = list(self.coeffs)
        nz = 0
        while c and c[0] == 0.0:
            c.pop(0)
            nz += 1
        deg = len(c) - 1
        zeros = np.zeros(nz, dtype=complex)
        if deg <= 0:
            return zeros
        lead = c[-1]
        comp = np.zeros((deg, deg))
        comp[1:, :-1] = np.eye(deg - 1)
        comp[:, -1] = [-x / lead for x in c[:-1]]
        return np.concatenate([zeros, np.linalg.eigvals(comp).astype(complex)])

    # -- text ------------------------------------------------------------------
    def to_text(self) -> str:
        if self.is_zero:
            return "0"
        parts: list[str] = []
        for k in range(self.degree, -1, -1):
            c = self.coeffs[k]
            if c == 0.0:
                continue
            mag = format(abs(c), ".17g")
            term = mag if k == 0 else (f"{mag}*s" if k == 1 else f"{mag}*s^{k}")
            if not parts:
                parts.append(("-" if c < 0 else "") + term)
            else:
                parts.append((" - " if c < 0 else " + ") + term)
        return "".join(parts)

    @classmethod
    def parse(cls, text: str) -> "Polynomial":
        return parse_polynomial(text)


ZERO_POLY = Polynomial()
ONE_POLY = Polynomial((1.0,))


def as_polynomial(x) -> Polynomial:
    if isinstance(x, Polynomial):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Polynomial((float(x),))
    raise TypeError(f"cannot interpret {type(x).__name__} as a polynomial")


def poly_divmod(a: Polynomial, b: Polynomial) -> tuple[Polynomial, Polynomial]:
    """Euclidean division ``a = b q + r`` with ``deg r < deg b``."""
    if b.is_zero:
        raise DivisionByZeroPolynomial("division by the zero polynomial")
    if a.degree < b.degree:
        return Polynomial(), a
    db = b.degree
    lb = b.lead
    bc = b.coeffs
    r = list(a.coeffs)
    q = [0.0] * (a.degree - db + 1)
    for k in range(a.degree - db, -1, -1):
        coef = r[k + db] / lb
        q[k] = coef
        if coef != 0.0:
            for j in range(db):
                r[k + j] -= coef * bc[j]
        r[k + db] = 0.0
    qp = Polynomial(q)
    scale = max(a.scale, b.scale * qp.scale)
    return qp, Polynomial(_trim_leading(r[:db], scale))


def poly_gcd(a: Polynomial, b: Polynomial, eps: float = EPS_COEFF) -> Polynomial:
    """Monic greatest common divisor by the Euclidean algorithm.

    A remainder is declared zero once its coefficients fall below ``eps``
    relative to the current pair.  The candidate is accepted only if it divides
    both inputs with a relative residual below ``eps``; otherwise 1 is returned.
    """
    if a.is_zero and b.is_zero:
        raise BothZero("gcd(0, 0) is undefined")
    if b.is_zero:
        return a.monic()
    if a.is_zero:
        return b.monic()
    x, y = (a, b) if a.degree >= b.degree else (b, a)
    x, y = x.monic(), y.monic()
    while True:
        if y.degree == 0:
            return ONE_POLY
        _, r = poly_divmod(x, y)
        if r.is_zero or r.scale <= eps * max(x.scale, y.scale):
            g = y
            break
        x, y = y, r.monic()
    for p in (a, b):
        _, res = poly_divmod(p, g)
        if res.scale > eps * p.scale:
            return ONE_POLY
    return g


# -- stability -----------------------------------------------------------------

class Stability(enum.Enum):
    HURWITZ = "Hurwitz"
    MARGINAL = "MarginallyStable"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class StabilityClass:
    tag: Stability
    witness: float  # largest real part over all roots; -inf for constants


def classify_stability(p: Polynomial, eps_stab: float = EPS_STAB) -> StabilityClass:
    if p.is_zero:
        raise ZeroPolynomial("cannot classify the zero polynomial")
    roots = p.roots()
    witness = float(np.max(roots.real)) if roots.size else -math.inf
    if witness < -eps_stab:
        tag = Stability.HURWITZ
    elif abs(witness) <= eps_stab:
        tag = Stability.MARGINAL
    else:
        tag = Stability.UNSTABLE
    return StabilityClass(tag, witness)


def routh_table(p: Polynomial) -> list[list[float]]:
    """Routh array, highest-degree coefficient first.

    Stops early (returning the partial table) if a first-column entry vanishes.
    """
    if p.is_zero:
        raise ZeroPolynomial("empty Routh table")
    c = list(reversed(p.coeffs))
    if c[0] < 0:
        c = [-x for x in c]
    rows = [c[0::2], c[1::2]]
    width = len(rows[0])
    rows[1] = rows[1] + [0.0] * (width - len(rows[1]))
    for _ in range(p.degree - 1):
        prev, cur = rows[-2], rows[-1]
        if cur[0] == 0.0:
            break
        new = [(cur[0] * prev[j + 1] - prev[0] * cur[j + 1]) / cur[0] for j in range(width - 1)]
        rows.append(new + [0.0])
    return rows[: p.degree + 1]


def routh_hurwitz(p: Polynomial) -> bool:
    """Root-free Hurwitz test: True iff every root has negative real part."""
    if p.is_zero:
        raise ZeroPolynomial("cannot test the zero polynomial")
    if p.degree == 0:
        return True
    c = np.array(p.coeffs)
    if not (np.all(c > 0) or np.all(c < 0)):
        return False
    table = routh_table(p)
    if len(table) < p.degree + 1:
        return False
    first = [row[0] for row in table]
    return all(x > 0 for x in first)


# -- rational functions --------------------------------------------------------

# Fixed probe points for checking that a cancellation preserved the function.
_SAME_TOL = 1e-12
_PROBES = np.array([0.37 + 0.91j, -0.83 + 1.27j, 1.9 - 0.44j, 0.61j + 0.05, -1.4 - 2.1j])


def _same_function(n1: Polynomial, d1: Polynomial, n2: Polynomial, d2: Polynomial) -> bool:
    v1 = n1(_PROBES) / d1(_PROBES)
    v2 = n2(_PROBES) / d2(_PROBES)
    return bool(np.all(np.abs(v1 - v2) <= _SAME_TOL * np.maximum(np.abs(v1), 1e-300)))


def _canonical_parts(num: Polynomial, den: Polynomial) -> tuple[Polynomial, Polynomial, bool]:
    if num.is_zero:
        return ZERO_POLY, ONE_POLY, False
    g = poly_gcd(num, den)
    cancelled = g.degree > 0
    if cancelled:
        n2 = poly_divmod(num, g)[0]
        d2 = poly_divmod(den, g)[0]
        # floating gcd can invent factors at high degree; keep the cancellation
        # only if the function values survive it
        if _same_function(num, den, n2, d2):
            num, den = n2, d2
        else:
            cancelled = False
    lead = den.lead
    if lead != 1.0:
        num, den = num / lead, den / lead
    return num, den, cancelled


class RationalFunction:
    """Element of R(s) kept in canonical form: coprime parts, monic denominator.

    ``cancelled`` records whether canonicalization removed a common factor.
    """

    __slots__ = ("num", "den", "cancelled")

    def __init__(self, num=0.0, den=1.0, *, _trusted: bool = False):
        num, den = as_polynomial(num), as_polynomial(den)
        if den.is_zero:
            raise DivisionByZeroRational("denominator is the zero polynomial")
        cancelled = False
        if not _trusted:
            num, den, cancelled = _canonical_parts(num, den)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "cancelled", cancelled)

    def __setattr__(self, name, value):
        raise AttributeError("RationalFunction is immutable")

    @classmethod
    def from_canonical(cls, num: Polynomial, den: Polynomial) -> "RationalFunction":
        """Wrap parts already in canonical form without re-running the gcd."""
        return cls(num, den, _trusted=True)

    @classmethod
    def from_coeffs(cls, num: Sequence[Number], den: Sequence[Number]) -> "RationalFunction":
        return cls(Polynomial(num), Polynomial(den))

    # -- queries ---------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def relative_degree(self) -> int:
        if self.is_zero:
            return 0
        return self.den.degree - self.num.degree

    @property
    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    @property
    def is_strictly_proper(self) -> bool:
        return self.is_zero or self.relative_degree > 0

    def poles(self) -> np.ndarray:
        return self.den.roots()

    def zeros(self) -> np.ndarray:
        return self.num.roots() if not self.is_zero else np.zeros(0, dtype=complex)

    def __call__(self, s0):
        return self.num(s0) / self.den(s0)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, float, Polynomial)):
            other = RationalFunction(other)
        return isinstance(other, RationalFunction) and self.num == other.num and self.den == other.den

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def __repr__(self) -> str:
        return f"RationalFunction({self.to_text()!r})"

    # -- arithmetic ------------------------------------------------------------
    def __neg__(self) -> "RationalFunction":
        return RationalFunction.from_canonical(-self.num, self.den)

    def __add__(self, other) -> "RationalFunction":
        return rf_arith(self, as_rational(other), "add")

    __radd__ = __add__

    def __sub__(self, other) -> "RationalFunction":
        return rf_arith(self, as_rational(other), "sub")

    def __rsub__(self, other) -> "RationalFunction":
        return rf_arith(as_rational(other), self, "sub")

    def __mul__(self, other) -> "RationalFunction":
        return rf_arith(self, as_rational(other), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other) -> "RationalFunction":
        return rf_arith(self, as_rational(other), "div")

    def __rtruediv__(self, other) -> "RationalFunction":
        return rf_arith(as_rational(other), self, "div")

    def __pow__(self, m: int) -> "RationalFunction":
        if m < 0:
            return (1 / self) ** (-m)
        return RationalFunction(self.num ** m, self.den ** m)

    def reciprocal(self) -> "RationalFunction":
        if self.is_zero:
            raise DivisionByZeroRational("reciprocal of the zero function")
        return RationalFunction(self.den, self.num)

    # -- text ------------------------------------------------------------------
    def to_text(self) -> str:
        return f"({self.num.to_text()})/({self.den.to_text()})"

    @classmethod
    def parse(cls, text: str) -> "RationalFunction":
        return parse_rational(text)


def as_rational(x) -> RationalFunction:
    if isinstance(x, RationalFunction):
        return x
    return RationalFunction(as_polynomial(x))


def canonicalize(f: RationalFunction) -> RationalFunction:
    return RationalFunction(f.num, f.den)


def rf_arith(a: RationalFunction, b: RationalFunction, op: str) -> RationalFunction:
    """``op`` is one of ``add``, ``sub``, ``mul``, ``div``; result is canonical."""
    if op == "sub":
        b = -b
        op = "add"
    if op == "add":
        if a.is_zero:
            return b
        if b.is_zero:
            return a
        if a.den == b.den:
            return RationalFunction(a.num + b.num, a.den)
        return RationalFunction(a.num * b.den + b.num * a.den, a.den * b.den)
    if op == "div":
        if b.is_zero:
            raise DivisionByZeroRational("division by the zero rational function")
        b = RationalFunction.from_canonical(b.den / b.num.lead, b.num / b.num.lead)
        op = "mul"
    if op == "mul":
        if a.is_zero or b.is_zero:
            return RationalFunction()
        return RationalFunction(a.num * b.num, a.den * b.den)
    raise ValueError(f"unknown operation {op!r}")


def rf_eval(f: RationalFunction, s0: complex) -> complex:
    s0 = complex(s0)
    d = f.den(s0)
    scale = sum(abs(c) * abs(s0) ** k for k, c in enumerate(f.den.coeffs))
    if abs(d) <= EPS_EVAL * scale:
        raise PoleAtEvaluationPoint(f"pole at s = {s0}")
    return f.num(s0) / d


def freqresp(f: RationalFunction, omega) -> np.ndarray:
    """Complex response on the imaginary axis, vectorized over ``omega``."""
    jw = 1j * np.asarray(omega, dtype=float)
    return f.num(jw) / f.den(jw)


# -- parsing -------------------------------------------------------------------

def _read_number(text: str, i: int) -> tuple[float | None, int]:
    j = i
    n = len(text)
    while j < n and (text[j].isdigit() or text[j] == "."):
        j += 1
    if j == i:
        if text.startswith("inf", i) or text.startswith("nan", i):
            raise ParseError("non-finite coefficient")
        return None, i
    if j < n and text[j] in "eE":
        k = j + 1
        if k < n and text[k] in "+-":
            k += 1
        m = k
        while m < n and text[m].isdigit():
            m += 1
        if m > k:
            j = m
    try:
        return float(text[i:j]), j
    except ValueError as exc:
        raise ParseError(f"bad number {text[i:j]!r}") from exc


def parse_polynomial(text: str) -> Polynomial:
    src = "".join(text.split())
    if not src:
        raise ParseError("empty polynomial text")
    coeffs: dict[int, float] = {}
    i, n, first = 0, len(src), True
    while i < n:
        sign = 1.0
        if src[i] in "+-":
            sign = -1.0 if src[i] == "-" else 1.0
            i += 1
        elif not first:
            raise ParseError(f"expected '+' or '-' at position {i} in {text!r}")
        value, i = _read_number(src, i)
        power = 0
        if i < n and src[i] == "*":
            i += 1
            if i >= n or src[i] != "s":
                raise ParseError(f"expected 's' after '*' in {text!r}")
        if i < n and src[i] == "s":
            i += 1
            power = 1
            if i < n and src[i] == "^":
                i += 1
                j = i
                while j < n and src[j].isdigit():
                    j += 1
                if j == i:
                    raise ParseError(f"missing exponent in {text!r}")
                power = int(src[i:j])
                i = j
        elif value is None:
            raise ParseError(f"empty term in {text!r}")
        coef = sign * (1.0 if value is None else value)
        coeffs[power] = coeffs.get(power, 0.0) + coef
        first = False
    deg = max(coeffs) if coeffs else 0
    return Polynomial(coeffs.get(k, 0.0) for k in range(deg + 1))


def parse_rational(text: str, verbatim: bool = False) -> RationalFunction:
    """Parse ``(num)/(den)`` or a bare polynomial.

    With ``verbatim=True`` the parts are kept as written, which makes
    ``to_text`` followed by ``parse_rational`` bit-exact.
    """
    make = RationalFunction.from_canonical if verbatim else RationalFunction
    src = text.strip()
    if src.startswith("(") and src.endswith(")") and ")/(" in src:
        num_txt, den_txt = src[1:-1].split(")/(", 1)
        num, den = parse_polynomial(num_txt), parse_polynomial(den_txt)
        if den.is_zero:
            raise ParseError("zero denominator")
        return make(num, den)
    return make(parse_polynomial(src), Polynomial((1.0,)))
