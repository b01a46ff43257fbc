"""Sparse multivariate polynomials over float coefficients.

Monomials are exponent tuples; the canonical term order everywhere is
graded lexicographic (total degree first, then x1 before x2, ...), which
keeps Gram indexing and all serialized output deterministic.
"""
from __future__ import annotations

import itertools
import math
import re

import numpy as np

from . import _kernels

Monomial = tuple  # exponent tuple, one entry per variable

#: coefficients below this are dropped at *display* time only
DISPLAY_CLEANUP = 1e-4

_COEFF_EPS = 0.0  # stored terms are exact; zeros are removed eagerly


def grlex_key(mono: Monomial):
    """Sort key for graded lexicographic order (x1 largest)."""
    return (sum(mono), tuple(-e for e in mono))


class Polynomial:
    """Immutable sparse polynomial in n variables."""

    __slots__ = ("dim", "terms", "_arrays")

    def __init__(self, dim: int, terms: dict | None = None):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        clean = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != dim:
                raise ValueError(f"monomial {mono} has wrong dimension (expected {dim})")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in {mono}")
            c = float(c)
            if c != 0.0:
                clean[mono] = clean.get(mono, 0.0) + c
                if clean[mono] == 0.0:
                    del clean[mono]
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_arrays", None)

    def __setattr__(self, *a):
        raise AttributeError("Polynomial is immutable")

    # -- constructors -------------------------------------------------
    @staticmethod
    def zero(dim: int) -> "Polynomial":
        return Polynomial(dim, {})

    @staticmethod
    def constant(dim: int, c: float) -> "Polynomial":
        return Polynomial(dim, {(0,) * dim: c})

    @staticmethod
    def variable(dim: int, k: int) -> "Polynomial":
        e = [0] * dim
        e[k] = 1
        return Polynomial(dim, {tuple(e): 1.0})

    @staticmethod
    def monomial(dim: int, mono: Monomial, c: float = 1.0) -> "Polynomial":
        return Polynomial(dim, {tuple(mono): c})

    # -- basic queries -------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; zero polynomial has degree 0 by convention."""
        if not self.terms:
            return 0
        return max(sum(m) for m in self.terms)

    def min_degree(self) -> int:
        if not self.terms:
            return 0
        return min(sum(m) for m in self.terms)

    def coefficient(self, mono: Monomial) -> float:
        return self.terms.get(tuple(mono), 0.0)

    def support(self):
        return sorted(self.terms, key=grlex_key)

    def coeff_norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.terms.values()))

    # -- arithmetic ----------------------------------------------------
    def _check(self, other: "Polynomial"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.dim, other)
        self._check(other)
        t = dict(self.terms)
        for m, c in other.terms.items():
            t[m] = t.get(m, 0.0) + c
        return Polynomial(self.dim, t)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.dim, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.dim, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial(self.dim, {m: c * other for m, c in self.terms.items()})
        self._check(other)
        t = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                t[m] = t.get(m, 0.0) + c1 * c2
        return Polynomial(self.dim, t)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.dim, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        return (
            isinstance(other, Polynomial)
            and self.dim == other.dim
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    # -- evaluation ----------------------------------------------------
    def _packed(self):
        arrs = object.__getattribute__(self, "_arrays")
        if arrs is None:
            monos = self.support()
            coeffs = np.array([self.terms[m] for m in monos], dtype=np.float64)
            exps = np.array(monos, dtype=np.int64).reshape(len(monos), self.dim)
            arrs = (coeffs, exps)
            object.__setattr__(self, "_arrays", arrs)
        return arrs

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dim},)")
        if not self.terms:
            return 0.0
        coeffs, exps = self._packed()
        return float(_kernels.eval_poly(coeffs, exps, x))

    def eval_many(self, X) -> np.ndarray:
        """Evaluate at every row of X (m, n)."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"points have shape {X.shape}, expected (m, {self.dim})")
        if not self.terms:
            return np.zeros(X.shape[0])
        coeffs, exps = self._packed()
        return _kernels.eval_poly_batch(coeffs, exps, X)

    # -- calculus ------------------------------------------------------
    def diff(self, k: int) -> "Polynomial":
        t = {}
        for m, c in self.terms.items():
            if m[k] == 0:
                continue
            dm = list(m)
            dm[k] -= 1
            dm = tuple(dm)
            t[dm] = t.get(dm, 0.0) + c * m[k]
        return Polynomial(self.dim, t)

    def gradient(self) -> "PolyVector":
        return PolyVector([self.diff(k) for k in range(self.dim)])

    # -- display -------------------------------------------------------
    def cleanup(self, threshold: float = DISPLAY_CLEANUP) -> "Polynomial":
        """Drop terms with |coeff| < threshold (reporting only)."""
        return Polynomial(self.dim, {m: c for m, c in self.terms.items() if abs(c) >= threshold})

    def to_string(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mono in self.support():
            c = self.terms[mono]
            factors = []
            for k, e in enumerate(mono):
                if e == 1:
                    factors.append(f"x{k + 1}")
                elif e > 1:
                    factors.append(f"x{k + 1}^{e}")
            if factors:
                body = "*".join(factors)
                mag = f"{abs(c):.12g}*{body}" if abs(c) != 1.0 else body
            else:
                mag = f"{abs(c):.12g}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, mag))
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, mag in parts[1:]:
            out += f" {sign} {mag}"
        return out

    def __repr__(self):
        return f"Polynomial({self.dim}, {self.to_string()!r})"

    @staticmethod
    def parse(text: str, dim: int) -> "Polynomial":
        return parse_polynomial(text, dim)


class PolyVector:
    """Ordered list of polynomials sharing one dimension (a vector field)."""

    __slots__ = ("components", "dim")

    def __init__(self, components):
        components = list(components)
        if not components:
            raise ValueError("empty vector")
        dim = components[0].dim
        if any(p.dim != dim for p in components):
            raise ValueError("components have mixed dimensions")
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "dim", dim)

    def __setattr__(self, *a):
        raise AttributeError("PolyVector is immutable")

    def __len__(self):
        return len(self.components)

    def __getitem__(self, k):
        return self.components[k]

    def __iter__(self):
        return iter(self.components)

    def __eq__(self, other):
        return isinstance(other, PolyVector) and self.components == other.components

    def __call__(self, x) -> np.ndarray:
        return np.array([p(x) for p in self.components])

    def __add__(self, other):
        return PolyVector([a + b for a, b in zip(self.components, other.components)])

    def __mul__(self, c: float):
        return PolyVector([p * c for p in self.components])

    __rmul__ = __mul__

    def degree(self) -> int:
        return max(p.degree() for p in self.components)

    def to_strings(self):
        return [p.to_string() for p in self.components]


# -- core operations -----------------------------------------------------

def lie_derivative(V: Polynomial, F: PolyVector) -> Polynomial:
    """Directional derivative <grad V, F> as a polynomial."""
    if V.dim != F.dim:
        raise ValueError(f"dimension mismatch: {V.dim} vs {F.dim}")
    out = Polynomial.zero(V.dim)
    for k in range(V.dim):
        out = out + V.diff(k) * F[k]
    return out


def monomial_basis(n: int, d: int, include_constant: bool = True) -> list:
    """All monomials of total degree <= d in graded-lex order."""
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    monos = []
    for total in range(0 if include_constant else 1, d + 1):
        for combo in itertools.combinations_with_replacement(range(n), total):
            e = [0] * n
            for k in combo:
                e[k] += 1
            monos.append(tuple(e))
    return sorted(set(monos), key=grlex_key)


def coefficients_equal(p: Polynomial, q: Polynomial) -> dict:
    """Per-monomial coefficient differences p - q; empty iff p == q."""
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    out = {}
    for m in set(p.terms) | set(q.terms):
        r = p.terms.get(m, 0.0) - q.terms.get(m, 0.0)
        if r != 0.0:
            out[m] = r
    return out


# -- text grammar ---------------------------------------------------------
# sum of terms:  coeff * x1^a * x2^b ...   signs between terms, '*' optional
# between coefficient and variables, '^1' may be omitted.

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<sign>[+-])
      | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
      | (?P<var>x\d+)
      | (?P<pow>\^\d+)
      | (?P<mul>\*)
    )\s*""",
    re.VERBOSE,
)


class PolynomialParseError(ValueError):
    pass


def parse_polynomial(text: str, dim: int) -> Polynomial:
    """Parse the toolkit polynomial grammar into a Polynomial."""
    pos = 0
    n = len(text)
    tokens = []
    while pos < n:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PolynomialParseError(f"unexpected character at position {pos}: {text[pos:pos+10]!r}")
        pos = m.end()
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
    if not tokens:
        raise PolynomialParseError("empty polynomial")

    terms = {}
    i = 0
    while i < len(tokens):
        sign = 1.0
        while i < len(tokens) and tokens[i][0] == "sign":
            if tokens[i][1] == "-":
                sign = -sign
            i += 1
        if i >= len(tokens):
            raise PolynomialParseError("dangling sign")
        coeff = sign
        expo = [0] * dim
        saw_factor = False
        expect_factor = True
        while i < len(tokens):
            kind, val = tokens[i]
            if kind == "sign":
                break
            if kind == "mul":
                expect_factor = True
                i += 1
                continue
            if not expect_factor and kind in ("num",):
                raise PolynomialParseError(f"missing operator before {val!r}")
            if kind == "num":
                coeff *= float(val)
                saw_factor = True
                expect_factor = False
            elif kind == "var":
                k = int(val[1:]) - 1
                if not (0 <= k < dim):
                    raise PolynomialParseError(f"variable {val} out of range for dimension {dim}")
                e = 1
                if i + 1 < len(tokens) and tokens[i + 1][0] == "pow":
                    e = int(tokens[i + 1][1][1:])
                    i += 1
                expo[k] += e
                saw_factor = True
                expect_factor = False
            elif kind == "pow":
                raise PolynomialParseError("exponent without variable")
            i += 1
        if not saw_factor:
            raise PolynomialParseError("empty term")
        mono = tuple(expo)
        terms[mono] = terms.get(mono, 0.0) + coeff
    return Polynomial(dim, terms)


def parse_vector(texts, dim: int) -> PolyVector:
    return PolyVector([parse_polynomial(t, dim) for t in texts])
