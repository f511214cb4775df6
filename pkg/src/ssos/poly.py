"""Sparse multivariate polynomials over the joint vector z = [x_1..x_n, w_1..w_d].

Variables are positional: the first ``n_x`` slots are decision variables and
the remaining ``n_w`` slots are noise parameters.  A polynomial is an
immutable map from exponent tuples to float coefficients.
"""
from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError

#: Coefficients with magnitude below this are dropped after arithmetic.
ZERO_TOL = 1e-14

MultiIndex = tuple


def grlex_key(alpha: Sequence[int]):
    """Sort key for graded lexicographic order (degree first, then x_1 > x_2 > ...)."""
    return (sum(alpha), tuple(-a for a in alpha))


def total_degree(alpha: Sequence[int]) -> int:
    return sum(alpha)


def body_order(alpha: Sequence[int]) -> int:
    """Number of variables with a non-zero exponent."""
    return sum(1 for a in alpha if a)


def max_degree(alpha: Sequence[int]) -> int:
    return max(alpha, default=0)


def _canonical(terms: Mapping[tuple, float], nvars: int) -> dict:
    out = {}
    for alpha, c in terms.items():
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != nvars:
            raise DimensionError(f"multi-index {alpha} has length {len(alpha)}, expected {nvars}")
        if any(a < 0 for a in alpha):
            raise DimensionError(f"negative exponent in {alpha}")
        c = float(c)
        if abs(c) >= ZERO_TOL:
            out[alpha] = c
    return out


class Polynomial:
    """Immutable sparse polynomial in ``n_x`` decision and ``n_w`` noise variables.

    Parameters
    ----------
    n_x, n_w : int
        Variable counts.  Exponent tuples have length ``n_x + n_w``.
    terms : mapping, optional
        Multi-index -> coefficient.  Entries with ``|c| < ZERO_TOL`` are dropped.
    """

    __slots__ = ("n_x", "n_w", "_terms", "_arrays")

    def __init__(self, n_x: int, n_w: int = 0, terms: Mapping[tuple, float] | None = None):
        if n_x < 0 or n_w < 0:
            raise DimensionError("variable counts must be non-negative")
        self.n_x = int(n_x)
        self.n_w = int(n_w)
        self._terms = _canonical(terms or {}, self.n_x + self.n_w)
        self._arrays = None

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, value: float, n_x: int, n_w: int = 0) -> "Polynomial":
        return cls(n_x, n_w, {(0,) * (n_x + n_w): value})

    @classmethod
    def variable(cls, index: int, n_x: int, n_w: int = 0) -> "Polynomial":
        """The monomial z_index (x-block first, then w-block)."""
        n = n_x + n_w
        if not 0 <= index < n:
            raise DimensionError(f"variable index {index} out of range for {n} variables")
        alpha = [0] * n
        alpha[index] = 1
        return cls(n_x, n_w, {tuple(alpha): 1.0})

    @classmethod
    def variables(cls, n_x: int, n_w: int = 0):
        """Return ``(xs, ws)`` lists of the degree-1 monomials."""
        xs = [cls.variable(i, n_x, n_w) for i in range(n_x)]
        ws = [cls.variable(n_x + k, n_x, n_w) for k in range(n_w)]
        return xs, ws

    # -- basic properties ---------------------------------------------
    @property
    def nvars(self) -> int:
        return self.n_x + self.n_w

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        """Terms in graded lexicographic order."""
        return sorted(self._terms.items(), key=lambda kv: grlex_key(kv[0]))

    def coefficient(self, alpha: Sequence[int]) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0 by convention."""
        return max((sum(a) for a in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def depends_on_x(self) -> bool:
        return any(any(a[: self.n_x]) for a in self._terms)

    def __len__(self):
        return len(self._terms)

    def __repr__(self):
        body = " + ".join(f"{c:g}*z^{a}" for a, c in self.items()) or "0"
        return f"Polynomial(n_x={self.n_x}, n_w={self.n_w}: {body})"

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return (self.n_x, self.n_w) == (other.n_x, other.n_w) and self._terms == other._terms

    def __hash__(self):
        return hash((self.n_x, self.n_w, frozenset(self._terms.items())))

    # -- arithmetic ----------------------------------------------------
    def _check_compatible(self, other: "Polynomial"):
        if (self.n_x, self.n_w) != (other.n_x, other.n_w):
            raise DimensionError(
                f"variable counts differ: ({self.n_x},{self.n_w}) vs ({other.n_x},{other.n_w})"
            )

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check_compatible(other)
            return other
        if np.isscalar(other):
            return Polynomial.constant(float(other), self.n_x, self.n_w)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for a, c in other._terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return Polynomial(self.n_x, self.n_w, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n_x, self.n_w, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return Polynomial(self.n_x, self.n_w, {a: c * float(other) for a, c in self._terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        return multiply(self, other)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = Polynomial.constant(1.0, self.n_x, self.n_w)
        for _ in range(int(k)):
            out = out * self
        return out

    # -- evaluation ----------------------------------------------------
    def _exponent_arrays(self):
        if self._arrays is None:
            if self._terms:
                alphas = np.array(list(self._terms.keys()), dtype=np.int64)
                coeffs = np.array(list(self._terms.values()))
            else:
                alphas = np.zeros((0, self.nvars), dtype=np.int64)
                coeffs = np.zeros(0)
            self._arrays = (alphas, coeffs)
        return self._arrays

    def __call__(self, point):
        return evaluate(self, point)

    def evaluate_many(self, points) -> np.ndarray:
        """Evaluate at each row of a ``(k, n_x + n_w)`` array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.nvars:
            raise DimensionError(f"points have {pts.shape[1]} columns, expected {self.nvars}")
        alphas, coeffs = self._exponent_arrays()
        if len(coeffs) == 0:
            return np.zeros(len(pts))
        mons = np.prod(pts[:, None, :] ** alphas[None, :, :], axis=2)
        return mons @ coeffs

    # -- restructuring -------------------------------------------------
    def fix_noise(self, omega) -> "Polynomial":
        """Substitute w = omega and return a polynomial in x alone (``n_w = 0``)."""
        omega = np.asarray(omega, dtype=float).reshape(-1)
        if len(omega) != self.n_w:
            raise DimensionError(f"expected {self.n_w} noise values, got {len(omega)}")
        terms: dict = {}
        for a, c in self._terms.items():
            xa = a[: self.n_x]
            val = c * float(np.prod(omega ** np.array(a[self.n_x :], dtype=float)))
            terms[xa] = terms.get(xa, 0.0) + val
        return Polynomial(self.n_x, 0, terms)

    def substitute(self, values: Mapping[int, float]) -> "Polynomial":
        """Set ``z_k = values[k]`` while keeping the variable layout (exponent k becomes 0)."""
        for k in values:
            if not 0 <= k < self.nvars:
                raise DimensionError(f"variable index {k} out of range for {self.nvars} variables")
        terms: dict = {}
        for a, c in self._terms.items():
            b = list(a)
            for k, v in values.items():
                if b[k]:
                    c *= float(v) ** b[k]
                    b[k] = 0
            b = tuple(b)
            terms[b] = terms.get(b, 0.0) + c
        return Polynomial(self.n_x, self.n_w, terms)

    def restrict_terms(self, keep) -> tuple["Polynomial", "Polynomial"]:
        """Split into ``(kept, dropped)`` according to predicate ``keep(alpha)``."""
        kept, dropped = {}, {}
        for a, c in self._terms.items():
            (kept if keep(a) else dropped)[a] = c
        return Polynomial(self.n_x, self.n_w, kept), Polynomial(self.n_x, self.n_w, dropped)

    # -- text serialization --------------------------------------------
    def to_text(self) -> str:
        """Header ``n_x n_w`` then one ``coeff e1 ... en`` line per term, grlex order."""
        lines = [f"{self.n_x} {self.n_w}"]
        for a, c in self.items():
            lines.append(" ".join([format(c, ".17g"), *map(str, a)]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Polynomial":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or len(rows[0]) != 2:
            raise DimensionError("missing 'n_x n_w' header line")
        n_x, n_w = int(rows[0][0]), int(rows[0][1])
        terms: dict = {}
        for r in rows[1:]:
            if len(r) != 1 + n_x + n_w:
                raise DimensionError(f"term line {' '.join(r)!r} has wrong length")
            a = tuple(int(e) for e in r[1:])
            terms[a] = terms.get(a, 0.0) + float(r[0])
        return cls(n_x, n_w, terms)


def multiply(p: Polynomial, q: Polynomial) -> Polynomial:
    """Product of two polynomials (convolution of their term maps)."""
    p._check_compatible(q)
    terms: dict = {}
    for a, ca in p._terms.items():
        for b, cb in q._terms.items():
            k = tuple(x + y for x, y in zip(a, b))
            terms[k] = terms.get(k, 0.0) + ca * cb
    return Polynomial(p.n_x, p.n_w, terms)


def differentiate(p: Polynomial, var_index: int) -> Polynomial:
    """Partial derivative with respect to z_var_index."""
    if not 0 <= var_index < p.nvars:
        raise DimensionError(f"variable index {var_index} out of range for {p.nvars} variables")
    terms: dict = {}
    for a, c in p._terms.items():
        e = a[var_index]
        if e == 0:
            continue
        b = list(a)
        b[var_index] = e - 1
        b = tuple(b)
        terms[b] = terms.get(b, 0.0) + c * e
    return Polynomial(p.n_x, p.n_w, terms)


def evaluate(p: Polynomial, point) -> float:
    """Evaluate ``sum_alpha c_alpha z^alpha`` at a single point."""
    z = np.asarray(point, dtype=float).reshape(-1)
    if len(z) != p.nvars:
        raise DimensionError(f"point has length {len(z)}, expected {p.nvars}")
    alphas, coeffs = p._exponent_arrays()
    if len(coeffs) == 0:
        return 0.0
    return float(np.prod(z[None, :] ** alphas, axis=1) @ coeffs)


def gradient(p: Polynomial, indices: Iterable[int] | None = None) -> list:
    """Partial derivatives for the given variable indices (default: the x-block)."""
    if indices is None:
        indices = range(p.n_x)
    return [differentiate(p, i) for i in indices]
