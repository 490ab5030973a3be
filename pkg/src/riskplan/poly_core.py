"""Sparse polynomials in (x, y, w) and (x, y), restriction to segments, and
Sturm-sequence root counting for univariate nonnegativity checks.

Everything here is double precision. Coefficients whose magnitude falls below
``DEAD_COEFF_REL`` times the largest coefficient of the same polynomial are
dropped whenever a polynomial is built, so two polynomials that differ only by
round-off compare equal after canonicalization.
"""

from __future__ import annotations

from functools import cached_property
from math import comb
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

DEAD_COEFF_REL = 1e-12
DEFAULT_EPS = 1e-9

# Euclid steps whose normalized remainder falls under this (times 1 + |quotient|)
# are treated as exact zero; a computed gcd is divided out only if it leaves a
# residual below the second threshold.
_REM_ZERO_TOL = 1e-10
_GCD_CHECK_TOL = 1e-8


class DegeneratePolynomialError(ValueError):
    pass


def _canonical(items: Iterable[tuple[tuple[int, ...], float]], nvars: int) -> dict:
    acc: dict[tuple[int, ...], float] = {}
    for mono, c in items:
        mono = tuple(int(e) for e in mono)
        if len(mono) != nvars:
            raise ValueError(f"expected {nvars} exponents, got {mono}")
        if any(e < 0 for e in mono):
            raise ValueError(f"negative exponent in {mono}")
        acc[mono] = acc.get(mono, 0.0) + float(c)
    if not acc:
        return {}
    cmax = max(abs(c) for c in acc.values())
    cut = DEAD_COEFF_REL * cmax
    return {m: c for m, c in sorted(acc.items()) if abs(c) > cut and c != 0.0}


class _SparsePoly:
    nvars = 0
    var_names: tuple[str, ...] = ()

    __slots__ = ("_terms", "__dict__")

    def __init__(self, terms: Mapping[tuple[int, ...], float] | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        object.__setattr__(self, "_terms", MappingProxyType(_canonical(items, self.nvars)))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def __reduce__(self):
        return (type(self), (dict(self._terms),))

    @property
    def terms(self) -> Mapping[tuple[int, ...], float]:
        return self._terms

    @classmethod
    def constant(cls, c: float):
        return cls({(0,) * cls.nvars: c})

    @classmethod
    def var(cls, name: str, power: int = 1, coeff: float = 1.0):
        idx = cls.var_names.index(name)
        mono = [0] * cls.nvars
        mono[idx] = power
        return cls({tuple(mono): coeff})

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((sum(m) for m in self._terms), default=0)

    def coeff(self, *mono: int) -> float:
        return self._terms.get(tuple(mono), 0.0)

    def _coerce(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return type(self).constant(float(other))
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        return other

    def __add__(self, other):
        other = self._coerce(other)
        return type(self)(list(self._terms.items()) + list(other._terms.items()))

    __radd__ = __add__

    def __neg__(self):
        return type(self)({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return type(self)({m: float(other) * c for m, c in self._terms.items()})
        other = self._coerce(other)
        out = []
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                out.append((tuple(a + b for a, b in zip(m1, m2)), c1 * c2))
        return type(self)(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        result = type(self).constant(1.0)
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other):
        return type(other) is type(self) and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash((type(self).__name__, tuple(self._terms.items())))

    def almost_equal(self, other, tol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coeff(*k) - other.coeff(*k)) <= tol for k in keys)

    def __repr__(self):
        if not self._terms:
            return f"{type(self).__name__}(0)"
        parts = []
        for mono, c in self._terms.items():
            factors = [
                name if e == 1 else f"{name}^{e}"
                for name, e in zip(self.var_names, mono)
                if e
            ]
            parts.append("*".join([f"{c:.6g}"] + factors))
        return f"{type(self).__name__}({' + '.join(parts)})"


class TriPoly(_SparsePoly):
    """Polynomial in the workspace coordinates x, y and one uncertain parameter w."""

    nvars = 3
    var_names = ("x", "y", "w")

    __slots__ = ()

    def w_degree(self) -> int:
        return max((m[2] for m in self._terms), default=0)

    def w_coefficients(self) -> list["PlanePoly"]:
        """Split into plane polynomials a_k(x, y) with P = sum_k a_k(x, y) w^k."""
        groups: dict[int, list] = {}
        for (ex, ey, ew), c in self._terms.items():
            groups.setdefault(ew, []).append(((ex, ey), c))
        return [PlanePoly(groups.get(k, [])) for k in range(self.w_degree() + 1)]

    def eval(self, x, y, w):
        x, y, w = np.asarray(x, float), np.asarray(y, float), np.asarray(w, float)
        total = np.zeros(np.broadcast(x, y, w).shape)
        for (ex, ey, ew), c in self._terms.items():
            total = total + c * x**ex * y**ey * w**ew
        return total


class PlanePoly(_SparsePoly):
    """Deterministic polynomial in x, y."""

    nvars = 2
    var_names = ("x", "y")

    __slots__ = ()

    @cached_property
    def coeff_matrix(self) -> np.ndarray:
        # C[i, j] multiplies x^i y^j
        if not self._terms:
            return np.zeros((1, 1))
        dx = max(m[0] for m in self._terms)
        dy = max(m[1] for m in self._terms)
        C = np.zeros((dx + 1, dy + 1))
        for (ex, ey), c in self._terms.items():
            C[ex, ey] = c
        C.setflags(write=False)
        return C

    def eval(self, x, y):
        """Evaluate at scalar or array coordinates (nested Horner in y then x)."""
        return np.polynomial.polynomial.polyval2d(
            np.asarray(x, float), np.asarray(y, float), self.coeff_matrix
        )

    def __call__(self, x, y):
        return self.eval(x, y)


class LinePoly:
    """Dense univariate polynomial in t, coefficients in ascending order."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[float]):
        c = [float(v) for v in coeffs]
        if c:
            cut = DEAD_COEFF_REL * max(abs(v) for v in c)
            c = [v if abs(v) > cut else 0.0 for v in c]
        while c and c[-1] == 0.0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    def __setattr__(self, name, value):
        raise AttributeError("LinePoly is immutable")

    def __reduce__(self):
        return (LinePoly, (self.coeffs,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1 if self.coeffs else -1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, t):
        return _horner(self.coeffs, t)

    def __eq__(self, other):
        return isinstance(other, LinePoly) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"LinePoly({list(self.coeffs)})"


def _horner(c: Sequence[float], t):
    acc = 0.0 * t
    for v in reversed(c):
        acc = acc * t + v
    return acc


def poly_add(p, q):
    return p + q


def poly_mul(p, q):
    return p * q


def poly_eval(p: PlanePoly, pt) -> float:
    return float(p.eval(pt[0], pt[1]))


def _line_power_table(u: float, d: float, n: int, width: int) -> np.ndarray:
    """Row i holds the ascending coefficients of (u + d t)^i."""
    T = np.zeros((n + 1, width))
    for i in range(n + 1):
        for k in range(i + 1):
            T[i, k] = comb(i, k) * u ** (i - k) * d**k
    return T


_ANTIDIAG_CACHE: dict[int, np.ndarray] = {}


def _antidiag_sum_matrix(width: int) -> np.ndarray:
    S = _ANTIDIAG_CACHE.get(width)
    if S is None:
        S = np.zeros((width, width, width))
        for a in range(width):
            for b in range(width - a):
                S[a, b, a + b] = 1.0
        S = S.reshape(width * width, width)
        S.setflags(write=False)
        _ANTIDIAG_CACHE[width] = S
    return S


def restrict_matrix(C: np.ndarray, u, v) -> np.ndarray:
    """Coefficients in t of sum_ij C[..., i, j] x^i y^j along x = u + t (v - u).

    ``C`` may carry leading batch axes; the result has shape ``C.shape[:-2] +
    (dx + dy + 1,)``.
    """
    nx, ny = C.shape[-2], C.shape[-1]
    width = nx + ny - 1
    X = _line_power_table(float(u[0]), float(v[0]) - float(u[0]), nx - 1, width)
    Y = _line_power_table(float(u[1]), float(v[1]) - float(u[1]), ny - 1, width)
    # M[a, b] = sum_ij X[i, a] C[i, j] Y[j, b]; coefficient of t^k sums a + b = k
    M = X.T @ C @ Y
    flat = M.reshape(C.shape[:-2] + (width * width,))
    return flat @ _antidiag_sum_matrix(width)


def restrict_to_line(p: PlanePoly, u, v) -> LinePoly:
    if p.is_zero():
        return LinePoly([])
    return LinePoly(restrict_matrix(p.coeff_matrix, u, v)[: p.degree() + 1])


# -- Sturm sequences -------------------------------------------------------


def _trim(c: list[float], tol: float = 0.0) -> list[float]:
    c = list(c)
    while c and abs(c[-1]) <= tol:
        c.pop()
    return c


def _normalize(c: list[float]) -> list[float]:
    m = max(abs(v) for v in c)
    return [v / m for v in c]


def _divmod(a: list[float], b: list[float]) -> tuple[list[float], list[float]]:
    """Polynomial long division of ascending coefficient lists."""
    a = list(a)
    db = len(b) - 1
    lead = b[-1]
    q = [0.0] * max(len(a) - db, 1)
    for k in range(len(a) - 1 - db, -1, -1):
        f = a[k + db] / lead
        q[k] = f
        if f:
            for i in range(db + 1):
                a[k + i] -= f * b[i]
    return q, a[:db]


def _derivative(c: Sequence[float]) -> list[float]:
    return [k * c[k] for k in range(1, len(c))]


def _remainder_chain(p: list[float]) -> list[list[float]]:
    chain = [_normalize(p)]
    dp = _trim(_derivative(p))
    if not dp:
        return chain
    chain.append(_normalize(dp))
    while len(chain[-1]) > 1:
        q, r = _divmod(chain[-2], chain[-1])
        # members have unit max-norm, so round-off in r scales with the quotient
        r = _trim(r, _REM_ZERO_TOL * (1.0 + max(abs(v) for v in q)))
        if not r:
            break
        chain.append(_normalize([-v for v in r]))
    return chain


def sturm_chain(p: LinePoly | Sequence[float]) -> list[list[float]]:
    """Sturm sequence of the square-free part of ``p``, each member scaled to unit max-norm."""
    c = list(p.coeffs if isinstance(p, LinePoly) else LinePoly(p).coeffs)
    if not c:
        raise DegeneratePolynomialError("degenerate polynomial")
    chain = _remainder_chain(c)
    gcd = chain[-1]
    if len(gcd) > 1:
        q, r = _divmod(_normalize(c), gcd)
        # only trust the gcd if it really divides p
        if max((abs(v) for v in r), default=0.0) <= _GCD_CHECK_TOL * (1.0 + max(abs(v) for v in q)):
            chain = _remainder_chain(_trim(q))
    return chain


def _sign_variations(chain: list[list[float]], x: float) -> int:
    signs = []
    for s in chain:
        val = _horner(s, x)
        if val != 0.0:
            signs.append(val > 0)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def sturm_count_roots(p: LinePoly | Sequence[float], a: float, b: float) -> int:
    """Number of distinct real roots of ``p`` in the half-open interval (a, b]."""
    if not a < b:
        raise ValueError("need a < b")
    chain = sturm_chain(p)
    return _sign_variations(chain, a) - _sign_variations(chain, b)


# -- interval nonnegativity -------------------------------------------------

_BERNSTEIN_CACHE: dict[int, np.ndarray] = {}


def bernstein_matrix(n: int) -> np.ndarray:
    """Maps ascending monomial coefficients of degree <= n to Bernstein coefficients on [0, 1]."""
    B = _BERNSTEIN_CACHE.get(n)
    if B is None:
        B = np.zeros((n + 1, n + 1))
        for i in range(n + 1):
            for k in range(i + 1):
                B[i, k] = comb(i, k) / comb(n, k)
        B.setflags(write=False)
        _BERNSTEIN_CACHE[n] = B
    return B


def _deflate_endpoints(c: list[float], eps: float) -> list[float]:
    """Snap endpoint values within eps of zero to exact roots and divide them out."""
    p0, p1 = c[0], sum(c)
    snap0, snap1 = abs(p0) <= eps, abs(p1) <= eps
    c = list(c) + [0.0]
    if snap0:
        c[0] -= p0
        if snap1:
            # linear correction so the value at t = 1 is zero as well
            c[1] -= p1 - p0
    elif snap1:
        c[0] -= p1
    c = _trim(c)
    while len(c) > 1 and abs(c[0]) <= eps * max(1.0, max(abs(v) for v in c)):
        c = c[1:]  # divide by t
    while len(c) > 1 and abs(sum(c)) <= eps * max(1.0, max(abs(v) for v in c)):
        q, _ = _divmod(c, [-1.0, 1.0])  # divide by (t - 1)
        c = _trim(q)
    return c


def nonneg_on_unit_interval(p: LinePoly | Sequence[float], eps: float = DEFAULT_EPS) -> bool:
    """True only if ``p`` stays above ``-eps`` on [0, 1] with no interior root.

    Interior roots of any multiplicity cause rejection (tangency counts as a
    failure); values within ``eps`` of zero at t = 0 or t = 1 are allowed.
    """
    c = list(p.coeffs if isinstance(p, LinePoly) else LinePoly(p).coeffs)
    if not c:
        return True
    if c[0] < -eps or sum(c) < -eps or _horner(c, 0.5) < -eps:
        return False
    if len(c) == 1:
        return True
    bern = bernstein_matrix(len(c) - 1) @ np.asarray(c)
    if bern.min() > 0.0:
        # strictly positive Bernstein coefficients leave no room for a root
        return True
    q = _deflate_endpoints(c, eps)
    if len(q) > 1 and sturm_count_roots(q, 0.0, 1.0) > 0:
        return False
    # no interior sign change left, so the midpoint fixes the sign on (0, 1)
    return _horner(c, 0.5) >= 0.0
