"""Exact univariate polynomials over Q and the number field Q(lambda).

Polynomials are tuples of coefficients, lowest degree first.  Everything here
is exact: coefficients are ``int`` or ``Fraction`` and real roots are located
by Sturm sequences evaluated at rational points.

``NumberField`` is the field generated over Q by the largest real root of an
irreducible monic integer polynomial.  Its elements (``Elem``) are used as
edge lengths of affine train track maps, so that lengths, fold amounts and
Nielsen path endpoints stay exact.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd

Poly = tuple


def trim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return tuple(p)


def degree(p):
    return len(trim(p)) - 1


def padd(p, q):
    n = max(len(p), len(q))
    return trim((p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n))


def psub(p, q):
    n = max(len(p), len(q))
    return trim((p[i] if i < len(p) else 0) - (q[i] if i < len(q) else 0) for i in range(n))


def pmul(p, q):
    if not p or not q:
        return ()
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return trim(out)


def pscale(p, c):
    return trim(a * c for a in p)


def pdivmod(p, q):
    """Polynomial long division over Q (exact for integer q with unit lead)."""
    p, q = list(trim(p)), trim(q)
    if not q:
        raise ZeroDivisionError("division by zero polynomial")
    dq, lead = len(q) - 1, q[-1]
    if len(p) - 1 < dq:
        return (), tuple(p)
    quot = [0] * (len(p) - dq)
    for i in range(len(p) - 1, dq - 1, -1):
        c = p[i]
        if c == 0:
            continue
        c = Fraction(c, lead) if not isinstance(lead, int) or c % lead else c // lead
        quot[i - dq] = c
        for j in range(dq + 1):
            p[i - dq + j] -= c * q[j]
    return trim(quot), trim(p)


def pderiv(p):
    return trim(i * p[i] for i in range(1, len(p)))


def peval(p, x):
    acc = 0
    for c in reversed(p):
        acc = acc * x + c
    return acc


def pgcd(p, q):
    p, q = trim(p), trim(q)
    while q:
        _, r = pdivmod(p, q)
        p, q = q, r
    if not p:
        return ()
    return tuple(Fraction(c) / p[-1] for c in p)


def primitive_part(p):
    """Integer polynomial with coprime coefficients and positive lead."""
    p = trim(p)
    if not p:
        return ()
    den = 1
    for c in p:
        c = Fraction(c)
        den = den * c.denominator // gcd(den, c.denominator)
    ints = [int(Fraction(c) * den) for c in p]
    g = 0
    for c in ints:
        g = gcd(g, c)
    ints = [c // g for c in ints]
    if ints[-1] < 0:
        ints = [-c for c in ints]
    return tuple(ints)


def squarefree(p):
    g = pgcd(p, pderiv(p))
    if degree(g) <= 0:
        return primitive_part(p)
    q, _ = pdivmod(p, g)
    return primitive_part(q)


# ---------------------------------------------------------------------------
# characteristic polynomials and cyclotomic factors


def charpoly(matrix):
    """Characteristic polynomial det(xI - M) of a square integer matrix.

    Faddeev-LeVerrier recursion in exact arithmetic.  Returns integer
    coefficients, lowest degree first, monic.
    """
    rows = [[int(x) for x in row] for row in matrix]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("matrix must be square")
    coeffs = [0] * (n + 1)
    coeffs[n] = 1
    # M_k = M (M_{k-1} + c_{n-k+1} I)
    acc = [[0] * n for _ in range(n)]
    for k in range(1, n + 1):
        c_prev = coeffs[n - k + 1]
        tmp = [[acc[i][j] + (c_prev if i == j else 0) for j in range(n)] for i in range(n)]
        acc = [[sum(rows[i][l] * tmp[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        tr = sum(acc[i][i] for i in range(n))
        if tr % k:
            raise ArithmeticError("non-integral Faddeev-LeVerrier step")
        coeffs[n - k] = -tr // k
    return tuple(coeffs)


@lru_cache(maxsize=None)
def cyclotomic(n):
    """n-th cyclotomic polynomial, by dividing x^n - 1 by the smaller ones."""
    if n < 1:
        raise ValueError("n must be positive")
    p = (-1,) + (0,) * (n - 1) + (1,)
    for d in range(1, n):
        if n % d == 0:
            p, r = pdivmod(p, cyclotomic(d))
            assert not r
    return tuple(int(c) for c in p)


def euler_phi(n):
    result, m, p = n, n, 2
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            result -= result // p
        p += 1
    if m > 1:
        result -= result // m
    return result


def cyclotomic_factors(p, max_degree):
    """Indices n with Phi_n dividing p and euler_phi(n) <= max_degree."""
    found = []
    n = 1
    # phi(n) >= sqrt(n/2) so n <= 2 * max_degree**2 covers every candidate
    while n <= max(2, 2 * max_degree * max_degree):
        if euler_phi(n) <= max_degree:
            _, r = pdivmod(p, cyclotomic(n))
            if not r:
                found.append(n)
        n += 1
    return found


# ---------------------------------------------------------------------------
# Sturm sequences


def sturm_sequence(p):
    p = squarefree(p)
    seq = [tuple(Fraction(c) for c in p), tuple(Fraction(c) for c in pderiv(p))]
    while degree(seq[-1]) > 0:
        _, r = pdivmod(seq[-2], seq[-1])
        if not r:
            break
        seq.append(tuple(-c for c in r))
    return seq


def _sign_changes(seq, x):
    signs = []
    for q in seq:
        v = peval(q, x)
        if v != 0:
            signs.append(v > 0)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def count_roots(seq, lo, hi):
    """Number of distinct real roots in the half-open interval (lo, hi]."""
    return _sign_changes(seq, lo) - _sign_changes(seq, hi)


def root_bound(p):
    p = trim(p)
    lead = abs(Fraction(p[-1]))
    return 1 + max((abs(Fraction(c)) / lead for c in p[:-1]), default=Fraction(0))


def largest_real_root(p, tol=Fraction(1, 10**12)):
    """Rational interval (lo, hi] of width <= tol holding the largest real root.

    Returns None when p has no real root.
    """
    seq = sturm_sequence(p)
    bound = root_bound(seq[0])
    lo, hi = -bound, bound
    if count_roots(seq, lo, hi) == 0:
        return None
    tol = Fraction(tol)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if count_roots(seq, mid, hi) >= 1:
            lo = mid
        else:
            hi = mid
    return lo, hi


def real_roots_count(p):
    seq = sturm_sequence(p)
    b = root_bound(seq[0])
    return count_roots(seq, -b, b)


# ---------------------------------------------------------------------------
# number fields


def factor_over_z(p):
    """Irreducible integer factors of p (multiplicities dropped)."""
    import sympy

    x = sympy.Symbol("x")
    expr = sum(int(c) * x**i for i, c in enumerate(p))
    _, factors = sympy.factor_list(expr, x)
    out = []
    for fac, _mult in factors:
        coeffs = sympy.Poly(fac, x).all_coeffs()[::-1]
        out.append(primitive_part(tuple(int(c) for c in coeffs)))
    return out


def pf_minimal_polynomial(p):
    """Irreducible factor of p that vanishes at its largest real root."""
    interval = largest_real_root(p, Fraction(1, 10**30))
    if interval is None:
        raise ValueError("polynomial has no real root")
    lo, hi = interval
    for fac in factor_over_z(p):
        if degree(fac) < 1:
            continue
        if count_roots(sturm_sequence(fac), lo, hi) >= 1:
            # make sure the factor's own largest root is this one
            seq = sturm_sequence(fac)
            if count_roots(seq, hi, root_bound(fac) + 1) == 0:
                return tuple(int(c) for c in fac)
    raise ArithmeticError("no factor vanishes at the largest root")


def _interval_mul(a, b):
    prods = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return min(prods), max(prods)


class NumberField:
    """Q(lambda) for lambda the largest real root of an irreducible polynomial."""

    def __init__(self, minpoly):
        minpoly = primitive_part(minpoly)
        if minpoly[-1] != 1:
            raise ValueError("minimal polynomial must be monic")
        self.minpoly = tuple(int(c) for c in minpoly)
        self.degree = len(self.minpoly) - 1
        interval = largest_real_root(self.minpoly, Fraction(1, 2**60))
        if interval is None:
            raise ValueError("minimal polynomial has no real root")
        self._lo, self._hi = interval
        self._float = float((self._lo + self._hi) / 2)

    def __repr__(self):
        return f"NumberField({list(self.minpoly)})"

    def __eq__(self, other):
        return isinstance(other, NumberField) and self.minpoly == other.minpoly

    def __hash__(self):
        return hash(self.minpoly)

    @property
    def gen(self):
        if self.degree == 1:
            return Elem(self, (Fraction(-self.minpoly[0]),))
        return Elem(self, (Fraction(0), Fraction(1)) + (Fraction(0),) * (self.degree - 2))

    def __call__(self, value):
        if isinstance(value, Elem):
            if value.field != self:
                raise ValueError("element of a different field")
            return value
        if isinstance(value, (list, tuple)):
            c = [Fraction(v) for v in value][: self.degree]
            c += [Fraction(0)] * (self.degree - len(c))
            return Elem(self, tuple(c))
        return Elem(self, (Fraction(value),) + (Fraction(0),) * (self.degree - 1))

    def interval(self, width):
        """Isolating interval (lo, hi] for the generator, refined to ``width``."""
        width = Fraction(width)
        while self._hi - self._lo > width:
            mid = (self._lo + self._hi) / 2
            v = peval(self.minpoly, mid)
            if v == 0:
                self._lo = self._hi = mid
                break
            if (v > 0) == (peval(self.minpoly, self._hi) > 0):
                self._hi = mid
            else:
                self._lo = mid
        return self._lo, self._hi

    def reduce(self, coeffs):
        c = [Fraction(x) for x in coeffs]
        m, d = self.minpoly, self.degree
        for i in range(len(c) - 1, d - 1, -1):
            lead = c[i]
            if lead:
                for j in range(d + 1):
                    c[i - d + j] -= lead * m[j]
        c = c[:d] + [Fraction(0)] * (d - len(c))
        return tuple(c)

    def to_json(self):
        lo, hi = self.interval(Fraction(1, 10**6))
        return {"minpoly": list(self.minpoly), "root": [fmt_fraction(lo), fmt_fraction(hi)]}


@lru_cache(maxsize=None)
def field_for(minpoly):
    return NumberField(tuple(minpoly))


def fmt_fraction(q):
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


class Elem:
    """Element of a ``NumberField``: a polynomial in the generator of degree < d."""

    __slots__ = ("field", "c")

    def __init__(self, field, coeffs):
        self.field = field
        self.c = coeffs

    # -- coercion helpers
    def _coerce(self, other):
        if isinstance(other, Elem):
            if other.field != self.field:
                raise ValueError("mixing elements of different number fields")
            return other
        if isinstance(other, (int, Fraction)):
            return self.field(other)
        return None

    def is_rational(self):
        return all(x == 0 for x in self.c[1:])

    def to_fraction(self):
        if not self.is_rational():
            raise ValueError(f"{self!r} is irrational")
        return self.c[0]

    def __float__(self):
        if self.is_rational():
            return float(self.c[0])
        lo, hi = self.field.interval(Fraction(1, 2**70))
        return float(peval(self.c, (lo + hi) / 2))

    def approx(self):
        return peval(self.c, self.field._float) if not self.is_rational() else float(self.c[0])

    # -- arithmetic
    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return float(self) + other if isinstance(other, float) else NotImplemented
        return Elem(self.field, tuple(a + b for a, b in zip(self.c, o.c)))

    __radd__ = __add__

    def __neg__(self):
        return Elem(self.field, tuple(-a for a in self.c))

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return float(self) - other if isinstance(other, float) else NotImplemented
        return Elem(self.field, tuple(a - b for a, b in zip(self.c, o.c)))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return other - float(self) if isinstance(other, float) else NotImplemented
        return o - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return Elem(self.field, tuple(a * other for a in self.c))
        o = self._coerce(other)
        if o is None:
            return float(self) * other if isinstance(other, float) else NotImplemented
        return Elem(self.field, self.field.reduce(pmul(self.c, o.c) or (0,)))

    __rmul__ = __mul__

    def inverse(self):
        if not any(self.c):
            raise ZeroDivisionError("inverse of zero")
        if self.is_rational():
            return self.field(1 / self.c[0])
        # extended Euclid: s*self + t*minpoly = 1
        r0, r1 = tuple(Fraction(x) for x in self.field.minpoly), trim(self.c)
        s0, s1 = (), (Fraction(1),)
        while degree(r1) > 0:
            q, r = pdivmod(r0, r1)
            r0, r1 = r1, r
            s0, s1 = s1, psub(s0, pmul(q, s1))
        # r1 is a nonzero constant
        inv = Fraction(1) / r1[0]
        return Elem(self.field, self.field.reduce(pscale(s1, inv) or (0,)))

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return Elem(self.field, tuple(a / other for a in self.c))
        o = self._coerce(other)
        if o is None:
            return float(self) / other if isinstance(other, float) else NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return other / float(self) if isinstance(other, float) else NotImplemented
        return o * self.inverse()

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        out, base = self.field(1), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- order
    def sign(self):
        if not any(self.c):
            return 0
        if self.is_rational():
            return 1 if self.c[0] > 0 else -1
        approx = self.approx()
        scale = sum(abs(float(x)) * self.field._float ** i for i, x in enumerate(self.c))
        if abs(approx) > 1e-9 * scale:
            return 1 if approx > 0 else -1
        width = Fraction(1, 2**64)
        while True:
            lo, hi = self.field.interval(width)
            acc = (Fraction(0), Fraction(0))
            for coef in reversed(self.c):
                acc = _interval_mul(acc, (lo, hi))
                acc = (acc[0] + coef, acc[1] + coef)
            if acc[0] > 0:
                return 1
            if acc[1] < 0:
                return -1
            width /= 2**32

    def _cmp(self, other):
        o = self._coerce(other)
        if o is None:
            if isinstance(other, float):
                f = float(self)
                return (f > other) - (f < other)
            raise TypeError(f"cannot compare Elem with {type(other).__name__}")
        return (self - o).sign()

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __eq__(self, other):
        if isinstance(other, Elem):
            return self.field == other.field and self.c == other.c
        if isinstance(other, (int, Fraction)):
            return self.is_rational() and self.c[0] == other
        if isinstance(other, float):
            return float(self) == other
        return NotImplemented

    def __hash__(self):
        if self.is_rational():
            return hash(self.c[0])
        return hash((self.field.minpoly, self.c))

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __bool__(self):
        return any(self.c)

    def __repr__(self):
        terms = []
        for i, x in enumerate(self.c):
            if x:
                terms.append(f"{x}" if i == 0 else f"{x}*L^{i}" if i > 1 else f"{x}*L")
        return "(" + (" + ".join(terms) or "0") + ")"

    def to_json(self):
        if self.is_rational():
            return fmt_fraction(self.c[0])
        return [fmt_fraction(x) for x in self.c]


def as_exact(x):
    """Normalize a length to Fraction when it is rational."""
    if isinstance(x, Elem) and x.is_rational():
        return x.c[0]
    if isinstance(x, int):
        return Fraction(x)
    return x
