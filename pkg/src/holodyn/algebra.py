"""Homogeneous polynomials in several complex variables.

Coefficients are either double precision complex numbers, or exact
(``int``, :class:`fractions.Fraction` or :class:`GaussianRational`).  A
polynomial is *exact* when every coefficient is exact; arithmetic between
exact polynomials stays exact, anything touching a float falls back to
complex doubles.
"""
from __future__ import annotations

import numbers
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, ShapeError

DROP_TOL = 1e-13


class GaussianRational(numbers.Number):
    """Exact complex number ``re + i*im`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def coerce(cls, x):
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
            return cls(x, 0)
        return NotImplemented

    def simplify(self):
        """Return the narrowest exact type representing this value."""
        if self.im != 0:
            return self
        if self.re.denominator == 1:
            return int(self.re)
        return self.re

    def __add__(self, other):
        o = GaussianRational.coerce(other)
        if o is NotImplemented:
            return complex(self) + other
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = GaussianRational.coerce(other)
        if o is NotImplemented:
            return complex(self) * other
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = GaussianRational.coerce(other)
        if o is NotImplemented:
            return complex(self) / other
        n = o.re * o.re + o.im * o.im
        if n == 0:
            raise ZeroDivisionError("division by exact zero")
        return self * GaussianRational(o.re / n, -o.im / n)

    def __rtruediv__(self, other):
        o = GaussianRational.coerce(other)
        if o is NotImplemented:
            return other / complex(self)
        return o / self

    def __pow__(self, n):
        if not isinstance(n, int):
            return complex(self) ** n
        if n < 0:
            return GaussianRational(1) / (self ** (-n))
        result = GaussianRational(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def __abs__(self):
        return abs(complex(self))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __eq__(self, other):
        o = GaussianRational.coerce(other)
        if o is NotImplemented:
            if isinstance(other, numbers.Number):
                return complex(self) == other
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __repr__(self):
        return f"GaussianRational({self.re!s}, {self.im!s})"


def is_exact(c) -> bool:
    return isinstance(c, (int, Fraction, GaussianRational)) and not isinstance(c, bool)


def _simplify_exact(c):
    if isinstance(c, GaussianRational):
        return c.simplify()
    if isinstance(c, Fraction) and c.denominator == 1:
        return int(c)
    return c


def exact_from_complex(c, max_denominator=10**6):
    """Best rational approximation of a complex double, as an exact value."""
    c = complex(c)
    re = Fraction(c.real).limit_denominator(max_denominator)
    im = Fraction(c.imag).limit_denominator(max_denominator)
    return GaussianRational(re, im).simplify()


def monomials(arity: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples of the given arity and total degree, graded-lex order."""
    if arity == 1:
        return [(degree,)]
    out = []
    for a in range(degree, -1, -1):
        for rest in monomials(arity - 1, degree - a):
            out.append((a,) + rest)
    return out


class HomPolynomial:
    """Immutable homogeneous polynomial with sparse complex coefficients.

    Parameters
    ----------
    arity : int
        Number of variables.
    degree : int
        Total degree of every monomial.
    terms : mapping
        Exponent tuple -> coefficient.
    exact : bool, optional
        Force exact (``True``) or floating (``False``) coefficients.  By
        default a polynomial is exact iff all given coefficients are.
    """

    __slots__ = ("arity", "degree", "terms", "exact", "_cache")

    def __init__(self, arity: int, degree: int, terms: Mapping | None = None,
                 exact: bool | None = None):
        if arity < 1 or degree < 0:
            raise ShapeError(f"invalid arity/degree ({arity}, {degree})")
        terms = dict(terms or {})
        if exact is None:
            exact = all(is_exact(c) for c in terms.values())
        clean = {}
        for exp, c in terms.items():
            exp = tuple(int(a) for a in exp)
            if len(exp) != arity:
                raise ShapeError(f"exponent {exp} has length != arity {arity}")
            if sum(exp) != degree or min(exp) < 0:
                raise ShapeError(f"exponent {exp} is not of degree {degree}")
            if exact:
                if not is_exact(c):
                    raise TypeError(f"non-exact coefficient {c!r} in exact polynomial")
                c = _simplify_exact(c)
                if c != 0:
                    clean[exp] = c
            else:
                c = complex(c)
                if not (np.isfinite(c.real) and np.isfinite(c.imag)):
                    raise ValueError("non-finite coefficient")
                clean[exp] = c
        if not exact and clean:
            cut = DROP_TOL * max(abs(c) for c in clean.values())
            clean = {e: c for e, c in clean.items() if abs(c) > cut and c != 0}
        object.__setattr__(self, "arity", arity)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "terms", dict(sorted(clean.items(), reverse=True)))
        object.__setattr__(self, "exact", bool(exact))
        object.__setattr__(self, "_cache", None)

    def __setattr__(self, name, value):
        raise AttributeError("HomPolynomial is immutable")

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, arity, degree, exact=True):
        return cls(arity, degree, {}, exact=exact)

    @classmethod
    def variable(cls, arity, i):
        exp = [0] * arity
        exp[i] = 1
        return cls(arity, 1, {tuple(exp): 1})

    @classmethod
    def monomial(cls, exp, coeff=1):
        exp = tuple(exp)
        return cls(len(exp), sum(exp), {exp: coeff})

    @classmethod
    def from_binary(cls, coeffs: Sequence, degree: int | None = None):
        """Homogenize a one-variable polynomial ``sum coeffs[j] z^j``.

        The result is a form in ``(w0, w1)`` with ``z = w1 / w0``.
        """
        if degree is None:
            degree = len(coeffs) - 1
        if len(coeffs) - 1 > degree:
            raise ShapeError("degree smaller than the coefficient list")
        return cls(2, degree, {(degree - j, j): c for j, c in enumerate(coeffs) if c != 0})

    # -- basic queries ----------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def norm(self) -> float:
        """Largest coefficient modulus."""
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def coeff(self, exp):
        return self.terms.get(tuple(exp), 0)

    def to_numeric(self) -> "HomPolynomial":
        if not self.exact:
            return self
        return HomPolynomial(self.arity, self.degree,
                             {e: complex(c) for e, c in self.terms.items()}, exact=False)

    def __eq__(self, other):
        if not isinstance(other, HomPolynomial):
            return NotImplemented
        return (self.arity, self.degree, self.terms) == (other.arity, other.degree, other.terms)

    def __hash__(self):
        return hash((self.arity, self.degree, tuple(self.terms.items())))

    def __repr__(self):
        body = " + ".join(f"({c})*{'*'.join(f'w{i}^{a}' for i, a in enumerate(e) if a) or '1'}"
                          for e, c in self.terms.items())
        return f"HomPolynomial(arity={self.arity}, degree={self.degree}, {body or '0'})"

    # -- ring operations --------------------------------------------------
    def _check_same_space(self, other):
        if self.arity != other.arity or self.degree != other.degree:
            raise ShapeError(
                f"shape mismatch: ({self.arity}, {self.degree}) vs ({other.arity}, {other.degree})")

    def __add__(self, other):
        if not isinstance(other, HomPolynomial):
            return NotImplemented
        if other.is_zero():
            if other.arity != self.arity:
                raise ShapeError("arity mismatch")
            return self
        if self.is_zero():
            if other.arity != self.arity:
                raise ShapeError("arity mismatch")
            return other
        self._check_same_space(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return HomPolynomial(self.arity, self.degree, out,
                             exact=self.exact and other.exact)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        if not isinstance(other, HomPolynomial):
            return NotImplemented
        return self + (-other)

    def scale(self, c) -> "HomPolynomial":
        exact = self.exact and is_exact(c)
        return HomPolynomial(self.arity, self.degree,
                             {e: v * c for e, v in self.terms.items()}, exact=exact)

    def __mul__(self, other):
        if isinstance(other, HomPolynomial):
            return self.multiply(other)
        if isinstance(other, numbers.Number):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, numbers.Number):
            return self.scale(other)
        return NotImplemented

    def multiply(self, other: "HomPolynomial") -> "HomPolynomial":
        if self.arity != other.arity:
            raise ShapeError("arity mismatch in product")
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return HomPolynomial(self.arity, self.degree + other.degree, out,
                             exact=self.exact and other.exact)

    def __pow__(self, n: int) -> "HomPolynomial":
        if n < 0:
            raise ValueError("negative power")
        result = HomPolynomial(self.arity, 0, {(0,) * self.arity: 1})
        base = self
        while n:
            if n & 1:
                result = result.multiply(base)
            n >>= 1
            if n:
                base = base.multiply(base)
        return result

    def diff(self, i: int) -> "HomPolynomial":
        """Partial derivative with respect to variable ``i``."""
        if self.degree == 0:
            return HomPolynomial(self.arity, 0, {}, exact=self.exact)
        out = {}
        for e, c in self.terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                out[tuple(ne)] = c * e[i]
        return HomPolynomial(self.arity, self.degree - 1, out, exact=self.exact)

    # -- composition ------------------------------------------------------
    def compose(self, subs: Sequence["HomPolynomial"]) -> "HomPolynomial":
        """Substitute ``subs[i]`` for variable ``i``.

        All substitutions must share arity and degree; the result has degree
        ``self.degree * subs[0].degree``.
        """
        if len(subs) != self.arity:
            raise ShapeError(f"need {self.arity} substitutions, got {len(subs)}")
        arity, e = subs[0].arity, subs[0].degree
        for s in subs:
            if s.arity != arity or s.degree != e:
                raise ShapeError("substitutions must share arity and degree")
        exact = self.exact and all(s.exact for s in subs)
        max_pow = [max((ex[i] for ex in self.terms), default=0) for i in range(self.arity)]
        powers = []
        for s, m in zip(subs, max_pow):
            table = [HomPolynomial(arity, 0, {(0,) * arity: 1})]
            for _ in range(m):
                table.append(table[-1].multiply(s))
            powers.append(table)
        acc: dict = {}
        for ex, c in self.terms.items():
            prod = None
            for i, a in enumerate(ex):
                if a:
                    prod = powers[i][a] if prod is None else prod.multiply(powers[i][a])
            if prod is None:
                prod = powers[0][0]
            for k, v in prod.terms.items():
                acc[k] = acc.get(k, 0) + c * v
        return HomPolynomial(arity, self.degree * e, acc, exact=exact)

    # -- evaluation -------------------------------------------------------
    def _tables(self):
        if self._cache is None:
            exps = np.array(list(self.terms.keys()), dtype=np.int64).reshape(-1, self.arity)
            coefs = np.array([complex(c) for c in self.terms.values()], dtype=complex)
            object.__setattr__(self, "_cache", (exps, coefs))
        return self._cache

    def __call__(self, point):
        return self.evaluate(point)

    def evaluate(self, point):
        """Evaluate at ``point``.

        ``point`` is a sequence of ``arity`` entries.  Entries may be numbers,
        numpy arrays of a common shape (vectorized evaluation), or any objects
        supporting ``+``, ``*`` and integer powers (e.g. truncated series).
        Exact coefficients with exact inputs give an exact result.
        """
        if len(point) != self.arity:
            raise DimensionError(f"point has {len(point)} coordinates, expected {self.arity}")
        if all(isinstance(x, numbers.Number) for x in point):
            if self.exact and all(is_exact(x) for x in point):
                return self._evaluate_generic(point)
            return complex(self._evaluate_numpy([complex(x) for x in point]))
        if all(isinstance(x, (numbers.Number, np.ndarray)) for x in point):
            return self._evaluate_numpy(point)
        return self._evaluate_generic(point)

    def _evaluate_numpy(self, point):
        exps, coefs = self._tables()
        xs = [np.asarray(x, dtype=complex) for x in point]
        shape = np.broadcast_shapes(*(x.shape for x in xs))
        if exps.shape[0] == 0:
            return np.zeros(shape, dtype=complex) if shape else 0j
        pw = []
        for i, x in enumerate(xs):
            m = int(exps[:, i].max())
            table = [np.ones(shape, dtype=complex)]
            for _ in range(m):
                table.append(table[-1] * x)
            pw.append(table)
        out = np.zeros(shape, dtype=complex)
        for row, c in zip(exps, coefs):
            term = c * pw[0][row[0]]
            for i in range(1, self.arity):
                if row[i]:
                    term = term * pw[i][row[i]]
            out = out + term
        return out

    def _evaluate_generic(self, point):
        cache = {}

        def pw(i, a):
            key = (i, a)
            if key not in cache:
                cache[key] = point[i] ** a
            return cache[key]

        total = None
        for ex, c in self.terms.items():
            term = None
            for i, a in enumerate(ex):
                if a:
                    term = pw(i, a) if term is None else term * pw(i, a)
            term = c if term is None else term * c
            total = term if total is None else total + term
        return 0 if total is None else total

    # -- scalar equivalence ----------------------------------------------
    def scalar_match(self, other: "HomPolynomial", tol: float = 1e-10):
        """Return ``lam`` with ``self = lam * other`` (within ``tol``), else ``None``."""
        return scalar_match([self], [other], tol)

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        terms = []
        for e, c in self.terms.items():
            if self.exact:
                g = GaussianRational.coerce(c)
                terms.append({"exp": list(e), "re": _frac_json(g.re), "im": _frac_json(g.im)})
            else:
                terms.append({"exp": list(e), "re": c.real, "im": c.imag})
        out = {"arity": self.arity, "degree": self.degree, "terms": terms}
        if self.exact:
            out["exact"] = True
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "HomPolynomial":
        exact = bool(data.get("exact", False))
        terms = {}
        for t in data["terms"]:
            if exact:
                c = GaussianRational(Fraction(str(t["re"])), Fraction(str(t["im"]))).simplify()
            else:
                c = complex(float(t["re"]), float(t["im"]))
            terms[tuple(t["exp"])] = c
        return cls(int(data["arity"]), int(data["degree"]), terms, exact=exact)


def _frac_json(f: Fraction):
    return int(f) if f.denominator == 1 else str(f)


def _coef_vector(polys: Iterable[HomPolynomial]):
    keys, vals = [], []
    for idx, p in enumerate(polys):
        for e, c in p.terms.items():
            keys.append((idx, e))
            vals.append(c)
    return keys, vals


def scalar_match(ps: Sequence[HomPolynomial], qs: Sequence[HomPolynomial], tol: float = 1e-10):
    """Common scalar ``lam`` with ``ps[i] = lam * qs[i]`` for all ``i``.

    ``lam`` is read off the largest-modulus coefficient of ``ps`` and then
    checked: ``max |ps - lam qs| <= tol * max |ps|``.  With exact inputs and
    ``tol == 0`` the check is exact equality.  Returns ``None`` when no scalar
    works.
    """
    if len(ps) != len(qs):
        raise ShapeError("component count mismatch")
    for p, q in zip(ps, qs):
        if (p.arity, p.degree) != (q.arity, q.degree) and not (p.is_zero() and q.is_zero()):
            raise ShapeError("scalar_match needs equal arity and degree")
    pk, pv = _coef_vector(ps)
    if not pv:
        return 1 if all(q.is_zero() for q in qs) else 0
    qd = dict(zip(*_coef_vector(qs)))
    i = max(range(len(pv)), key=lambda j: abs(pv[j]))
    qc = qd.get(pk[i], 0)
    if qc == 0:
        return None
    exact = all(p.exact for p in ps) and all(q.exact for q in qs)
    lam = (GaussianRational.coerce(pv[i]) / GaussianRational.coerce(qc)).simplify() if exact \
        else complex(pv[i]) / complex(qc)
    pnorm = max(abs(v) for v in pv)
    pd = dict(zip(pk, pv))
    worst = 0.0
    for key in set(pd) | set(qd):
        diff = pd.get(key, 0) - lam * qd.get(key, 0)
        if exact and tol == 0:
            if diff != 0:
                return None
        else:
            worst = max(worst, abs(diff))
    if worst > tol * pnorm:
        return None
    return lam
