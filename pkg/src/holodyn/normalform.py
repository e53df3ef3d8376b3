"""Germs at fixed points, resonances, triangular normal forms and Poincaré maps.

Germs are truncated power series in ``k`` variables.  Coefficients may be
exact (``int``, ``Fraction``, :class:`GaussianRational`) or complex floats;
exact inputs with Gaussian-integer eigenvalues are normalized exactly.

Component indices ``j`` in resonance lists start at 1, matching the usual
mathematical labelling ``z_1, ..., z_k``.
"""
from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import GaussianRational, HomPolynomial, is_exact, monomials
from .errors import (CommutationViolation, IllConditionedError, PreconditionError,
                     UnsupportedError)
from .projmap import ProjectiveMap, ProjectivePoint, apply_batch, canonical, projective_distance

DEFAULT_ORDER = 10
RESONANCE_TOL = 1e-9
SMALL_DIVISOR = 1e-9
EXACT_RESONANCE_TOL = 1e-12
LEAK_TOL = 1e-8
LEAK_ERROR = 1e-6


# ---------------------------------------------------------------------------
# exact helpers
# ---------------------------------------------------------------------------

def _simplify(c):
    if isinstance(c, GaussianRational):
        return c.simplify()
    if isinstance(c, Fraction) and c.denominator == 1:
        return int(c)
    return c


def _div(a, b):
    if is_exact(a) and is_exact(b):
        return _simplify(GaussianRational.coerce(a) / GaussianRational.coerce(b))
    return complex(a) / complex(b)


def _is_zero(c) -> bool:
    return c == 0


def _gaussian_integer(c, tol=1e-12):
    """Exact Gaussian integer equal to ``c`` (within ``tol``), else ``None``."""
    if is_exact(c):
        g = GaussianRational.coerce(c)
        if g.re.denominator == 1 and g.im.denominator == 1:
            return _simplify(g)
        return None
    c = complex(c)
    re, im = round(c.real), round(c.imag)
    if abs(c.real - re) <= tol * max(1, abs(c)) and abs(c.imag - im) <= tol * max(1, abs(c)):
        return _simplify(GaussianRational(re, im))
    return None


# ---------------------------------------------------------------------------
# truncated series
# ---------------------------------------------------------------------------

class Series:
    """Truncated power series in ``k`` variables: terms of total degree <= order."""

    __slots__ = ("k", "order", "terms")

    def __init__(self, k: int, order: int, terms=None):
        self.k = k
        self.order = order
        clean = {}
        for a, c in (terms or {}).items():
            a = tuple(int(x) for x in a)
            if len(a) != k:
                raise ValueError("exponent length does not match k")
            if sum(a) <= order and not _is_zero(c):
                clean[a] = c
        self.terms = clean

    @classmethod
    def zero(cls, k, order):
        return cls(k, order)

    @classmethod
    def constant(cls, k, order, c):
        return cls(k, order, {(0,) * k: c})

    @classmethod
    def variable(cls, k, i, order):
        e = [0] * k
        e[i] = 1
        return cls(k, order, {tuple(e): 1})

    def _lift(self, other):
        if isinstance(other, Series):
            return other
        if isinstance(other, numbers.Number):
            return Series.constant(self.k, self.order, other)
        return NotImplemented

    def __add__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        out = dict(self.terms)
        for a, c in o.terms.items():
            out[a] = out.get(a, 0) + c
        return Series(self.k, min(self.order, o.order), out)

    __radd__ = __add__

    def __neg__(self):
        return Series(self.k, self.order, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return Series(self.k, self.order, {a: c * other for a, c in self.terms.items()})
        if not isinstance(other, Series):
            return NotImplemented
        N = min(self.order, other.order)
        out = {}
        B = [(b, sum(b), c) for b, c in other.terms.items()]
        for a, ca in self.terms.items():
            da = sum(a)
            for b, db, cb in B:
                if da + db > N:
                    continue
                e = tuple(x + y for x, y in zip(a, b))
                out[e] = out.get(e, 0) + ca * cb
        return Series(self.k, N, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("series powers must be non-negative integers")
        result = Series.constant(self.k, self.order, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other):
        if not isinstance(other, Series):
            return NotImplemented
        return self.k == other.k and self.terms == other.terms

    def __repr__(self):
        return f"Series(k={self.k}, order={self.order}, terms={self.terms!r})"

    @property
    def exact(self) -> bool:
        return all(is_exact(c) for c in self.terms.values())

    def constant_term(self):
        return self.terms.get((0,) * self.k, 0)

    def truncate(self, order: int) -> "Series":
        return Series(self.k, min(order, self.order), self.terms)

    def with_order(self, order: int) -> "Series":
        return Series(self.k, order, self.terms)

    def part(self, m: int) -> dict:
        """Homogeneous degree-``m`` terms."""
        return {a: c for a, c in self.terms.items() if sum(a) == m}

    def coeff(self, a):
        return self.terms.get(tuple(a), 0)

    def max_abs(self) -> float:
        return max((abs(complex(c)) for c in self.terms.values()), default=0.0)

    def to_numeric(self) -> "Series":
        return Series(self.k, self.order, {a: complex(c) for a, c in self.terms.items()})

    def reciprocal(self) -> "Series":
        c0 = self.constant_term()
        if _is_zero(c0):
            raise ZeroDivisionError("series with zero constant term is not invertible")
        inv0 = _div(1, c0)
        r = (self - c0) * inv0
        out = Series.constant(self.k, self.order, 1)
        p = Series.constant(self.k, self.order, 1)
        for _ in range(self.order):
            p = p * (-r)
            out = out + p
        return out * inv0

    def compose(self, subs) -> "Series":
        """Substitute series ``subs[i]`` for variable ``i``.

        Exact truncation needs every substituted series to have zero
        constant term.
        """
        if len(subs) != self.k:
            raise ValueError("wrong number of substitutions")
        k2, N = subs[0].k, min(self.order, min(s.order for s in subs))
        cache = {}

        def pw(i, a):
            if (i, a) not in cache:
                cache[(i, a)] = subs[i].truncate(N) ** a
            return cache[(i, a)]

        total = Series.zero(k2, N)
        for a, c in self.terms.items():
            term = Series.constant(k2, N, c)
            for i, e in enumerate(a):
                if e:
                    term = term * pw(i, e)
            total = total + term
        return total

    def evaluate(self, z):
        """Numeric evaluation at ``z`` of shape ``(k, ...)``."""
        z = np.asarray(z, dtype=complex)
        shape = z.shape[1:]
        out = np.zeros(shape, dtype=complex)
        tables = []
        for i in range(self.k):
            m = max((a[i] for a in self.terms), default=0)
            t = [np.ones(shape, dtype=complex)]
            for _ in range(m):
                t.append(t[-1] * z[i])
            tables.append(t)
        for a, c in self.terms.items():
            term = complex(c) * np.ones(shape, dtype=complex)
            for i, e in enumerate(a):
                if e:
                    term = term * tables[i][e]
            out = out + term
        return out

    def to_json(self):
        return [_term_json(a, c) for a, c in sorted(self.terms.items(), key=lambda t: (sum(t[0]), t[0]))]

    @classmethod
    def from_json(cls, k, order, data):
        return cls(k, order, {tuple(t["exp"]): _coef_from_json(t) for t in data})


def _term_json(a, c):
    if is_exact(c):
        g = GaussianRational.coerce(c)
        return {"exp": list(a), "re": str(g.re), "im": str(g.im), "exact": True}
    c = complex(c)
    return {"exp": list(a), "re": c.real, "im": c.imag}


def _coef_from_json(t):
    if t.get("exact"):
        return _simplify(GaussianRational(Fraction(t["re"]), Fraction(t["im"])))
    return complex(float(t["re"]), float(t["im"]))


# ---------------------------------------------------------------------------
# germs
# ---------------------------------------------------------------------------

class Germ:
    """Germ of a holomorphic self-map of ``(C^k, 0)`` truncated at ``order``.

    Parameters
    ----------
    components : sequence of Series or of ``{exponent: coefficient}`` dicts
    order : int, optional
        Needed when plain dicts are given.
    """

    __slots__ = ("k", "order", "components")

    def __init__(self, components, order: int | None = None):
        comps = list(components)
        k = len(comps)
        if k == 0:
            raise ValueError("a germ needs at least one component")
        out = []
        for c in comps:
            if isinstance(c, Series):
                out.append(c)
            else:
                if order is None:
                    raise ValueError("order is required when components are dicts")
                out.append(Series(k, order, c))
        self.order = min(s.order for s in out) if order is None else order
        self.components = tuple(s.with_order(self.order) for s in out)
        self.k = k
        for s in self.components:
            if s.k != k:
                raise ValueError("component arity differs from the number of components")
            if not _is_zero(s.constant_term()):
                raise PreconditionError("germs must fix the origin (constant term must vanish)")

    @classmethod
    def identity(cls, k, order):
        return cls([Series.variable(k, i, order) for i in range(k)], order)

    @property
    def exact(self) -> bool:
        return all(s.exact for s in self.components)

    def linear_coeff(self, j, i):
        e = [0] * self.k
        e[i] = 1
        return self.components[j].coeff(e)

    @property
    def linear_part(self) -> np.ndarray:
        return np.array([[complex(self.linear_coeff(j, i)) for i in range(self.k)]
                         for j in range(self.k)])

    def compose(self, other: "Germ") -> "Germ":
        """``self o other``."""
        return Germ([c.compose(other.components) for c in self.components])

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        return np.stack([c.evaluate(z) for c in self.components])

    def residual(self, other: "Germ") -> float:
        """Largest coefficient difference, up to the common order."""
        N = min(self.order, other.order)
        worst = 0.0
        for a, b in zip(self.components, other.components):
            d = a.truncate(N) - b.truncate(N)
            worst = max(worst, d.max_abs())
        return worst

    def __eq__(self, other):
        if not isinstance(other, Germ):
            return NotImplemented
        return self.components == other.components

    def __repr__(self):
        return f"Germ(k={self.k}, order={self.order})"

    def to_json(self):
        return {"k": self.k, "order": self.order,
                "components": [c.to_json() for c in self.components],
                "linear_part": [[[v.real, v.imag] for v in row] for row in self.linear_part]}

    @classmethod
    def from_json(cls, data):
        k, order = int(data["k"]), int(data["order"])
        return cls([Series.from_json(k, order, c) for c in data["components"]], order)


def linear_germ(M, order: int) -> Germ:
    """Germ of the linear map ``z -> M z``."""
    M = [list(r) for r in M]
    k = len(M)
    comps = []
    for j in range(k):
        t = {}
        for i in range(k):
            e = [0] * k
            e[i] = 1
            t[tuple(e)] = M[j][i]
        comps.append(Series(k, order, t))
    return Germ(comps, order)


def _exact_inverse(M):
    """Gauss-Jordan inverse over the Gaussian rationals."""
    k = len(M)
    aug = [list(M[j]) + [1 if i == j else 0 for i in range(k)] for j in range(k)]
    for c in range(k):
        piv = next(r for r in range(c, k) if not _is_zero(aug[r][c]))
        aug[c], aug[piv] = aug[piv], aug[c]
        p = aug[c][c]
        aug[c] = [_simplify(_div(x, p)) for x in aug[c]]
        for r in range(k):
            if r != c and not _is_zero(aug[r][c]):
                m = aug[r][c]
                aug[r] = [_simplify(x - m * y) for x, y in zip(aug[r], aug[c])]
    return [row[k:] for row in aug]


def inverse_germ(g: Germ) -> Germ:
    """Compositional inverse, solved order by order."""
    k, N = g.k, g.order
    A = g.linear_part
    if abs(np.linalg.det(A)) < 1e-14 * max(1.0, np.abs(A).max()) ** k:
        raise PreconditionError("germ with singular linear part is not invertible")
    if g.exact:
        Ainv = _exact_inverse([[g.linear_coeff(j, i) for i in range(k)] for j in range(k)])
    else:
        Ainv = np.linalg.inv(A)
    nonlin = Germ([Series(k, N, {a: c for a, c in s.terms.items() if sum(a) >= 2})
                   for s in g.components], N)
    ident = Germ.identity(k, N)
    h = linear_germ(Ainv, N)
    for _ in range(N):
        corr = nonlin.compose(h)
        rhs = [ident.components[j] - corr.components[j] for j in range(k)]
        h = Germ([sum((rhs[i] * Ainv[j][i] for i in range(k)), Series.zero(k, N))
                  for j in range(k)], N)
    return h


# ---------------------------------------------------------------------------
# resonances
# ---------------------------------------------------------------------------

def _sort_key(lam, i):
    return (round(abs(lam), 12), round(math.atan2(lam.imag, lam.real) % (2 * math.pi), 12), i)


def sort_eigenvalues(lams):
    """Order by modulus, then argument in ``[0, 2 pi)``, then original index."""
    vals = [complex(x) for x in lams]
    return sorted(range(len(vals)), key=lambda i: _sort_key(vals[i], i))


def _multi_indices(k, m):
    return [tuple(a) for a in monomials(k, m)]


def modulus_bound(lams) -> int:
    mods = [abs(complex(x)) for x in lams]
    lo, hi = min(mods), max(mods)
    return int(math.floor(math.log(hi) / math.log(lo) + 1e-9))


def _lam_power(lams, a):
    out = 1
    for l, e in zip(lams, a):
        if e:
            out = out * (l ** e)
    return out


def resonances(lams, max_order: int | None = None, tol: float = RESONANCE_TOL):
    """All ``(j, alpha)`` with ``|alpha| >= 2`` and ``lambda^alpha = lambda_j``.

    ``j`` starts at 1.  Gaussian-integer eigenvalues are compared exactly.
    Dilation bounds ``|alpha| <= log|lambda_max| / log|lambda_min|``, so the
    list is complete.

    Raises
    ------
    UnsupportedError
        Some eigenvalue has modulus ``<= 1``.
    """
    lams = list(lams)
    if any(abs(complex(x)) <= 1 for x in lams):
        raise UnsupportedError("resonance enumeration needs all |lambda_i| > 1 (dilating)")
    k = len(lams)
    bound = modulus_bound(lams)
    top = bound if max_order is None else min(max_order, bound)
    exact = [_gaussian_integer(x) for x in lams]
    use_exact = all(e is not None for e in exact)
    out = []
    for m in range(2, top + 1):
        for a in _multi_indices(k, m):
            if use_exact:
                pa = _lam_power(exact, a)
                hits = [j for j in range(k) if pa == exact[j]]
            else:
                pa = _lam_power([complex(x) for x in lams], a)
                hits = [j for j in range(k)
                        if abs(pa - complex(lams[j])) <= tol * max(1.0, abs(complex(lams[j])))]
            out.extend((j + 1, a) for j in hits)
    out.sort(key=lambda t: (t[0], sum(t[1]), tuple(-x for x in t[1])))
    return out


# ---------------------------------------------------------------------------
# triangular maps
# ---------------------------------------------------------------------------

class TriangularMap:
    """Polynomial map ``Lambda(z)_j = sum_i L[j][i] z_i + sum_alpha c_{j,alpha} z^alpha``.

    ``L`` is lower triangular with diagonal ``eigenvalues`` (non-decreasing
    modulus) and every nonlinear monomial ``z^alpha`` in component ``j`` is
    resonant, so only variables ``z_1 .. z_{j-1}`` appear in it.
    """

    __slots__ = ("eigenvalues", "linear", "resonant_terms", "check")

    def __init__(self, eigenvalues, linear=None, resonant_terms=None, check: bool = True):
        self.eigenvalues = tuple(eigenvalues)
        k = len(self.eigenvalues)
        if linear is None:
            linear = [[self.eigenvalues[j] if i == j else 0 for i in range(k)] for j in range(k)]
        self.linear = [list(r) for r in linear]
        self.resonant_terms = [dict(t) for t in (resonant_terms or [{} for _ in range(k)])]
        if check:
            self._validate()

    @property
    def k(self):
        return len(self.eigenvalues)

    def _validate(self):
        k = self.k
        mods = [abs(complex(x)) for x in self.eigenvalues]
        if any(b < a - 1e-12 for a, b in zip(mods, mods[1:])):
            raise PreconditionError("eigenvalues must have non-decreasing modulus")
        for j in range(k):
            for i in range(j + 1, k):
                if abs(complex(self.linear[j][i])) > 1e-12:
                    raise PreconditionError("linear part must be lower triangular")
        for j, terms in enumerate(self.resonant_terms):
            for a in terms:
                if any(a[i] for i in range(j, k)):
                    raise PreconditionError(f"monomial {a} in component {j + 1} is not triangular")

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        out = []
        for j in range(self.k):
            v = sum(complex(self.linear[j][i]) * z[i] for i in range(self.k))
            for a, c in self.resonant_terms[j].items():
                term = complex(c)
                for i, e in enumerate(a):
                    if e:
                        term = term * z[i] ** e
                v = v + term
            out.append(v)
        return np.stack(out)

    def inverse(self, y):
        """Solve ``Lambda(z) = y`` by forward substitution."""
        y = np.asarray(y, dtype=complex)
        z = []
        for j in range(self.k):
            v = y[j] - sum(complex(self.linear[j][i]) * z[i] for i in range(j))
            for a, c in self.resonant_terms[j].items():
                term = complex(c)
                for i, e in enumerate(a):
                    if e:
                        term = term * z[i] ** e
                v = v - term
            z.append(v / complex(self.linear[j][j]))
        return np.stack(z)

    def to_germ(self, order: int) -> Germ:
        k = self.k
        comps = []
        for j in range(k):
            t = {}
            for i in range(k):
                e = [0] * k
                e[i] = 1
                t[tuple(e)] = self.linear[j][i]
            t.update(self.resonant_terms[j])
            comps.append(Series(k, order, t))
        return Germ(comps, order)

    def nonlinear_count(self) -> int:
        return sum(len(t) for t in self.resonant_terms)

    def to_json(self):
        return {"k": self.k,
                "eigenvalues": [[complex(x).real, complex(x).imag] for x in self.eigenvalues],
                "linear": [[_term_json((0,), c)["re"] if False else [complex(c).real, complex(c).imag]
                            for c in row] for row in self.linear],
                "resonant_terms": [[_term_json(a, c) for a, c in sorted(t.items())]
                                   for t in self.resonant_terms]}

    @classmethod
    def from_json(cls, data):
        eig = [complex(a, b) for a, b in data["eigenvalues"]]
        lin = [[complex(a, b) for a, b in row] for row in data["linear"]]
        terms = [{tuple(t["exp"]): _coef_from_json(t) for t in comp}
                 for comp in data["resonant_terms"]]
        return cls(eig, lin, terms)


# ---------------------------------------------------------------------------
# Sternberg normalization
# ---------------------------------------------------------------------------

def _apply_linear(M, comps, k, order):
    return [sum((comps[i] * M[j][i] for i in range(k) if not _is_zero(M[j][i])),
                Series.zero(k, order)) for j in range(k)]


def _ordered_schur(L, order):
    """Unitary ``Q`` with ``Q^* L Q`` upper triangular, diagonal following ``order``."""
    n = L.shape[0]
    vals = np.linalg.eigvals(L)
    target = [vals[i] for i in order]
    cols = []
    for s in range(n):
        if cols:
            Qs = np.column_stack(cols)
            U = np.linalg.svd(np.eye(n) - Qs @ Qs.conj().T)[0][:, : n - s]
        else:
            U = np.eye(n, dtype=complex)
        A = U.conj().T @ L @ U
        w, V = np.linalg.eig(A)
        i = int(np.argmin(np.abs(w - target[s])))
        x = U @ V[:, i]
        cols.append(x / np.linalg.norm(x))
    return np.column_stack(cols)


def _triangular_frame(g: Germ):
    """Change of coordinates ``P`` making the linear part lower triangular and sorted.

    Returns ``(P, Pinv, eigenvalues)``; ``P`` is exact (identity or a
    permutation) whenever that suffices, so exact germs stay exact.
    """
    k = g.k
    Lx = [[g.linear_coeff(j, i) for i in range(k)] for j in range(k)]
    L = np.array([[complex(x) for x in r] for r in Lx])
    lower = all(_is_zero(Lx[j][i]) for j in range(k) for i in range(j + 1, k))
    diag = [Lx[j][j] for j in range(k)]
    if lower:
        order = sort_eigenvalues(diag)
        if order == list(range(k)):
            I = [[1 if i == j else 0 for i in range(k)] for j in range(k)]
            return I, I, diag
    diagonal = all(_is_zero(Lx[j][i]) for j in range(k) for i in range(k) if i != j)
    if diagonal:
        order = sort_eigenvalues(diag)
        P = [[1 if i == order[j] else 0 for j in range(k)] for i in range(k)]
        Pinv = [[P[i][j] for i in range(k)] for j in range(k)]
        return P, Pinv, [diag[i] for i in order]
    vals = np.linalg.eigvals(L)
    order = sort_eigenvalues(vals)
    w, V = np.linalg.eig(L)
    # pair eigenvectors with the sorted eigenvalues
    idx = [int(np.argmin(np.abs(w - vals[i]))) for i in order]
    if len(set(idx)) == k and np.linalg.cond(V[:, idx]) < 1e6:
        P = V[:, idx]
        P = P / np.abs(P).max(axis=0)
    else:
        Q = _ordered_schur(L, order[::-1])
        P = Q[:, ::-1]
    Pinv = np.linalg.inv(P)
    T = Pinv @ L @ P
    eig = [T[j, j] for j in range(k)]
    return P.tolist(), Pinv.tolist(), eig


def _conjugate(g: Germ, P, Pinv) -> Germ:
    """``P^{-1} o g o P``."""
    k, N = g.k, g.order
    Pg = linear_germ(P, N)
    inner = g.compose(Pg)
    return Germ(_apply_linear(Pinv, list(inner.components), k, N), N)


def _resonant_set(eig, m, exact_eig):
    """Classify every ``(j, alpha)`` of degree ``m``: divisor and resonance flag."""
    k = len(eig)
    out = {}
    for a in _multi_indices(k, m):
        for j in range(k):
            if exact_eig is not None:
                div = _lam_power(exact_eig, a) - exact_eig[j]
                res = div == 0
            else:
                pa = _lam_power([complex(x) for x in eig], a)
                div = complex(eig[j]) - pa
                div = -div
                res = abs(div) <= EXACT_RESONANCE_TOL * max(1.0, abs(complex(eig[j])))
            out[(j, a)] = (div, res)
    return out


def sternberg_normalize(g: Germ, order: int | None = None):
    """Conjugate a dilating germ to its triangular normal form.

    Finds ``phi`` (invertible linear part) and a triangular map ``Lambda``
    holding only resonant monomials with ``g o phi = phi o Lambda`` up to the
    truncation order.  The homological equation is solved degree by degree;
    a nonresonant monomial with divisor ``lambda^alpha - lambda_j`` receives
    the known lower-order data divided by that divisor, a resonant one is
    kept in ``Lambda``.

    Returns
    -------
    phi : Germ
    Lambda : TriangularMap

    Raises
    ------
    UnsupportedError
        Some eigenvalue has modulus ``<= 1``.
    IllConditionedError
        A nonresonant divisor is below ``1e-9``.
    """
    N = g.order if order is None else min(order, g.order)
    if N != g.order:
        g = Germ([c.truncate(N) for c in g.components], N)
    k = g.k
    P, Pinv, eig = _triangular_frame(g)
    if any(abs(complex(x)) <= 1 for x in eig):
        raise UnsupportedError("normalization needs a dilating germ (all |lambda| > 1)")
    h = _conjugate(g, P, Pinv)
    exact_eig = None
    if h.exact:
        ge = [_gaussian_integer(x) for x in eig]
        if all(x is not None for x in ge):
            exact_eig = ge
    Lmat = [[h.linear_coeff(j, i) for i in range(k)] for j in range(k)]
    for j in range(k):
        for i in range(j + 1, k):
            Lmat[j][i] = 0
    if exact_eig is None:
        # discard rounding noise above the diagonal of the conjugated linear part
        Lmat = [[complex(x) for x in r] for r in Lmat]
    diagonal = all(_is_zero(Lmat[j][i]) for j in range(k) for i in range(k) if i != j)
    psi = [Series.variable(k, j, N) for j in range(k)]
    Lam_terms = [dict() for _ in range(k)]
    Lam = TriangularMap([Lmat[j][j] for j in range(k)], Lmat, Lam_terms, check=False)
    for m in range(2, N + 1):
        psi_m = [ps.with_order(m) for ps in psi]
        hm = Germ([c.truncate(m) for c in h.components], m)
        lhs = Germ(psi_m, m).compose(Lam.to_germ(m))
        rhs = hm.compose(Germ(psi_m, m))
        R = [lhs.components[j] - rhs.components[j] for j in range(k)]
        cls = _resonant_set(eig, m, exact_eig)
        if diagonal:
            sol_psi, sol_lam = _solve_diagonal(R, cls, m, k)
        else:
            sol_psi, sol_lam = _solve_triangular(R, cls, m, k, Lmat)
        for j in range(k):
            new = dict(psi[j].terms)
            new.update(sol_psi[j])
            psi[j] = Series(k, N, new)
            Lam_terms[j].update(sol_lam[j])
        Lam = TriangularMap([Lmat[j][j] for j in range(k)], Lmat, Lam_terms, check=False)
    if not h.exact:
        psi, Lam_terms = _refine(g, psi, Lam_terms, P, Pinv, eig, Lmat, diagonal, N)
    phi = Germ(_apply_linear(P, psi, k, N), N)
    Lam = TriangularMap([Lmat[j][j] for j in range(k)], Lmat, Lam_terms, check=True)
    return phi, Lam


def _refine(g, psi, Lam_terms, P, Pinv, eig, Lmat, diagonal, N, passes=2):
    """Defect correction against the original germ.

    Rounding in the conjugated germ grows like ``cond(P)**m`` at degree
    ``m``; recomputing ``g o phi - phi o Lambda`` in the original coordinates
    and solving the homological equation for the correction removes it.
    """
    k = g.k
    psi = list(psi)
    Lam_terms = [dict(t) for t in Lam_terms]
    for _ in range(passes):
        for m in range(2, N + 1):
            Lam = TriangularMap([Lmat[j][j] for j in range(k)], Lmat, Lam_terms, check=False)
            phi_m = Germ(_apply_linear(P, [ps.with_order(m) for ps in psi], k, m), m)
            gm = Germ([c.truncate(m) for c in g.components], m)
            E = [a - b for a, b in zip(gm.compose(phi_m).components,
                                      phi_m.compose(Lam.to_germ(m)).components)]
            r = _apply_linear(Pinv, [Series(k, m, e.part(m)) for e in E], k, m)
            R = [-x for x in r]
            cls = _resonant_set(eig, m, None)
            if diagonal:
                d_psi, d_lam = _solve_diagonal(R, cls, m, k)
            else:
                d_psi, d_lam = _solve_triangular(R, cls, m, k, Lmat)
            for j in range(k):
                new = dict(psi[j].terms)
                for a, c in d_psi[j].items():
                    new[a] = new.get(a, 0) + c
                psi[j] = Series(k, N, new)
                for a, c in d_lam[j].items():
                    Lam_terms[j][a] = Lam_terms[j].get(a, 0) + c
    return psi, Lam_terms


def _solve_diagonal(R, cls, m, k):
    sol_psi = [dict() for _ in range(k)]
    sol_lam = [dict() for _ in range(k)]
    for (j, a), (div, res) in cls.items():
        r = R[j].coeff(a)
        if res:
            if not _is_zero(r):
                sol_lam[j][a] = -r if is_exact(r) else -complex(r)
            continue
        if not is_exact(div) and abs(div) < SMALL_DIVISOR:
            raise IllConditionedError(
                f"small divisor {abs(div):.3e} at component {j + 1}, exponent {a}")
        if _is_zero(r):
            continue
        sol_psi[j][a] = _div(r, -div) if is_exact(div) else complex(r) / complex(-div)
    return sol_psi, sol_lam


def _solve_triangular(R, cls, m, k, Lmat):
    """Dense solve of ``L psi - psi o L - Lambda_m = R`` on degree-``m`` data."""
    mons = _multi_indices(k, m)
    pos = {a: n for n, a in enumerate(mons)}
    nm = len(mons)
    size = k * nm
    L = np.array([[complex(x) for x in r] for r in Lmat])
    lin = [HomPolynomial(k, 1, {tuple(int(i == c) for i in range(k)): L[r][c]
                                 for c in range(k) if L[r][c] != 0}) for r in range(k)]
    op = np.zeros((size, size), dtype=complex)
    for i in range(k):
        for b in mons:
            col = i * nm + pos[b]
            for j in range(k):
                if L[j][i] != 0:
                    op[j * nm + pos[b], col] += L[j][i]
            comp = HomPolynomial.monomial(b).compose(lin) if any(b) else None
            for a, c in comp.terms.items():
                op[i * nm + pos[a], col] -= c
    rhs = np.array([complex(R[j].coeff(a)) for j in range(k) for a in mons])
    cols = []
    kinds = []
    for j in range(k):
        for a in mons:
            div, res = cls[(j, a)]
            idx = j * nm + pos[a]
            if res:
                v = np.zeros(size, dtype=complex)
                v[idx] = -1
                cols.append(v)
                kinds.append(("lam", j, a))
            else:
                if abs(complex(div)) < SMALL_DIVISOR:
                    raise IllConditionedError(
                        f"small divisor {abs(complex(div)):.3e} at component {j + 1}, exponent {a}")
                cols.append(op[:, idx])
                kinds.append(("psi", j, a))
    A = np.column_stack(cols)
    x = np.linalg.solve(A, rhs)
    sol_psi = [dict() for _ in range(k)]
    sol_lam = [dict() for _ in range(k)]
    for (kind, j, a), v in zip(kinds, x):
        if v == 0:
            continue
        (sol_psi if kind == "psi" else sol_lam)[j][a] = complex(v)
    return sol_psi, sol_lam


def conjugacy_residual(g: Germ, phi: Germ, Lam: TriangularMap) -> float:
    """Largest coefficient of ``g o phi - phi o Lambda`` up to the common order."""
    N = min(g.order, phi.order)
    left = g.compose(phi)
    right = phi.compose(Lam.to_germ(N))
    return left.residual(right)


def is_lambda_triangular(Lam: TriangularMap, tol: float = RESONANCE_TOL) -> bool:
    """Every stored monomial satisfies the resonance relation for its component."""
    lams = [complex(x) for x in Lam.eigenvalues]
    for j, terms in enumerate(Lam.resonant_terms):
        for a in terms:
            if abs(_lam_power(lams, a) - lams[j]) > tol * max(1.0, abs(lams[j])):
                return False
    return True


# ---------------------------------------------------------------------------
# commuting germs
# ---------------------------------------------------------------------------

@dataclass
class CommonNormalForm:
    phi: Germ
    Lambda1: TriangularMap
    Lambda2: Germ
    leak: float
    commutation_residual: float
    g2_invertible: bool

    def to_json(self):
        return {"phi": self.phi.to_json(), "Lambda1": self.Lambda1.to_json(),
                "Lambda2": self.Lambda2.to_json(), "leak": self.leak,
                "commutation_residual": self.commutation_residual,
                "g2_invertible": self.g2_invertible}


def common_triangularize(g1: Germ, g2: Germ, order: int | None = None) -> CommonNormalForm:
    """Normalize ``g1`` and carry ``g2`` along with the same ``phi``.

    ``Lambda2 = phi^{-1} o g2 o phi`` should only contain monomials that are
    resonant for the eigenvalues of ``g1``; ``leak`` is the largest
    coefficient that is not.

    Raises
    ------
    PreconditionError
        The germs do not commute to truncation order.
    CommutationViolation
        ``leak`` exceeds ``1e-6``.
    """
    N = min(g1.order, g2.order) if order is None else order
    g1 = Germ([c.truncate(N) for c in g1.components], N)
    g2 = Germ([c.truncate(N) for c in g2.components], N)
    scale = max(1.0, max(c.max_abs() for c in g1.components + g2.components))
    comm = g1.compose(g2).residual(g2.compose(g1))
    if comm > 1e-6 * scale:
        raise PreconditionError(f"germs do not commute (residual {comm:.3e})")
    invertible = abs(np.linalg.det(g2.linear_part)) > 1e-12
    if not invertible:
        raise PreconditionError("second germ has a singular linear part")
    phi, Lam1 = sternberg_normalize(g1, N)
    L2 = inverse_germ(phi).compose(g2.compose(phi))
    lams = [complex(x) for x in Lam1.eigenvalues]
    leak = 0.0
    comps = []
    for j, s in enumerate(L2.components):
        keep = {}
        for a, c in s.terms.items():
            if abs(_lam_power(lams, a) - lams[j]) <= RESONANCE_TOL * max(1.0, abs(lams[j])):
                keep[a] = c
            else:
                leak = max(leak, abs(complex(c)))
        comps.append(Series(g1.k, N, keep))
    if leak > LEAK_ERROR:
        raise CommutationViolation(f"Lambda2 has a nonresonant coefficient of size {leak:.3e}")
    return CommonNormalForm(phi, Lam1, Germ(comps, N), leak, comm, invertible)


# ---------------------------------------------------------------------------
# germs of global maps and Poincaré maps
# ---------------------------------------------------------------------------

def _chart(p):
    w = canonical(np.asarray(p, dtype=complex))
    piv = 0 if abs(w[0]) >= 1e-3 * np.abs(w).max() else int(np.argmax(np.abs(w)))
    w = w / w[piv]
    free = [i for i in range(w.size) if i != piv]
    return w, piv, free


def _exactify(x, tol=1e-15):
    g = _gaussian_integer(x, tol)
    return g


def germ_from_map(f: ProjectiveMap, p, order: int = DEFAULT_ORDER) -> Germ:
    """Taylor expansion of ``f`` at a fixed point ``p`` in an affine chart.

    The chart is ``w0 = 1`` when ``p`` is finite there, otherwise the chart of
    the largest coordinate; the coordinate ``u`` is the chart coordinate
    minus that of ``p``.

    Raises
    ------
    PreconditionError
        ``p`` is not fixed.
    """
    arr = p.array if isinstance(p, ProjectivePoint) else np.asarray(p, dtype=complex)
    if projective_distance(apply_batch(f, arr[:, None], 1)[:, 0], canonical(arr)) > 1e-10:
        raise PreconditionError("germ_from_map needs a fixed point")
    w, piv, free = _chart(arr)
    k = f.k
    ex = [_exactify(x) for x in w] if f.exact else None
    exact = ex is not None and all(x is not None for x in ex)
    base = ex if exact else [complex(x) for x in w]
    pt = []
    for i in range(k + 1):
        if i == piv:
            pt.append(Series.constant(k, order, 1))
        else:
            pt.append(Series.constant(k, order, base[i]) + Series.variable(k, free.index(i), order))
    lift = f.lift if exact else [c.to_numeric() for c in f.lift]
    F = [c.evaluate(pt) for c in lift]
    inv = F[piv].reciprocal()
    comps = []
    for a, i in enumerate(free):
        s = F[i] * inv - base[i]
        t = dict(s.terms)
        t.pop((0,) * k, None)
        comps.append(Series(k, order, t))
    return Germ(comps, order)


@dataclass
class PoincareMap:
    """Globalized normalizing map ``C^k -> P^k`` of ``f`` at a repelling fixed point."""

    local: Germ
    normal_form: TriangularMap
    global_map: ProjectiveMap
    fixed_point: ProjectivePoint
    radius: float
    pivot: int
    max_steps: int = 10_000

    def to_json(self):
        return {"local": self.local.to_json(), "normal_form": self.normal_form.to_json(),
                "global_map": self.global_map.to_json(), "fixed_point": self.fixed_point.to_json(),
                "radius": self.radius, "pivot": self.pivot}


def tail_radius(phi: Germ, tol: float = 1e-12) -> float:
    """Largest dyadic ``r`` where the top-degree terms of ``phi`` stay below ``tol`` on the polydisk.

    The last four degrees are all bounded, so germs with a rotational
    symmetry (only odd terms, say) cannot report a spuriously large radius.
    """
    N = phi.order
    degs = range(max(2, N - 3), N + 1)
    tops = {m: max(sum(abs(complex(c)) for a, c in s.terms.items() if sum(a) == m)
                   for s in phi.components) for m in degs}
    lin = max(1.0, np.abs(phi.linear_part).max())
    best = 2.0 ** -30
    for e in range(-30, 31):
        r = 2.0 ** e
        if all(t * r ** m <= tol * lin * r for m, t in tops.items()):
            best = r
        else:
            break
    return best


def poincare_map(f: ProjectiveMap, p, order: int | None = None, tail_tol: float = 1e-12) -> PoincareMap:
    """Build the Poincaré map of ``f`` at the repelling fixed point ``p``."""
    order = (24 if f.k == 1 else 10) if order is None else order
    g = germ_from_map(f, p, order)
    phi, Lam = sternberg_normalize(g, order)
    arr = p.array if isinstance(p, ProjectivePoint) else np.asarray(p, dtype=complex)
    _, piv, _ = _chart(arr)
    return PoincareMap(phi, Lam, f, ProjectivePoint(arr), tail_radius(phi, tail_tol), piv)


def _chart_point(pm: PoincareMap, u):
    w, piv, free = _chart(pm.fixed_point.array)
    out = np.empty((w.size,) + u.shape[1:], dtype=complex)
    out[piv] = 1
    for a, i in enumerate(free):
        out[i] = w[i] + u[a]
    return out


def poincare_eval(pm: PoincareMap, z, extra: int = 0):
    """``f^n(phi_loc(Lambda^{-n} z))`` with the smallest admissible ``n`` (plus ``extra``).

    ``z`` has shape ``(k,)`` or ``(k, M)``; returns canonical homogeneous
    coordinates of shape ``(k+1,)`` or ``(k+1, M)``.
    """
    z = np.asarray(z, dtype=complex)
    single = z.ndim == 1
    Z = z[:, None] if single else z
    M = Z.shape[1]
    out = np.empty((pm.global_map.k + 1, M), dtype=complex)
    Y = Z.copy()
    steps = np.zeros(M, dtype=int)
    active = np.abs(Y).max(axis=0) >= pm.radius
    for _ in range(pm.max_steps):
        if not active.any():
            break
        Y[:, active] = pm.normal_form.inverse(Y[:, active])
        steps[active] += 1
        active = np.abs(Y).max(axis=0) >= pm.radius
    for _ in range(extra):
        Y = pm.normal_form.inverse(Y)
        steps += 1
    W = _chart_point(pm, pm.local.evaluate(Y))
    for n in np.unique(steps):
        sel = steps == n
        out[:, sel] = apply_batch(pm.global_map, W[:, sel], int(n)) if n else canonical(W[:, sel])
    return out[:, 0] if single else out


def semiconjugacy_residual(f: ProjectiveMap, pm: PoincareMap, samples) -> float:
    """Max projective distance between ``f(phi(z))`` and ``phi(Lambda(z))``."""
    Z = np.asarray(samples, dtype=complex)
    if Z.ndim == 1:
        Z = Z[:, None] if pm.global_map.k == 1 and Z.shape[0] != 1 else Z.reshape(pm.global_map.k, -1)
    if Z.shape[0] != pm.global_map.k:
        Z = Z.T
    left = apply_batch(f, poincare_eval(pm, Z), 1)
    right = poincare_eval(pm, pm.normal_form.evaluate(Z))
    return float(np.max(projective_distance(left, right)))


def n_independence(pm: PoincareMap, samples) -> float:
    """Max distance between evaluations using ``n`` and ``n + 1`` pullbacks."""
    Z = np.asarray(samples, dtype=complex)
    if Z.ndim == 1:
        Z = Z.reshape(pm.global_map.k, -1)
    return float(np.max(projective_distance(poincare_eval(pm, Z), poincare_eval(pm, Z, extra=1))))
