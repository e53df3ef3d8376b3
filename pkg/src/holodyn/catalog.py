"""Constructors for the known families of commuting endomorphisms (k <= 2).

Families: power maps, Chebyshev polynomials, monomial maps of P^2, products
of a commuting P^1 pair, coordinatewise Chebyshev/power pairs, symmetric
products, and Lattès maps built from the Weierstrass function.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import qmc

from .algebra import GaussianRational, HomPolynomial, exact_from_complex, is_exact
from .errors import ConstructionError, InternalInvariantError, PoleError, PreconditionError
from .projmap import (CommutationReport, ProjectiveMap, commutes, make_map, principal_root,
                      projective_distance)

FAMILIES = ("power", "chebyshev", "monomial_p2", "product_p2", "cheb_power", "cheb_cheb",
            "symmetric_product", "lattes")


@dataclass
class CommutingPair:
    f1: ProjectiveMap
    f2: ProjectiveMap
    family: str
    parameters: dict
    certificate: CommutationReport

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.certificate.commutes:
            raise ConstructionError(f"{self.family} pair failed its commutation certificate")

    def to_json(self):
        return {"family": self.family, "parameters": _jsonable(self.parameters),
                "f1": self.f1.to_json(), "f2": self.f2.to_json(),
                "certificate": self.certificate.to_json()}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (GaussianRational, Fraction)) or isinstance(x, complex):
        c = complex(x)
        return [c.real, c.imag]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _certify(f1, f2, family, params, tol=1e-7):
    mode = "exact" if (f1.exact and f2.exact) else "numeric"
    rep = commutes(f1, f2, mode, tol)
    if not rep.commutes:
        raise ConstructionError(f"{family}: maps do not commute ({params.get('constraint', '')})")
    return CommutingPair(f1, f2, family, params, rep)


def _exact_or_complex(c):
    """Keep exact values exact; turn Gaussian rationals given as floats into exact values."""
    if is_exact(c):
        return c
    c = complex(c)
    e = exact_from_complex(c, 1000)
    if abs(complex(e) - c) <= 1e-15 * max(1.0, abs(c)):
        return e
    return c


def _sign(s):
    if s in (1, "+", "+1"):
        return 1
    if s in (-1, "-", "-1"):
        return -1
    raise ValueError(f"sign must be +1 or -1, got {s!r}")


# ---------------------------------------------------------------------------
# Chebyshev and power maps
# ---------------------------------------------------------------------------

def chebyshev_coeffs(d: int) -> list[int]:
    """Integer coefficients of ``T_d`` (ascending powers)."""
    if d < 0:
        raise ValueError("d must be non-negative")
    prev, cur = [1], [0, 1]
    if d == 0:
        return prev
    for _ in range(d - 1):
        nxt = [0] + [2 * c for c in cur]
        for i, c in enumerate(prev):
            nxt[i] -= c
        prev, cur = cur, nxt
    return cur


def chebyshev_poly(d: int):
    """``(T_d homogenized in (w0, w1), ascending integer coefficients)``."""
    if d < 1:
        raise ValueError("d must be at least 1")
    c = chebyshev_coeffs(d)
    return HomPolynomial.from_binary(c, d), c


def chebyshev_map(d: int, sign: int = 1) -> ProjectiveMap:
    T, _ = chebyshev_poly(d)
    s = _sign(sign)
    lift = [HomPolynomial(2, d, {(d, 0): 1}), T if s == 1 else -T]
    return make_map(lift, label=f"{'' if s == 1 else '-'}T{d}")


def power_map(d: int, sign: int = 1, lam=1) -> ProjectiveMap:
    """``z -> lam z^{+d}`` or ``z -> lam z^{-d}``."""
    s = _sign(sign)
    lam = _exact_or_complex(lam)
    if s == 1:
        lift = [HomPolynomial(2, d, {(d, 0): 1}), HomPolynomial(2, d, {(0, d): lam})]
    else:
        lift = [HomPolynomial(2, d, {(0, d): 1}), HomPolynomial(2, d, {(d, 0): lam})]
    return make_map(lift, label=f"{lam}*z^{s * d}")


def power_constraint(d1: int, s1: int) -> int:
    """Order ``n`` of the root-of-unity condition ``lam^n = 1`` on the second map."""
    return d1 - 1 if _sign(s1) == 1 else d1 + 1


def _roots_of_unity(n):
    return [cmath.exp(2j * math.pi * j / n) for j in range(n)]


def power_pair(d1: int, d2: int, signs=(1, 1), lam="solve") -> CommutingPair:
    """``f1 = z^{+-d1}``, ``f2 = lam z^{+-d2}``.

    Expanding both compositions gives ``lam^(s1*d1) = lam``: ``lam^(d1-1) = 1``
    for ``s1 = +1`` and ``lam^(d1+1) = 1`` for ``s1 = -1``.  With
    ``lam='solve'`` the principal root (``1``) is used and the full solution
    set is reported.
    """
    if d1 < 2 or d2 < 2:
        raise PreconditionError("degrees must be >= 2")
    s1, s2 = (_sign(s) for s in signs)
    n = power_constraint(d1, s1)
    constraint = f"lambda^{n} = 1"
    if lam == "solve":
        lam = 1
    else:
        lam = _exact_or_complex(lam)
        if lam == 0:
            raise ConstructionError("lambda must be nonzero")
        ok = (GaussianRational.coerce(lam) ** n == 1) if is_exact(lam) else \
            abs(complex(lam) ** n - 1) <= 1e-12
        if not ok:
            raise ConstructionError(f"power pair needs {constraint}; lambda = {lam} fails it")
    params = {"d1": d1, "d2": d2, "signs": [s1, s2], "lambda": lam, "constraint": constraint,
              "solutions": f"the {n}-th roots of unity"}
    return _certify(power_map(d1, s1), power_map(d2, s2, lam), "power", params)


def chebyshev_pair(d1: int, d2: int, signs=(1, 1)) -> CommutingPair:
    """``(s1 T_{d1}, s2 T_{d2})``; validity decided by exact composition."""
    if d1 < 2 or d2 < 2:
        raise PreconditionError("degrees must be >= 2")
    s1, s2 = (_sign(s) for s in signs)
    f1, f2 = chebyshev_map(d1, s1), chebyshev_map(d2, s2)
    rep = commutes(f1, f2, "exact")
    params = {"d1": d1, "d2": d2, "signs": [s1, s2]}
    if not rep.commutes:
        raise ConstructionError(
            f"{'' if s1 == 1 else '-'}T{d1} o {'' if s2 == 1 else '-'}T{d2} != "
            f"{'' if s2 == 1 else '-'}T{d2} o {'' if s1 == 1 else '-'}T{d1}: "
            f"{_first_difference(f1, f2)}")
    return CommutingPair(f1, f2, "chebyshev", params, rep)


def _first_difference(f1, f2):
    """Describe the first coefficient where the two affine compositions differ."""
    A = [p.compose(list(f2.lift)) for p in f1.lift]
    B = [p.compose(list(f1.lift)) for p in f2.lift]
    # both first components are w0^(d1 d2), so compare second components directly
    for e in sorted(set(A[1].terms) | set(B[1].terms), reverse=True):
        a, b = A[1].coeff(e), B[1].coeff(e)
        if a != b:
            return f"coefficient of z^{e[1]}: {a} vs {b}"
    return "lifts differ by a non-normalizable scalar"


def valid_chebyshev_signs(d1: int, d2: int):
    out = []
    for s1 in (1, -1):
        for s2 in (1, -1):
            if commutes(chebyshev_map(d1, s1), chebyshev_map(d2, s2), "exact").commutes:
                out.append((s1, s2))
    return out


# ---------------------------------------------------------------------------
# P^2 families
# ---------------------------------------------------------------------------

def _var(i, d, c=1):
    e = [0, 0, 0]
    e[i] = d
    return HomPolynomial(3, d, {tuple(e): c})


def _perm(p):
    p = tuple(int(x) for x in p)
    if sorted(p) != [0, 1, 2]:
        raise ValueError(f"{p} is not a permutation of (0, 1, 2)")
    return p


def monomial_map_p2(perm, d, constants=(1, 1, 1)) -> ProjectiveMap:
    perm = _perm(perm)
    return make_map([_var(perm[i], d, _exact_or_complex(constants[i])) for i in range(3)],
                    label=f"monomial{perm}^{d}")


def monomial_pair_p2(perm1, perm2, d1: int, d2: int, constants="solve") -> CommutingPair:
    """``f1 = [w_{a0}^d1 : w_{a1}^d1 : w_{a2}^d1]``, ``f2 = [l_i w_{n_i}^d2]``.

    The compositions agree only if the permutations commute; the constants
    must then satisfy ``l_{a(i)}^d1 = c * l_i`` for one common ``c``.
    ``constants='solve'`` picks the principal solution ``(1, 1, 1)``.
    """
    a, n = _perm(perm1), _perm(perm2)
    if d1 < 2 or d2 < 2:
        raise PreconditionError("degrees must be >= 2")
    if any(n[a[i]] != a[n[i]] for i in range(3)):
        raise ConstructionError(f"permutations {a} and {n} do not commute")
    constraint = "lambda_{a(i)}^d1 = c * lambda_i for a common c"
    if constants == "solve":
        lams = (1, 1, 1)
    else:
        lams = tuple(_exact_or_complex(c) for c in constants)
        if any(c == 0 for c in lams):
            raise ConstructionError("constants must be nonzero")
        ratios = [complex(lams[a[i]]) ** d1 / complex(lams[i]) for i in range(3)]
        if max(abs(r - ratios[0]) for r in ratios) > 1e-12 * max(1, abs(ratios[0])):
            raise ConstructionError(f"constants {lams} violate {constraint}")
    params = {"perm1": list(a), "perm2": list(n), "d1": d1, "d2": d2, "constants": list(lams),
              "constraint": constraint}
    return _certify(monomial_map_p2(a, d1), monomial_map_p2(n, d2, lams), "monomial_p2", params)


def _product_lift(h: ProjectiveMap, lam=1) -> list[HomPolynomial]:
    """``[w0^d : lam P(w1, w2) : lam Q(w1, w2)]`` from a lift ``(P, Q)`` of a P^1 map."""
    d = h.degree
    shift = [_shift_binary(p, lam) for p in h.lift]
    return [_var(0, d)] + shift


def _shift_binary(p: HomPolynomial, lam):
    return HomPolynomial(3, p.degree, {(0,) + e: c * lam for e, c in p.terms.items()},
                         exact=None)


def product_pair_p2(h1: ProjectiveMap, h2: ProjectiveMap, lam="solve") -> CommutingPair:
    """Homogeneous lifts ``(P_i, Q_i)`` of a commuting P^1 pair as affine maps of C^2.

    ``f1 = (P1, Q1)`` and ``f2 = lam (P2, Q2)`` commute iff
    ``lam^(d1-1) = 1/mu`` where ``H1 o H2 = mu H2 o H1`` for the given lifts.
    """
    if h1.k != 1 or h2.k != 1:
        raise PreconditionError("product_pair_p2 takes two P^1 maps")
    mode = "exact" if (h1.exact and h2.exact) else "numeric"
    rep = commutes(h1, h2, mode)
    if not rep.commutes:
        raise PreconditionError("the P^1 pair does not commute")
    mu = rep.lam
    d1 = h1.degree
    constraint = f"lambda^{d1 - 1} = 1/mu with mu = {complex(mu)}"
    if lam == "solve":
        lam = rep.theta_exact if rep.theta_exact is not None else _exact_or_complex(rep.theta)
    else:
        lam = _exact_or_complex(lam)
        if abs(complex(lam) ** (d1 - 1) * complex(mu) - 1) > 1e-10:
            raise ConstructionError(f"product pair needs {constraint}")
    f1 = make_map(_product_lift(h1), label=f"product({h1.label})")
    f2 = make_map(_product_lift(h2, lam), label=f"product({h2.label})")
    params = {"h1": h1.label, "h2": h2.label, "lambda": lam, "mu": mu, "constraint": constraint,
              "solutions": f"lambda = theta * zeta with theta^{d1 - 1} = 1/mu, zeta^{d1 - 1} = 1"}
    return _certify(f1, f2, "product_p2", params)


def _coordinatewise(d, first_affine, second_affine):
    """P^2 lift of ``(A(z1), B(z2))`` from ascending affine coefficient lists."""
    def hom(coeffs, var):
        t = {}
        for j, c in enumerate(coeffs):
            if c != 0:
                e = [d - j, 0, 0]
                e[var] = j
                t[tuple(e)] = t.get(tuple(e), 0) + c
        return HomPolynomial(3, d, t)
    return [_var(0, d), hom(first_affine, 1), hom(second_affine, 2)]


def _swap_lift(lift):
    """Lift of ``sigma o f`` with ``sigma`` the exchange of ``z1`` and ``z2``."""
    return [lift[0], lift[2], lift[1]]


def cheb_power_pair(d1: int, d2: int, signs=(1, 1), lam="solve", power_signs=(1, 1)) -> CommutingPair:
    """``f1 = (z1^d1, s1 T_d1(z2))`` and ``f2 = (lam z1^d2, s2 T_d2(z2))``.

    Negative exponents are rejected: on P^2 the lift of ``(z1^-d, T_d(z2))``
    has a common zero on the line at infinity.
    """
    if any(_sign(s) == -1 for s in power_signs):
        raise ConstructionError("negative powers combined with a Chebyshev factor are degenerate on P^2")
    s1, s2 = (_sign(s) for s in signs)
    chebyshev_pair(d1, d2, (s1, s2))
    n = d1 - 1
    if lam == "solve":
        lam = 1
    else:
        lam = _exact_or_complex(lam)
        if abs(complex(lam) ** n - 1) > 1e-12:
            raise ConstructionError(f"cheb_power pair needs lambda^{n} = 1")
    t1 = [s1 * c for c in chebyshev_coeffs(d1)]
    t2 = [s2 * c for c in chebyshev_coeffs(d2)]
    f1 = make_map(_coordinatewise(d1, [0] * d1 + [1], t1), label=f"(z^{d1}, T{d1})")
    f2 = make_map(_coordinatewise(d2, [0] * d2 + [lam], t2), label=f"(lam z^{d2}, T{d2})")
    params = {"d1": d1, "d2": d2, "signs": [s1, s2], "lambda": lam,
              "constraint": f"lambda^{n} = 1 and the Chebyshev signs commute"}
    return _certify(f1, f2, "cheb_power", params)


def cheb_cheb_pair(d1: int, d2: int, signs=(1, 1), swap: bool = False) -> CommutingPair:
    """``f_i = (s_i T_{d_i}(z1), s_i T_{d_i}(z2))``; ``swap`` exchanges the outputs of ``f1``."""
    s1, s2 = (_sign(s) for s in signs)
    t1 = [s1 * c for c in chebyshev_coeffs(d1)]
    t2 = [s2 * c for c in chebyshev_coeffs(d2)]
    l1 = _coordinatewise(d1, t1, t1)
    if swap:
        l1 = _swap_lift(l1)
    f1 = make_map(l1, label=f"T{d1}x T{d1}{' swapped' if swap else ''}")
    f2 = make_map(_coordinatewise(d2, t2, t2), label=f"T{d2}x T{d2}")
    params = {"d1": d1, "d2": d2, "signs": [s1, s2], "swap": bool(swap)}
    rep = commutes(f1, f2, "exact")
    if not rep.commutes:
        raise ConstructionError(f"cheb_cheb pair with signs {(s1, s2)} and swap={swap} does not commute")
    return CommutingPair(f1, f2, "cheb_cheb", params, rep)


# ---------------------------------------------------------------------------
# symmetric products
# ---------------------------------------------------------------------------

def _padd(a, b, c=1):
    out = dict(a)
    for e, v in b.items():
        out[e] = out.get(e, 0) + c * v
    return {e: v for e, v in out.items() if v != 0}


def _pmul(a, b):
    out = {}
    for ea, va in a.items():
        for eb, vb in b.items():
            e = (ea[0] + eb[0], ea[1] + eb[1])
            out[e] = out.get(e, 0) + va * vb
    return {e: v for e, v in out.items() if v != 0}


def _power_sums(d):
    """Newton power sums ``x^j + y^j`` as polynomials in ``(e1, e2)``."""
    p = [{(0, 0): 2}, {(1, 0): 1}]
    for _ in range(2, d + 1):
        p.append(_padd(_pmul({(1, 0): 1}, p[-1]), _pmul({(0, 1): 1}, p[-2]), -1))
    return p


def _affine_coeffs(h: ProjectiveMap):
    d = h.degree
    F0 = h.lift[0]
    if set(F0.terms) != {(d, 0)}:
        raise PreconditionError("symmetric_product needs a polynomial map (lift (c w0^d, P))")
    c0 = F0.terms[(d, 0)]
    inv = (GaussianRational(1) / GaussianRational.coerce(c0)).simplify() if is_exact(c0) else 1 / complex(c0)
    coeffs = [h.lift[1].coeff((d - j, j)) for j in range(d + 1)]
    out = [c * inv for c in coeffs]
    return [c.simplify() if isinstance(c, GaussianRational) else c for c in out]


def symmetric_product(h: ProjectiveMap, check_samples: int = 100, seed: int = 0) -> ProjectiveMap:
    """P^2 map induced by ``h x h`` on unordered pairs ``(x + y, x y)``.

    ``h(x) + h(y)`` and ``h(x) h(y)`` are rewritten in ``e1 = x + y``,
    ``e2 = x y`` through Newton power sums and homogenized with ``w0``.
    The identity ``f o pi = pi o (h x h)`` is checked at seeded random points.
    """
    if h.k != 1 or h.degree < 2:
        raise PreconditionError("symmetric_product needs a P^1 polynomial map of degree >= 2")
    d = h.degree
    c = _affine_coeffs(h)
    ps = _power_sums(d)
    S = {}
    for k, ck in enumerate(c):
        if ck != 0:
            S = _padd(S, ps[k], ck)
    P = {}
    for j in range(d + 1):
        if c[j] != 0:
            P = _padd(P, {(0, j): c[j] * c[j]})
        for k in range(j + 1, d + 1):
            if c[j] != 0 and c[k] != 0:
                P = _padd(P, _pmul({(0, j): 1}, ps[k - j]), c[j] * c[k])

    def hom(poly):
        t = {}
        for (a, b), v in poly.items():
            if a + b > d:
                raise InternalInvariantError("symmetric reduction exceeded the degree")
            t[(d - a - b, a, b)] = v
        return HomPolynomial(3, d, t)

    f = make_map([_var(0, d), hom(S), hom(P)], label=f"sym({h.label})")
    res = symmetric_residual(f, h, check_samples, seed)
    if res > 1e-10:
        raise InternalInvariantError(f"symmetric product identity fails (residual {res:.3e})")
    return f


def symmetric_residual(f: ProjectiveMap, h: ProjectiveMap, samples: int = 100, seed: int = 0) -> float:
    """Max distance between ``f(pi(x, y))`` and ``pi(h(x), h(y))`` at random points of the unit disk."""
    rng = np.random.default_rng(seed)
    x = (rng.uniform(-1, 1, samples) + 1j * rng.uniform(-1, 1, samples)) / math.sqrt(2)
    y = (rng.uniform(-1, 1, samples) + 1j * rng.uniform(-1, 1, samples)) / math.sqrt(2)
    one = np.ones(samples, dtype=complex)
    left = f.lift_eval(np.stack([one, x + y, x * y]))
    hx = h.lift_eval(np.stack([one, x]))
    hy = h.lift_eval(np.stack([one, y]))
    hx, hy = hx[1] / hx[0], hy[1] / hy[0]
    right = np.stack([one, hx + hy, hx * hy])
    return float(np.max(projective_distance(left, right)))


def symmetric_pair(h1: ProjectiveMap, h2: ProjectiveMap) -> CommutingPair:
    """Symmetric products of a commuting pair of polynomial maps.

    The lifts of ``h1`` and ``h2`` are first normalized to monic leading
    part ``w0^d``; the induced P^2 maps then commute because ``h1 x h1`` and
    ``h2 x h2`` do.
    """
    mode = "exact" if (h1.exact and h2.exact) else "numeric"
    if not commutes(h1, h2, mode).commutes:
        raise ConstructionError("symmetric_pair needs a commuting pair of polynomial maps")
    f1, f2 = symmetric_product(h1), symmetric_product(h2)
    params = {"h1": h1.label, "h2": h2.label}
    return _certify(f1, f2, "symmetric_product", params)


# ---------------------------------------------------------------------------
# Weierstrass function and Lattès maps
# ---------------------------------------------------------------------------

def _reduce_basis(w1, w2):
    """Gauss reduction: a basis with ``tau`` in the standard fundamental domain."""
    for _ in range(200):
        if abs(w2) < abs(w1):
            w1, w2 = w2, w1
        n = round((w2 / w1).real)
        w2 = w2 - n * w1
        if abs(w2) >= abs(w1):
            break
    if (w2 / w1).imag < 0:
        w2 = -w2
    return w1, w2


def _eisenstein(tau, k):
    """Normalized Eisenstein series ``E_4`` or ``E_6`` by Lambert series."""
    q = cmath.exp(2j * math.pi * tau)
    c, p = (240, 3) if k == 4 else (-504, 5)
    s = 0j
    qn = 1
    for n in range(1, 200):
        qn *= q
        term = n ** p * qn / (1 - qn)
        s += term
        if abs(term) < 1e-18 * max(1.0, abs(s)):
            break
    return 1 + c * s


@dataclass(frozen=True)
class Lattice:
    """Period lattice ``Z w1 + Z w2`` with ``Im(w2 / w1) > 0``."""

    w1: complex
    w2: complex
    g2: complex = field(init=False)
    g3: complex = field(init=False)

    def __post_init__(self):
        w1, w2 = complex(self.w1), complex(self.w2)
        if w1 == 0 or (w2 / w1).imag <= 0:
            raise ValueError("periods must satisfy Im(w2/w1) > 0")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        r1, r2 = _reduce_basis(w1, w2)
        tau = r2 / r1
        g2 = 60 * (math.pi ** 4 / 45) * _eisenstein(tau, 4) / r1 ** 4
        g3 = 140 * (2 * math.pi ** 6 / 945) * _eisenstein(tau, 6) / r1 ** 6
        g2 = _clean(g2)
        g3 = _clean(g3, scale=abs(g2) ** 1.5)
        if abs(g2 ** 3 - 27 * g3 ** 2) < 1e-12 * max(1.0, abs(g2) ** 3):
            raise ValueError("degenerate lattice invariants")
        object.__setattr__(self, "g2", g2)
        object.__setattr__(self, "g3", g3)

    @property
    def reduced(self):
        return _reduce_basis(self.w1, self.w2)

    @property
    def tau(self):
        return self.w2 / self.w1

    def coords(self, z):
        """Real coordinates ``(a, b)`` with ``z = a w1 + b w2``."""
        M = np.array([[self.w1.real, self.w2.real], [self.w1.imag, self.w2.imag]])
        z = np.asarray(z, dtype=complex)
        ab = np.linalg.solve(M, np.stack([z.real.ravel(), z.imag.ravel()]))
        return ab[0].reshape(z.shape), ab[1].reshape(z.shape)

    def contains_multiple(self, m, tol: float = 1e-10) -> bool:
        """Whether ``m L`` is contained in ``L``."""
        for w in (self.w1, self.w2):
            a, b = self.coords(m * w)
            if abs(a - round(float(a))) > tol or abs(b - round(float(b))) > tol:
                return False
        return True

    def to_json(self):
        return {"w1": [self.w1.real, self.w1.imag], "w2": [self.w2.real, self.w2.imag],
                "g2": [self.g2.real, self.g2.imag], "g3": [self.g3.real, self.g3.imag]}


def _clean(x, scale=None):
    scale = abs(x) if scale is None else scale
    re = 0.0 if abs(x.real) < 1e-14 * max(scale, 1e-300) else x.real
    im = 0.0 if abs(x.imag) < 1e-14 * max(scale, 1e-300) else x.imag
    return complex(re, im)


def weierstrass_p(L: Lattice, z):
    """``(wp(z), wp'(z))`` by the q-expansion on a reduced basis.

    With ``u = exp(2 pi i z / w1)`` and ``q = exp(2 pi i tau)`` both series
    converge geometrically once ``z`` is reduced to the cell centered at the
    origin; ``expm1`` keeps the term nearest the pole accurate.

    Raises
    ------
    PoleError
        ``z`` lies within ``1e-12`` of a lattice point.
    """
    w1, w2 = L.reduced
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    tau = w2 / w1
    x = z / w1
    # reduce to a + b tau with a, b in [-1/2, 1/2)
    b = np.floor(x.imag / tau.imag + 0.5)
    x = x - b * tau
    a = np.floor(x.real + 0.5)
    x = x - a
    if np.any(np.abs(x * w1) < 1e-12):
        raise PoleError("wp has a pole at lattice points")
    q = cmath.exp(2j * math.pi * tau)
    t = 2j * math.pi * x
    em1 = np.expm1(t)
    u = em1 + 1
    P = u / em1 ** 2
    D = -u * (2 + em1) / em1 ** 3
    const = 1 / 12
    qn = 1
    for n in range(1, 80):
        qn = qn * q
        xa = qn * u
        xb = qn / u
        P = P + xa / (1 - xa) ** 2 + xb / (1 - xb) ** 2
        D = D + xa * (1 + xa) / (1 - xa) ** 3 - xb * (1 + xb) / (1 - xb) ** 3
        const -= 2 * qn / (1 - qn) ** 2
        if abs(qn) * max(1.0, float(np.max(np.abs(u))), float(np.max(np.abs(1 / u)))) < 1e-18:
            break
    c = 2j * math.pi / w1
    wp = c ** 2 * (P + const)
    dwp = c ** 3 * D
    if scalar:
        return complex(wp[0]), complex(dwp[0])
    return wp, dwp


def duplication(L: Lattice, x):
    """``wp(2z)`` as a rational function of ``x = wp(z)``."""
    g2, g3 = L.g2, L.g3
    x = np.asarray(x, dtype=complex)
    return ((x * x + g2 / 4) ** 2 + 2 * g3 * x) / (4 * x ** 3 - g2 * x - g3)


def _lattice_samples(L: Lattice, m, n, seed, margin=0.05, skip=0):
    """Quasi-random points of the period cell away from poles of wp(z) and wp(mz)."""
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    if skip:
        sampler.fast_forward(skip)
    out = []
    while len(out) < n:
        pts = sampler.random(4 * n)
        for s, t in pts:
            z = s * L.w1 + t * L.w2
            ok = True
            for v in (z, m * z):
                a, b = L.coords(np.array([v]))
                if min(abs(a[0] - round(a[0])), abs(b[0] - round(b[0]))) < margin and \
                        abs(a[0] - round(a[0])) < margin and abs(b[0] - round(b[0])) < margin:
                    ok = False
            if ok:
                out.append(z)
                if len(out) == n:
                    break
    return np.array(out)


def _hom_pair(x):
    w = np.stack([np.ones_like(x), x])
    return w / np.abs(w).max(axis=0)


@dataclass
class LattesFit:
    map: ProjectiveMap
    multiplier: complex
    degree: int
    fit_residual: float
    holdout_residual: float
    singular_gap: float

    def to_json(self):
        return {"map": self.map.to_json(), "multiplier": [self.multiplier.real, self.multiplier.imag],
                "degree": self.degree, "fit_residual": self.fit_residual,
                "holdout_residual": self.holdout_residual, "singular_gap": self.singular_gap}


def lattes_fit(L: Lattice, m, seed: int = 0, holdout: int = 100, attempts: int = 3) -> LattesFit:
    """Recover the Lattès map ``h`` with ``h(wp(z)) = wp(m z)`` by interpolation.

    Homogeneous least squares: the coefficients of ``h = [F0 : F1]`` span the
    null space of ``y0 F1(x) - y1 F0(x)`` over normalized samples
    ``x = (1, wp(z))``, ``y = (1, wp(m z))``.  The fit is then checked on
    held-out points.

    Raises
    ------
    ConstructionError
        ``m L`` is not in ``L``, the system stays rank deficient, or the
        held-out residual exceeds ``1e-6``.
    """
    m = complex(m)
    d2 = abs(m) ** 2
    d = int(round(d2))
    if abs(d2 - d) > 1e-9 or d < 2:
        raise ConstructionError(f"|m|^2 = {d2} must be an integer >= 2")
    if not L.contains_multiple(m):
        raise ConstructionError(f"m = {m} does not preserve the lattice")
    nfit = max(80, 12 * (d + 1))
    last = None
    for attempt in range(attempts):
        s = seed + 7919 * attempt
        z = _lattice_samples(L, m, nfit + holdout, s)
        zf, zh = z[:nfit], z[nfit:]
        X = _hom_pair(weierstrass_p(L, zf)[0])
        Y = _hom_pair(weierstrass_p(L, m * zf)[0])
        j = np.arange(d + 1)
        V = X[0][:, None] ** (d - j)[None, :] * X[1][:, None] ** j[None, :]
        A = np.concatenate([-Y[1][:, None] * V, Y[0][:, None] * V], axis=1)
        col = np.abs(A).max(axis=0)
        col[col == 0] = 1
        U, S, Vh = np.linalg.svd(A / col, full_matrices=False)
        gap = S[-2] / S[0]
        if gap < 1e-10:
            last = f"rank deficient interpolation system (gap {gap:.2e})"
            continue
        v = Vh[-1].conj() / col
        den, num = v[: d + 1], v[d + 1:]
        k = int(np.argmax(np.abs(num)))
        lead = num[d] if abs(num[d]) > 1e-8 * abs(num[k]) else num[k]
        den, num = den / lead, num / lead
        tiny = 1e-13 * max(np.abs(den).max(), np.abs(num).max())
        den = np.where(np.abs(den) < tiny, 0, den)
        num = np.where(np.abs(num) < tiny, 0, num)
        den = np.where(np.abs(den.imag) < tiny, den.real, den)
        num = np.where(np.abs(num.imag) < tiny, num.real, num)
        lift = [HomPolynomial.from_binary(list(den), d), HomPolynomial.from_binary(list(num), d)]
        try:
            f = make_map(lift, label=f"lattes(m={m})")
        except Exception as exc:
            last = f"interpolated lift is degenerate: {exc}"
            continue
        fit_res = float(np.max(np.abs(A / col @ (Vh[-1].conj()))))
        Xh = _hom_pair(weierstrass_p(L, zh)[0])
        Yh = _hom_pair(weierstrass_p(L, m * zh)[0])
        hold = float(np.max(projective_distance(f.lift_eval(Xh), Yh)))
        if hold > 1e-6:
            last = f"held-out semiconjugacy residual {hold:.2e} > 1e-6"
            continue
        return LattesFit(f, m, d, fit_res, hold, float(gap))
    raise ConstructionError(f"Lattès interpolation failed: {last}")


def lattes_from_multiplier(L: Lattice, m, seed: int = 0) -> ProjectiveMap:
    """Degree ``|m|^2`` Lattès map for multiplication by ``m`` on ``L``."""
    return lattes_fit(L, m, seed).map


def lattes_pair(L: Lattice, m1, m2, seed: int = 0, tol: float = 1e-7) -> CommutingPair:
    f1 = lattes_fit(L, m1, seed)
    f2 = lattes_fit(L, m2, seed)
    params = {"lattice": L.to_json(), "m1": complex(m1), "m2": complex(m2),
              "holdout": [f1.holdout_residual, f2.holdout_residual]}
    return _certify(f1.map, f2.map, "lattes", params, tol)


def square_lattice() -> Lattice:
    return Lattice(1.0, 1j)


# ---------------------------------------------------------------------------
# metadata
# ---------------------------------------------------------------------------

_CATALOG = [
    {"family": "power", "k": 1, "maps": "z^{+-d1}, lam z^{+-d2}",
     "construction": "power maps with a root-of-unity constant",
     "constructor": "power_pair", "exact": True},
    {"family": "chebyshev", "k": 1, "maps": "+-T_{d1}, +-T_{d2}",
     "construction": "Chebyshev polynomials with compatible signs",
     "constructor": "chebyshev_pair", "exact": True},
    {"family": "monomial_p2", "k": 2, "maps": "[w_{a_i}^{d1}], [l_i w_{n_i}^{d2}]",
     "construction": "monomial maps of P^2 twisted by commuting permutations",
     "constructor": "monomial_pair_p2", "exact": True},
    {"family": "product_p2", "k": 2, "maps": "(P1, Q1), lam (P2, Q2)",
     "construction": "homogeneous lifts of a commuting P^1 pair acting on C^2",
     "constructor": "product_pair_p2", "exact": True},
    {"family": "cheb_power", "k": 2, "maps": "(z1^{d1}, +-T_{d1}(z2)), (lam z1^{d2}, +-T_{d2}(z2))",
     "construction": "coordinatewise power and Chebyshev maps",
     "constructor": "cheb_power_pair", "exact": True},
    {"family": "cheb_cheb", "k": 2, "maps": "(+-T_{d1}(z_a), +-T_{d1}(z_b)), (+-T_{d2}(z1), +-T_{d2}(z2))",
     "construction": "coordinatewise Chebyshev maps, optionally with the coordinates exchanged",
     "constructor": "cheb_cheb_pair", "exact": True},
    {"family": "symmetric_product", "k": 2, "maps": "h x h on unordered pairs",
     "construction": "symmetric square of a polynomial map in elementary symmetric coordinates",
     "constructor": "symmetric_product", "exact": True},
    {"family": "lattes", "k": 1, "maps": "wp(z) -> wp(m z)",
     "construction": "Lattès maps from complex multiplication on a lattice",
     "constructor": "lattes_pair", "exact": False},
]


def catalog_list() -> list[dict]:
    """Metadata for every family, in a fixed order."""
    return [dict(r) for r in _CATALOG]
