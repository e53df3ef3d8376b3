"""Endomorphisms of P^1 and P^2 given by homogeneous lifts."""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .algebra import GaussianRational, HomPolynomial, is_exact, scalar_match
from .errors import (DegeneracyError, DimensionError, InternalInvariantError,
                     PreconditionError, ShapeError)
from .roots import binary_roots, companion_roots

TIE_TOL = 1e-12


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------

def canonical(w):
    """Canonical representative(s) of homogeneous coordinates.

    ``w`` has shape ``(k+1,)`` or ``(k+1, N)``.  The result has sup-norm 1 and
    its first coordinate of (numerically) maximal modulus equals 1.
    """
    w = np.asarray(w, dtype=complex)
    single = w.ndim == 1
    W = w.reshape(w.shape[0], -1)
    a = np.abs(W)
    m = a.max(axis=0)
    if np.any(m == 0) or not np.all(np.isfinite(m)):
        raise DimensionError("zero or non-finite homogeneous vector")
    idx = np.argmax(a >= m * (1 - TIE_TOL), axis=0)
    piv = W[idx, np.arange(W.shape[1])]
    out = W / piv
    out[idx, np.arange(W.shape[1])] = 1.0
    return out[:, 0] if single else out


def projective_distance(p, q):
    """Sup-norm distance between representatives of ``p`` and ``q``.

    Both are scaled so that the coordinate where ``p`` is largest equals
    one.  This agrees with the sup distance of canonical representatives
    whenever the two pick the same pivot, and stays continuous near ties.
    Works on shapes ``(k+1,)`` or ``(k+1, N)``; symmetric by construction.
    """
    return np.maximum(_one_sided(p, q), _one_sided(q, p))


def _one_sided(p, q):
    P = canonical(p)
    Q = np.asarray(q, dtype=complex)
    single = P.ndim == 1
    P2 = P.reshape(P.shape[0], -1)
    Q2 = Q.reshape(Q.shape[0], -1)
    Q2 = Q2 / np.abs(Q2).max(axis=0)
    idx = np.argmax(np.abs(P2) >= 1 - TIE_TOL, axis=0)
    cols = np.arange(P2.shape[1])
    qi = Q2[idx, cols]
    ok = np.abs(qi) >= 0.5
    Qs = np.where(ok, Q2 / np.where(ok, qi, 1), canonical(Q2))
    d = np.abs(P2 - Qs).max(axis=0)
    return float(d[0]) if single else d


@dataclass(frozen=True)
class ProjectivePoint:
    """A point of P^k stored by its canonical representative."""

    coords: tuple

    def __init__(self, coords):
        c = canonical(np.asarray(coords, dtype=complex).ravel())
        object.__setattr__(self, "coords", tuple(complex(x) for x in c))

    @classmethod
    def from_affine(cls, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return cls(np.concatenate([[1.0], z]))

    @classmethod
    def infinity(cls, k=1):
        w = np.zeros(k + 1, dtype=complex)
        w[-1] = 1
        return cls(w)

    @property
    def k(self) -> int:
        return len(self.coords) - 1

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=complex)

    def is_infinite(self, tol=1e-14) -> bool:
        return abs(self.coords[0]) <= tol

    def affine(self):
        """Affine coordinates ``w_s / w_0``; ``inf`` when on the hyperplane at infinity."""
        w0 = self.coords[0]
        if self.is_infinite():
            return complex("inf") if self.k == 1 else None
        a = [c / w0 for c in self.coords[1:]]
        return a[0] if self.k == 1 else tuple(a)

    def distance(self, other) -> float:
        o = other.array if isinstance(other, ProjectivePoint) else other
        return float(projective_distance(self.array, o))

    def to_json(self):
        return [[c.real, c.imag] for c in self.coords]

    @classmethod
    def from_json(cls, data):
        return cls([complex(a, b) for a, b in data])


def chordal_distance(p, q):
    """Fubini-Study chordal distance ``|p ^ q| / (|p| |q|)``."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    num = np.sqrt(max(0.0, (np.vdot(p, p) * np.vdot(q, q) - abs(np.vdot(p, q)) ** 2).real))
    return float(num / (np.linalg.norm(p) * np.linalg.norm(q)))


# ---------------------------------------------------------------------------
# nondegeneracy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NondegeneracyCertificate:
    method: str
    detail: dict = field(default_factory=dict)

    def to_json(self):
        return {"method": self.method, **self.detail}


def _binary_coeffs(p: HomPolynomial):
    """Ascending coefficients in ``z = w1/w0`` of a binary form."""
    c = [0] * (p.degree + 1)
    for (a, b), v in p.terms.items():
        c[b] = v
    return c


def sylvester_matrix(p_coeffs, q_coeffs):
    """Sylvester matrix of two polynomials given by ascending coefficients."""
    d, e = len(p_coeffs) - 1, len(q_coeffs) - 1
    n = d + e
    rows = []
    pd = list(reversed(p_coeffs))
    qd = list(reversed(q_coeffs))
    for i in range(e):
        rows.append([0] * i + pd + [0] * (n - d - 1 - i))
    for i in range(d):
        rows.append([0] * i + qd + [0] * (n - e - 1 - i))
    return rows


def exact_det(rows):
    """Determinant by Gaussian elimination over an exact field."""
    m = [[GaussianRational.coerce(x) if is_exact(x) else x for x in r] for r in rows]
    n = len(m)
    det = GaussianRational(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return 0
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det = det * m[col][col]
        inv = GaussianRational(1) / m[col][col]
        for r in range(col + 1, n):
            f = m[r][col] * inv
            if f != 0:
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return det.simplify()


# prime p = 1 (mod 4) below 2^31 and a square root of -1 modulo p
_MOD_P = 2147483629
_MOD_I = 1518275076


def _mod_p(x):
    """Image of a Gaussian rational in F_p, or ``None`` if a denominator vanishes there."""
    if type(x) is int:
        return x % _MOD_P
    g = GaussianRational.coerce(x)
    out = 0
    for part, unit in ((g.re, 1), (g.im, _MOD_I)):
        if part == 0:
            continue
        if part.denominator % _MOD_P == 0:
            return None
        out += part.numerator * pow(part.denominator, -1, _MOD_P) * unit
    return out % _MOD_P


def det_mod_p(rows):
    """Determinant of an exact matrix reduced modulo a fixed prime (``None`` if undefined).

    A nonzero value proves the exact determinant is nonzero.
    """
    vals = [[_mod_p(x) for x in r] for r in rows]
    if any(v is None for r in vals for v in r):
        return None
    m = np.array(vals, dtype=np.int64).reshape(len(rows), -1)
    n = m.shape[0]
    det = 1
    for col in range(n):
        nz = np.flatnonzero(m[col:, col])
        if nz.size == 0:
            return 0
        piv = col + int(nz[0])
        if piv != col:
            m[[col, piv]] = m[[piv, col]]
            det = -det
        pv = int(m[col, col])
        det = det * pv % _MOD_P
        inv = pow(pv, -1, _MOD_P)
        f = m[col + 1:, col] * inv % _MOD_P
        m[col + 1:] = (m[col + 1:] - (f[:, None] * m[col]) % _MOD_P) % _MOD_P
    return det % _MOD_P


def nondegenerate_check(lift: Sequence[HomPolynomial], lines: int = 64, seed: int = 0):
    """Certify ``F^{-1}(0) = {0}``; return a certificate or a witness point.

    On P^1 the homogeneous resultant (Sylvester determinant) decides,
    exactly for exact coefficients.  On P^2 two random combinations of the
    components are intersected by eliminating one variable (hidden-variable
    resultant) and the third combination is tested at every intersection
    point; ``lines`` independent random combinations are not needed for
    correctness, the first trial already decides generically, so the
    parameter only bounds the number of retries when an intersection point
    is ill-conditioned.

    Returns
    -------
    NondegeneracyCertificate or numpy.ndarray
        The array is a witness direction with ``F(witness) ~ 0``.
    """
    k = len(lift) - 1
    if k == 1:
        return _check_p1(lift)
    if k == 2:
        return _check_p2(lift, lines, seed)
    raise ShapeError("only P^1 and P^2 are supported")


def _check_p1(lift):
    P, Q = lift
    if P.degree == 0:
        return NondegeneracyCertificate("constant", {})
    pc, qc = _binary_coeffs(P), _binary_coeffs(Q)
    S = sylvester_matrix(pc, qc)
    if P.exact and Q.exact:
        pm, qm = [_mod_p(c) for c in pc], [_mod_p(c) for c in qc]
        res_p = None if None in pm + qm else det_mod_p(sylvester_matrix(pm, qm))
        if res_p:
            return NondegeneracyCertificate("sylvester-mod-p", {"prime": _MOD_P,
                                                                 "resultant_mod_p": res_p})
        res = exact_det(S)
        if res != 0:
            return NondegeneracyCertificate("sylvester-exact", {"resultant": str(res)})
        return _p1_witness(pc, qc)
    w = _p1_witness(pc, qc, tol=1e-9)
    if isinstance(w, np.ndarray):
        return w
    Sn = np.array(S, dtype=complex)
    sign, logdet = np.linalg.slogdet(Sn)
    return NondegeneracyCertificate(
        "sylvester-numeric", {"log_abs_resultant": float(logdet), "min_relative_residual": w})


def _p1_witness(pc, qc, tol=None):
    """Witness common root of two binary forms, or (numeric mode) a margin."""
    pn = np.array(pc, dtype=complex)
    qn = np.array(qc, dtype=complex)
    if not np.any(pn):
        pn, qn = qn, pn
    roots = binary_roots(pn)
    best, best_val = None, np.inf
    qscale = np.max(np.abs(qn))
    for r in roots:
        r = canonical(r)
        val = abs(_eval_binary(qn, r)) / qscale if qscale else 0.0
        if val < best_val:
            best, best_val = r, val
    if tol is None or best_val <= tol:
        return best
    return float(best_val)


def _eval_binary(c, w):
    d = len(c) - 1
    return sum(c[j] * w[0] ** (d - j) * w[1] ** j for j in range(d + 1))


def _random_unitary(n, rng):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _linear_subs(U):
    n = U.shape[0]
    return [HomPolynomial(n, 1, {tuple(int(i == j) for i in range(n)): U[r, j] for j in range(n)},
                          exact=False) for r in range(n)]


def _check_p2(lift, lines, seed):
    d = lift[0].degree
    if d == 0:
        return NondegeneracyCertificate("constant", {})
    num = [p.to_numeric() for p in lift]
    if d == 1:
        M = np.array([[p.coeff(tuple(int(i == j) for i in range(3))) for j in range(3)] for p in num],
                     dtype=complex)
        if abs(np.linalg.det(M)) > 1e-12 * np.abs(M).max() ** 3:
            return NondegeneracyCertificate("determinant", {"det": abs(np.linalg.det(M))})
        _, _, vh = np.linalg.svd(M)
        return canonical(vh[-1].conj())
    rng = np.random.default_rng(seed)
    worst_margin = np.inf
    for trial in range(max(1, lines)):
        U = _random_unitary(3, rng)
        G = [p.compose(_linear_subs(U)) for p in num]
        coeffs = _random_unitary(3, rng)
        A, B, C = [sum((G[j].scale(coeffs[i, j]) for j in range(3)),
                       HomPolynomial(3, d, {}, exact=False)) for i in range(3)]
        cands, shared = _intersect_p2(A, B)
        if shared:
            w = _shared_factor_witness(A, B, C, rng)
            if w is not None:
                return canonical(U @ w)
            continue
        margin = np.inf
        scale = max(A.norm(), B.norm(), C.norm())
        ok = True
        for w in cands:
            if w is None:
                ok = False
                break
            val = max(abs(A(w)), abs(B(w)), abs(C(w))) / scale
            if val <= 1e-9:
                return canonical(U @ w)
            margin = min(margin, val)
        if ok:
            return NondegeneracyCertificate(
                "hidden-variable-resultant",
                {"trials": trial + 1, "candidates": len(cands), "min_relative_residual": float(margin)})
        worst_margin = min(worst_margin, margin)
    raise InternalInvariantError("nondegeneracy check did not settle on P^2")


def _poly_in_last(p: HomPolynomial, w0, x):
    """Coefficients (ascending in y) of p(w0, x, y)."""
    c = np.zeros(p.degree + 1, dtype=complex)
    for (a, b, e), v in p.terms.items():
        c[e] += v * w0 ** a * x ** b
    return c


def _intersect_p2(A, B):
    """Common zeros of two ternary forms (finite case).

    Returns (list of homogeneous points, shared_factor_flag).
    """
    d = A.degree
    n = d * d + 1
    nodes = np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.empty(n, dtype=complex)
    bound = 0.0
    for i, x in enumerate(nodes):
        S = np.array(sylvester_matrix(list(_poly_in_last(A, 1.0, x)),
                                      list(_poly_in_last(B, 1.0, x))), dtype=complex)
        vals[i] = np.linalg.det(S)
        bound = max(bound, float(np.prod(np.linalg.norm(S, axis=1))))
    coeffs = np.fft.fft(vals) / n
    if np.max(np.abs(coeffs)) <= 1e-11 * bound:
        return [], True
    pts = []
    for x in companion_roots(coeffs):
        ya = companion_roots(_poly_in_last(A, 1.0, x))
        cand = None
        best = np.inf
        for y in ya:
            w = np.array([1.0, x, y])
            w = w / np.abs(w).max()
            val = abs(B(w))
            if val < best:
                best, cand = val, w
        if cand is not None:
            cand = _newton_pair(A, B, cand)
        pts.append(cand)
    # the line w0 = 0, where the affine chart above is blind
    a_inf = np.array([A.coeff((0, d - j, j)) for j in range(d + 1)], dtype=complex)
    if np.any(a_inf):
        for r in binary_roots(a_inf):
            pts.append(np.array([0.0, r[0], r[1]]))
    return pts, False


def _newton_pair(A, B, w, steps=8):
    """Newton on A = B = 0 in the chart of the largest coordinate of ``w``."""
    dA = [A.diff(i) for i in range(3)]
    dB = [B.diff(i) for i in range(3)]
    for _ in range(steps):
        i = int(np.argmax(np.abs(w)))
        w = w / w[i]
        free = [j for j in range(3) if j != i]
        J = np.array([[dA[j](w) for j in free], [dB[j](w) for j in free]])
        rhs = np.array([A(w), B(w)])
        try:
            step = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError:
            break
        w = w.copy()
        w[free] -= step
        if np.abs(step).max() < 1e-16:
            break
    return w / np.abs(w).max()


def _shared_factor_witness(A, B, C, rng):
    for _ in range(8):
        x = complex(rng.normal(), rng.normal())
        for y in companion_roots(_poly_in_last(A, 1.0, x)):
            w = np.array([1.0, x, y])
            w = w / np.abs(w).max()
            scale = max(A.norm(), B.norm(), C.norm())
            if max(abs(B(w)), abs(C(w))) / scale <= 1e-8:
                return w
    return None


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------

class ProjectiveMap:
    """Endomorphism of P^k held as a homogeneous lift ``F = (F_0, ..., F_k)``.

    Build instances through :func:`make_map`, which validates the lift.
    """

    __slots__ = ("k", "degree", "lift", "label", "certificate", "_jac")

    def __init__(self, lift, label="", certificate=None):
        self.lift = tuple(lift)
        self.k = len(self.lift) - 1
        self.degree = self.lift[0].degree
        self.label = label
        self.certificate = certificate
        self._jac = None

    @property
    def exact(self) -> bool:
        return all(p.exact for p in self.lift)

    def __repr__(self):
        return f"ProjectiveMap(k={self.k}, degree={self.degree}, label={self.label!r})"

    def jacobian_polys(self):
        if self._jac is None:
            self._jac = [[p.diff(j) for j in range(self.k + 1)] for p in self.lift]
        return self._jac

    def lift_eval(self, W):
        """Evaluate the lift at homogeneous coordinates of shape ``(k+1, ...)``."""
        W = np.asarray(W, dtype=complex)
        if W.shape[0] != self.k + 1:
            raise DimensionError(f"expected {self.k + 1} coordinates, got {W.shape[0]}")
        return np.stack([p._evaluate_numpy(list(W)) for p in self.lift])

    def jacobian_eval(self, W):
        """Jacobian matrices, shape ``(k+1, k+1, ...)``."""
        W = np.asarray(W, dtype=complex)
        J = self.jacobian_polys()
        return np.stack([np.stack([q._evaluate_numpy(list(W)) for q in row]) for row in J])

    def __call__(self, p):
        return map_apply(self, p)

    def to_json(self):
        out = {"k": self.k, "degree": self.degree,
               "lift": [p.to_json() for p in self.lift], "label": self.label}
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_json()
        return out

    @classmethod
    def from_json(cls, data, check=True):
        lift = [HomPolynomial.from_json(p) for p in data["lift"]]
        if int(data["k"]) != len(lift) - 1:
            raise ShapeError("'k' does not match the number of lift components")
        return make_map(lift, label=data.get("label", ""), check=check)


def make_map(lift: Sequence[HomPolynomial], label: str = "", check: bool = True,
             certificate=None) -> ProjectiveMap:
    """Validate a lift and wrap it as a :class:`ProjectiveMap`.

    Raises
    ------
    ShapeError
        Wrong number of components, or mismatched arity/degree.
    DegeneracyError
        The lift has a common zero off the origin.
    """
    lift = list(lift)
    k = len(lift) - 1
    if k not in (1, 2):
        raise ShapeError(f"only P^1 and P^2 are supported (got {len(lift)} components)")
    d = max(p.degree for p in lift)
    for p in lift:
        if p.arity != k + 1:
            raise ShapeError(f"component arity {p.arity} != {k + 1}")
    lift = [HomPolynomial(k + 1, d, {}, exact=p.exact) if p.is_zero() else p for p in lift]
    for p in lift:
        if p.degree != d:
            raise ShapeError("lift components must share a degree")
    if d < 1:
        raise ShapeError("degree must be at least 1")
    if check:
        cert = nondegenerate_check(lift)
        if isinstance(cert, np.ndarray):
            raise DegeneracyError(f"lift vanishes at {np.round(cert, 12).tolist()}", witness=cert)
    else:
        cert = certificate
    return ProjectiveMap(lift, label=label, certificate=cert)


def identity_map(k=1) -> ProjectiveMap:
    return make_map([HomPolynomial.variable(k + 1, i) for i in range(k + 1)], label="identity")


def affine_polynomial_map(coeffs, label="") -> ProjectiveMap:
    """P^1 map of the one-variable polynomial ``sum coeffs[j] z**j``."""
    d = len(coeffs) - 1
    while d > 0 and coeffs[d] == 0:
        d -= 1
    coeffs = list(coeffs[: d + 1])
    F0 = HomPolynomial(2, d, {(d, 0): 1})
    F1 = HomPolynomial.from_binary(coeffs, d)
    return make_map([F0, F1], label=label)


def rational_map(num, den, label="") -> ProjectiveMap:
    """P^1 map of ``num(z) / den(z)`` (ascending coefficient lists)."""
    d = max(len(num), len(den)) - 1
    return make_map([HomPolynomial.from_binary(den, d), HomPolynomial.from_binary(num, d)],
                    label=label)


def map_apply(f: ProjectiveMap, p) -> ProjectivePoint:
    """Image of a point; the result is renormalized to canonical form."""
    w = p.array if isinstance(p, ProjectivePoint) else np.asarray(p, dtype=complex)
    if w.shape[0] != f.k + 1:
        raise DimensionError("point and map dimensions differ")
    v = f.lift_eval(canonical(w))
    if not np.any(v):
        raise InternalInvariantError("lift vanished at a nonzero point")
    return ProjectivePoint(v)


def apply_batch(f: ProjectiveMap, W, n=1):
    """Apply ``f`` ``n`` times to columns of ``W`` (shape ``(k+1, N)``), renormalizing."""
    W = canonical(np.asarray(W, dtype=complex).reshape(f.k + 1, -1))
    for _ in range(n):
        W = canonical(f.lift_eval(W))
    return W


def map_compose(f: ProjectiveMap, g: ProjectiveMap) -> ProjectiveMap:
    """Lift of ``f o g``: each component of F is evaluated on G."""
    if f.k != g.k:
        raise ShapeError("maps act on different projective spaces")
    lift = [p.compose(list(g.lift)) for p in f.lift]
    return ProjectiveMap(lift, label=f"({f.label})o({g.label})",
                         certificate=NondegeneracyCertificate("composition", {}))


def map_power(f: ProjectiveMap, n: int) -> ProjectiveMap:
    if n < 1:
        raise ValueError("n must be positive")
    out = f
    for _ in range(n - 1):
        out = map_compose(f, out)
    return out


def scale_map(f: ProjectiveMap, c) -> ProjectiveMap:
    """Same projective map, lift multiplied by ``c``."""
    return ProjectiveMap([p.scale(c) for p in f.lift], label=f.label, certificate=f.certificate)


# ---------------------------------------------------------------------------
# commutation
# ---------------------------------------------------------------------------

@dataclass
class CommutationReport:
    """Outcome of :func:`commutes`.

    ``lam`` satisfies ``F1 o F2* = lam F2* o F1`` for the given lifts and
    ``theta`` rescales the second lift (``F2 = theta F2*``) so that the two
    lifts commute on the nose.
    """

    commutes: bool
    lam: complex | None
    theta: complex | None
    residual: float
    mode: str
    d1: int
    d2: int
    theta_exact: object = None

    def to_json(self):
        def cj(z):
            return None if z is None else [complex(z).real, complex(z).imag]
        return {"commutes": self.commutes, "lambda": cj(self.lam), "theta": cj(self.theta),
                "residual": "inf" if math.isinf(self.residual) else self.residual,
                "mode": self.mode, "d1": self.d1, "d2": self.d2}


def principal_root(c, n: int) -> complex:
    """The ``n``-th root of ``c`` with the smallest non-negative argument."""
    c = complex(c)
    arg = cmath.phase(c) % (2 * math.pi)
    return abs(c) ** (1.0 / n) * cmath.exp(1j * arg / n)


def _exact_principal_root(c, n):
    """Exact ``n``-th root among Gaussian rationals when it is the principal one."""
    target = principal_root(c, n)
    for cand in (1, -1, GaussianRational(0, 1), GaussianRational(0, -1)):
        g = GaussianRational.coerce(cand)
        if abs(complex(g) - target) < 1e-12 and (g ** n) == GaussianRational.coerce(c):
            return g.simplify()
    if n == 1:
        return c
    return None


def commutes(f1: ProjectiveMap, f2: ProjectiveMap, mode: str = "numeric",
             tol: float = 1e-7) -> CommutationReport:
    """Decide whether ``f1 o f2 = f2 o f1`` and normalize the second lift.

    Both compositions of the lifts are formed, the scalar ``lam`` with
    ``F1 o F2 = lam F2 o F1`` is recovered, and ``theta`` with
    ``theta**(d1-1) * lam = 1`` rescales ``F2`` so that the lifts commute
    exactly (``F1 o (theta F2) = theta**d1 F1 o F2``).  ``mode='exact'``
    requires exact coefficients and zero tolerance.
    """
    if f1.k != f2.k:
        raise ShapeError("maps act on different projective spaces")
    d1, d2 = f1.degree, f2.degree
    if d1 < 2 or d2 < 2:
        raise PreconditionError("commutation check needs degrees >= 2")
    if mode not in ("exact", "numeric"):
        raise ValueError("mode must be 'exact' or 'numeric'")
    if mode == "exact" and not (f1.exact and f2.exact):
        raise PreconditionError("exact mode needs exact coefficients")
    A = [p.compose(list(f2.lift)) for p in f1.lift]
    B = [p.compose(list(f1.lift)) for p in f2.lift]
    lam = scalar_match(A, B, 0 if mode == "exact" else tol)
    if lam is None or lam == 0:
        return CommutationReport(False, None, None, math.inf, mode, d1, d2)
    if mode == "exact":
        inv = GaussianRational(1) / GaussianRational.coerce(lam)
        th = _exact_principal_root(inv.simplify(), d1 - 1)
        if th is not None:
            thg = GaussianRational.coerce(th)
            ok = all((a.scale(thg ** d1) - b.scale(thg)).is_zero() for a, b in zip(A, B))
            if not ok:
                raise InternalInvariantError("exact normalization failed")
            return CommutationReport(True, complex(lam), complex(th), 0.0, mode, d1, d2,
                                     theta_exact=th)
    theta = principal_root(1 / complex(lam), d1 - 1)
    An = [a.to_numeric().scale(theta ** d1) for a in A]
    Bn = [b.to_numeric().scale(theta) for b in B]
    scale = max(a.norm() for a in An)
    resid = max((a - b).norm() for a, b in zip(An, Bn)) / scale
    return CommutationReport(resid <= tol, complex(lam), theta, float(resid), mode, d1, d2)


def normalized_pair(f1: ProjectiveMap, f2: ProjectiveMap, report: CommutationReport | None = None):
    """Return ``(f1, f2')`` with ``f2'`` the lift ``theta * F2`` that commutes with ``F1``."""
    if report is None:
        report = commutes(f1, f2, "exact" if (f1.exact and f2.exact) else "numeric")
    if not report.commutes:
        raise PreconditionError("maps do not commute")
    th = report.theta_exact if report.theta_exact is not None else report.theta
    if th == 1:
        return f1, f2
    return f1, scale_map(f2, th)


# ---------------------------------------------------------------------------
# critical set and local degree
# ---------------------------------------------------------------------------

def _det_polys(M):
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    total = None
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * _det_polys(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total


def critical_set(f: ProjectiveMap) -> HomPolynomial:
    """Jacobian determinant of the lift, of degree ``(k+1)(d-1)``."""
    if f.degree < 2:
        raise PreconditionError("critical set needs degree >= 2")
    J = f.jacobian_polys()
    return _det_polys([list(r) for r in J])


def critical_points(f: ProjectiveMap, cluster_tol: float = 1e-6):
    """Critical points of a P^1 map with their multiplicities (local degree - 1)."""
    if f.k != 1:
        raise PreconditionError("critical points as a finite set need k = 1")
    jac = critical_set(f)
    roots = binary_roots(_binary_coeffs(jac.to_numeric()))
    pts, counts = [], []
    for r in roots:
        r = canonical(r)
        for i, q in enumerate(pts):
            if projective_distance(r, q) <= cluster_tol:
                counts[i] += 1
                break
        else:
            pts.append(r)
            counts.append(1)
    return [(ProjectivePoint(p), c) for p, c in zip(pts, counts)]


def multiplicity_at(f: ProjectiveMap, p, tol: float = 1e-6) -> int:
    """Local degree of a P^1 map at ``p``.

    The form ``a0 F1(w) - a1 F0(w)`` with ``a = f(p)`` vanishes at ``p`` to
    order exactly the local degree; the order is read off its Taylor
    coefficients along the line through ``p`` orthogonal to it.
    """
    if f.k != 1:
        raise PreconditionError("multiplicity_at is defined for k = 1 only")
    w = p.array if isinstance(p, ProjectivePoint) else canonical(np.asarray(p, dtype=complex))
    a = canonical(f.lift_eval(w))
    v = np.array([-np.conj(w[1]), np.conj(w[0])])
    d = f.degree
    n = d + 1
    ts = np.exp(2j * np.pi * np.arange(n) / n)
    pts = w[:, None] + v[:, None] * ts[None, :]
    F = f.lift_eval(pts)
    vals = a[0] * F[1] - a[1] * F[0]
    c = np.fft.fft(vals) / n
    scale = np.abs(c).max()
    for j in range(n):
        if abs(c[j]) > tol * scale:
            return max(1, j)
    raise InternalInvariantError("form vanished identically along a line")


def load_map(path) -> ProjectiveMap:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    return ProjectiveMap.from_json(data)


def save_map(f: ProjectiveMap, path):
    with open(path, "w") as fh:
        json.dump(f.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
