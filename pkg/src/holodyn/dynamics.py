"""Periodic points, preimages, postcritical orbits and orbifold checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PreconditionError, ResourceError, UnsupportedError
from .projmap import (ProjectiveMap, ProjectivePoint, _binary_coeffs, _random_unitary,
                      apply_batch, canonical, commutes, critical_points, critical_set,
                      multiplicity_at, projective_distance)
from .roots import aberth, binary_roots, companion_roots

VERIFY_TOL = 1e-10
DEDUP_TOL = 1e-8
INDIFFERENT_BAND = 1e-6
DEFAULT_CAP = 100_000


# ---------------------------------------------------------------------------
# derivatives along orbits
# ---------------------------------------------------------------------------

def orbit_jacobian(f: ProjectiveMap, W, n: int):
    """Iterate the lift ``n`` times together with its Jacobian.

    ``W`` has shape ``(k+1, N)``.  Returns ``(U, A)`` with ``U = F^n(W)/s`` and
    ``A = DF^n(W)/s`` for one positive scale ``s`` per column.
    """
    U = np.asarray(W, dtype=complex).copy()
    m = U.shape[1]
    A = np.broadcast_to(np.eye(f.k + 1, dtype=complex)[:, :, None], (f.k + 1, f.k + 1, m)).copy()
    for _ in range(n):
        J = f.jacobian_eval(U)
        A = np.einsum("ijm,jlm->ilm", J, A)
        U = f.lift_eval(U)
        s = np.abs(U).max(axis=0)
        U = U / s
        A = A / s
    return U, A


def multipliers(f: ProjectiveMap, p, n: int) -> np.ndarray:
    """Eigenvalues of the derivative of ``f^n`` at a fixed point ``p`` of ``f^n``.

    Uses the lift: if ``F^n(w) = c w`` then ``DF^n(w)/c`` fixes the line
    through ``w`` (eigenvalue ``d^n``) and induces the projective derivative
    on the quotient.
    """
    w = p.array if isinstance(p, ProjectivePoint) else canonical(np.asarray(p, dtype=complex))
    U, A = orbit_jacobian(f, w[:, None], n)
    u, a = U[:, 0], A[:, :, 0]
    c = np.vdot(w, u) / np.vdot(w, w)
    M = a / c
    q, _ = np.linalg.qr(np.column_stack([w, np.eye(f.k + 1)]).astype(complex))
    Q = q[:, 1:f.k + 1]
    B = Q.conj().T @ M @ Q
    return np.linalg.eigvals(B)


def classify(mult) -> str:
    mods = np.abs(np.asarray(mult))
    if np.all(mods > 1 + INDIFFERENT_BAND):
        return "repelling"
    if np.all(mods < 1 - INDIFFERENT_BAND):
        return "attracting"
    if np.all(np.abs(mods - 1) <= INDIFFERENT_BAND):
        return "indifferent"
    return "mixed"


@dataclass(frozen=True)
class PeriodicPoint:
    point: ProjectivePoint
    period: int
    multiplier: tuple
    classification: str
    multiplicity: int = 1

    def to_json(self):
        return {"point": self.point.to_json(), "period": self.period,
                "multiplier": [[m.real, m.imag] for m in self.multiplier],
                "classification": self.classification, "multiplicity": self.multiplicity}


def _divisors(n):
    return [m for m in range(1, n + 1) if n % m == 0]


def minimal_period(f: ProjectiveMap, w, n: int, tol: float = VERIFY_TOL) -> int:
    for m in _divisors(n):
        if projective_distance(apply_batch(f, w[:, None], m)[:, 0], w) <= tol:
            return m
    return n


def _sort_key(w):
    w = canonical(w)
    return tuple(v for c in w for v in (round(c.real, 9), round(c.imag, 9)))


def _make_periodic(f, w, n, multiplicity=1, tol=VERIFY_TOL):
    m = minimal_period(f, w, n, tol)
    mult = multipliers(f, w, m)
    return PeriodicPoint(ProjectivePoint(w), m, tuple(complex(x) for x in mult),
                         classify(mult), multiplicity)


# ---------------------------------------------------------------------------
# periodic points on P^1
# ---------------------------------------------------------------------------

def fixed_point_divisor_roots(f: ProjectiveMap, n: int, seed: int = 7):
    """All ``d^n + 1`` roots of ``w0 Q_n(w) - w1 P_n(w)`` with ``F^n = (P_n, Q_n)``.

    The divisor is never expanded.  A random unitary change of chart ``M``
    moves every root to a finite position; in that chart the divisor is a
    polynomial of degree exactly ``d^n + 1`` whose Newton correction is
    evaluated by iterating the lift with its Jacobian.  Aberth-Ehrlich,
    started from the ``n``-th preimages of a random point, finds all roots
    simultaneously and a final Newton step polishes them.
    """
    N = f.degree ** n + 1
    rng = np.random.default_rng(seed)
    M = _random_unitary(2, rng)

    def ratio(z):
        w = M[:, :1] + M[:, 1:] * z[None, :]
        dw = np.broadcast_to(M[:, 1:], w.shape)
        U, A = orbit_jacobian(f, w, n)
        dU = np.einsum("ijm,jm->im", A, dw)
        D = w[0] * U[1] - w[1] * U[0]
        dD = dw[0] * U[1] + w[0] * dU[1] - dw[1] * U[0] - w[1] * dU[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = D / dD
        return np.where(np.isfinite(r), r, 0)

    # preimages of a generic point under f^n are distributed like the roots
    # (both equidistribute), which makes them far better starting points
    # than a circle when the Julia set is large
    a = canonical(rng.normal(size=2) + 1j * rng.normal(size=2))
    pre = preimage_tree(f, a, n, cap=max(N, DEFAULT_CAP), levels=True)[-1]
    V = np.linalg.solve(M, pre)
    with np.errstate(divide="ignore", invalid="ignore"):
        init = V[1] / V[0]
    init = np.where(np.isfinite(init), init, 1e8)
    init = np.concatenate([init, [complex(rng.normal(), rng.normal())]])
    z = aberth(ratio, N, init=init, tol=1e-15, max_iter=1000)
    for _ in range(2):
        step = ratio(z)
        z = z - np.where(np.abs(step) < 1e-3 * np.maximum(1, np.abs(z)), step, 0)
    W = M[:, :1] + M[:, 1:] * z[None, :]
    return canonical(W)


def periodic_points_1d(f: ProjectiveMap, n: int, cap: int = DEFAULT_CAP,
                       cluster_tol: float = 1e-7) -> list[PeriodicPoint]:
    """All solutions of ``f^n(p) = p`` on P^1, with multiplicity.

    Multiplicities of the returned points sum to ``d^n + 1``.  Each point
    carries its minimal period and the multiplier of ``f^period``.

    Raises
    ------
    ResourceError
        When ``d^n + 1`` exceeds ``cap``.
    """
    if f.k != 1:
        raise PreconditionError("periodic_points_1d needs k = 1")
    if f.degree < 2:
        raise PreconditionError("degree must be >= 2")
    N = f.degree ** n + 1
    if N > cap:
        raise ResourceError(f"d^n + 1 = {N} exceeds cap {cap}; use a smaller n")
    W = fixed_point_divisor_roots(f, n)
    reps, counts = cluster_columns(W, cluster_tol)
    tols = np.where(counts == 1, VERIFY_TOL, 1e-7)
    return _assemble(f, reps, n, counts, tols)


def cluster_columns(W, tol):
    """Greedy clustering of the columns of ``W`` by projective distance."""
    N = W.shape[1]
    label = -np.ones(N, dtype=int)
    reps = []
    for i in range(N):
        if label[i] >= 0:
            continue
        label[i] = len(reps)
        rest = np.flatnonzero(label < 0)
        if rest.size:
            d = projective_distance(np.repeat(W[:, i:i + 1], rest.size, axis=1), W[:, rest])
            label[rest[d <= tol]] = len(reps)
        reps.append(i)
    counts = np.bincount(label, minlength=len(reps))
    return W[:, reps], counts


def multipliers_batch(f: ProjectiveMap, W, n: int) -> np.ndarray:
    """:func:`multipliers` for every column of ``W``; shape ``(N, k)``."""
    W = canonical(np.asarray(W, dtype=complex))
    U, A = orbit_jacobian(f, W, n)
    c = np.sum(W.conj() * U, axis=0) / np.sum(np.abs(W) ** 2, axis=0)
    M = A / c[None, None, :]
    N = W.shape[1]
    out = np.empty((N, f.k), dtype=complex)
    if f.k == 1:
        q = np.stack([-W[1].conj(), W[0].conj()])
        q = q / np.linalg.norm(q, axis=0)
        out[:, 0] = np.einsum("im,ijm,jm->m", q.conj(), M, q)
        return out
    for m in range(N):
        w = W[:, m]
        qm, _ = np.linalg.qr(np.column_stack([w, np.eye(f.k + 1)]).astype(complex))
        Q = qm[:, 1:f.k + 1]
        out[m] = np.linalg.eigvals(Q.conj().T @ M[:, :, m] @ Q)
    return out


def minimal_periods(f: ProjectiveMap, W, n: int, tols) -> np.ndarray:
    """Smallest divisor ``m`` of ``n`` with ``f^m(w) = w`` for each column."""
    W = canonical(np.asarray(W, dtype=complex))
    tols = np.broadcast_to(np.asarray(tols, dtype=float), (W.shape[1],))
    per = np.full(W.shape[1], n)
    done = np.zeros(W.shape[1], dtype=bool)
    for m in _divisors(n):
        hit = projective_distance(apply_batch(f, W, m), W) <= tols
        per[hit & ~done] = m
        done |= hit
    return per


def _assemble(f, W, n, counts, tols):
    per = minimal_periods(f, W, n, tols)
    mult = np.empty((W.shape[1], f.k), dtype=complex)
    for m in np.unique(per):
        sel = per == m
        mult[sel] = multipliers_batch(f, W[:, sel], int(m))
    out = [PeriodicPoint(ProjectivePoint(W[:, i]), int(per[i]), tuple(complex(x) for x in mult[i]),
                         classify(mult[i]), int(counts[i])) for i in range(W.shape[1])]
    out.sort(key=lambda p: (p.period, _sort_key(p.point.array)))
    return out


def verify_periodic(f: ProjectiveMap, pts: Sequence[PeriodicPoint], tol: float = VERIFY_TOL):
    """Largest ``dist(f^period(p), p)`` over ``pts``."""
    worst = 0.0
    for p in pts:
        w = p.point.array
        worst = max(worst, projective_distance(apply_batch(f, w[:, None], p.period)[:, 0], w))
    return worst


# ---------------------------------------------------------------------------
# periodic points on P^2 (best effort)
# ---------------------------------------------------------------------------

_FREE = np.array([[1, 2], [0, 2], [0, 1]])


@dataclass
class PeriodicSearch:
    points: list
    seeds: int
    expected: int
    note: str = ""

    def to_json(self):
        return {"points": [p.to_json() for p in self.points], "seeds": self.seeds,
                "found": len(self.points), "expected_with_multiplicity": self.expected,
                "note": self.note}


def periodic_points_2d(f: ProjectiveMap, n: int, seeds: int = 200, seed: int = 0,
                       max_iter: int = 60) -> PeriodicSearch:
    """Seeded Newton search for solutions of ``f^n(z) = z`` on P^2.

    Each seed is iterated in the affine chart of its largest coordinate, so
    points at infinity are reached by chart rotation.  Not exhaustive.
    """
    if f.k != 2:
        raise PreconditionError("periodic_points_2d needs k = 2")
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(3, seeds)) + 1j * rng.normal(size=(3, seeds))
    W = canonical(W)
    # add the coordinate points and the all-ones point as deterministic extra seeds
    W = np.concatenate([W, np.eye(3, dtype=complex), np.ones((3, 1), dtype=complex)], axis=1)
    S = W.shape[1]
    cols = np.arange(S)
    alive = np.ones(S, dtype=bool)
    conv = np.zeros(S, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(alive & ~conv)
        if idx.size == 0:
            break
        Wi = W[:, idx]
        piv = np.argmax(np.abs(Wi), axis=0)
        c = np.arange(idx.size)
        Wi = Wi / Wi[piv, c]
        U, A = orbit_jacobian(f, Wi, n)
        Ui = U[piv, c]
        bad = np.abs(Ui) < 1e-12
        Ui = np.where(bad, 1, Ui)
        Y = U / Ui
        fr = _FREE[piv]
        g = np.stack([Y[fr[:, 0], c] - Wi[fr[:, 0], c], Y[fr[:, 1], c] - Wi[fr[:, 1], c]], axis=1)
        dY = (A * Ui[None, None, :] - U[:, None, :] * A[piv, :, c].T[None, :, :]) / Ui ** 2
        J = np.empty((idx.size, 2, 2), dtype=complex)
        for a in range(2):
            for b in range(2):
                J[:, a, b] = dY[fr[:, a], fr[:, b], c] - (a == b)
        with np.errstate(all="ignore"):
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            ok = (np.abs(det) > 1e-300) & ~bad
            step = np.zeros((idx.size, 2), dtype=complex)
            step[ok, 0] = (J[ok, 1, 1] * g[ok, 0] - J[ok, 0, 1] * g[ok, 1]) / det[ok]
            step[ok, 1] = (-J[ok, 1, 0] * g[ok, 0] + J[ok, 0, 0] * g[ok, 1]) / det[ok]
        norm = np.abs(step).max(axis=1)
        big = norm > 1.0
        step[big] = step[big] / norm[big, None]
        for a in range(2):
            Wi[fr[:, a], c] -= step[:, a]
        finite = np.all(np.isfinite(Wi), axis=0) & ok
        alive[idx[~finite]] = False
        Wi[:, ~finite] = 1
        W[:, idx] = canonical(Wi)
        conv[idx[finite & (np.abs(g).max(axis=1) < 1e-13)]] = True
        conv[idx[finite & (norm < 1e-15)]] = True
    found = []
    for i in np.flatnonzero(conv):
        w = W[:, i]
        if projective_distance(apply_batch(f, w[:, None], n)[:, 0], w) > VERIFY_TOL:
            continue
        if any(projective_distance(w, q.point.array) <= DEDUP_TOL for q in found):
            continue
        found.append(_make_periodic(f, w, n))
    found.sort(key=lambda p: (p.period, _sort_key(p.point.array)))
    d = f.degree
    expected = (d ** (3 * n) - 1) // (d ** n - 1) if d ** n > 1 else 0
    return PeriodicSearch(found, seeds, expected,
                          "seeded Newton search; not guaranteed exhaustive")


def periodic_points(f: ProjectiveMap, n: int, **kw):
    if f.k == 1:
        return periodic_points_1d(f, n, **kw)
    return periodic_points_2d(f, n, **kw).points


# ---------------------------------------------------------------------------
# common periodic points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CommonPeriodic:
    point: PeriodicPoint
    period_f1: int
    period_f2: int
    multiplier_f2: tuple
    repelling_f1: bool
    image_repelling_f1: bool

    def to_json(self):
        return {"point": self.point.to_json(), "period_f1": self.period_f1,
                "period_f2": self.period_f2,
                "multiplier_f2": [[m.real, m.imag] for m in self.multiplier_f2],
                "repelling_f1": self.repelling_f1, "image_repelling_f1": self.image_repelling_f1}


def _all_periodic(f, n_max, seeds, seed):
    out = []
    for n in range(1, n_max + 1):
        pts = periodic_points(f, n) if f.k == 1 else periodic_points_2d(f, n, seeds, seed).points
        for p in pts:
            if p.period == n:
                out.append(p)
    return out


def image_repelling(f1, f2, p: PeriodicPoint) -> bool:
    """Whether ``f2(p)`` is periodic and repelling for ``f1`` with the period of ``p``."""
    b = apply_batch(f2, p.point.array[:, None], 1)[:, 0]
    if projective_distance(apply_batch(f1, b[:, None], p.period)[:, 0], b) > 1e-8:
        return False
    return classify(multipliers(f1, b, p.period)) == "repelling"


def common_periodic_points(f1: ProjectiveMap, f2: ProjectiveMap, n_max: int,
                           seeds: int = 200, seed: int = 0) -> list[CommonPeriodic]:
    """Points periodic for both maps with periods up to ``n_max``.

    Raises
    ------
    PreconditionError
        When the pair does not commute.
    """
    mode = "exact" if (f1.exact and f2.exact) else "numeric"
    if not commutes(f1, f2, mode).commutes:
        raise PreconditionError("common_periodic_points needs a commuting pair")
    A = _all_periodic(f1, n_max, seeds, seed)
    B = _all_periodic(f2, n_max, seeds, seed)
    out = []
    for p in A:
        for q in B:
            if projective_distance(p.point.array, q.point.array) > DEDUP_TOL:
                continue
            w = p.point.array
            ok1 = projective_distance(apply_batch(f1, w[:, None], p.period)[:, 0], w) <= VERIFY_TOL
            ok2 = projective_distance(apply_batch(f2, w[:, None], q.period)[:, 0], w) <= VERIFY_TOL
            if not (ok1 and ok2):
                continue
            out.append(CommonPeriodic(p, p.period, q.period, q.multiplier,
                                      p.classification == "repelling",
                                      image_repelling(f1, f2, p)))
            break
    return out


def repelling_image_check(f1: ProjectiveMap, f2: ProjectiveMap, n_max: int):
    """For every repelling periodic point ``a`` of ``f1`` with period ``<= n_max``,
    whether ``f2(a)`` is again repelling periodic for ``f1``.  Returns a list of
    ``(point, ok)``.
    """
    res = []
    for p in _all_periodic(f1, n_max, 200, 0):
        if p.classification == "repelling":
            res.append((p, image_repelling(f1, f2, p)))
    return res


# ---------------------------------------------------------------------------
# preimages and equidistribution
# ---------------------------------------------------------------------------

def _solve_preimages(f: ProjectiveMap, A):
    """Preimages of each column of ``A`` (shape (2, m)); returns (2, m*d)."""
    c0 = np.array(_binary_coeffs(f.lift[0].to_numeric()), dtype=complex)
    c1 = np.array(_binary_coeffs(f.lift[1].to_numeric()), dtype=complex)
    d = f.degree
    B = A[0][:, None] * c1[None, :] - A[1][:, None] * c0[None, :]
    B = B / np.abs(B).max(axis=1, keepdims=True)
    out = np.empty((A.shape[1], d, 2), dtype=complex)
    lead_ok = (np.abs(B[:, -1]) > 1e-8) & (np.abs(B[:, 0]) > 1e-12)
    idx = np.flatnonzero(lead_ok)
    if idx.size:
        Bn = B[idx] / B[idx, -1:]
        comp = np.zeros((idx.size, d, d), dtype=complex)
        comp[:, 1:, :-1] = np.eye(d - 1)
        comp[:, :, -1] = -Bn[:, :-1]
        r = np.linalg.eigvals(comp)
        for _ in range(2):
            p = np.zeros_like(r)
            dp = np.zeros_like(r)
            for j in range(d, -1, -1):
                dp = dp * r + p
                p = p * r + Bn[:, j:j + 1]
            with np.errstate(all="ignore"):
                step = np.where(np.abs(dp) > 0, p / dp, 0)
            r = np.where(np.abs(step) < 1e-3 * np.maximum(1, np.abs(r)), r - step, r)
        out[idx, :, 0] = 1.0
        out[idx, :, 1] = r
    for i in np.flatnonzero(~lead_ok):
        out[i] = binary_roots(B[i])
    W = out.reshape(-1, 2).T
    return W


def preimage_tree(f: ProjectiveMap, a, depth: int, cap: int = DEFAULT_CAP, levels: bool = False):
    """Iterated preimages ``f^{-depth}(a)`` with multiplicity.

    Each level solves ``a' ^ F(w) = 0`` for every point ``a'`` of the previous
    level, so level ``n`` holds exactly ``d^n`` points.  Children of one
    parent are sorted; parents keep their order, so the output is
    deterministic.

    Returns
    -------
    list of ProjectivePoint, or list of arrays per level if ``levels``.
    """
    if f.k != 1:
        raise PreconditionError("preimage_tree needs k = 1")
    d = f.degree
    if d ** depth > cap:
        raise ResourceError(f"d^depth = {d ** depth} exceeds cap {cap}")
    w = a.array if isinstance(a, ProjectivePoint) else canonical(np.asarray(a, dtype=complex))
    cur = w[:, None]
    all_levels = [cur]
    for _ in range(depth):
        W = canonical(_solve_preimages(f, cur))
        m = cur.shape[1]
        blocks = W.reshape(2, m, d)
        order = []
        for i in range(m):
            keys = [_sort_key(blocks[:, i, j]) for j in range(d)]
            order.extend(i * d + j for j in sorted(range(d), key=keys.__getitem__))
        cur = W[:, order]
        all_levels.append(cur)
    if levels:
        return all_levels
    return [ProjectivePoint(cur[:, i]) for i in range(cur.shape[1])]


@dataclass
class Equidistribution:
    discrepancy: float | None
    reference: str
    n: int
    histogram: list = field(default_factory=list)
    outside: int = 0

    def to_json(self):
        return {"discrepancy": self.discrepancy, "reference": self.reference, "n": self.n,
                "histogram": self.histogram, "outside": self.outside}


def star_discrepancy(u) -> float:
    """Star discrepancy of a sample in [0, 1) against the uniform law."""
    u = np.sort(np.asarray(u, dtype=float))
    n = u.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def _affine_values(points):
    out = []
    for p in points:
        if isinstance(p, ProjectivePoint):
            out.append(p.affine())
        else:
            out.append(complex(p))
    return np.array(out, dtype=complex)


def equidistribution_stat(points, reference: str = "uniform-circle", bins: int = 16) -> Equidistribution:
    """Discrepancy of ``points`` against a reference equilibrium measure.

    ``uniform-circle`` compares arguments with the uniform law on the unit
    circle (the measure of ``z^d``); ``uniform-interval-cos`` compares
    ``arccos(x)/pi`` of points of ``[-1, 1]`` with the uniform law (the
    arcsine measure of Chebyshev maps); ``empirical`` only histograms the
    arguments.
    """
    z = _affine_values(points)
    z = z[np.isfinite(z)]
    if z.size < 10:
        raise PreconditionError("need at least 10 finite points")
    outside = 0
    if reference == "uniform-circle":
        u = (np.angle(z) / (2 * np.pi)) % 1.0
    elif reference == "uniform-interval-cos":
        good = (np.abs(z.imag) <= 1e-6) & (np.abs(z.real) <= 1 + 1e-9)
        outside = int(np.count_nonzero(~good))
        if outside == z.size:
            raise PreconditionError("no points lie on [-1, 1]; start from a point of [-1, 1]")
        u = np.arccos(np.clip(z[good].real, -1, 1)) / np.pi
    elif reference == "empirical":
        u = (np.angle(z) / (2 * np.pi)) % 1.0
        hist, _ = np.histogram(u, bins=bins, range=(0, 1))
        return Equidistribution(None, reference, int(z.size), hist.tolist())
    else:
        raise UnsupportedError(f"unknown reference {reference!r}")
    hist, _ = np.histogram(u, bins=bins, range=(0, 1))
    return Equidistribution(star_discrepancy(u), reference, int(u.size), hist.tolist(), outside)


def decreasing_with_noise(values, noise: float = 0.1) -> bool:
    """True when each value is at most ``(1 + noise)`` times its predecessor."""
    return all(b <= a * (1 + noise) for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------
# postcritical orbits
# ---------------------------------------------------------------------------

@dataclass
class OrbitRecord:
    start: list
    status: str
    preperiod: int | None = None
    period: int | None = None
    length: int = 0

    def to_json(self):
        return {"start": self.start, "status": self.status, "preperiod": self.preperiod,
                "period": self.period, "length": self.length}


@dataclass
class PostcriticalReport:
    finite: object
    orbits: list

    def to_json(self):
        return {"finite": self.finite if self.finite is not None else "unknown",
                "orbits": [o.to_json() for o in self.orbits]}


def _track(step, start, max_iters, tol, jump):
    """Follow an orbit until it provably lands on a cycle.

    Landing counts only when the orbit enters the cycle from distance
    greater than ``jump``; an orbit merely converging to an attracting cycle
    never does, and is reported as ``unknown``.
    """
    orbit = [canonical(start)]
    for t in range(1, max_iters + 1):
        x = canonical(step(orbit[-1]))
        prev = np.stack(orbit, axis=1)
        dist = projective_distance(np.repeat(x[:, None], prev.shape[1], axis=1), prev)
        hit = np.flatnonzero(dist <= tol)
        if hit.size:
            i = int(hit[0])
            cycle = prev[:, i:]
            dcyc = [float(np.min(projective_distance(
                np.repeat(orbit[s][:, None], cycle.shape[1], axis=1), cycle)))
                for s in range(len(orbit))]
            p = next(s for s in range(len(orbit)) if dcyc[s] <= tol)
            if p == 0 or dcyc[p - 1] > jump:
                return "periodic", p, t - i, orbit
            return "converging", None, t - i, orbit
        orbit.append(x)
    return "unresolved", None, None, orbit


def postcritical_orbit(f: ProjectiveMap, max_iters: int = 1000, tol: float = 1e-8,
                       jump: float = 1e-3) -> PostcriticalReport:
    """Decide whether every critical orbit is preperiodic.

    ``finite`` is ``True`` when all critical orbits land on cycles,
    ``False`` when a component provably fails (k = 2 line tracking found a
    non-line image), and ``None`` (unknown) when some orbit neither lands
    nor can be excluded within ``max_iters``.
    """
    if f.k == 1:
        records = []
        for cp, _ in critical_points(f):
            status, pre, per, orbit = _track(lambda w: f.lift_eval(w), cp.array,
                                             max_iters, tol, jump)
            records.append(OrbitRecord(cp.to_json(), status, pre, per, len(orbit)))
        finite = True if all(r.status == "periodic" for r in records) else None
        return PostcriticalReport(finite, records)
    return _postcritical_p2(f, max_iters, tol, jump)


def _line_factors(J, rng):
    """Axis-type line factors ``w0``, ``w1 - c w0``, ``w2 - c w0`` of a ternary form."""
    Jn = J.to_numeric()
    scale = Jn.norm()
    lines = []
    remaining = J.degree
    # w0 = 0
    mult = 0
    P = Jn
    while remaining and all(e[0] >= 1 for e in P.terms):
        P = P.diff(0)
        mult += 1
        if P.is_zero():
            break
    if mult:
        lines.append((np.array([1.0, 0, 0], dtype=complex), mult))
        remaining -= mult
    for var in (1, 2):
        y0 = complex(rng.normal(), rng.normal())
        coeffs = np.zeros(J.degree + 1, dtype=complex)
        for e, v in Jn.terms.items():
            other = 3 - var
            coeffs[e[var]] += v * y0 ** e[other]
        try:
            cands = companion_roots(coeffs)
        except ValueError:
            continue
        seen = []
        for c in cands:
            if any(abs(c - s) < 1e-6 for s in seen):
                continue
            ys = rng.normal(size=4) + 1j * rng.normal(size=4)
            vals = []
            for y in ys:
                w = [1.0, 0, 0]
                w[var] = c
                w[3 - var] = y
                w = np.array(w) / max(1, abs(c), abs(y))
                vals.append(abs(Jn(w)))
            if max(vals) <= 1e-8 * scale:
                seen.append(c)
                m = int(np.sum(np.abs(cands - c) < 1e-4))
                vec = np.zeros(3, dtype=complex)
                vec[0] = -c
                vec[var] = 1
                lines.append((vec, m))
                remaining -= m
    return lines, remaining


def _line_image(f, ell, rng):
    """Image of the line ``ell . w = 0`` if it is again a line, else ``None``."""
    _, _, vh = np.linalg.svd(ell[None, :])
    basis = vh[1:].conj().T
    ts = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    P = basis @ ts
    img = canonical(f.lift_eval(P))
    _, s, vh2 = np.linalg.svd(img.T)
    if s[-1] > 1e-8 * s[0]:
        return None
    return canonical(vh2[-1].conj())


def _postcritical_p2(f, max_iters, tol, jump):
    rng = np.random.default_rng(0)
    lines, remaining = _line_factors(critical_set(f), rng)
    if remaining:
        raise UnsupportedError("critical set does not split into coordinate lines")
    records = []
    finite = True
    for ell, _ in lines:
        state = {"ok": True}

        def step(e):
            img = _line_image(f, e, rng)
            if img is None:
                state["ok"] = False
                return e
            return img

        status, pre, per, orbit = _track(step, ell, max_iters, tol, jump)
        if not state["ok"]:
            status = "non-line-image"
            finite = None
        records.append(OrbitRecord([[c.real, c.imag] for c in canonical(ell)], status, pre, per,
                                   len(orbit)))
        if status != "periodic":
            finite = None
    return PostcriticalReport(finite, records)


# ---------------------------------------------------------------------------
# orbifolds
# ---------------------------------------------------------------------------

@dataclass
class OrbifoldWeights:
    """Finitely many points of P^1 with weights in N+ or infinity (default 1)."""

    entries: list

    def __init__(self, entries):
        clean = []
        for p, n in entries:
            p = p if isinstance(p, ProjectivePoint) else _as_point(p)
            if n != math.inf and (int(n) != n or n < 1):
                raise ValueError(f"weight must be a positive integer or inf, got {n}")
            clean.append((p, n))
        self.entries = clean

    def weight(self, p, tol: float = 1e-7):
        for q, n in self.entries:
            if projective_distance(q.array, p) <= tol:
                return n
        return 1

    def to_json(self):
        return [{"point": p.to_json(), "weight": "inf" if n == math.inf else int(n)}
                for p, n in self.entries]

    @classmethod
    def from_json(cls, data):
        return cls([(ProjectivePoint.from_json(e["point"]),
                     math.inf if e["weight"] == "inf" else int(e["weight"])) for e in data])


def _as_point(p):
    if isinstance(p, str) and p.lower() in ("inf", "infinity"):
        return ProjectivePoint.infinity()
    if isinstance(p, (int, float, complex)):
        if p == math.inf:
            return ProjectivePoint.infinity()
        return ProjectivePoint.from_affine(p)
    return ProjectivePoint(p)


@dataclass
class OrbifoldReport:
    valid: bool
    violations: list
    checked: int

    def to_json(self):
        return {"valid": self.valid, "violations": self.violations, "checked": self.checked}


def _wjson(n):
    return "inf" if n == math.inf else int(n)


def orbifold_check(f: ProjectiveMap, weights: OrbifoldWeights) -> OrbifoldReport:
    """Check ``mult(f, q) * n(q) = n(f(q))`` wherever it can fail.

    The relation is tested at every weighted point, every preimage of a
    weighted point and every critical point; elsewhere both sides are 1.
    """
    if f.k != 1:
        raise UnsupportedError("orbifold_check is implemented for k = 1")
    cand = [p.array for p, _ in weights.entries]
    for p, _ in weights.entries:
        pre = canonical(_solve_preimages(f, p.array[:, None]))
        cand.extend(pre[:, i] for i in range(pre.shape[1]))
    cand.extend(cp.array for cp, _ in critical_points(f))
    qs = []
    for w in cand:
        if not any(projective_distance(w, q) <= 1e-6 for q in qs):
            qs.append(w)
    violations = []
    for q in qs:
        m = multiplicity_at(f, q)
        nq = weights.weight(q)
        img = canonical(f.lift_eval(q))
        nimg = weights.weight(img)
        lhs = m * nq
        if lhs != nimg:
            violations.append({"point": ProjectivePoint(q).to_json(), "mult": m, "n_q": _wjson(nq),
                               "image": ProjectivePoint(img).to_json(), "n_image": _wjson(nimg)})
    return OrbifoldReport(not violations, violations, len(qs))
