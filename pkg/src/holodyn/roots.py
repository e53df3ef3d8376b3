"""One-variable root finding used throughout the dynamics code."""
from __future__ import annotations

import numpy as np
import scipy.linalg

INF_THRESHOLD = 1e12


def companion_roots(coeffs, polish_steps=2):
    """Roots of ``sum coeffs[j] z**j`` (ascending order).

    Eigenvalues of the companion matrix (LAPACK balances it first),
    followed by ``polish_steps`` Newton steps on the original polynomial.
    Trailing zero leading coefficients are stripped; the caller handles the
    corresponding roots at infinity.
    """
    c = np.asarray(coeffs, dtype=complex)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise ValueError("zero polynomial has no isolated roots")
    c = c[: nz[-1] + 1]
    n = c.size - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    low = nz[0]
    if n - low == 0:
        return np.zeros(n, dtype=complex)
    reduced = c[low:] / c[-1]
    m = reduced.size - 1
    comp = np.zeros((m, m), dtype=complex)
    comp[1:, :-1] = np.eye(m - 1)
    comp[:, -1] = -reduced[:-1]
    r = scipy.linalg.eigvals(comp, overwrite_a=True, check_finite=False)
    r = newton_polish(c[low:], r, polish_steps)
    return np.concatenate([np.zeros(low, dtype=complex), r])


def newton_polish(coeffs, roots, steps=2):
    """A few guarded Newton steps; a step is kept only if it reduces |p|."""
    c = np.asarray(coeffs, dtype=complex)[::-1]
    dc = np.polyder(c)
    r = np.array(roots, dtype=complex)
    for _ in range(steps):
        p = np.polyval(c, r)
        dp = np.polyval(dc, r)
        ok = np.abs(dp) > 0
        step = np.zeros_like(r)
        step[ok] = p[ok] / dp[ok]
        cand = r - step
        better = np.abs(np.polyval(c, cand)) < np.abs(p)
        r = np.where(better, cand, r)
    return r


def binary_roots(coeffs, polish_steps=2):
    """Roots in P^1 of a binary form given by ascending coefficients.

    ``coeffs[j]`` multiplies ``w0**(d-j) * w1**j``.  Returns an array of shape
    ``(d, 2)`` of homogeneous coordinates ``(w0, w1)``, one row per root
    counted with multiplicity.  Vanishing leading coefficients are roots at
    ``[0 : 1]``.
    """
    c = np.asarray(coeffs, dtype=complex)
    d = c.size - 1
    scale = np.max(np.abs(c))
    if scale == 0:
        raise ValueError("zero binary form")
    c = c / scale
    top = d
    while top > 0 and abs(c[top]) <= 1e-14:
        top -= 1
    finite = companion_roots(c[: top + 1], polish_steps)
    out = np.zeros((d, 2), dtype=complex)
    for i, z in enumerate(finite):
        if abs(z) > INF_THRESHOLD:
            out[i] = (1.0 / z, 1.0)
        else:
            out[i] = (1.0, z)
    out[len(finite):] = (0.0, 1.0)
    return out


def aberth(ratio, n, init=None, tol=1e-14, max_iter=500, radius=1.0):
    """Aberth-Ehrlich iteration for ``n`` roots.

    ``ratio(z)`` must return ``p(z) / p'(z)`` vectorized over an array; the
    polynomial itself never needs to be formed, which keeps huge degrees
    (iterated maps) tractable.
    """
    if init is None:
        k = np.arange(n)
        init = radius * np.exp(2j * np.pi * (k + 0.25) / n) * (1 + 0.05 * np.cos(7 * k))
    z = np.array(init, dtype=complex)
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        nr = ratio(z[idx])
        s = _inverse_sums(z, idx)
        denom = 1.0 - nr * s
        w = np.where(denom != 0, nr / np.where(denom == 0, 1, denom), nr)
        w = np.where(np.isfinite(w), w, 0)
        z[idx] = z[idx] - w
        done = np.abs(w) <= tol * np.maximum(1.0, np.abs(z[idx]))
        active[idx[done]] = False
    return z


def _inverse_sums(z, idx, block=512):
    out = np.empty(idx.size, dtype=complex)
    for start in range(0, idx.size, block):
        sl = idx[start:start + block]
        diff = z[sl][:, None] - z[None, :]
        diff[np.arange(sl.size), sl] = np.inf
        out[start:start + block] = np.sum(1.0 / diff, axis=1)
    return out


def cluster(points, tol, dist):
    """Greedy clustering: returns (representatives, counts)."""
    reps, counts = [], []
    for p in points:
        for i, r in enumerate(reps):
            if dist(p, r) <= tol:
                counts[i] += 1
                break
        else:
            reps.append(p)
            counts.append(1)
    return reps, counts
